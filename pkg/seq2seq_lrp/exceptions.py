"""
Module dedicated to error handling.
"""


class Seq2SeqLrpError(Exception):
    """
    Exception raised by functions of seq2seq_lrp.
    """


class ShapeError(Seq2SeqLrpError):
    """
    Exception raised when array dimensions are inconsistent.
    """


class NumericalError(Seq2SeqLrpError):
    """
    Exception raised on non-finite values, singular relevance denominators or diverging training.
    """


class Seq2SeqLrpWarning(UserWarning):
    """
    Warning raised by functions of seq2seq_lrp.
    """
