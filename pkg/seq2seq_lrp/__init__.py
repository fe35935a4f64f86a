"""
Tools to explain a sequence-to-sequence summarizer with Layer-Wise Relevance Propagation
and to validate the resulting saliency maps.
"""
from seq2seq_lrp.version import VERSION as __version__  # pylint: disable=W0611
