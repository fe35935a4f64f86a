"""Token vocabulary of the summarizer.

The first three ids are reserved, in this order, for:

- the UNKNOWN token, also used to pad short texts,
- the START token `<s>` fed to the decoder at the first step,
- the STOP token `</s>` ending a summary.
"""
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Union

from seq2seq_lrp.exceptions import Seq2SeqLrpError

UNKNOWN_TOKEN = "<unk>"
START_TOKEN = "<s>"
STOP_TOKEN = "</s>"
SPECIAL_TOKENS = (UNKNOWN_TOKEN, START_TOKEN, STOP_TOKEN)

UNKNOWN_ID = 0
PAD_ID = UNKNOWN_ID
START_ID = 1
STOP_ID = 2
SPECIAL_IDS = frozenset({UNKNOWN_ID, START_ID, STOP_ID})


class Vocab:
    """
    Bijection between tokens and dense integer ids in [0, size).

    Padding and unknown words share the id `UNKNOWN_ID`.
    """

    def __init__(self, tokens: Sequence[str]) -> None:
        tokens = list(tokens)
        if tuple(tokens[: len(SPECIAL_TOKENS)]) != SPECIAL_TOKENS:
            raise Seq2SeqLrpError(
                f"The vocabulary must start with the special tokens {SPECIAL_TOKENS}, "
                f"got {tokens[: len(SPECIAL_TOKENS)]}."
            )
        self.tokens: List[str] = tokens
        self.index: Dict[str, int] = {}
        for id_, token in enumerate(tokens):
            if not token or any(char.isspace() for char in token):
                raise Seq2SeqLrpError(f"Invalid token {token!r} with id {id_}.")
            if token in self.index:
                raise Seq2SeqLrpError(f"Duplicate token {token!r} in vocabulary.")
            self.index[token] = id_

    def __len__(self) -> int:
        return len(self.tokens)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Vocab) and self.tokens == other.tokens

    @property
    def size(self) -> int:
        """Number of tokens, special ones included."""
        return len(self.tokens)

    def lookup(self, token: str) -> int:
        """Return the id of `token`, or `UNKNOWN_ID` for out-of-vocabulary tokens."""
        return self.index.get(token, UNKNOWN_ID)

    def token_of(self, id_: int) -> str:
        """Return the token with identifier `id_`."""
        if not 0 <= id_ < len(self.tokens):
            raise Seq2SeqLrpError(f"Token id {id_} is out of range [0, {len(self.tokens)}).")
        return self.tokens[id_]

    def encode(self, words: Iterable[str]) -> List[int]:
        """Map words to ids; unknown words are mapped to `UNKNOWN_ID`."""
        return [self.lookup(word) for word in words]

    def decode(self, ids: Iterable[int]) -> List[str]:
        """Map ids to tokens."""
        return [self.token_of(int(id_)) for id_ in ids]

    def to_text(self, ids: Iterable[int]) -> str:
        """Space-separated tokens of `ids`."""
        return " ".join(self.decode(ids))

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Vocab":
        """
        Load a vocabulary file holding one token per line, the line number being the token id.
        """
        with open(path, "r", encoding="utf-8") as file_:
            tokens = [line.rstrip("\n") for line in file_]
        while tokens and not tokens[-1]:
            tokens.pop()

        return cls(tokens)

    def save(self, path: Union[str, Path]) -> None:
        """Write the vocabulary, one token per line."""
        with open(path, "w", encoding="utf-8") as out:
            for token in self.tokens:
                out.write(token + "\n")

    @classmethod
    def synthetic(cls, size: int, names: Dict[int, str]) -> "Vocab":
        """
        Create a vocabulary of `size` tokens.

        Args:
            size: total number of tokens, special tokens included.
            names: dict whose keys are non-special ids and whose values are token names.
                Ids missing from `names` are named `tok<id>`.
        """
        if size < len(SPECIAL_TOKENS):
            raise Seq2SeqLrpError(f"A vocabulary holds at least {len(SPECIAL_TOKENS)} tokens.")
        tokens = list(SPECIAL_TOKENS) + [
            names.get(id_, f"tok{id_}") for id_ in range(len(SPECIAL_TOKENS), size)
        ]

        return cls(tokens)
