"""Per-token relevance maps of one text."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List

import numpy as np
from atlas_commons.typing import FloatArray, NDArray

from seq2seq_lrp.exceptions import Seq2SeqLrpError
from seq2seq_lrp.relevance.packet import TokenRelevance


@dataclass(eq=False)
class SaliencyStack:
    """
    The saliency maps of the first generated tokens of one summary.

    Attributes:
        maps: one TokenRelevance per explained token, in decoding order.
        input_ids: padded input ids.
        summary_ids: generated summary, STOP excluded.
        input_length: length of the original input, before truncation or padding.
    """

    maps: List[TokenRelevance]
    input_ids: NDArray[np.int64]
    summary_ids: List[int]
    input_length: int = field(default=-1)

    def __post_init__(self) -> None:
        if not self.maps:
            raise Seq2SeqLrpError("A saliency stack holds at least one map.")
        lengths = {len(map_) for map_ in self.maps}
        if lengths != {len(self.input_ids)}:
            raise Seq2SeqLrpError(
                f"Saliency maps of lengths {sorted(lengths)} do not match the input length "
                f"{len(self.input_ids)}."
            )
        if self.input_length < 0:
            self.input_length = len(self.input_ids)

    def __len__(self) -> int:
        return len(self.maps)

    def as_array(self) -> FloatArray:
        """Array of shape (number of maps, input length) of the signed relevance."""
        return np.stack([map_.relevance for map_ in self.maps])

    @property
    def effective_length(self) -> int:
        """Number of positions holding a token of the original text."""
        return min(self.input_length, len(self.input_ids))
