"""Aggregation of the saliency maps of one text into a single ranking of its input tokens."""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Collection, List, Optional

import numpy as np
from atlas_commons.typing import FloatArray, NDArray

from seq2seq_lrp.exceptions import Seq2SeqLrpError
from seq2seq_lrp.saliency.stack import SaliencyStack

ABS_MEAN = "abs_mean"
RAW_MEAN = "raw_mean"
SCALED_ABS = "scaled_abs"
MODES = (ABS_MEAN, RAW_MEAN, SCALED_ABS)
DEFAULT_NEGATIVE_FACTOR = 0.5

_SCALED_PATTERN = re.compile(r"^scaled(?::(?P<factor>.+))?$")


@dataclass(frozen=True)
class AggregationMode:
    """
    How the maps of a stack are combined.

    Attributes:
        name: one of "abs_mean", "raw_mean" or "scaled_abs".
        factor: factor applied to the magnitude of negative relevance in "scaled_abs" mode.
    """

    name: str = ABS_MEAN
    factor: float = DEFAULT_NEGATIVE_FACTOR

    def __post_init__(self) -> None:
        if self.name not in MODES:
            raise Seq2SeqLrpError(
                f"Unknown aggregation mode {self.name!r}, expected one of {MODES}."
            )
        if not 0.0 <= self.factor <= 1.0:
            raise Seq2SeqLrpError(
                f"The negative relevance factor must lie in [0, 1], got {self.factor}."
            )

    def __str__(self) -> str:
        if self.name == SCALED_ABS:
            return f"scaled:{self.factor:g}"
        return "abs" if self.name == ABS_MEAN else "raw"


@dataclass(frozen=True, eq=False)
class AggregatedSaliency:
    """
    One score per input position.

    Attributes:
        scores: non-negative for the "abs_mean" and "scaled_abs" modes, signed for "raw_mean".
        mode: the aggregation mode the scores were computed with.
    """

    scores: FloatArray
    mode: AggregationMode

    def __len__(self) -> int:
        return len(self.scores)


def parse_aggregation(value: str) -> AggregationMode:
    """
    Parse the command-line spelling of an aggregation mode.

    Accepted values are "abs", "raw", "scaled" and "scaled:<factor>", as well as the mode
    names themselves.
    """
    value = value.strip()
    if value in ("abs", ABS_MEAN):
        return AggregationMode(ABS_MEAN)
    if value in ("raw", RAW_MEAN):
        return AggregationMode(RAW_MEAN)
    match = _SCALED_PATTERN.match(value.replace(SCALED_ABS, "scaled"))
    if match is None:
        raise Seq2SeqLrpError(
            f"Invalid aggregation {value!r}, expected 'abs', 'raw' or 'scaled:<factor>'."
        )
    if match.group("factor") is None:
        return AggregationMode(SCALED_ABS)
    try:
        factor = float(match.group("factor"))
    except ValueError as error:
        raise Seq2SeqLrpError(f"Invalid negative relevance factor in {value!r}.") from error

    return AggregationMode(SCALED_ABS, factor)


def aggregate(
    stack: SaliencyStack, mode: Optional[AggregationMode] = None
) -> AggregatedSaliency:
    """
    Combine the maps of `stack` position by position.

    abs_mean: mean over maps of |R[t]|
    raw_mean: mean over maps of R[t]
    scaled_abs: mean over maps of R[t] if R[t] >= 0, of factor * |R[t]| otherwise

    The mode defaults to abs_mean.
    """
    mode = AggregationMode() if mode is None else mode
    maps = stack.as_array()
    if maps.size == 0:
        raise Seq2SeqLrpError("Cannot aggregate an empty saliency stack.")
    if mode.name == ABS_MEAN:
        scores = np.abs(maps).mean(axis=0)
    elif mode.name == RAW_MEAN:
        scores = maps.mean(axis=0)
    else:
        scores = np.where(maps >= 0.0, maps, mode.factor * np.abs(maps)).mean(axis=0)

    return AggregatedSaliency(scores=scores, mode=mode)


def rank_tokens(
    aggregated: AggregatedSaliency,
    input_ids: NDArray[np.int64],
    exclude: Collection[int],
) -> List[int]:
    """
    Rank the input positions by decreasing score.

    Args:
        aggregated: the aggregated saliency of a text.
        input_ids: padded input ids, aligned with the scores.
        exclude: ids whose positions are dropped from the ranking, e.g., the special ids.

    Returns:
        the positions, ties broken by increasing position.
    """
    return rank_positions(aggregated.scores, input_ids, exclude)


def rank_positions(
    scores: FloatArray, input_ids: NDArray[np.int64], exclude: Collection[int]
) -> List[int]:
    """Positions of `input_ids` not holding an `exclude` id, by decreasing score then position."""
    if len(input_ids) != len(scores):
        raise Seq2SeqLrpError(
            f"{len(scores)} scores do not match {len(input_ids)} input positions."
        )
    excluded = set(int(id_) for id_ in exclude)
    positions = [t for t, id_ in enumerate(input_ids) if int(id_) not in excluded]

    return sorted(positions, key=lambda t: (-scores[t], t))
