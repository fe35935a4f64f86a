"""Counterfactual deletion of the input tokens ranked by their relevance.

If the relevance truthfully points at the tokens the summarizer depends on, deleting the most
relevant tokens changes the summary more than deleting the same number of the least relevant
ones (the control experiment).

For every text:

1. the text is summarized greedily (baseline),
2. the saliency maps of the first generated tokens are computed and aggregated into one score per
   input position,
3. the positions are ranked, special tokens and padding excluded,
4. the top (most important) or bottom (least important) fraction of the ranked positions is
   deleted and the perturbed text is summarized again,
5. the two summaries are compared.

Deletions act on positions by default. At the word type level, every occurrence of the word
types found at the selected positions is deleted.
"""
from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from atlas_commons.typing import NDArray

from seq2seq_lrp.exceptions import Seq2SeqLrpError
from seq2seq_lrp.model.network import DecodeResult, decode_greedy, prepare_input
from seq2seq_lrp.model.vocab import PAD_ID, SPECIAL_IDS, UNKNOWN_ID
from seq2seq_lrp.model.weights import ModelConfig, ModelWeights
from seq2seq_lrp.relevance.propagation import LrpConfig, relevance_stack
from seq2seq_lrp.saliency.aggregation import (
    AggregatedSaliency,
    AggregationMode,
    aggregate,
    rank_tokens,
)
from seq2seq_lrp.saliency.stack import SaliencyStack
from seq2seq_lrp.utils import round_half_up

L = logging.getLogger(__name__)

MOST_IMPORTANT = "most_important"
LEAST_IMPORTANT = "least_important"
DIRECTIONS = (MOST_IMPORTANT, LEAST_IMPORTANT)
REMOVE = "remove"
REPLACE = "replace_with_unknown"
MODES = (REMOVE, REPLACE)
POSITION_LEVEL = "position"
TYPE_LEVEL = "type"
LEVELS = (POSITION_LEVEL, TYPE_LEVEL)
DEFAULT_FRACTION = 0.07
DEFAULT_FRACTIONS = (0.01, 0.03, 0.05, 0.07, 0.10)
DEFAULT_MARGIN = 0.2
TRUTHFUL = "truthful"
NOT_DISTINGUISHABLE = "not distinguishable"


def parse_mode(value: str) -> str:
    """Mode name from its command-line spelling, "remove" or "replace"."""
    if value in ("replace", REPLACE):
        return REPLACE
    if value == REMOVE:
        return REMOVE
    raise Seq2SeqLrpError(f"Unknown deletion mode {value!r}, expected 'remove' or 'replace'.")


def parse_level(value: str) -> str:
    """Deletion level from its spelling, "position" or "type"."""
    if value not in LEVELS:
        raise Seq2SeqLrpError(f"Unknown deletion level {value!r}, expected one of {LEVELS}.")
    return value


@dataclass(frozen=True)
class DeletionSpec:
    """
    Which tokens to delete and how.

    Attributes:
        fraction: fraction of the rankable input tokens to delete, in (0, 1].
        direction: "most_important" or "least_important".
        mode: "remove" (the tokens are dropped and the text is re-padded) or
            "replace_with_unknown" (the tokens are replaced by the UNKNOWN token).
        level: "position" (only the selected positions are deleted) or "type" (every
            occurrence of the word types at the selected positions is deleted).
    """

    fraction: float = DEFAULT_FRACTION
    direction: str = MOST_IMPORTANT
    mode: str = REMOVE
    level: str = POSITION_LEVEL

    def __post_init__(self) -> None:
        if not 0.0 < self.fraction <= 1.0:
            raise Seq2SeqLrpError(f"Deletion fraction must lie in (0, 1], got {self.fraction}.")
        if self.direction not in DIRECTIONS:
            raise Seq2SeqLrpError(
                f"Unknown deletion direction {self.direction!r}, expected one of {DIRECTIONS}."
            )
        if self.mode not in MODES:
            raise Seq2SeqLrpError(f"Unknown deletion mode {self.mode!r}, expected one of {MODES}.")
        if self.level not in LEVELS:
            raise Seq2SeqLrpError(
                f"Unknown deletion level {self.level!r}, expected one of {LEVELS}."
            )


@dataclass(frozen=True)
class DegradationMetrics:
    """
    Comparison of a perturbed summary with the baseline summary, all values in [0, 1].

    Attributes:
        token_jaccard: Jaccard index of the two sets of token types.
        unigram_overlap_f1: F1 score of the clipped unigram counts.
        unknown_rate: fraction of UNKNOWN tokens in the perturbed summary.
        repetition_rate: 1 - distinct trigrams / trigrams of the perturbed summary, 0 for less
            than three tokens.
    """

    token_jaccard: float
    unigram_overlap_f1: float
    unknown_rate: float
    repetition_rate: float


@dataclass(frozen=True, eq=False)
class DeletionResult:
    """
    Outcome of one deletion.

    Attributes:
        spec: the applied deletion.
        deleted_positions: deleted input positions, increasing.
        baseline_ids: summary of the original text.
        perturbed_input: input ids after the deletion.
        perturbed_ids: summary of the perturbed text.
        metrics: comparison of the two summaries.
    """

    spec: DeletionSpec
    deleted_positions: List[int]
    baseline_ids: List[int]
    perturbed_input: NDArray[np.int64]
    perturbed_ids: List[int]
    metrics: DegradationMetrics


@dataclass(frozen=True, eq=False)
class SaliencyRanking:
    """
    Baseline summary of a text and the ranking of its input positions.

    Attributes:
        baseline: greedy decode of the original text.
        stack: saliency maps of the first generated tokens.
        aggregated: the aggregated saliency.
        ranking: rankable positions by decreasing aggregated score.
    """

    baseline: DecodeResult
    stack: SaliencyStack
    aggregated: AggregatedSaliency
    ranking: List[int]

    @property
    def input_ids(self) -> NDArray[np.int64]:
        """Padded input ids of the baseline."""
        return self.baseline.tape.input_ids


def deletion_count(fraction: float, length: int) -> int:
    """
    Number of tokens deleted out of the `length` rankable tokens of a text.

    round-half-up(fraction * length), which is 0 for short texts and small fractions.
    """
    if length <= 0:
        return 0

    return min(length, round_half_up(fraction * length))


def delete_tokens(ids: Sequence[int], positions: Iterable[int], mode: str) -> NDArray[np.int64]:
    """
    Delete the tokens of `ids` at `positions`.

    Args:
        ids: padded input ids.
        positions: positions to delete.
        mode: "remove" drops the positions and pads the result with PAD to len(ids);
            "replace_with_unknown" sets the positions to the UNKNOWN id.

    Returns:
        the perturbed ids, of the same length as `ids`.

    Raises:
        Seq2SeqLrpError if a position is out of range or holds a special token.
    """
    perturbed = np.asarray(ids, dtype=np.int64).copy()
    positions = sorted(set(int(position) for position in positions))
    for position in positions:
        if not 0 <= position < len(perturbed):
            raise Seq2SeqLrpError(f"Position {position} is out of range [0, {len(perturbed)}).")
        if int(perturbed[position]) in SPECIAL_IDS:
            raise Seq2SeqLrpError(
                f"Position {position} holds the special token {perturbed[position]} and cannot be "
                "deleted."
            )
    if mode == REPLACE:
        perturbed[positions] = UNKNOWN_ID
        return perturbed
    if mode != REMOVE:
        raise Seq2SeqLrpError(f"Unknown deletion mode {mode!r}, expected one of {MODES}.")
    kept = np.delete(perturbed, positions)

    return np.concatenate([kept, np.full(len(perturbed) - len(kept), PAD_ID, dtype=np.int64)])


def token_jaccard(first: Sequence[int], second: Sequence[int]) -> float:
    """Jaccard index of the token sets, 1 if both sequences are empty."""
    first_set, second_set = set(first), set(second)
    union = first_set | second_set
    if not union:
        return 1.0

    return len(first_set & second_set) / len(union)


def unigram_overlap_f1(reference: Sequence[int], candidate: Sequence[int]) -> float:
    """F1 score of the clipped unigram overlap, 1 if both sequences are empty."""
    if not reference and not candidate:
        return 1.0
    overlap = sum((Counter(reference) & Counter(candidate)).values())
    if overlap == 0:
        return 0.0
    precision = overlap / len(candidate)
    recall = overlap / len(reference)

    return 2.0 * precision * recall / (precision + recall)


def repetition_rate(ids: Sequence[int]) -> float:
    """1 - distinct trigrams / trigrams, 0 for sequences shorter than three tokens."""
    trigrams = [tuple(ids[i : i + 3]) for i in range(len(ids) - 2)]
    if not trigrams:
        return 0.0

    return 1.0 - len(set(trigrams)) / len(trigrams)


def degradation_metrics(baseline: Sequence[int], perturbed: Sequence[int]) -> DegradationMetrics:
    """Compare the summary of a perturbed text with the baseline summary."""
    baseline = [int(id_) for id_ in baseline]
    perturbed = [int(id_) for id_ in perturbed]
    unknown_rate = perturbed.count(UNKNOWN_ID) / len(perturbed) if perturbed else 0.0

    return DegradationMetrics(
        token_jaccard=token_jaccard(baseline, perturbed),
        unigram_overlap_f1=unigram_overlap_f1(baseline, perturbed),
        unknown_rate=unknown_rate,
        repetition_rate=repetition_rate(perturbed),
    )


def truthfulness_verdict(
    control_jaccard: float, important_jaccard: float, margin: float = DEFAULT_MARGIN
) -> str:
    """
    "truthful" if deleting the least important tokens preserves the summary better than
    deleting the most important ones by at least `margin` (in token Jaccard index),
    "not distinguishable" otherwise.
    """
    if control_jaccard - important_jaccard >= margin:
        return TRUTHFUL

    return NOT_DISTINGUISHABLE


def rank_input(
    ids: Sequence[int],
    weights: ModelWeights,
    config: ModelConfig,
    lrp_config: Optional[LrpConfig] = None,
    aggregation: Optional[AggregationMode] = None,
) -> SaliencyRanking:
    """
    Summarize `ids` and rank its positions by aggregated relevance.

    Raises:
        Seq2SeqLrpError if the baseline summary is empty.
    """
    baseline = decode_greedy(ids, weights, config)
    stack = relevance_stack(baseline.tape, weights, config, lrp_config)
    aggregated = aggregate(stack, aggregation)

    return SaliencyRanking(
        baseline=baseline,
        stack=stack,
        aggregated=aggregated,
        ranking=rank_tokens(aggregated, baseline.tape.input_ids, SPECIAL_IDS),
    )


def select_positions(ranking: Sequence[int], fraction: float, direction: str) -> List[int]:
    """
    The deleted positions, increasing, for a ranking and a fraction.

    The most and the least important selections are disjoint as long as
    2 * deletion_count(fraction, len(ranking)) <= len(ranking).
    """
    count = deletion_count(fraction, len(ranking))
    selected = ranking[:count] if direction == MOST_IMPORTANT else ranking[len(ranking) - count :]

    return sorted(selected)


def type_positions(ids: Sequence[int], positions: Iterable[int]) -> List[int]:
    """All the positions of `ids` holding one of the word types found at `positions`."""
    ids = np.asarray(ids, dtype=np.int64)
    types = {int(ids[position]) for position in positions}

    return [int(position) for position in np.flatnonzero(np.isin(ids, sorted(types)))]


def apply_deletion(
    ranked: SaliencyRanking, spec: DeletionSpec, weights: ModelWeights, config: ModelConfig
) -> DeletionResult:
    """Delete the positions selected by `spec`, summarize the perturbed text and compare."""
    positions = select_positions(ranked.ranking, spec.fraction, spec.direction)
    if spec.level == TYPE_LEVEL:
        positions = type_positions(ranked.input_ids, positions)
    perturbed_input = delete_tokens(ranked.input_ids, positions, spec.mode)
    perturbed = decode_greedy(perturbed_input, weights, config)
    baseline_ids = ranked.baseline.summary_ids

    return DeletionResult(
        spec=spec,
        deleted_positions=positions,
        baseline_ids=baseline_ids,
        perturbed_input=perturbed_input,
        perturbed_ids=perturbed.summary_ids,
        metrics=degradation_metrics(baseline_ids, perturbed.summary_ids),
    )


def run_deletion_experiment(  # pylint: disable=too-many-arguments
    ids: Sequence[int],
    weights: ModelWeights,
    config: ModelConfig,
    lrp_config: Optional[LrpConfig] = None,
    specs: Optional[Sequence[DeletionSpec]] = None,
    aggregation: Optional[AggregationMode] = None,
) -> Tuple[SaliencyRanking, List[DeletionResult]]:
    """
    Run the deletion protocol on one text.

    Args:
        ids: input ids of the text.
        weights: model weights.
        config: model configuration.
        lrp_config: relevance propagation settings.
        specs: deletions to apply, by default the most and least important 7% of the tokens
            with the "remove" mode.
        aggregation: aggregation of the saliency maps, abs_mean by default.

    Returns:
        tuple (ranking of the input positions, one result per spec in the order of `specs`).

    Raises:
        Seq2SeqLrpError if the baseline summary is empty.
    """
    if specs is None:
        specs = [DeletionSpec(direction=direction) for direction in DIRECTIONS]
    ranked = rank_input(prepare_input(ids, config)[0], weights, config, lrp_config, aggregation)

    return ranked, [apply_deletion(ranked, spec, weights, config) for spec in specs]


def sweep_specs(
    fractions: Sequence[float] = DEFAULT_FRACTIONS,
    modes: Sequence[str] = (REMOVE,),
    level: str = POSITION_LEVEL,
) -> List[DeletionSpec]:
    """Deletion specs over a grid of fractions, for both directions and every mode."""
    return [
        DeletionSpec(fraction=fraction, direction=direction, mode=mode, level=level)
        for mode in modes
        for fraction in fractions
        for direction in DIRECTIONS
    ]


def run_deletion_sweep(  # pylint: disable=too-many-arguments
    ids: Sequence[int],
    weights: ModelWeights,
    config: ModelConfig,
    lrp_config: Optional[LrpConfig] = None,
    fractions: Sequence[float] = DEFAULT_FRACTIONS,
    modes: Sequence[str] = (REMOVE,),
    aggregation: Optional[AggregationMode] = None,
    level: str = POSITION_LEVEL,
) -> Tuple[SaliencyRanking, List[DeletionResult]]:
    """
    Incremental deletion: run_deletion_experiment over a grid of fractions.

    The saliency maps are computed once per text.
    """
    return run_deletion_experiment(
        ids, weights, config, lrp_config, sweep_specs(fractions, modes, level), aggregation
    )
