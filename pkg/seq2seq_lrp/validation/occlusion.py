"""Brute-force importance of every input position, by single-token occlusion.

The importance of position t is 1 - token_jaccard(baseline summary, summary of the text whose
token t is replaced by UNKNOWN). Positions keep their alignment, which isolates the change of
content from the shift a removal would cause. It costs one decode per position.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Collection, Optional, Sequence

import numpy as np
from atlas_commons.typing import FloatArray

from seq2seq_lrp.model.network import decode_greedy, prepare_input
from seq2seq_lrp.model.vocab import SPECIAL_IDS, UNKNOWN_ID
from seq2seq_lrp.model.weights import ModelConfig, ModelWeights
from seq2seq_lrp.saliency.aggregation import AggregatedSaliency, rank_positions
from seq2seq_lrp.saliency.statistics import correlation
from seq2seq_lrp.validation.deletion import token_jaccard

L = logging.getLogger(__name__)


@dataclass(frozen=True)
class OracleAgreement:
    """
    Agreement between the relevance ranking and the occlusion ranking of one text.

    Attributes:
        spearman: Spearman correlation of the two scores over the rankable positions, None if
            one of them is constant.
        lrp_top1: position with the highest aggregated relevance, None if nothing is rankable.
        oracle_top1: position with the highest occlusion score, None if nothing is rankable.
    """

    spearman: Optional[float]
    lrp_top1: Optional[int]
    oracle_top1: Optional[int]


def occlusion_importance(
    ids: Sequence[int], weights: ModelWeights, config: ModelConfig
) -> FloatArray:
    """
    Occlusion score of every position of the padded input of `ids`.

    Positions holding a special token, padding included, score 0.

    Returns:
        array of length config.max_input_len, higher values meaning more important positions.
    """
    padded, _ = prepare_input(ids, config)
    baseline = decode_greedy(padded, weights, config).summary_ids
    scores = np.zeros(len(padded))
    for position, token in enumerate(padded):
        if int(token) in SPECIAL_IDS:
            continue
        occluded = padded.copy()
        occluded[position] = UNKNOWN_ID
        summary = decode_greedy(occluded, weights, config).summary_ids
        scores[position] = 1.0 - token_jaccard(baseline, summary)

    return scores


def lrp_oracle_agreement(
    aggregated: AggregatedSaliency,
    occlusion_scores: FloatArray,
    input_ids: Sequence[int],
    exclude: Collection[int] = SPECIAL_IDS,
) -> OracleAgreement:
    """Compare the aggregated relevance with the occlusion scores of the same text."""
    input_ids = np.asarray(input_ids, dtype=np.int64)
    lrp_ranking = rank_positions(aggregated.scores, input_ids, exclude)
    oracle_ranking = rank_positions(occlusion_scores, input_ids, exclude)
    rankable = sorted(lrp_ranking)
    coefficients = correlation(aggregated.scores[rankable], occlusion_scores[rankable])

    return OracleAgreement(
        spearman=coefficients["spearman"],
        lrp_top1=lrp_ranking[0] if lrp_ranking else None,
        oracle_top1=oracle_ranking[0] if oracle_ranking else None,
    )
