"""Diagnostic statistics of the saliency maps of one text.

Two observations are quantified:

- the maps explaining the different generated tokens of a summary are nearly identical, which is
  measured by the cosine similarity of every pair of maps,
- the maps are unrelated to the attention distribution of the step they explain, which is
  measured by the Pearson and Spearman correlations between the attention weights and |R|.

The statistics are reported, never thresholded.
"""
from __future__ import annotations

import itertools
import logging
import warnings
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np
from atlas_commons.typing import FloatArray
from scipy.stats import pearsonr, spearmanr

from seq2seq_lrp.exceptions import Seq2SeqLrpError, Seq2SeqLrpWarning
from seq2seq_lrp.model.tape import ActivationTape
from seq2seq_lrp.saliency.stack import SaliencyStack

L = logging.getLogger(__name__)


@dataclass(frozen=True)
class SimilarityStatistics:
    """
    Pairwise cosine similarity of the maps of a stack.

    Attributes:
        mean, min, max: statistics over the compared pairs, None if no pair could be compared.
        pairs: number of compared pairs.
        skipped_pairs: number of pairs involving an all-zero map.
    """

    mean: Optional[float]
    min: Optional[float]
    max: Optional[float]
    pairs: int
    skipped_pairs: int

    def to_dict(self) -> Dict[str, Any]:
        """Record of the statistics."""
        return {
            "mean": self.mean,
            "min": self.min,
            "max": self.max,
            "pairs": self.pairs,
            "skipped_pairs": self.skipped_pairs,
        }


@dataclass(frozen=True)
class CorrelationStatistics:
    """
    Correlations between attention weights and absolute relevance.

    Attributes:
        pearson: one coefficient per explained step, None where a vector has zero variance.
        spearman: one coefficient per explained step, None where a vector has zero variance.
        mean_pearson: mean of the defined Pearson coefficients.
        mean_spearman: mean of the defined Spearman coefficients.
    """

    pearson: List[Optional[float]] = field(default_factory=list)
    spearman: List[Optional[float]] = field(default_factory=list)
    mean_pearson: Optional[float] = None
    mean_spearman: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        """Record of the statistics."""
        return {
            "pearson": list(self.pearson),
            "spearman": list(self.spearman),
            "mean_pearson": self.mean_pearson,
            "mean_spearman": self.mean_spearman,
        }


def cosine_similarity(first: FloatArray, second: FloatArray) -> Optional[float]:
    """Cosine of the angle between two vectors, None if one of them is zero."""
    norms = np.linalg.norm(first) * np.linalg.norm(second)
    if norms == 0.0:
        return None

    return float(np.clip(np.dot(first, second) / norms, -1.0, 1.0))


def map_pairwise_similarity(stack: SaliencyStack) -> SimilarityStatistics:
    """
    Cosine similarity of the signed maps of `stack` over all unordered pairs.

    Pairs involving an all-zero map are skipped and counted.

    Raises:
        Seq2SeqLrpError if the stack holds less than two maps.
    """
    if len(stack) < 2:
        raise Seq2SeqLrpError(
            f"At least two saliency maps are needed to compare them, got {len(stack)}."
        )
    maps = stack.as_array()
    cosines = []
    skipped = 0
    for first, second in itertools.combinations(range(len(maps)), 2):
        cosine = cosine_similarity(maps[first], maps[second])
        if cosine is None:
            skipped += 1
        else:
            cosines.append(cosine)
    if skipped:
        warnings.warn(
            f"Skipped {skipped} pairs of saliency maps involving an all-zero map.",
            Seq2SeqLrpWarning,
        )
    if not cosines:
        return SimilarityStatistics(None, None, None, 0, skipped)

    return SimilarityStatistics(
        mean=float(np.mean(cosines)),
        min=float(np.min(cosines)),
        max=float(np.max(cosines)),
        pairs=len(cosines),
        skipped_pairs=skipped,
    )


def _has_variance(vector: FloatArray) -> bool:
    return len(vector) >= 2 and bool(np.ptp(vector) > 0.0)


def correlation(first: FloatArray, second: FloatArray) -> Dict[str, Optional[float]]:
    """
    Pearson and Spearman correlation coefficients of two vectors.

    Spearman ranks ties by their average rank. Both coefficients are None if one of the vectors
    has zero variance.
    """
    if not (_has_variance(first) and _has_variance(second)):
        return {"pearson": None, "spearman": None}
    pearson = float(pearsonr(first, second)[0])
    spearman = float(spearmanr(first, second)[0])

    return {
        "pearson": pearson if np.isfinite(pearson) else None,
        "spearman": spearman if np.isfinite(spearman) else None,
    }


def _mean_defined(values: List[Optional[float]]) -> Optional[float]:
    defined = [value for value in values if value is not None]
    return float(np.mean(defined)) if defined else None


def attention_saliency_correlation(
    stack: SaliencyStack, tape: ActivationTape
) -> CorrelationStatistics:
    """
    Correlate, for every explained step k, the attention weights alpha_k with |map_k|.

    Steps where a vector has zero variance get undefined coefficients, excluded from the means.

    Raises:
        Seq2SeqLrpError if the tape does not hold the attention weights of the explained steps.
    """
    pearson: List[Optional[float]] = []
    spearman: List[Optional[float]] = []
    undefined = 0
    for map_ in stack.maps:
        step = map_.output_step
        if step >= len(tape.decoder):
            raise Seq2SeqLrpError(
                f"The tape holds no attention weights for the explained step {step}."
            )
        alpha = tape.decoder[step].attention.weights
        if alpha.shape != map_.relevance.shape:
            raise Seq2SeqLrpError(
                f"Attention weights of shape {alpha.shape} do not match the saliency map of "
                f"shape {map_.relevance.shape}."
            )
        coefficients = correlation(alpha, np.abs(map_.relevance))
        undefined += coefficients["pearson"] is None
        pearson.append(coefficients["pearson"])
        spearman.append(coefficients["spearman"])
    if undefined:
        L.debug("Correlation undefined for %d of %d steps", undefined, len(stack))

    return CorrelationStatistics(
        pearson=pearson,
        spearman=spearman,
        mean_pearson=_mean_defined(pearson),
        mean_spearman=_mean_defined(spearman),
    )
