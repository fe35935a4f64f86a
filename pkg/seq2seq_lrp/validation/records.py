"""Result files of the validation.

validation_results.jsonl holds one record per (text, fraction, direction, mode) with the fields,
in this order:

    text_id, fraction, direction, mode, level, deleted_positions, baseline_ids, perturbed_ids,
    baseline_text, perturbed_text, token_jaccard, unigram_overlap_f1, unknown_rate,
    repetition_rate, verdict

where verdict is the verdict of the text (see `text_verdict`).

validation_summary.csv holds one row per text, see SUMMARY_COLUMNS.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd

from seq2seq_lrp.exceptions import Seq2SeqLrpError
from seq2seq_lrp.model.vocab import Vocab
from seq2seq_lrp.utils import PathLike, to_builtin
from seq2seq_lrp.validation.deletion import (
    DEFAULT_FRACTION,
    DEFAULT_MARGIN,
    LEAST_IMPORTANT,
    MOST_IMPORTANT,
    TRUTHFUL,
    DeletionResult,
    truthfulness_verdict,
)
from seq2seq_lrp.validation.occlusion import OracleAgreement

RESULT_FIELDS = (
    "text_id",
    "fraction",
    "direction",
    "mode",
    "level",
    "deleted_positions",
    "baseline_ids",
    "perturbed_ids",
    "baseline_text",
    "perturbed_text",
    "token_jaccard",
    "unigram_overlap_f1",
    "unknown_rate",
    "repetition_rate",
    "verdict",
)
SUMMARY_COLUMNS = (
    "text_id",
    "verdict",
    "control_jaccard",
    "important_jaccard",
    "lrp_top1",
    "oracle_top1",
    "trigger_positions",
    "oracle_spearman",
)


@dataclass(frozen=True)
class TextVerdict:
    """
    Verdict of one text at the headline fraction.

    Attributes:
        verdict: "truthful" or "not distinguishable".
        fraction: the fraction the verdict was taken at.
        control_jaccard: token Jaccard index after deleting the least important tokens.
        important_jaccard: token Jaccard index after deleting the most important tokens.
    """

    verdict: str
    fraction: float
    control_jaccard: float
    important_jaccard: float


def closest_fraction(
    fractions: Iterable[float], headline_fraction: float = DEFAULT_FRACTION
) -> float:
    """The fraction closest to `headline_fraction`, the smaller one on a tie."""
    return min(set(fractions), key=lambda value: (abs(value - headline_fraction), value))


def text_verdict(
    results: Sequence[DeletionResult],
    margin: float = DEFAULT_MARGIN,
    headline_fraction: float = DEFAULT_FRACTION,
) -> TextVerdict:
    """
    Verdict of a text from its deletion results.

    The verdict is taken with the first deletion mode of `results`, at the fraction closest to
    `headline_fraction`.

    Raises:
        Seq2SeqLrpError if `results` misses one of the two directions at that fraction.
    """
    if not results:
        raise Seq2SeqLrpError("Cannot take a verdict without deletion results.")
    mode = results[0].spec.mode
    fraction = closest_fraction(
        (result.spec.fraction for result in results if result.spec.mode == mode),
        headline_fraction,
    )
    jaccard: Dict[str, float] = {}
    for result in results:
        if result.spec.mode == mode and result.spec.fraction == fraction:
            jaccard[result.spec.direction] = result.metrics.token_jaccard
    if set(jaccard) != {MOST_IMPORTANT, LEAST_IMPORTANT}:
        raise Seq2SeqLrpError(
            f"Both deletion directions are needed at fraction {fraction} to take a verdict."
        )

    return TextVerdict(
        verdict=truthfulness_verdict(jaccard[LEAST_IMPORTANT], jaccard[MOST_IMPORTANT], margin),
        fraction=fraction,
        control_jaccard=jaccard[LEAST_IMPORTANT],
        important_jaccard=jaccard[MOST_IMPORTANT],
    )


def result_records(
    text_id: str, results: Sequence[DeletionResult], verdict: TextVerdict, vocab: Vocab
) -> List[Dict[str, Any]]:
    """Records of validation_results.jsonl for one text, in the order of `results`."""
    records = []
    for result in results:
        values = {
            "text_id": text_id,
            "fraction": result.spec.fraction,
            "direction": result.spec.direction,
            "mode": result.spec.mode,
            "level": result.spec.level,
            "deleted_positions": result.deleted_positions,
            "baseline_ids": result.baseline_ids,
            "perturbed_ids": result.perturbed_ids,
            "baseline_text": vocab.to_text(result.baseline_ids),
            "perturbed_text": vocab.to_text(result.perturbed_ids),
            "token_jaccard": result.metrics.token_jaccard,
            "unigram_overlap_f1": result.metrics.unigram_overlap_f1,
            "unknown_rate": result.metrics.unknown_rate,
            "repetition_rate": result.metrics.repetition_rate,
            "verdict": verdict.verdict,
        }
        records.append({field: to_builtin(values[field]) for field in RESULT_FIELDS})

    return records


def summary_row(
    text_id: str,
    verdict: TextVerdict,
    agreement: OracleAgreement,
    trigger_positions: Optional[Sequence[int]] = None,
) -> Dict[str, Any]:
    """Row of validation_summary.csv for one text."""
    return {
        "text_id": text_id,
        "verdict": verdict.verdict,
        "control_jaccard": verdict.control_jaccard,
        "important_jaccard": verdict.important_jaccard,
        "lrp_top1": agreement.lrp_top1,
        "oracle_top1": agreement.oracle_top1,
        "trigger_positions": " ".join(str(position) for position in trigger_positions or []),
        "oracle_spearman": agreement.spearman,
    }


def summary_frame(rows: Sequence[Dict[str, Any]]) -> pd.DataFrame:
    """DataFrame of the summary rows, with the columns of SUMMARY_COLUMNS."""
    frame = pd.DataFrame(list(rows), columns=list(SUMMARY_COLUMNS))
    for column in ("lrp_top1", "oracle_top1"):
        frame[column] = frame[column].astype("Int64")

    return frame


def write_summary(path: PathLike, rows: Sequence[Dict[str, Any]]) -> pd.DataFrame:
    """Write validation_summary.csv and return its DataFrame."""
    frame = summary_frame(rows)
    frame.to_csv(path, index=False, float_format="%.6f")

    return frame


def truthful_fraction(frame: pd.DataFrame) -> Optional[float]:
    """Fraction of the texts whose verdict is "truthful", None for an empty table."""
    if frame.empty:
        return None

    return float(np.mean(frame["verdict"] == TRUTHFUL))


def render_report(
    records: Sequence[Dict[str, Any]],
    summary: pd.DataFrame,
    headline_fraction: float = DEFAULT_FRACTION,
) -> str:
    """
    Human-readable report of a validation run.

    The report shows the per-text summary table, the fraction of truthful attributions, and
    for every text the baseline summary next to the summaries obtained by deleting the most
    and the least important tokens. The summaries are those the verdicts were taken from: first
    deletion mode, fraction closest to `headline_fraction`.
    """
    lines = ["Validation report", "================="]
    if summary.empty:
        lines.append("No text was validated.")
        return "\n".join(lines) + "\n"
    fraction = truthful_fraction(summary)
    lines.append(
        f"Truthful attributions: {int((summary['verdict'] == TRUTHFUL).sum())} of {len(summary)}"
        f" texts ({fraction:.1%})"
    )
    lines.append("Verdict rule: control minus important token Jaccard index above the margin.")
    lines.append("")
    lines.append(summary.to_string(index=False, na_rep="-", float_format=lambda x: f"{x:.3f}"))
    if not records:
        return "\n".join(lines) + "\n"
    mode = records[0]["mode"]
    shown_fraction = closest_fraction(
        (record["fraction"] for record in records if record["mode"] == mode), headline_fraction
    )
    lines.append("")
    lines.append(f"Summaries after deleting {shown_fraction:.0%} of the input tokens ({mode})")
    lines.append("-" * len(lines[-1]))
    by_text: Dict[str, Dict[str, Dict[str, Any]]] = {}
    for record in records:
        if record["mode"] == mode and record["fraction"] == shown_fraction:
            by_text.setdefault(record["text_id"], {}).setdefault(record["direction"], record)
    for text_id, directions in by_text.items():
        any_record = next(iter(directions.values()))
        lines.append(f"[{text_id}] {any_record['verdict']}")
        lines.append(f"  baseline:          {any_record['baseline_text']}")
        for direction in (MOST_IMPORTANT, LEAST_IMPORTANT):
            if direction in directions:
                label = f"  {direction.replace('_', ' ')}:"
                lines.append(f"{label:<21}{directions[direction]['perturbed_text']}")

    return "\n".join(lines) + "\n"
