"""Check whether the relevance points at the tokens the summaries depend on

For every text, the input tokens are ranked by their aggregated relevance. The most important
and the least important tokens are deleted, over a grid of fractions, and the summaries of the
perturbed texts are compared with the original summary. An independent ranking is obtained by
occluding every input position in turn.

Outputs:

- validate: validation_results.jsonl, validation_summary.csv and config.yaml,
- report: report.txt (also printed) and config.yaml.
"""
from __future__ import annotations

import logging
import warnings
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import click
import pandas as pd
from atlas_commons.app_utils import EXISTING_FILE_PATH, log_args, set_verbose
from joblib import Parallel, delayed
from tqdm import tqdm

from seq2seq_lrp.app.explanation import relevance_options
from seq2seq_lrp.app.utils import (
    EXISTING_DIR_PATH,
    RunConfig,
    Seq2SeqLrpGroup,
    load_config_file,
    load_texts,
    prepare_output_dir,
    resolve_explanation_config,
    resolve_validation_config,
    write_effective_config,
)
from seq2seq_lrp.exceptions import Seq2SeqLrpError, Seq2SeqLrpWarning
from seq2seq_lrp.model.network import decode_greedy
from seq2seq_lrp.model.vocab import Vocab
from seq2seq_lrp.model.weights import ModelConfig, ModelWeights, load_weights
from seq2seq_lrp.relevance.propagation import LrpConfig
from seq2seq_lrp.saliency.aggregation import AggregationMode
from seq2seq_lrp.training.corpus import CorpusPair, find_triggers
from seq2seq_lrp.utils import read_jsonl, write_jsonl
from seq2seq_lrp.validation.deletion import TYPE_LEVEL, DeletionSpec, run_deletion_experiment
from seq2seq_lrp.validation.occlusion import lrp_oracle_agreement, occlusion_importance
from seq2seq_lrp.validation.records import (
    render_report,
    result_records,
    summary_row,
    text_verdict,
    truthful_fraction,
    write_summary,
)

L = logging.getLogger(__name__)

RESULTS_FILENAME = "validation_results.jsonl"
SUMMARY_FILENAME = "validation_summary.csv"
REPORT_FILENAME = "report.txt"


@click.group(cls=Seq2SeqLrpGroup)
@click.option("-v", "--verbose", count=True)
def app(verbose):
    """Run the validation CLI"""
    set_verbose(L, verbose)


def validate_text(  # pylint: disable=too-many-arguments
    pair: CorpusPair,
    weights: ModelWeights,
    config: ModelConfig,
    lrp_config: LrpConfig,
    specs: Sequence[DeletionSpec],
    aggregation: AggregationMode,
    margin: float,
    vocab: Vocab,
) -> Optional[Tuple[List[Dict[str, Any]], Dict[str, Any]]]:
    """
    Deletion experiments and occlusion oracle of one text.

    Returns:
        None if the summary of the text is empty, otherwise the tuple (result records, summary
        row).

    Raises:
        Seq2SeqLrpError naming the text if one of the steps fails.
    """
    try:
        if not decode_greedy(pair.input_ids, weights, config).summary_ids:
            return None
        ranked, results = run_deletion_experiment(
            pair.input_ids, weights, config, lrp_config, specs, aggregation
        )
        verdict = text_verdict(results, margin)
        agreement = lrp_oracle_agreement(
            ranked.aggregated,
            occlusion_importance(pair.input_ids, weights, config),
            ranked.input_ids,
        )
    except Seq2SeqLrpError as error:
        raise type(error)(f"Text {pair.text_id}: {error}") from error

    return (
        result_records(pair.text_id, results, verdict, vocab),
        summary_row(pair.text_id, verdict, agreement, find_triggers(pair)),
    )


@app.command()
@click.option(
    "--weights",
    "weights_path",
    type=EXISTING_FILE_PATH,
    required=True,
    help="Path to the weights file, e.g., weights.bin.",
)
@click.option(
    "--vocab",
    "vocab_path",
    type=EXISTING_FILE_PATH,
    required=True,
    help="Path to the vocabulary file, one token per line.",
)
@click.option(
    "--corpus",
    "corpus_path",
    type=EXISTING_FILE_PATH,
    required=True,
    help="Path to the corpus file of JSON lines.",
)
@click.option(
    "--config", "config_path", type=EXISTING_FILE_PATH, help="(Optional) YAML configuration file."
)
@click.option("--out", required=True, help="Output directory, created if it doesn't exist.")
@relevance_options
@click.option(
    "--fractions",
    type=str,
    help='(Optional) Comma-separated deletion fractions. Defaults to "0.01,0.03,0.05,0.07,0.10".',
)
@click.option(
    "--mode",
    "modes",
    type=click.Choice(["remove", "replace"]),
    multiple=True,
    help="(Optional) Deletion mode, repeatable. Defaults to remove.",
)
@click.option(
    "--margin",
    type=float,
    help="(Optional) Jaccard margin of the truthfulness verdict. Defaults to 0.2.",
)
@click.option(
    "--word-types",
    is_flag=True,
    help="(Optional) Delete every occurrence of the word types at the selected positions "
    "instead of the positions only.",
)
@click.option("--n-jobs", type=int, default=1, help="Number of jobs validating texts in parallel.")
@log_args(L)
def validate(
    weights_path,
    vocab_path,
    corpus_path,
    config_path,
    out,
    epsilon,
    maps,
    aggregation,
    no_attention_relevance,
    fractions,
    modes,
    margin,
    word_types,
    n_jobs,
):  # pylint: disable=too-many-arguments,too-many-locals
    """
    Delete the most and the least relevant input tokens and compare the summaries.

    For every text of the corpus and every fraction f, the round(f * L) most important and the
    round(f * L) least important tokens are deleted, L being the number of tokens of the text.
    With --word-types, every occurrence of the word types found at these positions is deleted.
    The summaries of the perturbed texts are compared with the original summary by their
    token Jaccard index, unigram F1 score, rate of UNKNOWN tokens and rate of repeated trigrams.

    A text is "truthful" when deleting the least important tokens preserves the summary better
    than deleting the most important ones, by at least --margin in token Jaccard index at the
    fraction closest to 7%, and "not distinguishable" otherwise.

    The occlusion oracle scores every position by the change of the summary when the token is
    replaced by UNKNOWN; the summary table reports its Spearman correlation with the relevance
    and the top positions of both rankings next to the planted trigger positions.
    """
    file_config = load_config_file(config_path)
    L.info("Loading weights, vocabulary and corpus ...")
    weights = load_weights(weights_path)
    vocab = Vocab.load(vocab_path)
    pairs = load_texts(corpus_path, None, vocab)
    config, lrp_config, aggregation_mode = resolve_explanation_config(
        file_config, weights.config, epsilon, maps, aggregation, no_attention_relevance
    )
    resolved_fractions, resolved_modes, resolved_margin, level = resolve_validation_config(
        file_config, fractions, modes, margin, TYPE_LEVEL if word_types else None
    )
    run_config = RunConfig(
        command="validate",
        paths={
            "weights": str(weights_path),
            "vocab": str(vocab_path),
            "corpus": str(corpus_path),
            "out": str(out),
        },
        model=config,
        lrp=lrp_config,
        fractions=resolved_fractions,
        modes=resolved_modes,
        level=level,
        margin=resolved_margin,
        aggregation=aggregation_mode,
    )
    out_dir = prepare_output_dir(out)
    if not pairs:
        warnings.warn(f"The corpus {corpus_path} is empty, nothing to validate.", Seq2SeqLrpWarning)

    L.info("Validating %d texts ...", len(pairs))
    outcomes = Parallel(n_jobs=n_jobs)(
        delayed(validate_text)(
            pair,
            weights,
            config,
            lrp_config,
            run_config.deletion_specs,
            aggregation_mode,
            resolved_margin,
            vocab,
        )
        for pair in tqdm(pairs)
    )
    records: List[Dict[str, Any]] = []
    rows: List[Dict[str, Any]] = []
    for pair, outcome in zip(pairs, outcomes):
        if outcome is None:
            warnings.warn(
                f"The summary of text {pair.text_id} is empty, it is not validated.",
                Seq2SeqLrpWarning,
            )
            continue
        records.extend(outcome[0])
        rows.append(outcome[1])
    write_jsonl(out_dir / RESULTS_FILENAME, records)
    summary = write_summary(out_dir / SUMMARY_FILENAME, rows)
    fraction = truthful_fraction(summary)
    if fraction is not None:
        L.info("Truthful attributions: %.1f%% of %d texts", 100.0 * fraction, len(summary))

    write_effective_config(out_dir, run_config)


@app.command()
@click.option(
    "--validation-dir",
    type=EXISTING_DIR_PATH,
    required=True,
    help="Output directory of the validate command.",
)
@click.option(
    "--out",
    required=True,
    help="Output directory, created if it doesn't exist. It must differ from --validation-dir.",
)
@log_args(L)
def report(validation_dir, out):
    """
    Render the results of the validate command as a text report.

    The report holds the per-text summary table, the fraction of truthful attributions and,
    for every text, the original summary next to the summaries obtained by deleting the most
    and the least important tokens at the 7% fraction.
    """
    results_path = Path(validation_dir, RESULTS_FILENAME)
    summary_path = Path(validation_dir, SUMMARY_FILENAME)
    for path in (results_path, summary_path):
        if not path.exists():
            raise Seq2SeqLrpError(f"Missing validation output {path}.")
    records = read_jsonl(results_path)
    try:
        summary = pd.read_csv(summary_path, dtype={"text_id": str, "trigger_positions": str})
    except pd.errors.EmptyDataError as error:
        raise Seq2SeqLrpError(f"Invalid validation summary {summary_path}.") from error
    out_dir = prepare_output_dir(out, [validation_dir])

    text = render_report(records, summary)
    Path(out_dir, REPORT_FILENAME).write_text(text, encoding="utf-8")
    click.echo(text, nl=False)

    write_effective_config(
        out_dir,
        RunConfig(command="report", paths={"validation_dir": str(validation_dir), "out": str(out)}),
    )
