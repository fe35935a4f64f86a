"""Summarize texts and explain the generated tokens with relevance heatmaps

For every text, the relevance of the first generated tokens (up to --maps) is propagated back to
the input tokens. Each generated token gets one saliency map; the maps of a text are rendered as
heatmaps and compared with each other and with the attention distributions.

Outputs:

- summarize: summaries.jsonl and config.yaml,
- explain: heatmaps/<text_id>.html, heatmaps/<text_id>.ansi, explain_report.jsonl and
  config.yaml.
"""
from __future__ import annotations

import logging
import warnings
from typing import Any, Dict, List, Optional

import click
from atlas_commons.app_utils import EXISTING_FILE_PATH, log_args, set_verbose
from joblib import Parallel, delayed

from seq2seq_lrp.app.utils import (
    RunConfig,
    Seq2SeqLrpGroup,
    load_config_file,
    load_texts,
    prepare_output_dir,
    resolve_explanation_config,
    write_effective_config,
)
from seq2seq_lrp.exceptions import Seq2SeqLrpWarning
from seq2seq_lrp.model.network import decode_greedy
from seq2seq_lrp.model.vocab import SPECIAL_IDS, Vocab
from seq2seq_lrp.model.weights import ModelConfig, ModelWeights, load_weights
from seq2seq_lrp.relevance.propagation import LrpConfig, relevance_stack
from seq2seq_lrp.saliency.aggregation import AggregationMode, aggregate, rank_tokens
from seq2seq_lrp.saliency.heatmaps import write_heatmaps
from seq2seq_lrp.saliency.stack import SaliencyStack
from seq2seq_lrp.saliency.statistics import (
    attention_saliency_correlation,
    map_pairwise_similarity,
)
from seq2seq_lrp.training.corpus import CorpusPair
from seq2seq_lrp.utils import to_builtin, write_jsonl

L = logging.getLogger(__name__)

SUMMARIES_FILENAME = "summaries.jsonl"
EXPLAIN_REPORT_FILENAME = "explain_report.jsonl"
HEATMAPS_DIRNAME = "heatmaps"
TOP_TOKENS = 5


@click.group(cls=Seq2SeqLrpGroup)
@click.option("-v", "--verbose", count=True)
def app(verbose):
    """Run the summarization and explanation CLI"""
    set_verbose(L, verbose)


def common_text_options(function):
    """Options shared by the commands reading a model and texts."""
    decorators = [
        click.option(
            "--weights",
            "weights_path",
            type=EXISTING_FILE_PATH,
            required=True,
            help="Path to the weights file, e.g., weights.bin.",
        ),
        click.option(
            "--vocab",
            "vocab_path",
            type=EXISTING_FILE_PATH,
            required=True,
            help="Path to the vocabulary file, one token per line.",
        ),
        click.option(
            "--corpus",
            "corpus_path",
            type=EXISTING_FILE_PATH,
            help="Path to a corpus file of JSON lines. Exclusive with --text-file.",
        ),
        click.option(
            "--text-file",
            type=EXISTING_FILE_PATH,
            help="Path to a file of whitespace-tokenized texts, one per line.",
        ),
        click.option(
            "--config",
            "config_path",
            type=EXISTING_FILE_PATH,
            help="(Optional) YAML configuration file.",
        ),
        click.option(
            "--out", required=True, help="Output directory, created if it doesn't exist."
        ),
        click.option(
            "--n-jobs",
            type=int,
            default=1,
            help="Number of jobs processing texts in parallel.",
        ),
    ]
    for decorator in reversed(decorators):
        function = decorator(function)

    return function


def relevance_options(function):
    """Options of the relevance propagation."""
    decorators = [
        click.option(
            "--epsilon",
            type=float,
            help="(Optional) Stabilizer of the epsilon rule. Defaults to 1e-5.",
        ),
        click.option(
            "--maps",
            type=int,
            help="(Optional) Number of generated tokens explained per text. Defaults to the "
            "value stored in the weights file.",
        ),
        click.option(
            "--aggregation",
            type=str,
            help="(Optional) Aggregation of the maps: abs, raw or scaled:<factor>. "
            "Defaults to abs.",
        ),
        click.option(
            "--no-attention-relevance",
            is_flag=True,
            default=False,
            help="Do not propagate relevance through the attention context.",
        ),
    ]
    for decorator in reversed(decorators):
        function = decorator(function)

    return function


def _summary_record(pair: CorpusPair, weights: ModelWeights, config: ModelConfig) -> Dict:
    result = decode_greedy(pair.input_ids, weights, config)
    return {
        "text_id": pair.text_id,
        "input_length": result.tape.input_length,
        "truncated": result.tape.truncated,
        "summary_ids": result.summary_ids,
    }


@app.command()
@common_text_options
@log_args(L)
def summarize(
    weights_path, vocab_path, corpus_path, text_file, config_path, out, n_jobs
):  # pylint: disable=too-many-arguments
    """
    Summarize texts greedily.

    Texts longer than the encoder window of the model are truncated, shorter ones are padded.
    """
    file_config = load_config_file(config_path)
    L.info("Loading weights and vocabulary ...")
    weights = load_weights(weights_path)
    vocab = Vocab.load(vocab_path)
    pairs = load_texts(corpus_path, text_file, vocab)
    config = weights.config
    if file_config.get("model"):
        L.info("Model dimensions are read from the weights file, the model section is ignored")
    out_dir = prepare_output_dir(out)

    L.info("Summarizing %d texts ...", len(pairs))
    records = Parallel(n_jobs=n_jobs)(
        delayed(_summary_record)(pair, weights, config) for pair in pairs
    )
    for record in records:
        record["summary_text"] = vocab.to_text(record["summary_ids"])
    write_jsonl(out_dir / SUMMARIES_FILENAME, records)

    write_effective_config(
        out_dir,
        RunConfig(
            command="summarize",
            paths=_paths(weights_path, vocab_path, corpus_path, text_file, out),
            model=config,
        ),
    )


def _paths(weights_path, vocab_path, corpus_path, text_file, out) -> Dict[str, str]:
    paths = {"weights": weights_path, "vocab": vocab_path, "out": out}
    if corpus_path is not None:
        paths["corpus"] = corpus_path
    if text_file is not None:
        paths["text_file"] = text_file

    return {key: str(value) for key, value in paths.items()}


def explain_text(
    pair: CorpusPair,
    weights: ModelWeights,
    config: ModelConfig,
    lrp_config: LrpConfig,
    aggregation: AggregationMode,
) -> Optional[Dict[str, Any]]:
    """
    Saliency maps of one text and their statistics.

    Returns:
        None if the summary of the text is empty, otherwise a dict holding the report record
        under "record" and the saliency stack under "stack".
    """
    result = decode_greedy(pair.input_ids, weights, config)
    if not result.summary_ids:
        return None
    tape = result.tape
    stack = relevance_stack(tape, weights, config, lrp_config)
    ranking = rank_tokens(aggregate(stack, aggregation), tape.input_ids, SPECIAL_IDS)
    similarity = map_pairwise_similarity(stack).to_dict() if len(stack) >= 2 else None
    correlation = attention_saliency_correlation(stack, tape)
    record = {
        "text_id": pair.text_id,
        "input_length": tape.input_length,
        "effective_length": tape.effective_length,
        "truncated": tape.truncated,
        "summary_ids": result.summary_ids,
        "maps": len(stack),
        "explained_ids": [map_.emitted_id for map_ in stack.maps],
        "logit": [map_.initial_logit for map_ in stack.maps],
        "input_relevance": [float(map_.relevance.sum()) for map_ in stack.maps],
        "previous_token_relevance": [
            float(map_.previous_token_relevance.sum()) for map_ in stack.maps
        ],
        "initial_state_relevance": [map_.initial_state_relevance for map_ in stack.maps],
        "absorbed_relevance": [map_.absorbed_relevance for map_ in stack.maps],
        "aggregation": str(aggregation),
        "top_positions": ranking[:TOP_TOKENS],
        "pairwise_cosine": similarity,
        "attention_correlation": correlation.to_dict(),
    }

    return {"record": to_builtin(record), "stack": stack}


def _truncation_note(stack: SaliencyStack) -> Optional[str]:
    if stack.input_length <= len(stack.input_ids):
        return None
    return (
        f"The text of {stack.input_length} tokens was truncated to its first "
        f"{len(stack.input_ids)} tokens."
    )


@app.command()
@common_text_options
@relevance_options
@log_args(L)
def explain(
    weights_path,
    vocab_path,
    corpus_path,
    text_file,
    config_path,
    out,
    n_jobs,
    epsilon,
    maps,
    aggregation,
    no_attention_relevance,
):  # pylint: disable=too-many-arguments,too-many-locals
    """
    Compute, render and compare the saliency maps of the generated tokens of every text.

    The relevance of a generated token is initialized with its logit and propagated back to the
    input tokens with the epsilon rule for weighted connections and the gate rule for the
    elementwise products of the LSTM cells and of the attention. The first --maps generated
    tokens of every text are explained.

    For every text, the report records the pairwise cosine similarity of its maps and the
    correlation between every map and the attention weights of the same decoding step. Texts
    whose summary is empty are skipped with a warning.
    """
    file_config = load_config_file(config_path)
    L.info("Loading weights and vocabulary ...")
    weights = load_weights(weights_path)
    vocab = Vocab.load(vocab_path)
    pairs = load_texts(corpus_path, text_file, vocab)
    config, lrp_config, aggregation_mode = resolve_explanation_config(
        file_config, weights.config, epsilon, maps, aggregation, no_attention_relevance
    )
    out_dir = prepare_output_dir(out)
    heatmaps_dir = out_dir / HEATMAPS_DIRNAME

    L.info("Explaining %d texts ...", len(pairs))
    explanations = Parallel(n_jobs=n_jobs)(
        delayed(explain_text)(pair, weights, config, lrp_config, aggregation_mode)
        for pair in pairs
    )
    records: List[Dict[str, Any]] = []
    for pair, explanation in zip(pairs, explanations):
        if explanation is None:
            warnings.warn(
                f"The summary of text {pair.text_id} is empty, nothing to explain.",
                Seq2SeqLrpWarning,
            )
            continue
        stack = explanation["stack"]
        record = explanation["record"]
        note = _truncation_note(stack)
        record["note"] = note
        record["summary_text"] = vocab.to_text(record["summary_ids"])
        record["top_tokens"] = vocab.decode(stack.input_ids[record["top_positions"]])
        write_heatmaps(heatmaps_dir, pair.text_id, stack, vocab, note=note)
        records.append(record)
    write_jsonl(out_dir / EXPLAIN_REPORT_FILENAME, records)
    if not records:
        warnings.warn("No text was explained.", Seq2SeqLrpWarning)

    write_effective_config(
        out_dir,
        RunConfig(
            command="explain",
            paths=_paths(weights_path, vocab_path, corpus_path, text_file, out),
            model=config,
            lrp=lrp_config,
            aggregation=aggregation_mode,
        ),
    )
