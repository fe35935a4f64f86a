"""Generate a synthetic corpus with planted dependencies and train a toy summarizer on it

The synthetic corpus stands in for a news summarization dataset. Every text holds one or more
keywords whose summary template is the target summary, so that the positions which determine
the summary are known.

Outputs:

- gen-corpus: corpus.jsonl, vocab.txt and config.yaml,
- train: weights.bin, train_report.json and config.yaml.
"""
from __future__ import annotations

import json
import logging
import warnings
from pathlib import Path
from typing import Any, Dict, List, Optional

import click
from atlas_commons.app_utils import EXISTING_FILE_PATH, log_args, set_verbose

from seq2seq_lrp.app.utils import (
    RunConfig,
    Seq2SeqLrpGroup,
    load_config_file,
    merge_section,
    prepare_output_dir,
    resolve_seed,
    write_effective_config,
)
from seq2seq_lrp.exceptions import Seq2SeqLrpError, Seq2SeqLrpWarning
from seq2seq_lrp.model.vocab import SPECIAL_TOKENS, Vocab
from seq2seq_lrp.model.weights import (
    DEFAULT_MAPS_PER_TEXT,
    DEFAULT_MAX_OUTPUT_LEN,
    ModelConfig,
    save_weights,
)
from seq2seq_lrp.training.corpus import (
    CorpusPair,
    SyntheticCorpusSpec,
    generate_synthetic_corpus,
    load_corpus,
    save_corpus,
    split_corpus,
)
from seq2seq_lrp.training.trainer import TrainingHyperparams, train_toy
from seq2seq_lrp.utils import to_builtin

L = logging.getLogger(__name__)

CORPUS_FILENAME = "corpus.jsonl"
VOCAB_FILENAME = "vocab.txt"
WEIGHTS_FILENAME = "weights.bin"
TRAIN_REPORT_FILENAME = "train_report.json"


@click.group(cls=Seq2SeqLrpGroup)
@click.option("-v", "--verbose", count=True)
def app(verbose):
    """Run the corpus and training CLI"""
    set_verbose(L, verbose)


def _with_seed(
    section: Dict[str, Any], seed_flag: Optional[int], file_config: Dict[str, Any]
) -> Dict[str, Any]:
    """--seed, otherwise the seed of the section, otherwise the top level seed of the file."""
    if seed_flag is not None:
        return {**section, "seed": seed_flag}
    if "seed" not in section:
        seed = resolve_seed(file_config, None)
        if seed is not None:
            return {**section, "seed": seed}

    return section


@app.command(name="gen-corpus")
@click.option(
    "--config", "config_path", type=EXISTING_FILE_PATH, help="(Optional) YAML configuration file."
)
@click.option("--out", required=True, help="Output directory, created if it doesn't exist.")
@click.option("--seed", type=int, help="(Optional) Seed of the generator.")
@click.option("--num-texts", type=int, help="(Optional) Number of texts. Defaults to 200.")
@click.option("--text-len", type=int, help="(Optional) Tokens per text. Defaults to 10.")
@click.option("--num-triggers", type=int, help="(Optional) Keywords per text. Defaults to 1.")
@click.option("--vocab-size", type=int, help="(Optional) Vocabulary size. Defaults to 48.")
@click.option(
    "--num-blank-texts",
    type=int,
    help="(Optional) Additional texts without keyword, with an empty summary. Defaults to 0.",
)
@log_args(L)
def gen_corpus(
    config_path, out, seed, num_texts, text_len, num_triggers, vocab_size, num_blank_texts
):  # pylint: disable=too-many-arguments
    """
    Generate a synthetic corpus with planted keyword-to-summary dependencies.

    Every text is made of noise tokens and keywords at random positions. The target summary of
    a text is the concatenation of the summary templates of its keywords, followed by STOP. The
    positions of the keywords are stored with every text as `trigger_positions`.

    The corpus must fit the model section of the configuration file, if any: texts may not be
    longer than max_input_len.
    """
    file_config = load_config_file(config_path)
    section = merge_section(
        file_config,
        "corpus",
        {
            "num_texts": num_texts,
            "text_len": text_len,
            "num_triggers": num_triggers,
            "vocab_size": vocab_size,
            "num_blank_texts": num_blank_texts,
        },
    )
    section = _with_seed(section, seed, file_config)
    spec = SyntheticCorpusSpec.from_dict(section)
    spec.check(_model_config(file_config, {}, spec.vocab(), []))
    out_dir = prepare_output_dir(out)

    L.info("Generating %d texts ...", spec.num_texts)
    pairs = generate_synthetic_corpus(spec)
    save_corpus(out_dir / CORPUS_FILENAME, pairs)
    spec.vocab().save(out_dir / VOCAB_FILENAME)
    L.info("Corpus and vocabulary saved to %s", out_dir)

    write_effective_config(
        out_dir,
        RunConfig(
            command="gen-corpus",
            paths={"out": str(out)},
            corpus=section,
            seed=section.get("seed"),
        ),
    )


def _model_config(
    file_config: Dict[str, Any],
    flags: Dict[str, Optional[int]],
    vocab: Optional[Vocab],
    pairs: List[CorpusPair],
) -> ModelConfig:
    """
    Model dimensions of the train command.

    The vocabulary size is the size of the vocabulary file if given, otherwise the configured
    one, otherwise the largest id of the corpus plus one.
    """
    section = merge_section(file_config, "model", flags)
    if vocab is not None:
        section["vocab_size"] = len(vocab)
    elif "vocab_size" not in section:
        largest = max((id_ for pair in pairs for id_ in pair.input_ids + pair.target_ids))
        section["vocab_size"] = max(largest + 1, len(SPECIAL_TOKENS) + 1)
    if "maps_per_text" not in section:
        section["maps_per_text"] = min(
            DEFAULT_MAPS_PER_TEXT, int(section.get("max_output_len", DEFAULT_MAX_OUTPUT_LEN))
        )

    return ModelConfig.from_dict(section)


def _check_corpus(pairs: List[CorpusPair], config: ModelConfig) -> None:
    """Raise if an id is out of the vocabulary, warn if texts or targets will be truncated."""
    truncated_inputs = 0
    truncated_targets = 0
    for pair in pairs:
        for id_ in pair.input_ids + pair.target_ids:
            if not 0 <= id_ < config.vocab_size:
                raise Seq2SeqLrpError(
                    f"Text {pair.text_id} holds the id {id_}, out of the vocabulary range "
                    f"[0, {config.vocab_size})."
                )
        truncated_inputs += len(pair.input_ids) > config.max_input_len
        truncated_targets += len(pair.target_ids) > config.max_output_len
    if truncated_inputs:
        warnings.warn(
            f"{truncated_inputs} texts are longer than max_input_len ({config.max_input_len}) "
            "and will be truncated.",
            Seq2SeqLrpWarning,
        )
    if truncated_targets:
        warnings.warn(
            f"{truncated_targets} target summaries are longer than max_output_len "
            f"({config.max_output_len}) and will be truncated.",
            Seq2SeqLrpWarning,
        )


@app.command()
@click.option(
    "--corpus",
    "corpus_path",
    type=EXISTING_FILE_PATH,
    required=True,
    help="Path to the corpus file, e.g., corpus.jsonl.",
)
@click.option(
    "--vocab",
    "vocab_path",
    type=EXISTING_FILE_PATH,
    help="(Optional) Path to the vocabulary file, which sets the vocabulary size.",
)
@click.option(
    "--config", "config_path", type=EXISTING_FILE_PATH, help="(Optional) YAML configuration file."
)
@click.option("--out", required=True, help="Output directory, created if it doesn't exist.")
@click.option("--seed", type=int, help="(Optional) Seed of the initialization and text order.")
@click.option("--epochs", type=int, help="(Optional) Number of epochs. Defaults to 40.")
@click.option("--learning-rate", type=float, help="(Optional) SGD step. Defaults to 0.5.")
@click.option("--embed-dim", type=int, help="(Optional) Embedding size. Defaults to 16.")
@click.option("--hidden-dim", type=int, help="(Optional) LSTM state size. Defaults to 32.")
@click.option("--max-input-len", type=int, help="(Optional) Encoder window. Defaults to 64.")
@click.option("--max-output-len", type=int, help="(Optional) Decoding steps. Defaults to 24.")
@click.option("--maps", type=int, help="(Optional) Saliency maps per text stored with the model.")
@log_args(L)
def train(
    corpus_path,
    vocab_path,
    config_path,
    out,
    seed,
    epochs,
    learning_rate,
    embed_dim,
    hidden_dim,
    max_input_len,
    max_output_len,
    maps,
):  # pylint: disable=too-many-arguments,too-many-locals
    """
    Train a summarizer on a corpus with teacher forcing.

    The loss is the mean cross-entropy of the target summary tokens. The weights are updated
    after every text by stochastic gradient descent with gradient norm clipping. The last
    texts of the corpus (10% by default) are held out to measure the trigger accuracy, i.e.,
    the fraction of texts whose summary holds the tokens planted by their keywords.
    """
    file_config = load_config_file(config_path)
    L.info("Loading corpus ...")
    pairs = load_corpus(corpus_path)
    if not pairs:
        raise Seq2SeqLrpError(f"The corpus {corpus_path} is empty.")
    vocab = None if vocab_path is None else Vocab.load(vocab_path)
    config = _model_config(
        file_config,
        {
            "embed_dim": embed_dim,
            "hidden_dim": hidden_dim,
            "max_input_len": max_input_len,
            "max_output_len": max_output_len,
            "maps_per_text": maps,
        },
        vocab,
        pairs,
    )
    _check_corpus(pairs, config)
    training_section = merge_section(
        file_config, "training", {"epochs": epochs, "learning_rate": learning_rate}
    )
    hyperparams = TrainingHyperparams.from_dict(_with_seed(training_section, seed, file_config))
    train_pairs, held_out = split_corpus(pairs, hyperparams.held_out_fraction)
    out_dir = prepare_output_dir(out)

    L.info("Training on %d texts, %d held out ...", len(train_pairs), len(held_out))
    weights, report = train_toy(train_pairs, config, hyperparams, held_out)

    L.info("Saving weights and training report to %s", out_dir)
    save_weights(out_dir / WEIGHTS_FILENAME, weights)
    with open(Path(out_dir, TRAIN_REPORT_FILENAME), "w", encoding="utf-8") as file_:
        json.dump(
            to_builtin({**report.to_dict(), "training_texts": len(train_pairs)}),
            file_,
            indent=2,
        )
        file_.write("\n")

    write_effective_config(
        out_dir,
        RunConfig(
            command="train",
            paths={
                "corpus": str(corpus_path),
                "vocab": "" if vocab_path is None else str(vocab_path),
                "out": str(out),
            },
            model=config,
            training=hyperparams,
            seed=hyperparams.seed,
        ),
    )
