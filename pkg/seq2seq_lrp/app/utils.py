"""Helpers shared by the commands: exit codes, configuration files and text sources.

Configuration precedence is: command-line flags, then the configuration file given with
--config, then built-in defaults. The effective configuration of every command is written to
`<out>/config.yaml`.

The configuration file is a YAML document with the optional sections

    model: {vocab_size, embed_dim, hidden_dim, max_input_len, max_output_len, maps_per_text}
    lrp: {epsilon, attention_path_enabled, steps_back, bias_redistribution}
    training: {learning_rate, epochs, seed, clip_norm, init_scale, held_out_fraction}
    corpus: {vocab_size, num_keywords, num_texts, text_len, num_triggers, summary_len,
             num_blank_texts, seed}
    validation: {fractions, modes, margin, level}
    aggregation: abs | raw | scaled:<factor>
    seed: <int>
"""
from __future__ import annotations

import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import click
import yaml  # type: ignore

from seq2seq_lrp.exceptions import NumericalError, Seq2SeqLrpError
from seq2seq_lrp.model.vocab import Vocab
from seq2seq_lrp.model.weights import ModelConfig
from seq2seq_lrp.relevance.propagation import LrpConfig
from seq2seq_lrp.saliency.aggregation import AggregationMode, parse_aggregation
from seq2seq_lrp.training.corpus import CorpusPair, load_corpus, texts_from_file
from seq2seq_lrp.training.trainer import TrainingHyperparams
from seq2seq_lrp.utils import PathLike
from seq2seq_lrp.validation.deletion import (
    DEFAULT_FRACTIONS,
    DEFAULT_MARGIN,
    POSITION_LEVEL,
    REMOVE,
    DeletionSpec,
    parse_level,
    parse_mode,
    sweep_specs,
)

L = logging.getLogger(__name__)

EXIT_SUCCESS = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3

CONFIG_SECTIONS = ("model", "lrp", "training", "corpus", "validation", "aggregation", "seed")
CONFIG_FILENAME = "config.yaml"
EXISTING_DIR_PATH = click.Path(exists=True, file_okay=False, resolve_path=True)


class Seq2SeqLrpGroup(click.Group):
    """
    Command group mapping errors to exit codes.

    1 for usage errors and aborted runs, 2 for data errors, 3 for numerical failures. Error
    messages are written to standard error.
    """

    def main(  # pylint: disable=arguments-differ
        self,
        args: Optional[Sequence[str]] = None,
        prog_name: Optional[str] = None,
        complete_var: Optional[str] = None,
        standalone_mode: bool = True,
        **extra: Any,
    ) -> Any:
        try:
            result = super().main(
                args=args,
                prog_name=prog_name,
                complete_var=complete_var,
                standalone_mode=False,
                **extra,
            )
        except click.exceptions.Abort:
            click.echo("Aborted!", err=True)
            sys.exit(EXIT_USAGE)
        except click.ClickException as error:
            error.show()
            sys.exit(EXIT_USAGE)
        except NumericalError as error:
            click.echo(f"Numerical failure: {error}", err=True)
            sys.exit(EXIT_NUMERICAL)
        except (Seq2SeqLrpError, OSError) as error:
            click.echo(f"Error: {error}", err=True)
            sys.exit(EXIT_DATA)
        if not standalone_mode:
            return result

        sys.exit(result if isinstance(result, int) else EXIT_SUCCESS)


def load_config_file(path: Optional[PathLike]) -> Dict[str, Any]:
    """
    Load a YAML configuration file, an empty dict if `path` is None.

    Raises:
        Seq2SeqLrpError if the file is not a mapping or holds unknown sections.
    """
    if path is None:
        return {}
    with open(path, "r", encoding="utf-8") as file_:
        try:
            config = yaml.safe_load(file_)
        except yaml.YAMLError as error:
            raise Seq2SeqLrpError(f"Invalid YAML configuration file {path}: {error}") from error
    if config is None:
        return {}
    if not isinstance(config, dict):
        raise Seq2SeqLrpError(f"The configuration file {path} does not hold a mapping.")
    unknown = set(config) - set(CONFIG_SECTIONS)
    if unknown:
        raise Seq2SeqLrpError(
            f"Unknown configuration sections {sorted(unknown)}, expected {CONFIG_SECTIONS}."
        )

    return config


def merge_section(
    file_config: Mapping[str, Any], section: str, flags: Mapping[str, Any]
) -> Dict[str, Any]:
    """
    Values of `section` of the configuration file overridden by the flags which were set.

    Flags whose value is None were not given on the command line.
    """
    values = file_config.get(section) or {}
    if not isinstance(values, dict):
        raise Seq2SeqLrpError(f"The configuration section {section!r} must be a mapping.")

    return {**values, **{key: value for key, value in flags.items() if value is not None}}


def resolve_seed(file_config: Mapping[str, Any], seed: Optional[int]) -> Optional[int]:
    """The --seed flag, otherwise the top level seed of the configuration file."""
    if seed is not None:
        return seed
    value = file_config.get("seed")

    return None if value is None else int(value)


def parse_fractions(value: Any) -> Tuple[float, ...]:
    """Parse a comma-separated list of deletion fractions, or a list of numbers."""
    items = value.split(",") if isinstance(value, str) else list(value)
    try:
        fractions = tuple(float(item) for item in items if str(item).strip())
    except ValueError as error:
        raise Seq2SeqLrpError(f"Invalid deletion fractions {value!r}.") from error
    if not fractions:
        raise Seq2SeqLrpError("At least one deletion fraction is needed.")
    for fraction in fractions:
        if not 0.0 < fraction <= 1.0:
            raise Seq2SeqLrpError(f"Deletion fractions must lie in (0, 1], got {fraction}.")

    return fractions


@dataclass
class RunConfig:  # pylint: disable=too-many-instance-attributes
    """
    Effective configuration of one command.

    Attributes:
        command: name of the command.
        paths: input and output paths.
        model: model dimensions.
        lrp: relevance propagation settings.
        training: training settings.
        corpus: settings of the synthetic corpus.
        fractions: deletion fractions.
        modes: deletion modes.
        level: deletion level, "position" or "type".
        margin: margin of the truthfulness verdict.
        aggregation: aggregation of the saliency maps.
        seed: seed of the corpus and of the training.
    """

    command: str
    paths: Dict[str, str] = field(default_factory=dict)
    model: Optional[ModelConfig] = None
    lrp: Optional[LrpConfig] = None
    training: Optional[TrainingHyperparams] = None
    corpus: Optional[Dict[str, Any]] = None
    fractions: Tuple[float, ...] = DEFAULT_FRACTIONS
    modes: Tuple[str, ...] = (REMOVE,)
    level: str = POSITION_LEVEL
    margin: float = DEFAULT_MARGIN
    aggregation: AggregationMode = field(default_factory=AggregationMode)
    seed: Optional[int] = None

    @property
    def deletion_specs(self) -> List[DeletionSpec]:
        """Deletions of the validation, for both directions."""
        return sweep_specs(self.fractions, self.modes, self.level)

    def to_dict(self) -> Dict[str, Any]:
        """Plain dict of the configuration, sections which are not used being omitted."""
        config: Dict[str, Any] = {"command": self.command, "paths": dict(self.paths)}
        if self.model is not None:
            config["model"] = self.model.to_dict()
        if self.lrp is not None:
            lrp = self.lrp.to_dict()
            lrp.pop("record_packet")
            config["lrp"] = lrp
            config["aggregation"] = str(self.aggregation)
        if self.training is not None:
            config["training"] = self.training.to_dict()
        if self.corpus is not None:
            config["corpus"] = dict(self.corpus)
        if self.command == "validate":
            config["validation"] = {
                "fractions": list(self.fractions),
                "modes": list(self.modes),
                "level": self.level,
                "margin": self.margin,
            }
        if self.seed is not None:
            config["seed"] = self.seed

        return config


def resolve_explanation_config(  # pylint: disable=too-many-arguments
    file_config: Mapping[str, Any],
    model: ModelConfig,
    epsilon: Optional[float],
    maps: Optional[int],
    aggregation: Optional[str],
    no_attention_relevance: bool,
) -> Tuple[ModelConfig, LrpConfig, AggregationMode]:
    """
    Model configuration, relevance settings and aggregation of the explain and validate commands.

    `model` holds the dimensions read from the weights file; only its number of maps per text
    may be overridden.
    """
    model_section = merge_section(file_config, "model", {"maps_per_text": maps})
    if "maps_per_text" in model_section:
        model = model.with_maps_per_text(int(model_section["maps_per_text"]))
    lrp_flags: Dict[str, Any] = {"epsilon": epsilon}
    if no_attention_relevance:
        lrp_flags["attention_path_enabled"] = False
    lrp_config = LrpConfig.from_dict(merge_section(file_config, "lrp", lrp_flags))
    if aggregation is None:
        aggregation = file_config.get("aggregation")

    return (
        model,
        lrp_config,
        AggregationMode() if aggregation is None else parse_aggregation(str(aggregation)),
    )


def resolve_validation_config(
    file_config: Mapping[str, Any],
    fractions: Optional[str],
    modes: Sequence[str],
    margin: Optional[float],
    level: Optional[str] = None,
) -> Tuple[Tuple[float, ...], Tuple[str, ...], float, str]:
    """Deletion fractions, deletion modes, verdict margin and deletion level of validate."""
    section = merge_section(
        file_config,
        "validation",
        {"fractions": fractions, "modes": list(modes) or None, "margin": margin, "level": level},
    )
    unknown = set(section) - {"fractions", "modes", "margin", "level"}
    if unknown:
        raise Seq2SeqLrpError(f"Unknown validation configuration keys: {sorted(unknown)}")
    resolved_modes = section.get("modes", [REMOVE])
    if isinstance(resolved_modes, str):
        resolved_modes = [resolved_modes]

    return (
        parse_fractions(section.get("fractions", DEFAULT_FRACTIONS)),
        tuple(dict.fromkeys(parse_mode(str(mode)) for mode in resolved_modes)),
        float(section.get("margin", DEFAULT_MARGIN)),
        parse_level(str(section.get("level", POSITION_LEVEL))),
    )


def write_effective_config(out_dir: PathLike, run_config: RunConfig) -> Path:
    """Write `<out_dir>/config.yaml` with sorted keys."""
    path = Path(out_dir, CONFIG_FILENAME)
    with open(path, "w", encoding="utf-8") as out:
        yaml.safe_dump(run_config.to_dict(), out, sort_keys=True, default_flow_style=False)

    return path


def prepare_output_dir(out: PathLike, inputs: Sequence[Optional[PathLike]] = ()) -> Path:
    """
    Create the output directory.

    Raises:
        click.UsageError if the output directory is one of the `inputs` directories.
    """
    out_dir = Path(out).resolve()
    for input_ in inputs:
        if input_ is not None and Path(input_).resolve() == out_dir:
            raise click.UsageError(f"The output directory {out} cannot be an input directory.")
    out_dir.mkdir(parents=True, exist_ok=True)

    return out_dir


def load_texts(
    corpus_path: Optional[PathLike], text_file: Optional[PathLike], vocab: Vocab
) -> List[CorpusPair]:
    """
    Texts to process, from a corpus file or from a plain text file.

    Raises:
        click.UsageError unless exactly one source is given.
    """
    if (corpus_path is None) == (text_file is None):
        raise click.UsageError("Exactly one of --corpus and --text-file is required.")
    if corpus_path is not None:
        pairs = load_corpus(corpus_path)
    else:
        pairs = texts_from_file(text_file, vocab)  # type: ignore
    for pair in pairs:
        for id_ in pair.input_ids:
            if not 0 <= id_ < len(vocab):
                raise Seq2SeqLrpError(
                    f"Text {pair.text_id} holds the id {id_}, out of the vocabulary range "
                    f"[0, {len(vocab)})."
                )

    return pairs
