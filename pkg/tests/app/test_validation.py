"""test app/validation"""
from pathlib import Path
from unittest.mock import patch

import pandas as pd
import pytest
import yaml
from click.testing import CliRunner

import seq2seq_lrp.app.validation as tested
from seq2seq_lrp.exceptions import Seq2SeqLrpWarning
from seq2seq_lrp.training.corpus import (
    SyntheticCorpusSpec,
    generate_synthetic_corpus,
    load_corpus,
    save_corpus,
)
from seq2seq_lrp.utils import read_jsonl
from seq2seq_lrp.validation.deletion import (
    LEAST_IMPORTANT,
    MOST_IMPORTANT,
    NOT_DISTINGUISHABLE,
    POSITION_LEVEL,
    REMOVE,
    REPLACE,
    TYPE_LEVEL,
)
from seq2seq_lrp.validation.records import RESULT_FIELDS, SUMMARY_COLUMNS
from tests.model_tools import emitting_weights, micro_config, write_model_files

CONFIG = micro_config(vocab_size=48, max_input_len=10)


def _write_model():
    spec = SyntheticCorpusSpec.default(num_texts=3)
    write_model_files(
        "model", emitting_weights(11, CONFIG), spec.vocab(), generate_synthetic_corpus(spec)
    )


def get_result_validate(runner, *extra):
    return runner.invoke(
        tested.app,
        [
            "validate",
            "--weights",
            str(Path("model", "weights.bin")),
            "--vocab",
            str(Path("model", "vocab.txt")),
            "--corpus",
            str(Path("model", "corpus.jsonl")),
            "--out",
            "validation",
            *extra,
        ],
    )


def get_result_report(runner, out="report"):
    return runner.invoke(tested.app, ["report", "--validation-dir", "validation", "--out", out])


def yaml_config(directory):
    return yaml.safe_load(Path(directory, "config.yaml").read_text(encoding="utf-8"))


class Test_validate:
    def test_outputs(self):
        runner = CliRunner()
        with runner.isolated_filesystem():
            _write_model()
            result = get_result_validate(runner, "--fractions", "0.1,0.5")
            assert result.exit_code == 0, result.output

            records = read_jsonl(Path("validation", "validation_results.jsonl"))
            assert len(records) == 3 * 2 * 2
            assert list(records[0]) == list(RESULT_FIELDS)
            assert [(r["fraction"], r["direction"]) for r in records[:4]] == [
                (0.1, MOST_IMPORTANT),
                (0.1, LEAST_IMPORTANT),
                (0.5, MOST_IMPORTANT),
                (0.5, LEAST_IMPORTANT),
            ]
            assert [len(r["deleted_positions"]) for r in records[:4]] == [1, 1, 5, 5]
            for record in records:
                assert record["mode"] == REMOVE
                # the summary does not depend on the input
                assert record["token_jaccard"] == 1.0
                assert record["verdict"] == NOT_DISTINGUISHABLE

            summary = pd.read_csv(Path("validation", "validation_summary.csv"))
            assert list(summary.columns) == list(SUMMARY_COLUMNS)
            assert len(summary) == 3
            assert (summary["verdict"] == NOT_DISTINGUISHABLE).all()

            config = yaml_config("validation")
            assert config["validation"] == {
                "fractions": [0.1, 0.5],
                "modes": [REMOVE],
                "level": POSITION_LEVEL,
                "margin": 0.2,
            }

    def test_modes_keep_their_order(self):
        runner = CliRunner()
        with runner.isolated_filesystem():
            _write_model()
            result = get_result_validate(
                runner, "--fractions", "0.1", "--mode", "replace", "--mode", "remove"
            )
            assert result.exit_code == 0, result.output
            records = read_jsonl(Path("validation", "validation_results.jsonl"))
            assert [r["mode"] for r in records[:4]] == [REPLACE, REPLACE, REMOVE, REMOVE]

    def test_word_types(self):
        runner = CliRunner()
        with runner.isolated_filesystem():
            _write_model()
            result = get_result_validate(runner, "--fractions", "0.1", "--word-types")
            assert result.exit_code == 0, result.output
            records = read_jsonl(Path("validation", "validation_results.jsonl"))
            assert records
            for record in records:
                assert record["level"] == TYPE_LEVEL
                assert len(record["deleted_positions"]) >= 1
            assert yaml_config("validation")["validation"]["level"] == TYPE_LEVEL

    def test_progress_follows_the_work(self):
        events = []
        validate_text = tested.validate_text

        def progress(iterable, **_):
            for item in iterable:
                events.append("bar")
                yield item

        def work(*args):
            events.append("work")
            return validate_text(*args)

        runner = CliRunner()
        with runner.isolated_filesystem():
            _write_model()
            with patch("seq2seq_lrp.app.validation.tqdm", new=progress), patch(
                "seq2seq_lrp.app.validation.validate_text", new=work
            ):
                result = get_result_validate(runner, "--fractions", "0.1", "--n-jobs", "1")
            assert result.exit_code == 0, result.output
            assert events.count("bar") == events.count("work") == 3
            # the bar advances while texts are being validated, not after
            assert events.index("work") < len(events) - 1 - events[::-1].index("bar")

    def test_empty_corpus(self):
        runner = CliRunner()
        with runner.isolated_filesystem():
            _write_model()
            save_corpus(Path("model", "corpus.jsonl"), [])
            with pytest.warns(Seq2SeqLrpWarning, match="empty"):
                result = get_result_validate(runner)
            assert result.exit_code == 0, result.output
            assert read_jsonl(Path("validation", "validation_results.jsonl")) == []

    def test_invalid_fractions(self):
        runner = CliRunner()
        with runner.isolated_filesystem():
            _write_model()
            result = get_result_validate(runner, "--fractions", "0.1,2")
            assert result.exit_code == 2
            assert "(0, 1]" in result.output
            result = get_result_validate(runner, "--mode", "shuffle")
            assert result.exit_code == 1


class Test_report:
    def test_report(self):
        runner = CliRunner()
        with runner.isolated_filesystem():
            _write_model()
            assert get_result_validate(runner).exit_code == 0
            result = get_result_report(runner)
            assert result.exit_code == 0, result.output
            text = Path("report", "report.txt").read_text(encoding="utf-8")
            assert text in result.output
            assert "Truthful attributions: 0 of 3 texts (0.0%)" in text
            for pair in load_corpus(Path("model", "corpus.jsonl")):
                assert f"[{pair.text_id}] {NOT_DISTINGUISHABLE}" in text
            assert "baseline:" in text
            assert "sum0 sum0 sum0" in text
            assert yaml_config("report")["command"] == "report"

    def test_empty_validation(self):
        runner = CliRunner()
        with runner.isolated_filesystem():
            _write_model()
            save_corpus(Path("model", "corpus.jsonl"), [])
            with pytest.warns(Seq2SeqLrpWarning):
                get_result_validate(runner)
            result = get_result_report(runner)
            assert result.exit_code == 0, result.output
            assert "No text was validated." in result.output

    def test_output_is_the_validation_dir(self):
        runner = CliRunner()
        with runner.isolated_filesystem():
            _write_model()
            get_result_validate(runner, "--fractions", "0.1")
            result = get_result_report(runner, out="validation")
            assert result.exit_code == 1
            assert not Path("validation", "report.txt").exists()

    def test_missing_results(self):
        runner = CliRunner()
        with runner.isolated_filesystem():
            Path("validation").mkdir()
            result = get_result_report(runner)
            assert result.exit_code == 2
            assert "Missing validation output" in result.output
