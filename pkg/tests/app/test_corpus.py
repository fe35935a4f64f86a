"""test app/corpus"""
import json
from pathlib import Path

import yaml
from click.testing import CliRunner

import seq2seq_lrp.app.corpus as tested
from seq2seq_lrp.model.vocab import STOP_ID, Vocab
from seq2seq_lrp.model.weights import ModelConfig, load_weights
from seq2seq_lrp.training.corpus import load_corpus, save_corpus
from tests.model_tools import pairs_from_lists

TRAIN_FLAGS = [
    "--epochs",
    "1",
    "--embed-dim",
    "2",
    "--hidden-dim",
    "3",
    "--max-input-len",
    "10",
    "--max-output-len",
    "3",
]


def get_result_gen_corpus(runner, *extra):
    return runner.invoke(tested.app, ["gen-corpus", "--out", "corpus", *extra])


def get_result_train(runner, *extra):
    return runner.invoke(
        tested.app,
        [
            "train",
            "--corpus",
            str(Path("corpus", "corpus.jsonl")),
            "--vocab",
            str(Path("corpus", "vocab.txt")),
            "--out",
            "model",
            *TRAIN_FLAGS,
            *extra,
        ],
    )


def _read_config(directory):
    return yaml.safe_load(Path(directory, "config.yaml").read_text(encoding="utf-8"))


def _write_config(content):
    Path("config.yaml").write_text(yaml.safe_dump(content), encoding="utf-8")


class Test_gen_corpus:
    def test_outputs(self):
        runner = CliRunner()
        with runner.isolated_filesystem():
            result = get_result_gen_corpus(runner, "--num-texts", "3", "--text-len", "6")
            assert result.exit_code == 0, result.output
            pairs = load_corpus(Path("corpus", "corpus.jsonl"))
            assert [pair.text_id for pair in pairs] == ["text0", "text1", "text2"]
            for pair in pairs:
                assert len(pair.input_ids) == 6
                assert len(pair.trigger_positions) == 1
            assert len(Vocab.load(Path("corpus", "vocab.txt"))) == 48
            config = _read_config("corpus")
            assert config["command"] == "gen-corpus"
            assert config["corpus"] == {"num_texts": 3, "text_len": 6}
            assert "seed" not in config

    def test_deterministic(self):
        runner = CliRunner()
        with runner.isolated_filesystem():
            result = get_result_gen_corpus(runner, "--num-texts", "4", "--seed", "3")
            assert result.exit_code == 0, result.output
            first = Path("corpus", "corpus.jsonl").read_bytes()
            result = get_result_gen_corpus(runner, "--num-texts", "4", "--seed", "3")
            assert result.exit_code == 0, result.output
            assert Path("corpus", "corpus.jsonl").read_bytes() == first

    def test_seed_precedence(self):
        runner = CliRunner()
        with runner.isolated_filesystem():
            _write_config({"seed": 5, "corpus": {"num_texts": 3}})
            result = get_result_gen_corpus(runner, "--config", "config.yaml")
            assert result.exit_code == 0, result.output
            config = _read_config("corpus")
            assert config["seed"] == 5
            assert config["corpus"]["seed"] == 5

            result = get_result_gen_corpus(runner, "--config", "config.yaml", "--seed", "7")
            assert result.exit_code == 0, result.output
            assert _read_config("corpus")["corpus"]["seed"] == 7

            _write_config({"seed": 5, "corpus": {"num_texts": 3, "seed": 9}})
            result = get_result_gen_corpus(runner, "--config", "config.yaml")
            assert result.exit_code == 0, result.output
            assert _read_config("corpus")["corpus"]["seed"] == 9

    def test_invalid_configuration(self):
        runner = CliRunner()
        with runner.isolated_filesystem():
            _write_config({"corpus": {"colour": 1}})
            result = get_result_gen_corpus(runner, "--config", "config.yaml")
            assert result.exit_code == 2
            assert "Unknown corpus configuration keys" in result.output

            result = get_result_gen_corpus(runner, "--num-texts", "0")
            assert result.exit_code == 2
            assert "num_texts must be a positive integer" in result.output

    def test_blank_texts(self):
        runner = CliRunner()
        with runner.isolated_filesystem():
            result = get_result_gen_corpus(runner, "--num-texts", "3", "--num-blank-texts", "2")
            assert result.exit_code == 0, result.output
            pairs = load_corpus(Path("corpus", "corpus.jsonl"))
            assert len(pairs) == 5
            blanks = [pair for pair in pairs if pair.text_id.startswith("blank")]
            assert [pair.text_id for pair in blanks] == ["blank0", "blank1"]
            for pair in blanks:
                assert pair.target_ids == [STOP_ID]
                assert pair.trigger_positions == []
            assert _read_config("corpus")["corpus"]["num_blank_texts"] == 2

    def test_corpus_must_fit_the_model(self):
        runner = CliRunner()
        with runner.isolated_filesystem():
            _write_config({"model": {"max_input_len": 5}, "corpus": {"text_len": 6}})
            result = get_result_gen_corpus(runner, "--config", "config.yaml")
            assert result.exit_code == 2
            assert "text_len (6) exceeds max_input_len (5)" in result.output
            assert not Path("corpus", "corpus.jsonl").exists()

    def test_missing_out(self):
        runner = CliRunner()
        with runner.isolated_filesystem():
            result = runner.invoke(tested.app, ["gen-corpus"])
            assert result.exit_code == 1


class Test_train:
    def test_outputs(self):
        runner = CliRunner()
        with runner.isolated_filesystem():
            result = get_result_gen_corpus(runner, "--num-texts", "10")
            assert result.exit_code == 0, result.output
            result = get_result_train(runner)
            assert result.exit_code == 0, result.output

            weights = load_weights(Path("model", "weights.bin"))
            assert weights.config == ModelConfig(48, 2, 3, 10, 3, 3)
            report = json.loads(Path("model", "train_report.json").read_text(encoding="utf-8"))
            assert len(report["losses"]) == 1
            assert report["training_texts"] == 9
            assert report["held_out"]
            assert report["evaluated_texts"] == 1

            config = _read_config("model")
            assert config["command"] == "train"
            assert config["model"]["maps_per_text"] == 3
            assert config["training"]["epochs"] == 1
            assert config["seed"] == 0

    def test_maps_flag(self):
        runner = CliRunner()
        with runner.isolated_filesystem():
            get_result_gen_corpus(runner, "--num-texts", "2")
            result = get_result_train(runner, "--maps", "2")
            assert result.exit_code == 0, result.output
            assert load_weights(Path("model", "weights.bin")).config.maps_per_text == 2

            result = get_result_train(runner, "--maps", "4")
            assert result.exit_code == 2
            assert "maps_per_text (4) cannot exceed max_output_len (3)" in result.output

    def test_empty_corpus(self):
        runner = CliRunner()
        with runner.isolated_filesystem():
            get_result_gen_corpus(runner, "--num-texts", "2")
            save_corpus(Path("corpus", "corpus.jsonl"), [])
            result = get_result_train(runner)
            assert result.exit_code == 2
            assert "is empty" in result.output
            assert not Path("model", "weights.bin").exists()

    def test_out_of_vocabulary(self):
        runner = CliRunner()
        with runner.isolated_filesystem():
            get_result_gen_corpus(runner, "--num-texts", "2")
            save_corpus(Path("corpus", "corpus.jsonl"), pairs_from_lists([[3, 60]], [[11]]))
            result = get_result_train(runner)
            assert result.exit_code == 2
            assert "out of the vocabulary range" in result.output
