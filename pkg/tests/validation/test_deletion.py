"""test deletion"""
import numpy.testing as npt
import pytest

import seq2seq_lrp.validation.deletion as tested
from seq2seq_lrp.exceptions import Seq2SeqLrpError
from seq2seq_lrp.model.vocab import PAD_ID, STOP_ID, UNKNOWN_ID
from seq2seq_lrp.utils import round_half_up
from tests.model_tools import emitting_weights, micro_config, micro_weights


class Test_delete_tokens:
    def test_remove(self):
        actual = tested.delete_tokens([3, 4, 5, 6], [1], tested.REMOVE)
        npt.assert_array_equal(actual, [3, 5, 6, PAD_ID])
        actual = tested.delete_tokens([3, 4, 5, PAD_ID], [2, 0], tested.REMOVE)
        npt.assert_array_equal(actual, [4, PAD_ID, PAD_ID, PAD_ID])

    def test_replace(self):
        actual = tested.delete_tokens([3, 4, 5, 6], [1, 3], tested.REPLACE)
        npt.assert_array_equal(actual, [3, UNKNOWN_ID, 5, UNKNOWN_ID])

    def test_nothing_to_delete(self):
        npt.assert_array_equal(tested.delete_tokens([3, 4], [], tested.REMOVE), [3, 4])

    def test_invalid_positions(self):
        with pytest.raises(Seq2SeqLrpError, match="out of range"):
            tested.delete_tokens([3, 4], [2], tested.REMOVE)
        with pytest.raises(Seq2SeqLrpError, match="special token"):
            tested.delete_tokens([3, PAD_ID], [1], tested.REPLACE)
        with pytest.raises(Seq2SeqLrpError, match="Unknown deletion mode"):
            tested.delete_tokens([3, 4], [0], "shuffle")


@pytest.mark.parametrize(
    "fraction,length,expected",
    [
        (0.07, 10, 1),
        (0.07, 100, 7),
        (0.05, 10, 1),
        (0.1, 25, 3),
        (0.01, 3, 0),
        (0.03, 10, 0),
        (0.07, 1, 0),
        (1.0, 4, 4),
        (0.5, 0, 0),
    ],
)
def test_deletion_count(fraction, length, expected):
    assert tested.deletion_count(fraction, length) == expected


def test_select_positions():
    assert tested.select_positions([5, 2, 7, 1], 0.5, tested.MOST_IMPORTANT) == [2, 5]
    assert tested.select_positions([5, 2, 7, 1], 0.5, tested.LEAST_IMPORTANT) == [1, 7]
    assert tested.select_positions([], 0.5, tested.MOST_IMPORTANT) == []
    assert tested.select_positions([0], 0.07, tested.MOST_IMPORTANT) == []
    assert tested.select_positions([0], 0.07, tested.LEAST_IMPORTANT) == []


@pytest.mark.parametrize("fraction", tested.DEFAULT_FRACTIONS + (0.25, 0.5, 0.6, 1.0))
def test_selected_positions_per_direction(fraction):
    for length in range(1, 41):
        ranking = list(range(length))[::-1]
        most = tested.select_positions(ranking, fraction, tested.MOST_IMPORTANT)
        least = tested.select_positions(ranking, fraction, tested.LEAST_IMPORTANT)
        count = round_half_up(fraction * length)
        assert len(most) == len(least) == count
        if 2 * count <= length:
            assert not set(most) & set(least)


def test_type_positions():
    assert tested.type_positions([3, 4, 3, 5, PAD_ID], [0]) == [0, 2]
    assert tested.type_positions([3, 4, 3, 5, PAD_ID], [3, 1]) == [1, 3]
    assert tested.type_positions([3, 4], []) == []


class Test_metrics:
    def test_partial_overlap(self):
        metrics = tested.degradation_metrics([3, 4, 5, 6], [5, 6, 7, 8])
        assert metrics.token_jaccard == pytest.approx(2 / 6)
        assert metrics.unigram_overlap_f1 == pytest.approx(0.5)
        assert metrics.unknown_rate == 0.0
        assert metrics.repetition_rate == 0.0

    def test_identical(self):
        metrics = tested.degradation_metrics([3, 4, 4], [3, 4, 4])
        assert metrics.token_jaccard == 1.0
        assert metrics.unigram_overlap_f1 == 1.0

    def test_clipped_counts(self):
        expected = 2 * 0.25 * 0.5 / 0.75
        assert tested.unigram_overlap_f1([3, 4], [3, 3, 3, 3]) == pytest.approx(expected)

    def test_unknown_and_repetition(self):
        metrics = tested.degradation_metrics([3, 4], [UNKNOWN_ID] * 4)
        assert metrics.unknown_rate == 1.0
        assert metrics.repetition_rate == 0.5
        assert metrics.token_jaccard == 0.0

    def test_empty_summaries(self):
        assert tested.token_jaccard([], []) == 1.0
        assert tested.unigram_overlap_f1([], []) == 1.0
        metrics = tested.degradation_metrics([3], [])
        assert metrics.token_jaccard == 0.0
        assert metrics.unigram_overlap_f1 == 0.0
        assert metrics.unknown_rate == 0.0


def test_truthfulness_verdict():
    assert tested.truthfulness_verdict(0.9, 0.5) == tested.TRUTHFUL
    assert tested.truthfulness_verdict(0.6, 0.5) == tested.NOT_DISTINGUISHABLE
    assert tested.truthfulness_verdict(1.0, 0.75, margin=0.25) == tested.TRUTHFUL
    assert tested.truthfulness_verdict(0.5, 0.9) == tested.NOT_DISTINGUISHABLE


def test_parse_mode():
    assert tested.parse_mode("remove") == tested.REMOVE
    assert tested.parse_mode("replace") == tested.REPLACE
    with pytest.raises(Seq2SeqLrpError):
        tested.parse_mode("drop")


def test_parse_level():
    assert tested.parse_level("type") == tested.TYPE_LEVEL
    assert tested.parse_level("position") == tested.POSITION_LEVEL
    with pytest.raises(Seq2SeqLrpError, match="Unknown deletion level"):
        tested.parse_level("word")


def test_invalid_spec():
    invalid = (
        {"fraction": 0.0},
        {"fraction": 1.5},
        {"direction": "middle"},
        {"mode": "x"},
        {"level": "w"},
    )
    for kwargs in invalid:
        with pytest.raises(Seq2SeqLrpError):
            tested.DeletionSpec(**kwargs)


def test_sweep_specs():
    specs = tested.sweep_specs()
    assert len(specs) == 2 * len(tested.DEFAULT_FRACTIONS)
    assert specs[0] == tested.DeletionSpec(0.01, tested.MOST_IMPORTANT, tested.REMOVE)
    assert specs[1] == tested.DeletionSpec(0.01, tested.LEAST_IMPORTANT, tested.REMOVE)
    assert len(tested.sweep_specs([0.5], [tested.REMOVE, tested.REPLACE])) == 4
    specs = tested.sweep_specs([0.5], [tested.REPLACE], tested.TYPE_LEVEL)
    assert [spec.level for spec in specs] == [tested.TYPE_LEVEL] * 2


class Test_run_deletion_experiment:
    def test_default_specs(self):
        # 7% of 4 tokens rounds to no token
        ranked, results = tested.run_deletion_experiment(
            [3, 4, 5, 6], emitting_weights(5), micro_config()
        )
        assert ranked.baseline.summary_ids == [5, 5, 5]
        assert sorted(ranked.ranking) == [0, 1, 2, 3]
        assert [result.spec.direction for result in results] == list(tested.DIRECTIONS)
        for result in results:
            assert result.deleted_positions == []
            npt.assert_array_equal(result.perturbed_input, [3, 4, 5, 6])
            assert result.perturbed_ids == result.baseline_ids == [5, 5, 5]
            assert result.metrics.token_jaccard == 1.0

    def test_quarter(self):
        specs = [tested.DeletionSpec(0.25, direction) for direction in tested.DIRECTIONS]
        ranked, results = tested.run_deletion_experiment(
            [3, 4, 5, 6], emitting_weights(5), micro_config(), specs=specs
        )
        assert results[0].deleted_positions == [ranked.ranking[0]]
        assert results[1].deleted_positions == [ranked.ranking[-1]]

    def test_type_level(self):
        ids = [3, 4, 3, 4]
        specs = [
            tested.DeletionSpec(0.25, direction, tested.REPLACE, tested.TYPE_LEVEL)
            for direction in tested.DIRECTIONS
        ]
        ranked, results = tested.run_deletion_experiment(
            ids, emitting_weights(5), micro_config(), specs=specs
        )
        for result, position in zip(results, (ranked.ranking[0], ranked.ranking[-1])):
            expected = [t for t, id_ in enumerate(ids) if id_ == ids[position]]
            assert len(expected) == 2
            assert result.deleted_positions == expected
            npt.assert_array_equal(result.perturbed_input[expected], [UNKNOWN_ID] * 2)

    def test_padding_is_never_deleted(self):
        ranked, results = tested.run_deletion_experiment(
            [3, 4], emitting_weights(5), micro_config(), specs=[tested.DeletionSpec(fraction=1.0)]
        )
        assert sorted(ranked.ranking) == [0, 1]
        assert results[0].deleted_positions == [0, 1]
        npt.assert_array_equal(results[0].perturbed_input, [PAD_ID] * 4)

    def test_full_fraction_directions_agree(self):
        specs = [
            tested.DeletionSpec(1.0, direction, tested.REPLACE) for direction in tested.DIRECTIONS
        ]
        _, results = tested.run_deletion_experiment(
            [3, 4, 5], emitting_weights(5, seed=2), micro_config(), specs=specs
        )
        assert results[0].deleted_positions == results[1].deleted_positions == [0, 1, 2]
        assert results[0].perturbed_ids == results[1].perturbed_ids
        assert results[0].metrics == results[1].metrics

    def test_empty_summary(self):
        weights = micro_weights()
        weights.b_out[STOP_ID] = 40.0
        with pytest.raises(Seq2SeqLrpError, match="empty summary"):
            tested.run_deletion_experiment([3, 4], weights, micro_config())

    def test_sweep(self):
        ranked, results = tested.run_deletion_sweep(
            [3, 4, 5, 6], emitting_weights(5), micro_config(), fractions=[0.25, 0.5]
        )
        assert len(results) == 4
        assert len(ranked.stack) == 2
        assert [len(result.deleted_positions) for result in results] == [1, 1, 2, 2]
