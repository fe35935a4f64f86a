"""test aggregation"""
import numpy as np
import numpy.testing as npt
import pytest

import seq2seq_lrp.saliency.aggregation as tested
from seq2seq_lrp.exceptions import Seq2SeqLrpError
from seq2seq_lrp.model.vocab import PAD_ID, SPECIAL_IDS
from tests.model_tools import make_stack


class Test_aggregate:
    def test_abs_mean(self):
        aggregated = tested.aggregate(make_stack([[1.0, -2.0], [1.0, -2.0]]))
        npt.assert_array_equal(aggregated.scores, [1.0, 2.0])
        assert aggregated.mode.name == tested.ABS_MEAN

    def test_raw_mean_cancels(self):
        stack = make_stack([[1.0, -2.0], [-1.0, 2.0]])
        raw = tested.aggregate(stack, tested.AggregationMode(tested.RAW_MEAN))
        npt.assert_array_equal(raw.scores, [0.0, 0.0])
        npt.assert_array_equal(tested.aggregate(stack).scores, [1.0, 2.0])

    def test_scaled_abs(self):
        stack = make_stack([[2.0, -2.0]])
        npt.assert_array_equal(
            tested.aggregate(stack, tested.AggregationMode(tested.SCALED_ABS)).scores, [2.0, 1.0]
        )
        npt.assert_array_equal(
            tested.aggregate(stack, tested.AggregationMode(tested.SCALED_ABS, 0.0)).scores,
            [2.0, 0.0],
        )

    def test_abs_mean_ignores_the_sign(self):
        maps = np.random.default_rng(0).normal(size=(3, 5))
        npt.assert_array_equal(
            tested.aggregate(make_stack(-maps)).scores, tested.aggregate(make_stack(maps)).scores
        )

    @pytest.mark.parametrize("scale", [0.01, 3.0, 250.0])
    def test_ranking_ignores_positive_scaling(self, scale):
        maps = np.random.default_rng(1).normal(size=(3, 6))
        stack = make_stack(maps)
        scaled = make_stack(scale * maps)
        for mode in (tested.AggregationMode(), tested.AggregationMode(tested.SCALED_ABS, 0.25)):
            assert tested.rank_tokens(
                tested.aggregate(scaled, mode), scaled.input_ids, SPECIAL_IDS
            ) == tested.rank_tokens(tested.aggregate(stack, mode), stack.input_ids, SPECIAL_IDS)


class Test_parse_aggregation:
    def test_valid(self):
        assert tested.parse_aggregation("abs") == tested.AggregationMode(tested.ABS_MEAN)
        assert tested.parse_aggregation(" raw ").name == tested.RAW_MEAN
        assert tested.parse_aggregation("scaled").factor == tested.DEFAULT_NEGATIVE_FACTOR
        assert tested.parse_aggregation("scaled:0.25") == tested.AggregationMode(
            tested.SCALED_ABS, 0.25
        )
        assert tested.parse_aggregation("scaled_abs:0.3").factor == 0.3

    def test_str(self):
        for value in ("abs", "raw", "scaled:0.25"):
            assert str(tested.parse_aggregation(value)) == value

    @pytest.mark.parametrize("value", ["median", "scaled:x", "scaled:2", "scaled:-0.5"])
    def test_invalid(self, value):
        with pytest.raises(Seq2SeqLrpError):
            tested.parse_aggregation(value)


class Test_rank_positions:
    def test_decreasing_scores(self):
        ranks = tested.rank_positions(np.array([0.5, 2.0, 1.0]), np.array([3, 4, 5]), SPECIAL_IDS)
        assert ranks == [1, 2, 0]

    def test_ties_by_position(self):
        assert tested.rank_positions(np.array([1.0, 1.0]), np.array([3, 4]), SPECIAL_IDS) == [0, 1]

    def test_padding_is_excluded(self):
        ranks = tested.rank_positions(
            np.array([0.1, 5.0, 0.2]), np.array([3, PAD_ID, 4]), SPECIAL_IDS
        )
        assert ranks == [2, 0]

    def test_length_mismatch(self):
        with pytest.raises(Seq2SeqLrpError, match="do not match"):
            tested.rank_positions(np.ones(2), np.array([3, 4, 5]), SPECIAL_IDS)


def test_rank_tokens():
    stack = make_stack([[1.0, -3.0, 2.0]])
    assert tested.rank_tokens(tested.aggregate(stack), stack.input_ids, SPECIAL_IDS) == [1, 2, 0]
