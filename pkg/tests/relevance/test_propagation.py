"""test relevance propagation"""
from dataclasses import replace

import numpy as np
import numpy.testing as npt
import pytest

import seq2seq_lrp.relevance.propagation as tested
from seq2seq_lrp.exceptions import Seq2SeqLrpError
from seq2seq_lrp.model.network import decode_greedy, run_lstm, teacher_forced_tape
from seq2seq_lrp.model.tape import ATTENTION, AttentionRecord, LstmSequenceRecord
from seq2seq_lrp.model.vocab import STOP_ID
from seq2seq_lrp.model.weights import LstmWeights
from seq2seq_lrp.tensor import softmax
from tests.model_tools import (
    emitting_weights,
    micro_config,
    micro_weights,
    zero_bias_weights,
)


def _lstm(bias=None, seed=0):
    rng = np.random.default_rng(seed)
    return LstmWeights(
        rng.normal(size=(8, 2)),
        rng.normal(size=(8, 2)),
        np.zeros(8) if bias is None else bias,
    )


class Test_LrpConfig:
    def test_defaults(self):
        config = tested.LrpConfig()
        assert config.epsilon == 1e-5
        assert config.attention_path_enabled
        assert config.bias_redistribution

    def test_from_dict(self):
        config = tested.LrpConfig.from_dict({"epsilon": "1e-3", "attention_path_enabled": False})
        assert config.epsilon == 1e-3
        assert not config.attention_path_enabled
        with pytest.raises(Seq2SeqLrpError, match="Unknown"):
            tested.LrpConfig.from_dict({"gamma": 0.1})

    def test_invalid(self):
        with pytest.raises(Seq2SeqLrpError):
            tested.LrpConfig(epsilon=-1.0)
        with pytest.raises(Seq2SeqLrpError):
            tested.LrpConfig(steps_back=0)


class Test_lrp_lstm_backward:
    def test_two_steps_conservation(self):
        weights = _lstm()
        rng = np.random.default_rng(1)
        record = run_lstm(weights, rng.normal(size=(2, 2)))
        r_hidden = np.zeros((2, 2))
        r_hidden[-1] = [0.7, -0.2]
        result = tested.lrp_lstm_backward(
            record, weights, r_hidden, tested.LrpConfig(epsilon=0.0)
        )
        total = result.inputs.sum() + result.initial_hidden.sum() + result.initial_cell.sum()
        npt.assert_allclose(total, 0.5, rtol=1e-6)

    def test_closed_forget_gate(self):
        bias = np.zeros(8)
        bias[2:4] = -1000.0
        weights = _lstm(bias)
        record = run_lstm(weights, np.array([[0.5, -1.0]]), c0=np.array([0.4, 0.9]))
        result = tested.lrp_lstm_backward(
            record, weights, np.array([[1.0, 1.0]]), tested.LrpConfig(epsilon=0.0)
        )
        npt.assert_array_equal(result.initial_cell, np.zeros(2))

    def test_closed_input_gate(self):
        bias = np.zeros(8)
        bias[0:2] = -100.0
        weights = _lstm(bias)
        rng = np.random.default_rng(2)
        record = run_lstm(weights, rng.normal(size=(2, 2)), c0=np.array([0.5, -0.8]))
        r_hidden = np.array([[0.0, 0.0], [1.0, 1.0]])
        result = tested.lrp_lstm_backward(record, weights, r_hidden, tested.LrpConfig())
        total = result.inputs.sum() + result.initial_hidden.sum() + result.initial_cell.sum()
        assert abs(result.inputs[-1].sum()) <= 0.01 * abs(total)
        npt.assert_allclose(result.initial_cell.sum(), total, rtol=1e-2)

    def test_linear_in_the_relevance(self):
        weights = _lstm(np.random.default_rng(3).normal(size=8))
        record = run_lstm(weights, np.random.default_rng(4).normal(size=(3, 2)))
        r_hidden = np.random.default_rng(5).normal(size=(3, 2))
        r_cell = np.array([0.2, -0.6])
        config = tested.LrpConfig()
        reference = tested.lrp_lstm_backward(record, weights, r_hidden, config, r_cell)
        for scale in (2.5, -1.0, -0.3):
            scaled = tested.lrp_lstm_backward(
                record, weights, scale * r_hidden, config, scale * r_cell
            )
            npt.assert_allclose(scaled.inputs, scale * reference.inputs, atol=1e-12)
            npt.assert_allclose(scaled.initial_hidden, scale * reference.initial_hidden, atol=1e-12)
            npt.assert_allclose(scaled.initial_cell, scale * reference.initial_cell, atol=1e-12)

    def test_incomplete_fragment(self):
        weights = _lstm()
        record = run_lstm(weights, np.ones((1, 2)))
        broken = LstmSequenceRecord((replace(record.steps[0], candidate=None),))
        with pytest.raises(Seq2SeqLrpError, match="Incomplete tape fragment"):
            tested.lrp_lstm_backward(broken, weights, np.ones((1, 2)), tested.LrpConfig())


def _attention_record(alpha, keys):
    alpha = np.asarray(alpha, dtype=float)
    keys = np.asarray(keys, dtype=float)
    hidden = keys.shape[1] // 2
    return AttentionRecord(
        query=np.zeros(hidden),
        keys=keys,
        query_projection=np.zeros(hidden),
        key_projection=np.zeros((len(keys), hidden)),
        features=np.zeros((len(keys), hidden)),
        energies=np.zeros(len(keys)),
        weights=alpha,
        context=alpha @ keys,
    )


class Test_lrp_attention_backward:
    def test_one_hot(self):
        keys = np.random.default_rng(0).normal(size=(3, 2))
        record = _attention_record([0.0, 1.0, 0.0], keys)
        r_states = tested.lrp_attention_backward(
            record, np.array([0.3, -0.4]), tested.LrpConfig(epsilon=0.0)
        )
        npt.assert_allclose(r_states[1], [0.3, -0.4], rtol=1e-12)
        npt.assert_array_equal(r_states[[0, 2]], np.zeros((2, 2)))

    def test_ablation(self):
        record = _attention_record([0.5, 0.5], np.ones((2, 2)))
        r_states = tested.lrp_attention_backward(
            record, np.ones(2), tested.LrpConfig(attention_path_enabled=False)
        )
        npt.assert_array_equal(r_states, np.zeros((2, 2)))

    def test_uniform_split(self):
        record = _attention_record([0.5, 0.5], [[1.0, 2.0], [1.0, 2.0]])
        r_states = tested.lrp_attention_backward(
            record, np.array([1.0, 3.0]), tested.LrpConfig(epsilon=0.0)
        )
        npt.assert_allclose(r_states[0], r_states[1], atol=1e-9)
        npt.assert_allclose(r_states.sum(axis=0), [1.0, 3.0], rtol=1e-9)

    def test_linear_in_the_relevance(self):
        rng = np.random.default_rng(6)
        record = _attention_record(softmax(rng.normal(size=3)), rng.normal(size=(3, 2)))
        r_context = np.array([0.4, -1.1])
        reference = tested.lrp_attention_backward(record, r_context, tested.LrpConfig())
        for scale in (3.0, -1.0):
            npt.assert_allclose(
                tested.lrp_attention_backward(record, scale * r_context, tested.LrpConfig()),
                scale * reference,
                atol=1e-12,
            )

    def test_missing_weights(self):
        record = _attention_record([1.0], [[1.0, 1.0]])
        broken = replace(record, weights=None)
        with pytest.raises(Seq2SeqLrpError, match="no attention weights"):
            tested.lrp_attention_backward(broken, np.ones(2), tested.LrpConfig())


class Test_relevance_for_token:
    def test_initialization(self):
        weights = micro_weights()
        tape = decode_greedy([5], weights, micro_config()).tape
        result = tested.relevance_for_token(
            tape, 0, weights, tested.LrpConfig(record_packet=True)
        )
        assert result.initial_logit == tape.decoder[0].logits[tape.decoder[0].emitted]
        npt.assert_array_equal(
            result.packet.nodes[("projection", 0, "logit")], [result.initial_logit]
        )
        assert np.all(np.isfinite(result.relevance))
        assert result.relevance[0] != 0.0

    def test_conservation_without_biases(self):
        weights = zero_bias_weights()
        tape = teacher_forced_tape([3, 4, 5], [6, 7, STOP_ID], weights, micro_config())
        for step in range(3):
            result = tested.relevance_for_token(tape, step, weights, tested.LrpConfig(epsilon=0.0))
            injected = result.initial_logit
            recovered = (
                result.relevance.sum()
                + result.previous_token_relevance.sum()
                + result.initial_state_relevance
            )
            npt.assert_allclose(recovered, injected, rtol=1e-4)
            assert result.absorbed_relevance == 0.0

    def test_small_drift_without_redistribution(self):
        weights = zero_bias_weights()
        tape = teacher_forced_tape([3, 4, 5], [6, 7, STOP_ID], weights, micro_config())
        config = tested.LrpConfig(epsilon=1e-5, bias_redistribution=False)
        result = tested.relevance_for_token(tape, 2, weights, config)
        assert abs(result.total - result.initial_logit) <= 1e-2 * abs(result.initial_logit)

    def test_conservation_with_biases(self):
        weights = micro_weights(seed=3)
        tape = teacher_forced_tape([3, 4, 5, 6], [7, 6, 5], weights, micro_config())
        result = tested.relevance_for_token(tape, 2, weights)
        npt.assert_allclose(result.total, result.initial_logit, rtol=1e-6)
        npt.assert_allclose(
            result.relevance, result.forward_relevance + result.backward_relevance, rtol=1e-12
        )

    def test_gate_rule_totality(self):
        weights = micro_weights(seed=1)
        tape = teacher_forced_tape([3, 4, 5, 6], [7, 6, STOP_ID], weights, micro_config())
        for step in range(3):
            result = tested.relevance_for_token(
                tape, step, weights, tested.LrpConfig(record_packet=True)
            )
            assert set(result.packet.gate_nodes) == set(tape.product_nodes(step))
            assert result.packet.gate_total() == 0.0

    def test_attention_ablation(self):
        weights = micro_weights(seed=2)
        tape = teacher_forced_tape([3, 4, 5, 6], [7, 6, 5], weights, micro_config())
        config = tested.LrpConfig(attention_path_enabled=False, record_packet=True)
        result = tested.relevance_for_token(tape, 2, weights, config)

        # the backward encoder is only reached through the attention
        npt.assert_array_equal(result.backward_relevance, np.zeros(4))
        context = sum(result.packet.total((ATTENTION, t, "context")) for t in range(3))
        npt.assert_allclose(result.absorbed_relevance, context, rtol=1e-9, atol=1e-12)
        npt.assert_allclose(result.total, result.initial_logit, rtol=1e-6)
        assert set(result.packet.gate_nodes) == set(tape.product_nodes(2))
        assert result.packet.gate_total() == 0.0

    def test_steps_back(self):
        weights = micro_weights(seed=4)
        tape = teacher_forced_tape([3, 4, 5, 6], [7, 6, 5], weights, micro_config())
        result = tested.relevance_for_token(tape, 2, weights, tested.LrpConfig(steps_back=1))
        npt.assert_array_equal(result.previous_token_relevance[:2], np.zeros(2))
        assert result.absorbed_relevance != 0.0
        npt.assert_allclose(result.total, result.initial_logit, rtol=1e-6)

    def test_invalid_step(self):
        weights = micro_weights()
        tape = decode_greedy([3], weights, micro_config()).tape
        with pytest.raises(Seq2SeqLrpError, match="out of range"):
            tested.relevance_for_token(tape, len(tape.decoder), weights)


class Test_relevance_stack:
    def test_min_rule(self):
        config = micro_config(max_output_len=12, maps_per_text=12)
        weights = emitting_weights(5, config)
        tape = decode_greedy([3, 4], weights, config).tape
        assert len(tested.relevance_stack(tape, weights, config)) == 12

        tape = teacher_forced_tape([3, 4], [5, 6, 7, STOP_ID], weights, config)
        stack = tested.relevance_stack(tape, weights, config)
        assert len(stack) == 3
        assert [map_.emitted_id for map_ in stack.maps] == [5, 6, 7]

    def test_empty_summary(self):
        weights = micro_weights()
        weights.b_out[STOP_ID] = 40.0
        tape = decode_greedy([3, 4], weights, micro_config()).tape
        with pytest.raises(Seq2SeqLrpError, match="empty summary"):
            tested.relevance_stack(tape, weights, micro_config())
