"""test tape"""
import numpy as np
import numpy.testing as npt

import seq2seq_lrp.model.tape as tested
from seq2seq_lrp.model.network import attend, decode_greedy, lstm_step, teacher_forced_tape
from seq2seq_lrp.model.vocab import STOP_ID
from seq2seq_lrp.tensor import affine
from tests.model_tools import emitting_weights, micro_config, micro_weights

STEP_FIELDS = (
    "pre_activation",
    "input_gate",
    "forget_gate",
    "output_gate",
    "candidate",
    "cell",
    "cell_tanh",
    "hidden",
)


def test_summary_excludes_stop():
    tape = teacher_forced_tape([3, 4], [5, STOP_ID, 6], micro_weights(), micro_config())
    assert tape.emitted_ids == [5, STOP_ID, 6]
    assert tape.summary_ids == [5]


def test_lengths():
    tape = decode_greedy([3, 4], micro_weights(), micro_config()).tape
    assert tape.padded_length == 4
    assert tape.effective_length == 2
    assert not tape.truncated
    assert tape.attention_weights.shape == (len(tape.decoder), 4)


def test_product_nodes():
    tape = decode_greedy([3, 4, 5], emitting_weights(6), micro_config()).tape
    nodes = tape.product_nodes(1)
    # 4 encoder positions in both directions, 2 decoding steps with their attention
    assert len(nodes) == 2 * 4 * 3 + 2 * (3 + 1)
    assert (tested.ATTENTION, 1, tested.ATTENTION_PRODUCT) in nodes
    assert (tested.DECODER, 2, "input_gate*candidate") not in nodes
    assert len(set(nodes)) == len(nodes)


def _assert_step_replays(step, lstm_weights):
    replayed = lstm_step(lstm_weights, step.x, step.h_prev, step.c_prev)
    for name in STEP_FIELDS:
        npt.assert_allclose(getattr(replayed, name), getattr(step, name), rtol=0, atol=1e-12)


def test_replay_reproduces_the_outputs():
    weights = micro_weights(seed=5)
    tape = teacher_forced_tape([3, 4, 5], [6, 7, STOP_ID], weights, micro_config())
    for sequence, lstm_weights in (
        (tape.encoder.forward, weights.encoder_fwd),
        (tape.encoder.backward, weights.encoder_bwd),
    ):
        for step in sequence.steps:
            _assert_step_replays(step, lstm_weights)
    for record in tape.decoder:
        attention = attend(weights, record.attention.query, record.attention.keys)
        for name in ("energies", "weights", "context"):
            npt.assert_allclose(
                getattr(attention, name), getattr(record.attention, name), rtol=0, atol=1e-12
            )
        npt.assert_allclose(
            record.lstm.x,
            np.concatenate([record.previous_embedding, record.attention.context]),
            rtol=0,
            atol=1e-12,
        )
        _assert_step_replays(record.lstm, weights.decoder)
        npt.assert_allclose(
            affine(weights.w_out, record.lstm.hidden, weights.b_out),
            record.logits,
            rtol=0,
            atol=1e-12,
        )
