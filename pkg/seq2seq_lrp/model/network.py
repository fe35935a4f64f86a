"""Forward pass of the sequence-to-sequence summarizer.

The summarizer is made of

- a bidirectional LSTM encoder over the embedded input text,
- an additive (Bahdanau) attention over the concatenated encoder states,
- a single LSTM decoder fed at each step with [embedding of the previous token; context],
- a linear projection of the decoder hidden state onto the vocabulary.

Decoding is greedy. The decoder starts from the final state of the forward encoder, without
bridge layer. Every function records its intermediate activations so that relevance can later
be propagated from any generated token back to the input.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from atlas_commons.typing import FloatArray, NDArray

from seq2seq_lrp.exceptions import Seq2SeqLrpError, ShapeError
from seq2seq_lrp.model.tape import (
    ActivationTape,
    AttentionRecord,
    DecoderStepRecord,
    EncoderRecord,
    LstmSequenceRecord,
    LstmStepRecord,
)
from seq2seq_lrp.model.vocab import PAD_ID, START_ID, STOP_ID
from seq2seq_lrp.model.weights import LstmWeights, ModelConfig, ModelWeights
from seq2seq_lrp.tensor import affine, apply_nonlinearity, check_finite, softmax

L = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class DecodeResult:
    """Greedy summary of a text and the tape of its computation."""

    summary_ids: List[int]
    tape: ActivationTape


def embed_sequence(ids: Sequence[int], weights: ModelWeights) -> FloatArray:
    """
    Look up the embeddings of `ids`.

    Returns:
        array of shape (len(ids), embed_dim) whose t-th row is the embedding of ids[t].

    Raises:
        Seq2SeqLrpError if an id is out of the vocabulary range.
    """
    vocab_size = weights.embedding.shape[0]
    for position, id_ in enumerate(ids):
        if not 0 <= int(id_) < vocab_size:
            raise Seq2SeqLrpError(
                f"Token id {id_} at position {position} is out of range [0, {vocab_size})."
            )
    if len(ids) == 0:
        return np.zeros((0, weights.embedding.shape[1]))

    return weights.embedding[np.asarray(ids, dtype=np.int64)]


def lstm_step(
    weights: LstmWeights, x: FloatArray, h_prev: FloatArray, c_prev: FloatArray
) -> LstmStepRecord:
    """
    Run one step of an LSTM cell.

    i, f, o = sigmoid(.), g = tanh(.), c = f * c_prev + i * g, h = o * tanh(c).

    Returns:
        the step record holding the new hidden and cell states and all intermediates.

    Raises:
        ShapeError if the input or the previous states do not match the weights.
    """
    hidden_dim = weights.hidden_dim
    if h_prev.shape != (hidden_dim,) or c_prev.shape != (hidden_dim,):
        raise ShapeError(
            f"LSTM states of shapes {h_prev.shape} and {c_prev.shape} do not match the hidden "
            f"dimension {hidden_dim}."
        )
    pre_activation = affine(weights.w_input, x, weights.bias) + weights.w_hidden @ h_prev
    check_finite(pre_activation, "LSTM pre-activation")
    sigmoids = apply_nonlinearity("sigmoid", pre_activation[: 3 * hidden_dim])
    input_gate = sigmoids[:hidden_dim]
    forget_gate = sigmoids[hidden_dim : 2 * hidden_dim]
    output_gate = sigmoids[2 * hidden_dim :]
    candidate = apply_nonlinearity("tanh", pre_activation[3 * hidden_dim :])
    cell = forget_gate * c_prev + input_gate * candidate
    cell_tanh = apply_nonlinearity("tanh", cell)

    return LstmStepRecord(
        x=x,
        h_prev=h_prev,
        c_prev=c_prev,
        pre_activation=pre_activation,
        input_gate=input_gate,
        forget_gate=forget_gate,
        output_gate=output_gate,
        candidate=candidate,
        cell=cell,
        cell_tanh=cell_tanh,
        hidden=output_gate * cell_tanh,
    )


def run_lstm(
    weights: LstmWeights,
    inputs: FloatArray,
    h0: Optional[FloatArray] = None,
    c0: Optional[FloatArray] = None,
) -> LstmSequenceRecord:
    """
    Run an LSTM over the rows of `inputs`, starting from (h0, c0), zero by default.
    """
    hidden_dim = weights.hidden_dim
    h_prev = np.zeros(hidden_dim) if h0 is None else h0
    c_prev = np.zeros(hidden_dim) if c0 is None else c0
    steps = []
    for x in inputs:
        step = lstm_step(weights, x, h_prev, c_prev)
        steps.append(step)
        h_prev, c_prev = step.hidden, step.cell

    return LstmSequenceRecord(tuple(steps))


def encode(ids: Sequence[int], weights: ModelWeights) -> EncoderRecord:
    """
    Run the bidirectional encoder over `ids`.

    Returns:
        the encoder record whose `states[t]` is [forward hidden state t; backward hidden state t].

    Raises:
        Seq2SeqLrpError if `ids` is empty or holds an out-of-range id.
    """
    if len(ids) == 0:
        raise Seq2SeqLrpError("Cannot encode an empty input.")
    embeddings = embed_sequence(ids, weights)
    forward = run_lstm(weights.encoder_fwd, embeddings)
    backward = run_lstm(weights.encoder_bwd, embeddings[::-1])
    states = np.concatenate([forward.hidden_states, backward.hidden_states[::-1]], axis=1)

    return EncoderRecord(forward=forward, backward=backward, states=states)


def attend(
    weights: ModelWeights,
    s_prev: FloatArray,
    encoder_states: FloatArray,
    key_projection: Optional[FloatArray] = None,
) -> AttentionRecord:
    """
    Additive attention of the decoder state `s_prev` over `encoder_states`.

    e_j = v^T tanh(w_query @ s_prev + w_key @ h_j), alpha = softmax(e), context = sum_j alpha_j h_j

    Args:
        weights: model weights.
        s_prev: decoder hidden state of shape (hidden_dim,).
        encoder_states: array of shape (T, 2 * hidden_dim).
        key_projection: (Optional) precomputed encoder_states @ w_key.T, which does not depend
            on the decoding step.

    Raises:
        ShapeError if dimensions are inconsistent.
    """
    attention = weights.attention
    if encoder_states.ndim != 2 or encoder_states.shape[1] != attention.w_key.shape[1]:
        raise ShapeError(
            f"Encoder states of shape {encoder_states.shape} do not match the attention key "
            f"matrix of shape {attention.w_key.shape}."
        )
    if s_prev.shape != (attention.w_query.shape[1],):
        raise ShapeError(
            f"Decoder state of shape {s_prev.shape} does not match the attention query matrix "
            f"of shape {attention.w_query.shape}."
        )
    if key_projection is None:
        key_projection = encoder_states @ attention.w_key.T
    query_projection = attention.w_query @ s_prev
    features = apply_nonlinearity("tanh", query_projection[np.newaxis, :] + key_projection)
    energies = features @ attention.v
    alpha = softmax(energies)

    return AttentionRecord(
        query=s_prev,
        keys=encoder_states,
        query_projection=query_projection,
        key_projection=key_projection,
        features=features,
        energies=energies,
        weights=alpha,
        context=alpha @ encoder_states,
    )


def prepare_input(ids: Sequence[int], config: ModelConfig) -> Tuple[NDArray[np.int64], int]:
    """
    Truncate `ids` to `config.max_input_len` tokens or pad it with the UNKNOWN id.

    Returns:
        tuple (padded ids of length max_input_len, length of the original input).
    """
    length = len(ids)
    padded = np.full(config.max_input_len, PAD_ID, dtype=np.int64)
    kept = min(length, config.max_input_len)
    padded[:kept] = np.asarray(ids[:kept], dtype=np.int64)

    return padded, length


def _decode(
    ids: Sequence[int],
    weights: ModelWeights,
    config: ModelConfig,
    choose: Callable[[int, FloatArray], int],
    num_steps: int,
    stop_at_stop: bool,
) -> ActivationTape:
    """Decoder loop shared by greedy decoding and teacher forcing."""
    padded, length = prepare_input(ids, config)
    encoder = encode(padded, weights)
    key_projection = encoder.states @ weights.attention.w_key.T
    last_forward = encoder.forward.steps[-1]
    h_prev, c_prev = last_forward.hidden, last_forward.cell
    previous_token = START_ID
    steps = []
    for t in range(num_steps):
        previous_embedding = weights.embedding[previous_token]
        attention = attend(weights, h_prev, encoder.states, key_projection)
        x = np.concatenate([previous_embedding, attention.context])
        lstm = lstm_step(weights.decoder, x, h_prev, c_prev)
        logits = affine(weights.w_out, lstm.hidden, weights.b_out)
        emitted = choose(t, logits)
        steps.append(
            DecoderStepRecord(
                previous_token=previous_token,
                previous_embedding=previous_embedding,
                attention=attention,
                lstm=lstm,
                logits=logits,
                emitted=emitted,
            )
        )
        if stop_at_stop and emitted == STOP_ID:
            break
        h_prev, c_prev = lstm.hidden, lstm.cell
        previous_token = emitted

    return ActivationTape(
        input_ids=padded, input_length=length, encoder=encoder, decoder=tuple(steps)
    )


def decode_greedy(ids: Sequence[int], weights: ModelWeights, config: ModelConfig) -> DecodeResult:
    """
    Summarize `ids` greedily.

    The input is truncated to, or padded with the UNKNOWN id up to, `config.max_input_len`.
    Decoding starts from the START token and emits the argmax of the logits at every step, ties
    broken toward the lowest token id, until STOP is emitted or `config.max_output_len` steps
    were run.

    Returns:
        the summary (STOP excluded) and the activation tape.
    """
    tape = _decode(
        ids,
        weights,
        config,
        lambda _, logits: int(np.argmax(logits)),
        config.max_output_len,
        stop_at_stop=True,
    )

    return DecodeResult(summary_ids=tape.summary_ids, tape=tape)


def teacher_forced_tape(
    ids: Sequence[int], target_ids: Sequence[int], weights: ModelWeights, config: ModelConfig
) -> ActivationTape:
    """
    Run the decoder over the gold summary `target_ids`.

    At step t the decoder is fed the gold token t - 1 (START for t = 0), never its own
    prediction. The tape records the gold token t as emitted token. Targets longer than
    `config.max_output_len` are truncated.
    """
    targets = [int(token) for token in target_ids[: config.max_output_len]]
    if not targets:
        raise Seq2SeqLrpError("Cannot run teacher forcing on an empty target summary.")

    return _decode(
        ids,
        weights,
        config,
        lambda t, _: targets[t],
        len(targets),
        stop_at_stop=False,
    )
