"""End-to-end relevance propagation from a generated token back to the input tokens.

The relevance of the explained token is initialized with its pre-softmax logit. It then flows

1. through the output projection to the decoder hidden state of the explained step,
2. backwards through the decoder recurrence, down to the first decoding step. At every step the
   relevance of the decoder input is split between the previous-token embedding (kept apart,
   it is not part of the input text) and the attention context,
3. from the attention context to the encoder states, the attention weights being treated as
   gates,
4. from the decoder initial state to the final state of the forward encoder,
5. backwards through both encoder directions, down to the input embeddings, whose relevance is
   summed over the embedding dimensions.

Inside LSTM cells the epsilon rule handles the affine maps and the additive cell update, while
the gate rule handles the three elementwise products.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, fields
from typing import Any, Dict, Mapping, Optional, Tuple

import numpy as np
from atlas_commons.typing import FloatArray

from seq2seq_lrp.exceptions import Seq2SeqLrpError, ShapeError
from seq2seq_lrp.model.tape import (
    ATTENTION,
    ATTENTION_PRODUCT,
    DECODER,
    ENCODER_BACKWARD,
    ENCODER_FORWARD,
    PROJECTION,
    ActivationTape,
    AttentionRecord,
    LstmSequenceRecord,
    LstmStepRecord,
)
from seq2seq_lrp.model.weights import LstmWeights, ModelConfig, ModelWeights, gate_slice
from seq2seq_lrp.relevance.packet import RelevancePacket, TokenRelevance
from seq2seq_lrp.relevance.rules import lrp_gate_product, lrp_linear, relevance_messages
from seq2seq_lrp.saliency.stack import SaliencyStack

L = logging.getLogger(__name__)

DEFAULT_EPSILON = 1e-5
CANDIDATE_GATE_INDEX = 3


@dataclass(frozen=True)
class LrpConfig:
    """
    Settings of the relevance propagation.

    Attributes:
        epsilon: stabilizer of the epsilon rule.
        attention_path_enabled: if False, no relevance is propagated through the attention
            context; the relevance of the context is reported as absorbed.
        steps_back: number of decoding steps the relevance is unrolled through, counting the
            explained step. None unrolls down to the first step.
        bias_redistribution: if True, biases and stabilizers are redistributed over the lower
            neurons, which makes every local propagation step conservative.
        record_packet: if True, every TokenRelevance keeps its relevance packet.
    """

    epsilon: float = DEFAULT_EPSILON
    attention_path_enabled: bool = True
    steps_back: Optional[int] = None
    bias_redistribution: bool = True
    record_packet: bool = False

    def __post_init__(self) -> None:
        if not np.isfinite(self.epsilon) or self.epsilon < 0.0:
            raise Seq2SeqLrpError(f"epsilon must be a non-negative float, got {self.epsilon}.")
        if self.steps_back is not None and self.steps_back < 1:
            raise Seq2SeqLrpError(f"steps_back must be positive or None, got {self.steps_back}.")

    @classmethod
    def from_dict(cls, config: Mapping[str, Any]) -> "LrpConfig":
        """Create a configuration from the `lrp` section of a configuration file."""
        unknown = set(config) - {field_.name for field_ in fields(cls)}
        if unknown:
            raise Seq2SeqLrpError(f"Unknown lrp configuration keys: {sorted(unknown)}")
        values = dict(config)
        # YAML reads exponent notation without a dot, e.g., 1e-5, as a string
        if "epsilon" in values:
            values["epsilon"] = float(values["epsilon"])
        return cls(**values)

    def to_dict(self) -> Dict[str, Any]:
        """Plain dict of the configuration."""
        return asdict(self)


@dataclass(frozen=True, eq=False)
class LstmRelevance:
    """
    Result of the propagation through one LSTM run.

    Attributes:
        inputs: array of shape (T, input_dim), relevance of every step input.
        initial_hidden: relevance of the initial hidden state.
        initial_cell: relevance of the initial cell state.
    """

    inputs: FloatArray
    initial_hidden: FloatArray
    initial_cell: FloatArray


def _candidate_map(weights: LstmWeights) -> Tuple[FloatArray, FloatArray]:
    """Matrix [w_input w_hidden] and bias of the candidate affine map."""
    w_input, w_hidden, bias = weights.gate("candidate")
    return np.hstack([w_input, w_hidden]), bias


def _lstm_step_backward(  # pylint: disable=too-many-arguments,too-many-locals
    step: LstmStepRecord,
    candidate_map: Tuple[FloatArray, FloatArray],
    r_hidden: FloatArray,
    r_cell: FloatArray,
    config: LrpConfig,
    packet: RelevancePacket,
    node: Tuple[str, int],
) -> Tuple[FloatArray, FloatArray, FloatArray]:
    """
    Propagate relevance through one LSTM step.

    Args:
        step: recorded step.
        candidate_map: output of `_candidate_map` for the step weights.
        r_hidden: relevance of the hidden state of the step.
        r_cell: relevance reaching the cell state of the step from the next step.
        config: propagation settings.
        packet: packet the node relevances are recorded in.
        node: (layer, timestep) of the step.

    Returns:
        tuple (relevance of the step input, of the previous hidden state, of the previous cell
        state).
    """
    layer, t = node
    packet.add((layer, t, "hidden"), r_hidden)

    # h = o * tanh(c), tanh being transparent
    r_cell_tanh, r_gate = lrp_gate_product(step.output_gate, step.cell_tanh, r_hidden)
    packet.add_gate((layer, t, "output_gate*cell_tanh"), r_gate)
    r_cell = r_cell + r_cell_tanh
    packet.add((layer, t, "cell"), r_cell)

    # c = f * c_prev + i * g, split between the two summands
    summands = np.stack([step.forget_gate * step.c_prev, step.input_gate * step.candidate], axis=1)
    messages = relevance_messages(
        summands,
        step.cell,
        r_cell,
        config.epsilon,
        np.zeros_like(step.cell),
        config.bias_redistribution,
    )
    r_cell_prev, r_gate = lrp_gate_product(step.forget_gate, step.c_prev, messages[:, 0])
    packet.add_gate((layer, t, "forget_gate*previous_cell"), r_gate)
    r_candidate, r_gate = lrp_gate_product(step.input_gate, step.candidate, messages[:, 1])
    packet.add_gate((layer, t, "input_gate*candidate"), r_gate)
    packet.add((layer, t, "candidate"), r_candidate)

    # g = tanh(w_input @ x + w_hidden @ h_prev + b)
    weight, bias = candidate_map
    hidden_dim = step.hidden.shape[0]
    r_in = lrp_linear(
        weight,
        bias,
        np.concatenate([step.x, step.h_prev]),
        step.pre_activation[gate_slice(CANDIDATE_GATE_INDEX, hidden_dim)],
        r_candidate,
        config.epsilon,
        config.bias_redistribution,
    )
    input_dim = step.x.shape[0]
    packet.add((layer, t, "input"), r_in[:input_dim])

    return r_in[:input_dim], r_in[input_dim:], r_cell_prev


def _check_fragment(record: LstmSequenceRecord, weights: LstmWeights) -> None:
    """Raise if a step of `record` misses an operand or does not match `weights`."""
    hidden_dim, input_dim = weights.hidden_dim, weights.input_dim
    expected = {
        "x": (input_dim,),
        "h_prev": (hidden_dim,),
        "c_prev": (hidden_dim,),
        "pre_activation": (4 * hidden_dim,),
        "input_gate": (hidden_dim,),
        "forget_gate": (hidden_dim,),
        "output_gate": (hidden_dim,),
        "candidate": (hidden_dim,),
        "cell": (hidden_dim,),
        "cell_tanh": (hidden_dim,),
        "hidden": (hidden_dim,),
    }
    for t, step in enumerate(record.steps):
        for name, shape in expected.items():
            value = getattr(step, name, None)
            if value is None or np.shape(value) != shape:
                raise Seq2SeqLrpError(
                    f"Incomplete tape fragment: step {t} has no valid {name!r} of shape {shape}."
                )


def lrp_lstm_backward(  # pylint: disable=too-many-arguments
    record: LstmSequenceRecord,
    weights: LstmWeights,
    r_hidden_by_step: FloatArray,
    config: LrpConfig,
    r_cell_final: Optional[FloatArray] = None,
    packet: Optional[RelevancePacket] = None,
    layer: str = "lstm",
) -> LstmRelevance:
    """
    Propagate relevance backwards through an LSTM run.

    Args:
        record: the recorded LSTM run.
        weights: weights of the LSTM.
        r_hidden_by_step: array of shape (T, hidden_dim), relevance injected at the hidden state
            of every step, in execution order.
        config: propagation settings.
        r_cell_final: (Optional) relevance injected at the cell state of the last step.
        packet: (Optional) packet the node relevances are recorded in.
        layer: layer name of the nodes in `packet`.

    Returns:
        the relevance of every step input and of the initial states.

    Raises:
        Seq2SeqLrpError if the tape fragment is incomplete.
        ShapeError if `r_hidden_by_step` does not match the run.
    """
    _check_fragment(record, weights)
    hidden_dim = weights.hidden_dim
    if r_hidden_by_step.shape != (len(record), hidden_dim):
        raise ShapeError(
            f"Hidden relevance of shape {r_hidden_by_step.shape} does not match {len(record)} "
            f"steps of hidden dimension {hidden_dim}."
        )
    packet = RelevancePacket() if packet is None else packet
    candidate_map = _candidate_map(weights)
    r_inputs = np.zeros((len(record), weights.input_dim))
    r_hidden = np.zeros(hidden_dim)
    r_cell = np.zeros(hidden_dim) if r_cell_final is None else np.asarray(r_cell_final)
    for t in reversed(range(len(record))):
        r_inputs[t], r_hidden, r_cell = _lstm_step_backward(
            record.steps[t],
            candidate_map,
            r_hidden_by_step[t] + r_hidden,
            r_cell,
            config,
            packet,
            (layer, t),
        )

    return LstmRelevance(inputs=r_inputs, initial_hidden=r_hidden, initial_cell=r_cell)


def lrp_attention_backward(
    record: AttentionRecord,
    r_context: FloatArray,
    config: LrpConfig,
    packet: Optional[RelevancePacket] = None,
    step: int = 0,
) -> FloatArray:
    """
    Propagate the relevance of the attention context to the encoder states.

    The context sum_j alpha_j h_j is split with the epsilon rule over the contributions
    alpha_j h_j (no bias), then each product alpha_j h_j gives all its relevance to the state
    h_j and none to the attention weight alpha_j.

    Returns:
        array of shape (T, 2 * hidden_dim), relevance of every encoder state. Zero if the
        attention path is disabled.

    Raises:
        Seq2SeqLrpError if the record holds no attention weights.
    """
    alpha = getattr(record, "weights", None)
    if alpha is None:
        raise Seq2SeqLrpError(f"The tape holds no attention weights for decoding step {step}.")
    if r_context.shape != record.context.shape:
        raise ShapeError(
            f"Context relevance of shape {r_context.shape} does not match the context of shape "
            f"{record.context.shape}."
        )
    packet = RelevancePacket() if packet is None else packet
    key = (ATTENTION, step, ATTENTION_PRODUCT)
    if not config.attention_path_enabled:
        packet.add_gate(key, np.zeros_like(alpha))
        return np.zeros_like(record.keys)

    products = alpha[:, np.newaxis] * record.keys
    messages = relevance_messages(
        products.T,
        record.context,
        r_context,
        config.epsilon,
        np.zeros_like(record.context),
        config.bias_redistribution,
    )
    r_states, r_gate = lrp_gate_product(
        np.broadcast_to(alpha[:, np.newaxis], record.keys.shape), record.keys, messages.T
    )
    packet.add_gate(key, r_gate.sum(axis=1))

    return r_states


def relevance_for_token(  # pylint: disable=too-many-locals
    tape: ActivationTape,
    output_step: int,
    weights: ModelWeights,
    config: Optional[LrpConfig] = None,
) -> TokenRelevance:
    """
    Compute the saliency map of the token emitted at decoding step `output_step`.

    Args:
        tape: activation tape of the decode.
        output_step: decoding step of the explained token.
        weights: the weights the tape was recorded with.
        config: propagation settings, defaults to LrpConfig().

    Returns:
        the relevance of every input position together with the relevance which ended on the
        previous-token embeddings, on the encoder initial states, or which was absorbed.

    Raises:
        Seq2SeqLrpError if `output_step` is not a decoding step of `tape`.
    """
    config = LrpConfig() if config is None else config
    if not 0 <= output_step < len(tape.decoder):
        raise Seq2SeqLrpError(
            f"Output step {output_step} is out of range: the tape holds {len(tape.decoder)} "
            "decoding steps."
        )
    hidden_dim = weights.config.hidden_dim
    embed_dim = weights.config.embed_dim
    packet = RelevancePacket()

    explained = tape.decoder[output_step]
    token = explained.emitted
    logit = explained.logits[token : token + 1]
    packet.add((PROJECTION, output_step, "logit"), logit)
    r_hidden = lrp_linear(
        weights.w_out[token : token + 1],
        weights.b_out[token : token + 1],
        explained.lstm.hidden,
        logit,
        logit.copy(),
        config.epsilon,
        config.bias_redistribution,
    )
    r_cell = np.zeros(hidden_dim)

    first_step = 0 if config.steps_back is None else max(0, output_step - config.steps_back + 1)
    decoder_map = _candidate_map(weights.decoder)
    r_states = np.zeros_like(tape.encoder.states)
    previous_token_relevance = np.zeros(output_step + 1)
    absorbed = 0.0
    for t in range(output_step, first_step - 1, -1):
        step = tape.decoder[t]
        r_input, r_hidden, r_cell = _lstm_step_backward(
            step.lstm, decoder_map, r_hidden, r_cell, config, packet, (DECODER, t)
        )
        r_embedding, r_context = r_input[:embed_dim], r_input[embed_dim:]
        previous_token_relevance[t] = np.sum(r_embedding)
        packet.add((ATTENTION, t, "context"), r_context)
        if not config.attention_path_enabled:
            absorbed += float(np.sum(r_context))
        r_states += lrp_attention_backward(step.attention, r_context, config, packet, t)

    if first_step > 0:
        absorbed += float(np.sum(r_hidden) + np.sum(r_cell))
        r_hidden = np.zeros(hidden_dim)
        r_cell = np.zeros(hidden_dim)

    # the decoder starts from the final state of the forward encoder
    r_forward_hidden = r_states[:, :hidden_dim].copy()
    r_forward_hidden[-1] += r_hidden
    forward = lrp_lstm_backward(
        tape.encoder.forward,
        weights.encoder_fwd,
        r_forward_hidden,
        config,
        r_cell_final=r_cell,
        packet=packet,
        layer=ENCODER_FORWARD,
    )
    backward = lrp_lstm_backward(
        tape.encoder.backward,
        weights.encoder_bwd,
        np.ascontiguousarray(r_states[::-1, hidden_dim:]),
        config,
        packet=packet,
        layer=ENCODER_BACKWARD,
    )
    forward_relevance = forward.inputs.sum(axis=1)
    backward_relevance = backward.inputs[::-1].sum(axis=1)
    initial_state_relevance = float(
        sum(
            np.sum(array)
            for array in (
                forward.initial_hidden,
                forward.initial_cell,
                backward.initial_hidden,
                backward.initial_cell,
            )
        )
    )

    return TokenRelevance(
        output_step=output_step,
        emitted_id=token,
        initial_logit=float(logit[0]),
        relevance=forward_relevance + backward_relevance,
        forward_relevance=forward_relevance,
        backward_relevance=backward_relevance,
        previous_token_relevance=previous_token_relevance,
        initial_state_relevance=initial_state_relevance,
        absorbed_relevance=absorbed,
        packet=packet if config.record_packet else None,
    )


def relevance_stack(
    tape: ActivationTape,
    weights: ModelWeights,
    model_config: ModelConfig,
    config: Optional[LrpConfig] = None,
) -> SaliencyStack:
    """
    Saliency maps of the first min(maps_per_text, summary length) generated tokens.

    Raises:
        Seq2SeqLrpError if the summary of `tape` is empty.
    """
    summary = tape.summary_ids
    count = min(model_config.maps_per_text, len(summary))
    if count == 0:
        raise Seq2SeqLrpError("Cannot explain an empty summary.")
    L.debug("Propagating relevance for %d generated tokens ...", count)
    maps = [relevance_for_token(tape, step, weights, config) for step in range(count)]

    return SaliencyStack(
        maps=maps,
        input_ids=tape.input_ids,
        summary_ids=summary,
        input_length=tape.input_length,
    )
