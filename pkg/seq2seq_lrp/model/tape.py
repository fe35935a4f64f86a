"""Activation tape: the transcript of one forward pass of the summarizer.

Every affine map and every elementwise product executed by the forward pass is recorded with
its operands and its output. The relevance propagation and the trainer's backpropagation both
walk this transcript backwards, so that neither has to recompute the forward pass.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from atlas_commons.typing import FloatArray, NDArray

from seq2seq_lrp.model.vocab import STOP_ID

# Tape nodes are identified by (layer, timestep, role)
NodeKey = Tuple[str, int, str]

ENCODER_FORWARD = "encoder_fwd"
ENCODER_BACKWARD = "encoder_bwd"
DECODER = "decoder"
ATTENTION = "attention"
PROJECTION = "projection"

# Elementwise products of an LSTM step, as (gate, information) pairs
LSTM_PRODUCTS = (
    "output_gate*cell_tanh",
    "forget_gate*previous_cell",
    "input_gate*candidate",
)
ATTENTION_PRODUCT = "weights*encoder_states"


@dataclass(frozen=True, eq=False)
class LstmStepRecord:
    """
    Operands and results of one LSTM step.

    Attributes:
        x: step input.
        h_prev: previous hidden state.
        c_prev: previous cell state.
        pre_activation: w_input @ x + w_hidden @ h_prev + bias, of shape (4 * hidden_dim,).
        input_gate, forget_gate, output_gate: sigmoid of the corresponding pre-activations.
        candidate: tanh of the candidate pre-activation.
        cell: forget_gate * c_prev + input_gate * candidate.
        cell_tanh: tanh(cell).
        hidden: output_gate * cell_tanh.
    """

    x: FloatArray
    h_prev: FloatArray
    c_prev: FloatArray
    pre_activation: FloatArray
    input_gate: FloatArray
    forget_gate: FloatArray
    output_gate: FloatArray
    candidate: FloatArray
    cell: FloatArray
    cell_tanh: FloatArray
    hidden: FloatArray

    @property
    def gates(self) -> Tuple[FloatArray, FloatArray, FloatArray]:
        """The input, forget and output gates."""
        return self.input_gate, self.forget_gate, self.output_gate


@dataclass(frozen=True, eq=False)
class LstmSequenceRecord:
    """Steps of one LSTM run, in execution order."""

    steps: Tuple[LstmStepRecord, ...]

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def hidden_states(self) -> FloatArray:
        """Array of shape (T, hidden_dim) of the hidden states in execution order."""
        return np.stack([step.hidden for step in self.steps])

    @property
    def cell_states(self) -> FloatArray:
        """Array of shape (T, hidden_dim) of the cell states in execution order."""
        return np.stack([step.cell for step in self.steps])


@dataclass(frozen=True, eq=False)
class EncoderRecord:
    """
    Forward pass of the bidirectional encoder.

    The backward LSTM reads the input from right to left: its k-th step processes the input
    position T - 1 - k.

    Attributes:
        forward: left-to-right LSTM run.
        backward: right-to-left LSTM run.
        states: array of shape (T, 2 * hidden_dim), the concatenation of the forward and
            backward hidden states of every input position.
    """

    forward: LstmSequenceRecord
    backward: LstmSequenceRecord
    states: FloatArray

    @property
    def forward_states(self) -> FloatArray:
        """Forward hidden states, by input position."""
        return self.forward.hidden_states

    @property
    def backward_states(self) -> FloatArray:
        """Backward hidden states, by input position."""
        return self.backward.hidden_states[::-1]


@dataclass(frozen=True, eq=False)
class AttentionRecord:
    """
    One evaluation of the additive attention.

    Attributes:
        query: decoder state the attention is computed from.
        keys: encoder states of shape (T, 2 * hidden_dim).
        query_projection: w_query @ query.
        key_projection: keys @ w_key.T, of shape (T, hidden_dim).
        features: tanh(query_projection + key_projection), of shape (T, hidden_dim).
        energies: features @ v.
        weights: softmax of the energies.
        context: weights @ keys.
    """

    query: FloatArray
    keys: FloatArray
    query_projection: FloatArray
    key_projection: FloatArray
    features: FloatArray
    energies: FloatArray
    weights: FloatArray
    context: FloatArray


@dataclass(frozen=True, eq=False)
class DecoderStepRecord:
    """
    One decoding step.

    Attributes:
        previous_token: token fed at this step (START for the first step).
        previous_embedding: embedding of `previous_token`.
        attention: attention computed from the previous decoder hidden state.
        lstm: the decoder LSTM step, whose input is [previous_embedding; attention.context].
        logits: pre-softmax scores w_out @ lstm.hidden + b_out.
        emitted: token chosen at this step (argmax of logits for greedy decoding, the gold
            token under teacher forcing).
    """

    previous_token: int
    previous_embedding: FloatArray
    attention: AttentionRecord
    lstm: LstmStepRecord
    logits: FloatArray
    emitted: int


@dataclass(frozen=True, eq=False)
class ActivationTape:
    """
    Complete record of one forward decode.

    Attributes:
        input_ids: padded (or truncated) input ids fed to the encoder.
        input_length: length of the original input, before padding or truncation.
        encoder: encoder record.
        decoder: decoding steps in execution order, the step which emitted STOP included.
    """

    input_ids: NDArray[np.int64]
    input_length: int
    encoder: EncoderRecord
    decoder: Tuple[DecoderStepRecord, ...]

    @property
    def padded_length(self) -> int:
        """Number of encoder positions."""
        return len(self.input_ids)

    @property
    def effective_length(self) -> int:
        """Number of input positions holding a token of the original text."""
        return min(self.input_length, self.padded_length)

    @property
    def truncated(self) -> bool:
        """Whether the original input was longer than the encoder window."""
        return self.input_length > self.padded_length

    @property
    def emitted_ids(self) -> List[int]:
        """Tokens emitted at every decoding step, STOP included."""
        return [step.emitted for step in self.decoder]

    @property
    def summary_ids(self) -> List[int]:
        """Emitted tokens up to, and excluding, the first STOP."""
        summary = []
        for token in self.emitted_ids:
            if token == STOP_ID:
                break
            summary.append(token)
        return summary

    @property
    def attention_weights(self) -> FloatArray:
        """Array of shape (decoding steps, T) of the attention distributions."""
        return np.stack([step.attention.weights for step in self.decoder])

    def product_nodes(self, last_step: int) -> List[NodeKey]:
        """
        Elementwise products executed to produce the output of decoding step `last_step`.

        Every product involves a gate (sigmoid gates or attention weights) and an information
        vector.
        """
        nodes = []
        for layer, record in (
            (ENCODER_FORWARD, self.encoder.forward),
            (ENCODER_BACKWARD, self.encoder.backward),
        ):
            nodes.extend((layer, t, role) for t in range(len(record)) for role in LSTM_PRODUCTS)
        for t in range(last_step + 1):
            nodes.extend((DECODER, t, role) for role in LSTM_PRODUCTS)
            nodes.append((ATTENTION, t, ATTENTION_PRODUCT))

        return nodes
