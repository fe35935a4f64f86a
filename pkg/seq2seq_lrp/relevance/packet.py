"""Containers of the relevance computed by one backward propagation."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np
from atlas_commons.typing import FloatArray

from seq2seq_lrp.exceptions import Seq2SeqLrpError
from seq2seq_lrp.model.tape import NodeKey


class RelevancePacket:
    """
    Relevance attached to the tape nodes during one backward propagation.

    Relevance reaching the same node several times is summed. The relevance assigned to the
    gate side of every elementwise product is recorded separately in `gate_nodes`.
    """

    def __init__(self) -> None:
        self.nodes: Dict[NodeKey, FloatArray] = {}
        self.gate_nodes: Dict[NodeKey, FloatArray] = {}

    def add(self, key: NodeKey, relevance: FloatArray) -> None:
        """Accumulate `relevance` on the node `key`."""
        if key in self.nodes:
            if self.nodes[key].shape != relevance.shape:
                raise Seq2SeqLrpError(
                    f"Relevance of shape {relevance.shape} does not match the node {key} of "
                    f"shape {self.nodes[key].shape}."
                )
            self.nodes[key] = self.nodes[key] + relevance
        else:
            self.nodes[key] = np.array(relevance, dtype=np.float64)

    def add_gate(self, key: NodeKey, gate_relevance: FloatArray) -> None:
        """Record the relevance given to the gate operand of the product node `key`."""
        if key in self.gate_nodes:
            self.gate_nodes[key] = self.gate_nodes[key] + gate_relevance
        else:
            self.gate_nodes[key] = np.array(gate_relevance, dtype=np.float64)

    def total(self, key: NodeKey) -> float:
        """Sum of the relevance of the node `key`, 0 if the node was never reached."""
        return float(np.sum(self.nodes[key])) if key in self.nodes else 0.0

    def gate_total(self) -> float:
        """Sum of the absolute relevance received by all gate operands."""
        return float(sum(np.sum(np.abs(value)) for value in self.gate_nodes.values()))


@dataclass(eq=False)
class TokenRelevance:
    """
    Saliency map of one generated token, with the bookkeeping of where relevance ended.

    Attributes:
        output_step: decoding step of the explained token.
        emitted_id: explained token.
        initial_logit: pre-softmax logit the propagation started from.
        relevance: signed relevance per (padded) input position, summed over both encoder
            directions and over the embedding dimensions.
        forward_relevance: part of `relevance` flowing through the forward encoder.
        backward_relevance: part of `relevance` flowing through the backward encoder.
        previous_token_relevance: relevance of the previous-token embeddings fed to the decoder,
            one value per unrolled decoding step. Not part of the input relevance.
        initial_state_relevance: relevance reaching the zero initial states of the encoder.
        absorbed_relevance: relevance removed by the attention ablation or by a truncated
            decoder unrolling.
        packet: (Optional) the full relevance packet.
    """

    output_step: int
    emitted_id: int
    initial_logit: float
    relevance: FloatArray
    forward_relevance: FloatArray
    backward_relevance: FloatArray
    previous_token_relevance: FloatArray
    initial_state_relevance: float
    absorbed_relevance: float
    packet: Optional[RelevancePacket] = None

    def __len__(self) -> int:
        return len(self.relevance)

    @property
    def total(self) -> float:
        """Sum of the relevance over every end point of the propagation."""
        return (
            float(np.sum(self.relevance))
            + float(np.sum(self.previous_token_relevance))
            + self.initial_state_relevance
            + self.absorbed_relevance
        )
