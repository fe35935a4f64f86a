"""Teacher-forced training of the summarizer with plain stochastic gradient descent.

The loss of a pair is the mean cross-entropy of the gold summary tokens, the decoder being fed
the gold previous token at every step. Gradients are obtained by walking the activation tape of
the teacher-forced decode backwards, the same tape the relevance propagation walks.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from atlas_commons.typing import FloatArray
from scipy.special import log_softmax
from tqdm import tqdm

from seq2seq_lrp.exceptions import NumericalError, Seq2SeqLrpError
from seq2seq_lrp.model.network import decode_greedy, teacher_forced_tape
from seq2seq_lrp.model.tape import (
    ActivationTape,
    AttentionRecord,
    LstmSequenceRecord,
    LstmStepRecord,
)
from seq2seq_lrp.model.weights import LstmWeights, ModelConfig, ModelWeights, initialize_weights
from seq2seq_lrp.training.corpus import CorpusPair

L = logging.getLogger(__name__)

Gradients = Dict[str, FloatArray]


@dataclass(frozen=True)
class TrainingHyperparams:
    """
    Settings of the training.

    Attributes:
        learning_rate: step size of the gradient descent.
        epochs: number of passes over the training texts.
        seed: seed of the weight initialization and of the order of the texts.
        clip_norm: maximal global norm of the gradient of one text.
        init_scale: the weights are drawn uniformly in [-init_scale, init_scale].
        held_out_fraction: fraction of the corpus (its last texts) kept for evaluation.
    """

    learning_rate: float = 0.5
    epochs: int = 40
    seed: int = 0
    clip_norm: float = 5.0
    init_scale: float = 0.5
    held_out_fraction: float = 0.1

    def __post_init__(self) -> None:
        if not self.learning_rate > 0.0:
            raise Seq2SeqLrpError(f"learning_rate must be positive, got {self.learning_rate}.")
        if self.epochs < 0:
            raise Seq2SeqLrpError(f"epochs must be non-negative, got {self.epochs}.")
        if not self.clip_norm > 0.0:
            raise Seq2SeqLrpError(f"clip_norm must be positive, got {self.clip_norm}.")
        if not self.init_scale > 0.0:
            raise Seq2SeqLrpError(f"init_scale must be positive, got {self.init_scale}.")
        if not 0.0 <= self.held_out_fraction < 1.0:
            raise Seq2SeqLrpError(
                f"held_out_fraction must lie in [0, 1), got {self.held_out_fraction}."
            )

    @classmethod
    def from_dict(cls, config: Mapping[str, Any]) -> "TrainingHyperparams":
        """Create hyperparameters from the `training` section of a configuration file."""
        unknown = set(config) - {field_.name for field_ in fields(cls)}
        if unknown:
            raise Seq2SeqLrpError(f"Unknown training configuration keys: {sorted(unknown)}")
        return cls(
            **{
                key: int(value) if key in ("epochs", "seed") else float(value)
                for key, value in config.items()
            }
        )

    def to_dict(self) -> Dict[str, Any]:
        """Plain dict of the hyperparameters."""
        return asdict(self)


@dataclass
class TrainReport:
    """
    Outcome of a training run.

    Attributes:
        losses: mean cross-entropy of every epoch.
        trigger_accuracy: fraction of the evaluated texts whose summary holds all their planted
            tokens, None if no text could be evaluated.
        evaluated_texts: number of texts the trigger accuracy was measured on.
        held_out: whether the trigger accuracy was measured on held-out texts.
    """

    losses: List[float] = field(default_factory=list)
    trigger_accuracy: Optional[float] = None
    evaluated_texts: int = 0
    held_out: bool = False

    def to_dict(self) -> Dict[str, Any]:
        """Plain dict of the report."""
        return asdict(self)


def cross_entropy(logits: FloatArray, target: int) -> Tuple[float, FloatArray]:
    """
    Cross-entropy of `target` under softmax(logits).

    Returns:
        tuple (loss, gradient of the loss with respect to the logits).
    """
    log_probabilities = log_softmax(logits)
    gradient = np.exp(log_probabilities)
    gradient[target] -= 1.0

    return float(-log_probabilities[target]), gradient


def _zero_gradients(weights: ModelWeights) -> Gradients:
    return {name: np.zeros_like(array) for name, array in weights.parameters().items()}


def _lstm_step_gradients(
    step: LstmStepRecord,
    weights: LstmWeights,
    d_hidden: FloatArray,
    d_cell: FloatArray,
    gradients: Tuple[FloatArray, FloatArray, FloatArray],
) -> Tuple[FloatArray, FloatArray, FloatArray]:
    """
    Backpropagate through one LSTM step.

    Args:
        step: recorded step.
        weights: weights of the LSTM.
        d_hidden: gradient of the loss with respect to the step hidden state.
        d_cell: gradient reaching the step cell state from the next step.
        gradients: (w_input, w_hidden, bias) gradient accumulators, updated in place.

    Returns:
        tuple (gradient of the step input, of the previous hidden state, of the previous cell).
    """
    d_output_gate = d_hidden * step.cell_tanh
    d_cell = d_cell + d_hidden * step.output_gate * (1.0 - step.cell_tanh**2)
    d_forget_gate = d_cell * step.c_prev
    d_input_gate = d_cell * step.candidate
    d_candidate = d_cell * step.input_gate
    d_pre_activation = np.concatenate(
        [
            d_input_gate * step.input_gate * (1.0 - step.input_gate),
            d_forget_gate * step.forget_gate * (1.0 - step.forget_gate),
            d_output_gate * step.output_gate * (1.0 - step.output_gate),
            d_candidate * (1.0 - step.candidate**2),
        ]
    )
    d_w_input, d_w_hidden, d_bias = gradients
    d_w_input += np.outer(d_pre_activation, step.x)
    d_w_hidden += np.outer(d_pre_activation, step.h_prev)
    d_bias += d_pre_activation

    return (
        weights.w_input.T @ d_pre_activation,
        weights.w_hidden.T @ d_pre_activation,
        d_cell * step.forget_gate,
    )


def _lstm_sequence_gradients(
    record: LstmSequenceRecord,
    weights: LstmWeights,
    d_hidden_by_step: FloatArray,
    gradients: Tuple[FloatArray, FloatArray, FloatArray],
    d_cell_final: Optional[FloatArray] = None,
) -> FloatArray:
    """Backpropagate through an LSTM run. Returns the gradients of the step inputs."""
    d_inputs = np.zeros((len(record), weights.input_dim))
    d_hidden = np.zeros(weights.hidden_dim)
    d_cell = np.zeros(weights.hidden_dim) if d_cell_final is None else d_cell_final
    for t in reversed(range(len(record))):
        d_inputs[t], d_hidden, d_cell = _lstm_step_gradients(
            record.steps[t], weights, d_hidden_by_step[t] + d_hidden, d_cell, gradients
        )

    return d_inputs


def _attention_gradients(
    record: AttentionRecord,
    weights: ModelWeights,
    d_context: FloatArray,
    gradients: Gradients,
    d_states: FloatArray,
) -> FloatArray:
    """
    Backpropagate through one evaluation of the additive attention.

    `d_states` accumulates the gradient of the encoder states in place.

    Returns:
        the gradient of the decoder state the attention was queried with.
    """
    alpha = record.weights
    d_states += np.outer(alpha, d_context)
    d_alpha = record.keys @ d_context
    d_energies = alpha * (d_alpha - np.dot(alpha, d_alpha))
    gradients["attention.v"] += record.features.T @ d_energies
    d_features = np.outer(d_energies, weights.attention.v)
    d_pre = d_features * (1.0 - record.features**2)
    d_query_projection = d_pre.sum(axis=0)
    gradients["attention.w_query"] += np.outer(d_query_projection, record.query)
    gradients["attention.w_key"] += d_pre.T @ record.keys
    d_states += d_pre @ weights.attention.w_key

    return weights.attention.w_query.T @ d_query_projection


def _lstm_accumulators(
    gradients: Gradients, prefix: str
) -> Tuple[FloatArray, FloatArray, FloatArray]:
    return (
        gradients[f"{prefix}.w_input"],
        gradients[f"{prefix}.w_hidden"],
        gradients[f"{prefix}.bias"],
    )


def tape_gradients(  # pylint: disable=too-many-locals
    tape: ActivationTape, weights: ModelWeights
) -> Tuple[float, Gradients]:
    """
    Mean cross-entropy of the emitted tokens of `tape` and its gradients.

    Returns:
        tuple (loss, gradients keyed by the names of `ModelWeights.parameters`).
    """
    config = weights.config
    hidden_dim, embed_dim = config.hidden_dim, config.embed_dim
    gradients = _zero_gradients(weights)
    steps = len(tape.decoder)
    d_states = np.zeros_like(tape.encoder.states)
    d_hidden_next = np.zeros(hidden_dim)
    d_cell_next = np.zeros(hidden_dim)
    decoder_accumulators = _lstm_accumulators(gradients, "decoder")
    loss = 0.0
    for step in reversed(tape.decoder):
        step_loss, d_logits = cross_entropy(step.logits, step.emitted)
        loss += step_loss / steps
        d_logits /= steps
        gradients["projection.w_out"] += np.outer(d_logits, step.lstm.hidden)
        gradients["projection.b_out"] += d_logits
        d_hidden = weights.w_out.T @ d_logits + d_hidden_next
        d_input, d_hidden_prev, d_cell_next = _lstm_step_gradients(
            step.lstm, weights.decoder, d_hidden, d_cell_next, decoder_accumulators
        )
        gradients["embedding"][step.previous_token] += d_input[:embed_dim]
        d_query = _attention_gradients(
            step.attention, weights, d_input[embed_dim:], gradients, d_states
        )
        d_hidden_next = d_hidden_prev + d_query
    if not np.isfinite(loss):
        raise NumericalError(f"Non-finite training loss {loss}.")

    # the decoder starts from the final state of the forward encoder
    d_forward_hidden = d_states[:, :hidden_dim].copy()
    d_forward_hidden[-1] += d_hidden_next
    d_forward_inputs = _lstm_sequence_gradients(
        tape.encoder.forward,
        weights.encoder_fwd,
        d_forward_hidden,
        _lstm_accumulators(gradients, "encoder_fwd"),
        d_cell_final=d_cell_next,
    )
    d_backward_inputs = _lstm_sequence_gradients(
        tape.encoder.backward,
        weights.encoder_bwd,
        d_states[::-1, hidden_dim:],
        _lstm_accumulators(gradients, "encoder_bwd"),
    )
    np.add.at(gradients["embedding"], tape.input_ids, d_forward_inputs)
    np.add.at(gradients["embedding"], tape.input_ids[::-1], d_backward_inputs)

    return loss, gradients


def loss_and_gradients(
    weights: ModelWeights,
    ids: Sequence[int],
    target_ids: Sequence[int],
    config: Optional[ModelConfig] = None,
) -> Tuple[float, Gradients]:
    """
    Teacher-forced mean cross-entropy of `target_ids` given `ids`, and its gradients.

    Args:
        weights: model weights.
        ids: input ids.
        target_ids: gold summary, STOP included.
        config: model configuration, defaults to the configuration of `weights`.

    Returns:
        tuple (loss, gradients keyed by the names of `ModelWeights.parameters`).
    """
    config = weights.config if config is None else config
    tape = teacher_forced_tape(ids, target_ids, weights, config)

    return tape_gradients(tape, weights)


def sequence_loss(
    weights: ModelWeights,
    ids: Sequence[int],
    target_ids: Sequence[int],
    config: Optional[ModelConfig] = None,
) -> float:
    """Teacher-forced mean cross-entropy of `target_ids` given `ids`, without gradients."""
    config = weights.config if config is None else config
    tape = teacher_forced_tape(ids, target_ids, weights, config)

    return float(np.mean([cross_entropy(step.logits, step.emitted)[0] for step in tape.decoder]))


def clip_gradients(gradients: Gradients, clip_norm: float) -> float:
    """
    Rescale `gradients` in place so that their global norm is at most `clip_norm`.

    Returns:
        the global norm before clipping.
    """
    norm = float(np.sqrt(sum(np.sum(gradient**2) for gradient in gradients.values())))
    if not np.isfinite(norm):
        raise NumericalError(f"Non-finite gradient norm {norm}.")
    if norm > clip_norm:
        for gradient in gradients.values():
            gradient *= clip_norm / norm

    return norm


def trigger_accuracy(
    weights: ModelWeights, pairs: Sequence[CorpusPair], config: ModelConfig
) -> Tuple[Optional[float], int]:
    """
    Fraction of `pairs` whose greedy summary holds all their planted tokens.

    Pairs without planted tokens are not evaluated.

    Returns:
        tuple (accuracy or None if no pair was evaluated, number of evaluated pairs).
    """
    hits = 0
    evaluated = 0
    for pair in pairs:
        if not pair.planted_tokens:
            continue
        summary = set(decode_greedy(pair.input_ids, weights, config).summary_ids)
        hits += set(pair.planted_tokens) <= summary
        evaluated += 1
    if evaluated == 0:
        return None, 0

    return hits / evaluated, evaluated


def train_toy(
    pairs: Sequence[CorpusPair],
    config: ModelConfig,
    hyperparams: Optional[TrainingHyperparams] = None,
    held_out: Optional[Sequence[CorpusPair]] = None,
) -> Tuple[ModelWeights, TrainReport]:
    """
    Train a summarizer on `pairs` from seeded random weights.

    The texts are visited in a seeded random order at every epoch and the weights are updated
    after every text with the clipped gradient of its loss.

    Args:
        pairs: training texts, with their gold summaries.
        config: model dimensions.
        hyperparams: training settings.
        held_out: (Optional) texts the trigger accuracy is measured on. The training texts are
            used if None or empty.

    Returns:
        tuple (trained weights, training report).

    Raises:
        Seq2SeqLrpError if `pairs` is empty or holds a pair without target.
        NumericalError if the loss diverges.
    """
    hyperparams = TrainingHyperparams() if hyperparams is None else hyperparams
    if not pairs:
        raise Seq2SeqLrpError("Cannot train on an empty corpus.")
    for pair in pairs:
        if not pair.target_ids:
            raise Seq2SeqLrpError(f"Text {pair.text_id} has no target summary.")
    weights = initialize_weights(config, hyperparams.seed, hyperparams.init_scale)
    parameters = weights.parameters()
    rng = np.random.default_rng(hyperparams.seed)
    report = TrainReport()
    for epoch in tqdm(range(hyperparams.epochs), disable=hyperparams.epochs == 0):
        total = 0.0
        for index in rng.permutation(len(pairs)):
            pair = pairs[index]
            loss, gradients = loss_and_gradients(weights, pair.input_ids, pair.target_ids, config)
            if not np.isfinite(loss):
                raise NumericalError(
                    f"Training diverged at epoch {epoch} on text {pair.text_id}: loss {loss}."
                )
            clip_gradients(gradients, hyperparams.clip_norm)
            for name, gradient in gradients.items():
                parameters[name] -= hyperparams.learning_rate * gradient
            total += loss
        report.losses.append(total / len(pairs))
        L.debug("Epoch %d: mean cross-entropy %.6f", epoch, report.losses[-1])
    if report.losses:
        L.info("Final mean cross-entropy: %.6f", report.losses[-1])

    evaluation = list(held_out) if held_out else list(pairs)
    report.held_out = bool(held_out)
    report.trigger_accuracy, report.evaluated_texts = trigger_accuracy(weights, evaluation, config)
    L.info("Trigger accuracy: %s on %d texts", report.trigger_accuracy, report.evaluated_texts)

    return weights, report
