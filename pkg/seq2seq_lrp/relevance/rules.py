"""Local relevance propagation rules.

Two rules are needed to propagate relevance through the summarizer:

- the epsilon rule for weighted connections. The relevance received by the lower neuron i
  from the upper neuron j is

      R_{i<-j} = (w_ji * z_i + (eps * sign(z_j) + b_j) / D) / (z_j + eps * sign(z_j)) * R_j

  where z_j = sum_i w_ji z_i + b_j is the recorded pre-activation and D the number of lower
  neurons. sign(0) is taken as +1.
- the gate rule for elementwise products of a gate (sigmoid gate or attention weight) and an
  information vector: all the relevance goes to the information vector, none to the gate.

Nonlinearities applied on top of an affine map are relevance-transparent.
"""
from typing import Tuple

import numpy as np
from atlas_commons.typing import FloatArray

from seq2seq_lrp.exceptions import NumericalError, ShapeError


def stabilizer_sign(z_out: FloatArray) -> FloatArray:
    """Sign of the recorded outputs, zero counting as positive."""
    return np.where(z_out >= 0.0, 1.0, -1.0)


def relevance_messages(  # pylint: disable=too-many-arguments
    contributions: FloatArray,
    z_out: FloatArray,
    r_out: FloatArray,
    epsilon: float,
    bias: FloatArray,
    bias_redistribution: bool = True,
) -> FloatArray:
    """
    Relevance messages R_{i<-j} of the epsilon rule.

    Args:
        contributions: array of shape (M, D) whose entry (j, i) is the contribution of the
            lower neuron i to the upper neuron j, e.g. w_ji * z_i.
        z_out: recorded upper activations of shape (M,), equal to the row sums of
            `contributions` plus `bias`.
        r_out: relevance of the upper neurons, of shape (M,).
        epsilon: non-negative stabilizer.
        bias: biases of shape (M,).
        bias_redistribution: if True, the stabilizer and the bias are redistributed uniformly
            over the D lower neurons, so that the messages of each upper neuron sum exactly to
            its relevance. Otherwise they absorb relevance.

    Returns:
        array of shape (M, D) of the messages.

    Raises:
        NumericalError if a denominator is exactly zero.
    """
    if epsilon < 0.0:
        raise ValueError(f"The stabilizer epsilon must be non-negative, got {epsilon}.")
    sign = stabilizer_sign(z_out)
    denominator = z_out + epsilon * sign
    if np.any(denominator == 0.0):
        raise NumericalError(
            "Singular relevance denominator: a recorded activation is exactly zero and "
            "epsilon is 0."
        )
    numerator = contributions
    if bias_redistribution:
        numerator = numerator + ((epsilon * sign + bias) / contributions.shape[1])[:, np.newaxis]

    return numerator / denominator[:, np.newaxis] * r_out[:, np.newaxis]


def lrp_linear(  # pylint: disable=too-many-arguments
    weight: FloatArray,
    bias: FloatArray,
    x: FloatArray,
    z_out: FloatArray,
    r_out: FloatArray,
    epsilon: float,
    bias_redistribution: bool = True,
) -> FloatArray:
    """
    Propagate relevance through the affine map z_out = weight @ x + bias with the epsilon rule.

    Args:
        weight: matrix of shape (M, D).
        bias: vector of shape (M,).
        x: lower activations of shape (D,).
        z_out: recorded affine output of shape (M,).
        r_out: upper relevance of shape (M,).
        epsilon: non-negative stabilizer.
        bias_redistribution: see `relevance_messages`.

    Returns:
        the relevance of the lower neurons, of shape (D,).

    Raises:
        ShapeError if the shapes are inconsistent.
        NumericalError if a denominator is exactly zero.
    """
    rows, cols = weight.shape
    if x.shape != (cols,) or bias.shape != (rows,) or z_out.shape != (rows,):
        raise ShapeError(
            f"Inconsistent shapes for lrp_linear: weight {weight.shape}, bias {bias.shape}, "
            f"x {x.shape}, z_out {z_out.shape}."
        )
    if r_out.shape != (rows,):
        raise ShapeError(f"Relevance of shape {r_out.shape} does not match {rows} outputs.")

    messages = relevance_messages(
        weight * x[np.newaxis, :], z_out, r_out, epsilon, bias, bias_redistribution
    )

    return messages.sum(axis=0)


def lrp_gate_product(
    gate: FloatArray, info: FloatArray, r_out: FloatArray
) -> Tuple[FloatArray, FloatArray]:
    """
    Propagate relevance through the elementwise product gate * info.

    Returns:
        tuple (relevance of `info`, relevance of `gate`). The former is `r_out`, the latter
        is zero whatever the gate values.

    Raises:
        ShapeError if the three vectors do not share one shape.
    """
    if gate.shape != info.shape or info.shape != r_out.shape:
        raise ShapeError(
            f"Gate product operands of shapes {gate.shape} and {info.shape} do not match the "
            f"relevance of shape {r_out.shape}."
        )

    return r_out.copy(), np.zeros_like(r_out)
