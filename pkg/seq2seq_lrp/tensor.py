"""Dense linear algebra substrate of the summarizer and of relevance propagation.

Vectors are 1D and matrices 2D (row-major) numpy arrays of 64-bit floats. All functions are
pure: inputs are never modified and identical inputs give bit-identical outputs.
"""
from typing import Sequence, Union

import numpy as np
from atlas_commons.typing import FloatArray
from scipy.special import expit
from scipy.special import softmax as _softmax

from seq2seq_lrp.exceptions import NumericalError, ShapeError

NONLINEARITIES = ("sigmoid", "tanh")

ArrayLike = Union[FloatArray, Sequence[float], Sequence[Sequence[float]]]


def check_finite(array: FloatArray, name: str = "array") -> FloatArray:
    """
    Raise if `array` holds a NaN or an infinite value.

    Returns:
        `array`, unchanged.
    """
    if not np.all(np.isfinite(array)):
        raise NumericalError(f"Non-finite value encountered in {name}.")

    return array


def as_vector(values: ArrayLike, name: str = "vector") -> FloatArray:
    """
    Convert `values` into a finite float64 1D array.

    Raises:
        ShapeError if `values` is not one-dimensional.
        NumericalError if `values` holds a non-finite value.
    """
    vector = np.asarray(values, dtype=np.float64)
    if vector.ndim != 1:
        raise ShapeError(f"Expected a 1D {name}, got an array of shape {vector.shape}.")

    return check_finite(vector, name)


def as_matrix(values: ArrayLike, name: str = "matrix") -> FloatArray:
    """
    Convert `values` into a finite float64 2D array.

    Raises:
        ShapeError if `values` is not two-dimensional or has an empty dimension.
        NumericalError if `values` holds a non-finite value.
    """
    matrix = np.asarray(values, dtype=np.float64)
    if matrix.ndim != 2 or 0 in matrix.shape:
        raise ShapeError(f"Expected a non-empty 2D {name}, got an array of shape {matrix.shape}.")

    return check_finite(matrix, name)


def affine(weight: FloatArray, x: FloatArray, bias: FloatArray) -> FloatArray:
    """
    Compute the affine map `weight @ x + bias`.

    Args:
        weight: matrix of shape (M, D).
        x: vector of shape (D,).
        bias: vector of shape (M,).

    Returns:
        vector of shape (M,) whose j-th entry is sum_i weight[j, i] * x[i] + bias[j].

    Raises:
        ShapeError if the shapes of the three operands are inconsistent.
    """
    if weight.ndim != 2 or x.ndim != 1 or bias.ndim != 1:
        raise ShapeError(
            f"affine expects a matrix and two vectors, got shapes {weight.shape}, {x.shape} "
            f"and {bias.shape}."
        )
    if weight.shape[1] != x.shape[0]:
        raise ShapeError(
            f"Matrix of shape {weight.shape} cannot be applied to a vector of shape {x.shape}."
        )
    if weight.shape[0] != bias.shape[0]:
        raise ShapeError(
            f"Matrix of shape {weight.shape} is incompatible with a bias of shape {bias.shape}."
        )

    return check_finite(weight @ x + bias, "affine output")


def apply_nonlinearity(kind: str, x: FloatArray) -> FloatArray:
    """
    Apply the sigmoid or the hyperbolic tangent elementwise.

    Args:
        kind: either "sigmoid" or "tanh".
        x: finite vector.

    Returns:
        vector with values in (0, 1) for "sigmoid" and in (-1, 1) for "tanh" (up to float
        saturation).
    """
    if kind == "sigmoid":
        return expit(x)
    if kind == "tanh":
        return np.tanh(x)

    raise ValueError(f"Unknown nonlinearity {kind!r}, expected one of {NONLINEARITIES}.")


def softmax(x: FloatArray) -> FloatArray:
    """
    Numerically stable softmax.

    The maximum of `x` is subtracted before exponentiation so that large inputs such as
    [1000, 1000] do not overflow. The output is positive and sums to 1.
    """
    if x.ndim != 1 or x.shape[0] == 0:
        raise ShapeError(f"softmax expects a non-empty vector, got shape {x.shape}.")
    check_finite(x, "softmax input")

    return _softmax(x)
