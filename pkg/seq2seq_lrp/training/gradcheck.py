"""Comparison of the analytic gradients of the training loss with central finite differences."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence

from seq2seq_lrp.model.weights import ModelConfig, ModelWeights
from seq2seq_lrp.training.trainer import loss_and_gradients, sequence_loss

L = logging.getLogger(__name__)

DEFAULT_STEP = 1e-5
DEFAULT_RTOL = 1e-4
DEFAULT_ATOL = 1e-9


@dataclass
class GradientCheckReport:
    """
    Outcome of a gradient check.

    Attributes:
        checked: number of checked parameter entries.
        passed: number of entries whose analytic and numerical gradients agree.
        worst_relative_error: largest relative error over the checked entries.
        worst_entry: name and flat index of the entry with the largest relative error.
        failures: number of failing entries per parameter name.
    """

    checked: int = 0
    passed: int = 0
    worst_relative_error: float = 0.0
    worst_entry: str = ""
    failures: Dict[str, int] = field(default_factory=dict)

    @property
    def pass_fraction(self) -> float:
        """Fraction of the checked entries which passed, 1 if nothing was checked."""
        return self.passed / self.checked if self.checked else 1.0


def check_gradients(  # pylint: disable=too-many-arguments,too-many-locals
    weights: ModelWeights,
    ids: Sequence[int],
    target_ids: Sequence[int],
    config: Optional[ModelConfig] = None,
    step: float = DEFAULT_STEP,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> GradientCheckReport:
    """
    Check every parameter entry of `weights` by central differences of the teacher-forced loss.

    An entry passes if |analytic - numerical| <= rtol * max(|analytic|, |numerical|) or
    |analytic - numerical| < atol. The weights are perturbed in a private copy.

    Returns:
        the check report.
    """
    config = weights.config if config is None else config
    _, analytic = loss_and_gradients(weights, ids, target_ids, config)
    perturbed = weights.copy()
    report = GradientCheckReport()
    for name, array in perturbed.parameters().items():
        flat = array.reshape(-1)
        expected = analytic[name].reshape(-1)
        for index in range(flat.size):
            original = flat[index]
            flat[index] = original + step
            loss_plus = sequence_loss(perturbed, ids, target_ids, config)
            flat[index] = original - step
            loss_minus = sequence_loss(perturbed, ids, target_ids, config)
            flat[index] = original
            numerical = (loss_plus - loss_minus) / (2.0 * step)
            error = abs(expected[index] - numerical)
            scale = max(abs(expected[index]), abs(numerical))
            relative = error / scale if scale > 0.0 else 0.0
            report.checked += 1
            if error <= rtol * scale or error < atol:
                report.passed += 1
            else:
                report.failures[name] = report.failures.get(name, 0) + 1
            if error >= atol and relative > report.worst_relative_error:
                report.worst_relative_error = relative
                report.worst_entry = f"{name}[{index}]"
    L.info(
        "Gradient check: %d of %d entries passed, worst relative error %.3g at %s",
        report.passed,
        report.checked,
        report.worst_relative_error,
        report.worst_entry or "-",
    )

    return report
