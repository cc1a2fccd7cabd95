"""Gaussian coordinate-regression loss with analytic gradients.

A predicted box boundary is modeled as a univariate Gaussian with location
``loc`` and log-variance ``log_var`` (the log-variance is the trained
quantity: it keeps gradients bounded where a raw standard deviation in a
denominator would not). The annotated boundary is a point mass, and matching
the two distributions reduces, up to additive constants, to

    value = exp(-log_var)/2 * e^2          + log_var/2     for |e| <= 1
    value = exp(-log_var) * (|e| - 1/2)    + log_var/2     for |e| > 1

with residual ``e = label - loc``. The large-residual branch swaps the
quadratic term for a linear one, mirroring the smooth-L1 construction, so a
far-off prediction cannot dominate training. The additive constants dropped
from the divergence (half the log of two pi, plus the entropy of the label
distribution) do not depend on the prediction; reported loss values are
comparable only within this convention and gradients are unaffected.

At ``log_var = 0`` (unit variance) the small-residual branch is exactly the
squared-error loss ``e^2 / 2``. Both branches and all three outputs agree at
``|e| = 1``, so the branch assignment at the boundary (quadratic) is
observationally irrelevant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Literal, Sequence

import numpy as np

from .validation import check_finite_scalar, check_positive_scalar

__all__ = [
    "GaussianPrediction",
    "LossOutput",
    "BatchLossOutput",
    "kl_loss",
    "kl_loss_batch",
    "kl_loss_arrays",
    "sigma_from_log_var",
    "variance_from_log_var",
    "log_var_from_sigma",
    "gradients_wrt_sigma",
    "optimal_log_variance",
    "GradCheckResult",
    "gradient_check",
]

Branch = Literal["quadratic", "linear"]


@dataclass(frozen=True)
class GaussianPrediction:
    """Predicted boundary: location plus log-variance, both finite."""

    loc: float
    log_var: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "loc", check_finite_scalar("loc", self.loc))
        object.__setattr__(
            self, "log_var", check_finite_scalar("log_var", self.log_var)
        )

    @property
    def sigma(self) -> float:
        return math.exp(0.5 * self.log_var)

    @property
    def variance(self) -> float:
        return math.exp(self.log_var)


@dataclass(frozen=True)
class LossOutput:
    """Loss value with gradients w.r.t. (loc, log_var) and the branch taken."""

    value: float
    grad_loc: float
    grad_log_var: float
    branch: Branch


@dataclass(frozen=True)
class BatchLossOutput:
    outputs: tuple[LossOutput, ...]
    total: float


def kl_loss(pred: GaussianPrediction, label: float) -> LossOutput:
    """Loss and gradients for a single coordinate.

    The boundary case |e| = 1 is assigned to the quadratic branch; both
    branch formulas coincide there in value and in both gradients.
    """
    label = check_finite_scalar("label", label)
    e = label - pred.loc
    precision = math.exp(-pred.log_var)
    abs_e = abs(e)
    if abs_e <= 1.0:
        return LossOutput(
            value=0.5 * precision * e * e + 0.5 * pred.log_var,
            grad_loc=-precision * e,
            grad_log_var=0.5 - 0.5 * precision * e * e,
            branch="quadratic",
        )
    sign = 1.0 if e > 0.0 else -1.0
    return LossOutput(
        value=precision * (abs_e - 0.5) + 0.5 * pred.log_var,
        grad_loc=-precision * sign,
        grad_log_var=0.5 - precision * (abs_e - 0.5),
        branch="linear",
    )


def kl_loss_batch(
    preds: Sequence[GaussianPrediction], labels: Sequence[float]
) -> BatchLossOutput:
    """Element-wise loss over the four box coordinates plus their sum.

    Coordinates are independent: no cross-coordinate coupling, and the total
    is accumulated left to right for deterministic rounding.
    """
    if len(preds) != len(labels):
        raise ValueError(
            f"got {len(preds)} predictions but {len(labels)} labels"
        )
    outputs = tuple(kl_loss(p, g) for p, g in zip(preds, labels))
    total = 0.0
    for out in outputs:
        total += out.value
    return BatchLossOutput(outputs=outputs, total=total)


def kl_loss_arrays(
    loc: float, log_var: float, labels: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized per-label (value, grad_loc, grad_log_var) for shared
    scalar parameters. Used by the synthetic trainer and the gradient
    checker; matches :func:`kl_loss` element for element.
    """
    e = labels - loc
    abs_e = np.abs(e)
    precision = math.exp(-log_var)
    quad = abs_e <= 1.0
    quad_term = 0.5 * precision * e * e
    lin_term = precision * (abs_e - 0.5)
    value = np.where(quad, quad_term, lin_term) + 0.5 * log_var
    grad_loc = np.where(quad, -precision * e, -precision * np.sign(e))
    grad_log_var = np.where(quad, 0.5 - quad_term, 0.5 - lin_term)
    return value, grad_loc, grad_log_var


def sigma_from_log_var(log_var: float) -> float:
    """Standard deviation recovered from the trained log-variance."""
    return math.exp(0.5 * check_finite_scalar("log_var", log_var))


def variance_from_log_var(log_var: float) -> float:
    return math.exp(check_finite_scalar("log_var", log_var))


def log_var_from_sigma(sigma: float) -> float:
    sigma = check_positive_scalar("sigma", sigma)
    return 2.0 * math.log(sigma)


def gradients_wrt_sigma(pred: GaussianPrediction, label: float) -> tuple[float, float]:
    """Gradients in the (loc, sigma) parameterization, by chain rule.

    With log_var = 2 log(sigma), d/d sigma = (2 / sigma) * d/d log_var.
    Exposed for cross-validating the trained log-variance form against the
    direct standard-deviation derivatives; training always uses log_var.
    """
    out = kl_loss(pred, label)
    return out.grad_loc, out.grad_log_var * 2.0 / pred.sigma


def optimal_log_variance(residuals: Sequence[float]) -> float:
    """Stationary log-variance of the mean small-residual loss.

    For fixed residuals all within the quadratic branch, the mean loss has a
    unique stationary point in log_var at log(mean(residual^2)). Serves as a
    closed-form target for the gradient-descent trainer.
    """
    arr = np.asarray(residuals, dtype=float)
    if arr.size == 0:
        raise ValueError("residuals must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError("residuals must be finite")
    if np.any(np.abs(arr) > 1.0):
        raise ValueError("residuals must satisfy |r| <= 1 (quadratic branch)")
    mean_sq = float(np.mean(arr * arr))
    if mean_sq == 0.0:
        raise ValueError(
            "all residuals are zero: stationary log-variance diverges to -inf"
        )
    return math.log(mean_sq)


@dataclass(frozen=True)
class GradCheckResult:
    """Worst relative gradient error per branch, with the offending case."""

    n_cases: int
    step: float
    max_rel_quadratic: float
    max_rel_linear: float
    worst_case: tuple[float, float, float, str]  # (loc, log_var, label, which)

    @property
    def max_rel(self) -> float:
        return max(self.max_rel_quadratic, self.max_rel_linear)


def _rel_err(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1.0)


def gradient_check(
    n_cases: int = 2000,
    seed: int = 0,
    step: float = 1e-6,
    loss_fn: Callable[[GaussianPrediction, float], LossOutput] | None = None,
) -> GradCheckResult:
    """Compare analytic gradients against central finite differences.

    Draws ``n_cases`` random (loc, log_var, label) triples per branch with
    the residual kept at least 1e-3 away from the branch boundary so the
    difference stencil never straddles it. Relative error uses the
    denominator max(|analytic|, |numeric|, 1).
    """
    if n_cases < 0:
        raise ValueError("n_cases must be >= 0")
    fn = loss_fn if loss_fn is not None else kl_loss
    rng = np.random.default_rng(seed)
    max_rel = {"quadratic": 0.0, "linear": 0.0}
    worst = (0.0, 0.0, 0.0, "none")
    worst_rel = -1.0
    for branch in ("quadratic", "linear"):
        for _ in range(n_cases):
            loc = float(rng.uniform(-2.0, 2.0))
            log_var = float(rng.uniform(-2.0, 2.0))
            if branch == "quadratic":
                e = float(rng.uniform(1e-3, 1.0 - 1e-3))
            else:
                e = float(rng.uniform(1.0 + 1e-3, 3.0))
            if rng.uniform() < 0.5:
                e = -e
            label = loc + e
            out = fn(GaussianPrediction(loc, log_var), label)
            fd_loc = (
                fn(GaussianPrediction(loc + step, log_var), label).value
                - fn(GaussianPrediction(loc - step, log_var), label).value
            ) / (2.0 * step)
            fd_log_var = (
                fn(GaussianPrediction(loc, log_var + step), label).value
                - fn(GaussianPrediction(loc, log_var - step), label).value
            ) / (2.0 * step)
            for analytic, numeric, which in (
                (out.grad_loc, fd_loc, "grad_loc"),
                (out.grad_log_var, fd_log_var, "grad_log_var"),
            ):
                rel = _rel_err(analytic, numeric)
                if rel > max_rel[branch]:
                    max_rel[branch] = rel
                if rel > worst_rel:
                    worst_rel = rel
                    worst = (loc, log_var, label, which)
    return GradCheckResult(
        n_cases=n_cases,
        step=step,
        max_rel_quadratic=max_rel["quadratic"],
        max_rel_linear=max_rel["linear"],
        worst_case=worst,
    )
