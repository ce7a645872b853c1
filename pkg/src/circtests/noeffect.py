"""No-effect tests.

``C1`` compares the residual sums of squares of the constant fit and the
local trigonometric fit (real response). ``C2`` is its circular analogue
built on the cosine distance (circular response, bootstrap only).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .calibration import (
    TestReport,
    bootstrap_indices,
    chi2_quadform_pvalue,
    exceedance_pvalue,
    smoothing_label,
)
from .core import KernelSpec, mean_direction, wrap_angle, ZERO_RESULTANT_TOL
from .errors import DegenerateResiduals, InvalidInput, ZeroResultant
from .estimators import RegressionSample, circ_lin_matrix, direction_from_weights, ll_weight_matrix

DEGENERATE_TOL = 1e-14


@dataclass(frozen=True)
class QuadraticFormPair:
    """``C1 = Y'BY / Y'AY`` with ``A = (I-S)'(I-S)`` and ``B = I - L - A``."""

    B: np.ndarray
    A: np.ndarray


def _forms(S: np.ndarray) -> QuadraticFormPair:
    n = S.shape[0]
    R = np.eye(n) - S
    A = R.T @ R
    B = np.eye(n) - np.full((n, n), 1.0 / n) - A
    return QuadraticFormPair(B=0.5 * (B + B.T), A=0.5 * (A + A.T))


def stat_c1(sample: RegressionSample, kappa: float) -> tuple[float, QuadraticFormPair]:
    """Observed ``C1 = (RSS0 - RSS) / RSS`` and its quadratic-form matrices."""
    if sample.scenario != "circ-lin":
        raise InvalidInput("C1 needs a circular predictor and a real response")
    y = sample.responses
    S = circ_lin_matrix(sample.predictors, kappa)
    rss0 = float(np.sum((y - y.mean()) ** 2))
    rss = float(np.sum((y - S @ y) ** 2))
    if rss <= DEGENERATE_TOL * float(np.sum(y**2)):
        raise DegenerateResiduals("the local fit interpolates the responses (RSS ~ 0)")
    stat = (rss0 - rss) / rss
    forms = _forms(S)
    matrix_stat = float(y @ forms.B @ y) / float(y @ forms.A @ y)
    if not np.isclose(stat, matrix_stat, rtol=1e-8, atol=1e-8):
        raise ArithmeticError("C1 matrix form disagrees with the RSS form")
    return stat, forms


def noeffect_test_circ_lin(
    sample: RegressionSample,
    kappa: float,
    calibration: Literal["chi2", "bootstrap"] = "chi2",
    boot_reps: int = 500,
    seed: int | None = None,
) -> TestReport:
    """No-effect test for a circular predictor and real response.

    ``chi2`` uses the three-cumulant approximation of ``P(e'(B - Obs A)e > 0)``
    (normal errors). ``bootstrap`` resamples the residuals from the sample
    mean and recomputes ``C1`` with the same ``kappa``.
    """
    obs, forms = stat_c1(sample, kappa)
    label = smoothing_label("circular", kappa)
    if calibration == "chi2":
        p = chi2_quadform_pvalue(forms.B - obs * forms.A)
        return TestReport("noeffect", obs, p, "chi2", label)
    if calibration != "bootstrap":
        raise InvalidInput(f"unknown calibration {calibration!r}")
    y = sample.responses
    ybar = y.mean()
    resid = y - ybar
    idx = bootstrap_indices(sample.n, boot_reps, seed)
    ystar = ybar + resid[idx]  # (B, n)
    num = np.einsum("bi,ij,bj->b", ystar, forms.B, ystar)
    den = np.einsum("bi,ij,bj->b", ystar, forms.A, ystar)
    with np.errstate(divide="ignore", invalid="ignore"):
        boot = num / den
    p = exceedance_pvalue(boot, obs)
    return TestReport("noeffect", obs, p, "bootstrap", label, int(boot_reps), int(seed))


def _column_mean_direction(phi: np.ndarray) -> np.ndarray:
    c = np.cos(phi).sum(axis=0)
    s = np.sin(phi).sum(axis=0)
    if np.any(np.hypot(c, s) < ZERO_RESULTANT_TOL * phi.shape[0]):
        raise ZeroResultant("resultant vector is numerically zero")
    return wrap_angle(np.arctan2(s, c))


def _c2_columns(W: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """``C2`` for each response column of ``phi`` (shape ``(n, B)``)."""
    fitted = direction_from_weights(W, phi)
    gamma = _column_mean_direction(phi)
    d0 = np.sum(1.0 - np.cos(phi - gamma[None, :]), axis=0)
    d1 = np.sum(1.0 - np.cos(phi - fitted), axis=0)
    if np.any(d1 <= DEGENERATE_TOL * phi.shape[0]):
        raise DegenerateResiduals("responses coincide with the fitted curve")
    return (d0 - d1) / d1


def _check_circ_response(sample: RegressionSample, spec: KernelSpec):
    if sample.response_kind != "circular":
        raise InvalidInput("C2 needs a circular response")
    if spec.circular != (sample.predictor_kind == "circular"):
        raise InvalidInput("kernel kind does not match the predictor kind")


def stat_c2(sample: RegressionSample, spec: KernelSpec) -> float:
    """Observed ``C2`` (cosine-distance analogue of ``C1``)."""
    _check_circ_response(sample, spec)
    mean_direction(sample.responses)  # raises on a zero resultant
    W = ll_weight_matrix(sample.predictors, sample.predictors, sample.predictor_kind, spec.param)
    return float(_c2_columns(W, sample.responses[:, None])[0])


def noeffect_test_circ_response(
    sample: RegressionSample,
    spec: KernelSpec,
    boot_reps: int = 500,
    seed: int | None = None,
) -> TestReport:
    """Bootstrap no-effect test for a circular response.

    Residuals about the sample mean direction are resampled with
    replacement, rotated back onto the mean direction and ``C2`` is
    recomputed with the same smoothing parameter.
    """
    _check_circ_response(sample, spec)
    phi = sample.responses
    gamma = mean_direction(phi)
    W = ll_weight_matrix(sample.predictors, sample.predictors, sample.predictor_kind, spec.param)
    obs = float(_c2_columns(W, phi[:, None])[0])
    resid = phi - gamma
    idx = bootstrap_indices(sample.n, boot_reps, seed)
    phistar = wrap_angle(gamma + resid[idx].T)  # (n, B)
    boot = _c2_columns(W, phistar)
    p = exceedance_pvalue(boot, obs)
    label = smoothing_label(sample.predictor_kind, spec.param)
    return TestReport("noeffect", obs, p, "bootstrap", label, int(boot_reps), int(seed))
