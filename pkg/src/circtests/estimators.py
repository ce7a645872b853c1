"""Kernel regression estimators for circular predictors and/or responses.

Three scenarios are covered:

* ``circ-lin``: circular predictor, real response. Local trigonometric
  (``a + b sin``) weighted least squares with a von Mises kernel.
* ``lin-circ``: real predictor, circular response, Gaussian kernel.
* ``circ-circ``: circular predictor, circular response, von Mises kernel.

For circular responses the fit is ``atan2`` of local-linear weighted means
of the response sines and cosines.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .core import KernelSpec, geodesic_distance, kernel_eval, wrap_angle
from .errors import (
    AllZeroWeights,
    InvalidInput,
    SingularFit,
    TooFewObservations,
    ZeroDistance,
    ZeroResultant,
)

Kind = Literal["circular", "linear"]

# reciprocal condition number below which a local 2x2 system is singular
RCOND_TOL = 1e-12
# |(g1, g2)| below this fraction of sum |W| means an undefined direction
RESULTANT_TOL = 1e-12
CV_GRID_POINTS = 30


@dataclass(frozen=True)
class RegressionSample:
    """Paired observations tagged with the nature of each variable.

    Circular entries are wrapped to ``[0, 2*pi)`` on construction.
    """

    predictors: np.ndarray
    responses: np.ndarray
    predictor_kind: Kind = "circular"
    response_kind: Kind = "linear"

    def __post_init__(self):
        x = np.asarray(self.predictors, dtype=float).ravel()
        y = np.asarray(self.responses, dtype=float).ravel()
        if x.shape != y.shape or x.size < 1:
            raise InvalidInput("predictors and responses need equal, nonzero length")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise InvalidInput("observations must be finite")
        for kind in (self.predictor_kind, self.response_kind):
            if kind not in ("circular", "linear"):
                raise InvalidInput(f"unknown variable kind {kind!r}")
        if self.predictor_kind == "linear" and self.response_kind == "linear":
            raise InvalidInput("at least one variable must be circular")
        if self.predictor_kind == "circular":
            x = wrap_angle(x)
        if self.response_kind == "circular":
            y = wrap_angle(y)
        object.__setattr__(self, "predictors", np.atleast_1d(x))
        object.__setattr__(self, "responses", np.atleast_1d(y))

    @property
    def n(self) -> int:
        return self.predictors.size

    @property
    def scenario(self) -> str:
        short = {"circular": "circ", "linear": "lin"}
        return f"{short[self.predictor_kind]}-{short[self.response_kind]}"

    @property
    def kernel_kind(self) -> str:
        return "von_mises" if self.predictor_kind == "circular" else "gaussian"

    def with_responses(self, responses) -> "RegressionSample":
        return RegressionSample(self.predictors, responses, self.predictor_kind, self.response_kind)


# ---------------------------------------------------------------------------
# kernel rows


def _differences(x_data, x_eval, circular: bool) -> np.ndarray:
    """``(m, n)`` array of ``x_data[j] - x_eval[r]``."""
    d = np.asarray(x_data, dtype=float)[None, :] - np.asarray(x_eval, dtype=float)[:, None]
    return d


def _row_params(param, m: int) -> np.ndarray:
    p = np.broadcast_to(np.asarray(param, dtype=float), (m,)) if np.ndim(param) == 0 else np.asarray(param, dtype=float)
    if p.shape != (m,):
        raise InvalidInput("per-point smoothing vector has the wrong length")
    return p


def kernel_rows(diff, kind: str, param, exclude=None) -> np.ndarray:
    """Kernel weights up to a positive factor per row.

    Each row is rescaled so its largest entry is 1, which keeps weights
    representable at very large concentrations (all downstream uses are
    ratios within a row). ``param`` is a scalar or one value per row;
    ``exclude`` is a boolean mask of entries forced to zero.
    """
    m = diff.shape[0]
    p = _row_params(param, m)[:, None]
    if kind == "von_mises":
        expo = p * np.cos(diff)
    elif kind == "gaussian":
        if np.any(p <= 0):
            raise InvalidInput("Gaussian bandwidth must be > 0")
        expo = -0.5 * (diff / p) ** 2
    else:
        raise InvalidInput(f"unknown kernel kind {kind!r}")
    if exclude is not None:
        expo = np.where(exclude, -np.inf, expo)
    top = np.max(expo, axis=1, keepdims=True)
    top = np.where(np.isfinite(top), top, 0.0)
    return np.exp(expo - top)


# ---------------------------------------------------------------------------
# circular predictor, linear response


def _trig_rows(K: np.ndarray, diff: np.ndarray) -> np.ndarray:
    s = np.sin(diff)
    s0 = K.sum(axis=1)
    s1 = (K * s).sum(axis=1)
    s2 = (K * s * s).sum(axis=1)
    # eigenvalues of [[s0, s1], [s1, s2]]
    half_tr = 0.5 * (s0 + s2)
    rad = np.hypot(0.5 * (s0 - s2), s1)
    lam_max, lam_min = half_tr + rad, half_tr - rad
    with np.errstate(divide="ignore", invalid="ignore"):
        rcond = np.where(lam_max > 0, lam_min / lam_max, 0.0)
    if np.any(~(rcond >= RCOND_TOL)):
        bad = int(np.argmax(~(rcond >= RCOND_TOL)))
        raise SingularFit(
            f"local design is singular at evaluation point {bad} (rcond={rcond[bad]:.3g}); "
            "concentration too large or data too sparse"
        )
    det = s0 * s2 - s1 * s1
    return K * (s2[:, None] - s * s1[:, None]) / det[:, None]


def circ_lin_matrix(theta, kappa, eval_points=None, loo: bool = False) -> np.ndarray:
    """Equivalent-kernel rows of the local trigonometric fit.

    Row ``r`` maps the responses to the fit at ``eval_points[r]``. ``kappa``
    is a scalar or one concentration per evaluation point. ``loo=True``
    (only with ``eval_points=None``) drops observation ``r`` from row ``r``.
    """
    theta = np.asarray(theta, dtype=float)
    ev = theta if eval_points is None else np.atleast_1d(np.asarray(eval_points, dtype=float))
    if np.any(np.asarray(kappa) < 0):
        raise InvalidInput("concentration must be >= 0")
    diff = _differences(theta, ev, circular=True)
    exclude = np.eye(theta.size, dtype=bool) if loo else None
    if loo and eval_points is not None:
        raise InvalidInput("leave-one-out rows are only defined at the design points")
    K = kernel_rows(diff, "von_mises", kappa, exclude)
    return _trig_rows(K, diff)


def _require_scenario(sample: RegressionSample, scenario: str):
    if sample.scenario != scenario:
        raise InvalidInput(f"expected a {scenario} sample, got {sample.scenario}")


def smoothing_matrix_circ_lin(sample: RegressionSample, kappa) -> np.ndarray:
    """Hat matrix ``S`` with ``S @ Y`` the fitted values at the design points."""
    _require_scenario(sample, "circ-lin")
    if sample.n < 2:
        raise TooFewObservations("need at least 2 observations")
    return circ_lin_matrix(sample.predictors, kappa)


def fit_circ_lin(sample: RegressionSample, kappa, eval_points=None) -> np.ndarray:
    """Local trigonometric estimate of the regression function."""
    _require_scenario(sample, "circ-lin")
    if sample.n < 2:
        raise TooFewObservations("need at least 2 observations")
    S = circ_lin_matrix(sample.predictors, kappa, eval_points)
    return S @ sample.responses


# ---------------------------------------------------------------------------
# circular response


def _kernel_kind(kind: Kind) -> str:
    return "von_mises" if kind == "circular" else "gaussian"


def ll_weight_matrix(x, x_eval, kind: Kind, param, loo: bool = False) -> np.ndarray:
    """Local-linear weights ``W(x_j - x_eval[r])`` up to a positive row factor.

    Circular predictors use the sine analogue of the linear weights.
    """
    x = np.asarray(x, dtype=float)
    x_eval = np.atleast_1d(np.asarray(x_eval, dtype=float))
    diff = _differences(x, x_eval, kind == "circular")
    exclude = np.eye(x.size, dtype=bool) if loo else None
    K = kernel_rows(diff, _kernel_kind(kind), param, exclude)
    d = np.sin(diff) if kind == "circular" else diff
    t1 = (K * d).sum(axis=1, keepdims=True)
    t2 = (K * d * d).sum(axis=1, keepdims=True)
    W = K * (t2 - d * t1)
    if np.any(np.all(W == 0, axis=1)):
        bad = int(np.argmax(np.all(W == 0, axis=1)))
        raise AllZeroWeights(f"all local weights vanish at evaluation point {bad}")
    return W


def local_linear_weights(predictors, at: float, spec: KernelSpec) -> np.ndarray:
    """Unnormalized local-linear weights of every observation at ``at``.

    Uses actual kernel densities and the leading ``1/n`` factor, so the
    values are directly comparable with a term-by-term evaluation.
    """
    x = np.asarray(predictors, dtype=float)
    n = x.size
    if n < 2:
        raise TooFewObservations("need at least 2 observations")
    diff = x - float(at)
    K = kernel_eval(spec, diff)
    d = np.sin(diff) if spec.circular else diff
    W = K * (np.sum(K * d * d) - d * np.sum(K * d)) / n
    if np.all(W == 0):
        raise AllZeroWeights("all local weights vanish")
    return W


def direction_from_weights(W: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """``atan2(W @ sin(phi), W @ cos(phi))`` with a resultant check.

    ``phi`` may be a vector or an ``(n, B)`` matrix of response columns.
    """
    g1 = W @ np.sin(phi)
    g2 = W @ np.cos(phi)
    scale = np.abs(W).sum(axis=1)
    if phi.ndim == 2:
        scale = scale[:, None]
    if np.any(np.hypot(g1, g2) <= RESULTANT_TOL * scale):
        raise ZeroResultant("local resultant is numerically zero; direction undefined")
    return wrap_angle(np.arctan2(g1, g2))


def fit_circ_response(sample: RegressionSample, spec: KernelSpec, eval_points=None) -> np.ndarray:
    """Circular-response kernel estimate ``atan2(g1, g2)``."""
    if sample.response_kind != "circular":
        raise InvalidInput("fit_circ_response needs a circular response")
    if sample.n < 2:
        raise TooFewObservations("need at least 2 observations")
    if spec.circular != (sample.predictor_kind == "circular"):
        raise InvalidInput("kernel kind does not match the predictor kind")
    ev = sample.predictors if eval_points is None else eval_points
    W = ll_weight_matrix(sample.predictors, ev, sample.predictor_kind, spec.param)
    return direction_from_weights(W, sample.responses)


def fit(sample: RegressionSample, param, eval_points=None) -> np.ndarray:
    """Dispatch to the estimator matching the sample's scenario."""
    if sample.scenario == "circ-lin":
        return fit_circ_lin(sample, param, eval_points)
    return fit_circ_response(sample, KernelSpec(sample.kernel_kind, param), eval_points)


# ---------------------------------------------------------------------------
# cross-validation


@dataclass(frozen=True)
class CVResult:
    param: float
    score: float
    grid: np.ndarray = field(repr=False)
    scores: np.ndarray = field(repr=False)


def default_grid(sample: RegressionSample, points: int = CV_GRID_POINTS) -> np.ndarray:
    """Log-spaced search grid: kappa in [0.1, 100] or h in [0.01, 2] x range."""
    if sample.predictor_kind == "circular":
        return np.geomspace(0.1, 100.0, points)
    rng = float(np.ptp(sample.predictors))
    if rng <= 0:
        raise InvalidInput("linear predictors have zero range")
    return np.geomspace(0.01 * rng, 2.0 * rng, points)


def loo_predictions(sample: RegressionSample, param) -> np.ndarray:
    """Leave-one-out fits ``m_(-j)(x_j)`` at every design point."""
    if sample.scenario == "circ-lin":
        S = circ_lin_matrix(sample.predictors, param, loo=True)
        return S @ sample.responses
    # the local sums at x_j get no contribution from x_j itself (its offset
    # is zero), so dropping j only removes its own column
    W = ll_weight_matrix(sample.predictors, sample.predictors, sample.predictor_kind, param, loo=True)
    return direction_from_weights(W, sample.responses)


def cv_score(sample: RegressionSample, param) -> float:
    """Leave-one-out loss: squared error, or ``1 - cos`` for circular responses."""
    pred = loo_predictions(sample, param)
    if sample.response_kind == "linear":
        return float(np.sum((sample.responses - pred) ** 2))
    return float(np.sum(1.0 - np.cos(sample.responses - pred)))


def cv_select(sample: RegressionSample, grid=None) -> CVResult:
    """Grid search minimizing the leave-one-out criterion.

    Grid points whose fit fails score ``+inf``. Ties go to the smoother
    parameter (smaller concentration, larger bandwidth).
    """
    if sample.n < 3:
        raise TooFewObservations("cross-validation needs at least 3 observations")
    grid = default_grid(sample) if grid is None else np.asarray(grid, dtype=float)
    if grid.size == 0 or np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise InvalidInput("grid must be nonempty, positive and strictly ascending")
    scores = np.empty(grid.size)
    for i, p in enumerate(grid):
        try:
            scores[i] = cv_score(sample, p)
        except (SingularFit, ZeroResultant, AllZeroWeights):
            scores[i] = np.inf
    if not np.any(np.isfinite(scores)):
        raise SingularFit("every grid point failed during cross-validation")
    best = np.min(scores)
    ties = np.flatnonzero(scores <= best + 1e-12 * max(1.0, abs(best)))
    idx = int(ties[0] if sample.predictor_kind == "circular" else ties[-1])
    return CVResult(float(grid[idx]), float(scores[idx]), grid, scores)


# ---------------------------------------------------------------------------
# preliminary per-observation smoothing


NEIGHBOURS = 8


def preliminary_param_vector(predictors, kind: Kind) -> np.ndarray:
    """Local smoothing from the distance to the 8th nearest neighbour.

    Circular predictors (geodesic distance) give concentrations ``1/d**2``;
    linear predictors give bandwidths ``d``. A zero distance (tied points)
    falls back to the smallest nonzero pairwise distance.
    """
    x = np.asarray(predictors, dtype=float).ravel()
    n = x.size
    if n < NEIGHBOURS + 1:
        raise TooFewObservations(f"the {NEIGHBOURS}-neighbour rule needs n >= {NEIGHBOURS + 1}")
    if kind == "circular":
        D = geodesic_distance(x[:, None], x[None, :])
    elif kind == "linear":
        D = np.abs(x[:, None] - x[None, :])
    else:
        raise InvalidInput(f"unknown variable kind {kind!r}")
    np.fill_diagonal(D, np.inf)
    d = np.sort(D, axis=1)[:, NEIGHBOURS - 1]
    if np.any(d == 0):
        off = D[np.isfinite(D)]
        positive = off[off > 0]
        if positive.size == 0:
            raise ZeroDistance("all predictors coincide")
        d = np.where(d == 0, positive.min(), d)
    return 1.0 / d**2 if kind == "circular" else d
