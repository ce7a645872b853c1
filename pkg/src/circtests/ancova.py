"""Equality and parallelism tests for regression curves across groups.

Real responses (circular predictor): ``C3`` (equality) and ``C4``
(parallelism), both normalized by a periodic pseudoresidual variance
estimate and calibrated by chi-square or bootstrap.

Circular responses: ``C5`` (equality) and ``C6`` (parallelism, angular
shifts), normalized by the mean cosine distance ``Dbar`` and calibrated by
bootstrap.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, NamedTuple, Optional

import numpy as np
import scipy.linalg

from .calibration import TestReport, chi2_quadform_pvalue, exceedance_pvalue, smoothing_label
from .core import TWO_PI, KernelSpec, substream, wrap_angle
from .errors import (
    DegenerateVariance,
    DuplicatePredictors,
    InvalidInput,
    SingularShiftSystem,
    ZeroResultant,
)
from .estimators import (
    RegressionSample,
    circ_lin_matrix,
    direction_from_weights,
    ll_weight_matrix,
    preliminary_param_vector,
)

Which = Literal["equality", "parallelism"]
DEGENERATE_TOL = 1e-14


@dataclass(frozen=True)
class GroupedSample:
    """Observations split into ``I >= 2`` groups sharing variable kinds.

    Arrays are stacked group by group; ``labels[k]`` is the 0-based group of
    stacked observation ``k``.
    """

    groups: tuple

    def __post_init__(self):
        groups = tuple(self.groups)
        if len(groups) < 2:
            raise InvalidInput("need at least two groups")
        kinds = {(g.predictor_kind, g.response_kind) for g in groups}
        if len(kinds) != 1:
            raise InvalidInput("all groups must share predictor and response kinds")
        if any(g.n < 3 for g in groups):
            raise InvalidInput("every group needs at least 3 observations")
        object.__setattr__(self, "groups", groups)

    @classmethod
    def from_arrays(cls, predictors, responses, labels, predictor_kind="circular", response_kind="linear"):
        """Split flat arrays by label, keeping first-appearance group order."""
        labels = np.asarray(labels)
        x = np.asarray(predictors, dtype=float)
        y = np.asarray(responses, dtype=float)
        _, first = np.unique(labels, return_index=True)
        order = labels[np.sort(first)]
        return cls(tuple(
            RegressionSample(x[labels == g], y[labels == g], predictor_kind, response_kind) for g in order
        ))

    @property
    def I(self) -> int:
        return len(self.groups)

    @property
    def sizes(self) -> np.ndarray:
        return np.array([g.n for g in self.groups])

    @property
    def n(self) -> int:
        return int(self.sizes.sum())

    @property
    def predictors(self) -> np.ndarray:
        return np.concatenate([g.predictors for g in self.groups])

    @property
    def responses(self) -> np.ndarray:
        return np.concatenate([g.responses for g in self.groups])

    @property
    def labels(self) -> np.ndarray:
        return np.repeat(np.arange(self.I), self.sizes)

    @property
    def predictor_kind(self) -> str:
        return self.groups[0].predictor_kind

    @property
    def response_kind(self) -> str:
        return self.groups[0].response_kind

    @property
    def scenario(self) -> str:
        return self.groups[0].scenario

    def slices(self) -> list[slice]:
        ends = np.cumsum(self.sizes)
        return [slice(int(e - s), int(e)) for s, e in zip(self.sizes, ends)]

    def indicator(self) -> np.ndarray:
        """``(n, I)`` 0/1 group membership matrix."""
        return (self.labels[:, None] == np.arange(self.I)[None, :]).astype(float)

    def pooled(self) -> RegressionSample:
        return RegressionSample(self.predictors, self.responses, self.predictor_kind, self.response_kind)

    def with_responses(self, responses) -> "GroupedSample":
        responses = np.asarray(responses, dtype=float)
        return GroupedSample(tuple(g.with_responses(responses[s]) for g, s in zip(self.groups, self.slices())))


# ---------------------------------------------------------------------------
# variance from periodic pseudoresiduals


class PseudoResiduals(NamedTuple):
    """Pseudoresiduals in sorted-angle order; ``order`` maps back to input."""

    residuals: np.ndarray
    a: np.ndarray
    b: np.ndarray
    c2: np.ndarray
    order: np.ndarray


def periodic_pseudoresiduals(group: RegressionSample) -> PseudoResiduals:
    """Difference-based residuals using circularly adjacent design points.

    With angles sorted on ``[0, 2*pi)`` and gaps measured along the circle,
    ``e[j] = a[j] Y[j-1] + b[j] Y[j+1] - Y[j]`` where ``a`` and ``b`` are the
    interpolation weights of the two neighbours (``a + b = 1``).
    """
    if group.scenario != "circ-lin":
        raise InvalidInput("pseudoresiduals need a circular predictor and a real response")
    if group.n < 3:
        raise InvalidInput("pseudoresiduals need at least 3 observations")
    order = np.argsort(group.predictors, kind="stable")
    theta = group.predictors[order]
    y = group.responses[order]
    gap_next = np.empty_like(theta)
    gap_next[:-1] = np.diff(theta)
    gap_next[-1] = theta[0] + TWO_PI - theta[-1]
    if np.any(gap_next <= 0):
        raise DuplicatePredictors("repeated predictor values within a group")
    gap_prev = np.roll(gap_next, 1)
    span = gap_prev + gap_next
    a = gap_next / span
    b = gap_prev / span
    resid = a * np.roll(y, 1) + b * np.roll(y, -1) - y
    return PseudoResiduals(resid, a, b, a**2 + b**2 + 1.0, order)


@dataclass(frozen=True)
class VarianceEstimate:
    """Group and pooled variances with ``Y'P'PY / (n - I) == sigma2_pooled``."""

    sigma2_by_group: np.ndarray
    sigma2_pooled: float
    P: np.ndarray

    @property
    def K(self) -> np.ndarray:
        return self.P.T @ self.P


def pooled_variance(sample: GroupedSample) -> VarianceEstimate:
    n, I = sample.n, sample.I
    P = np.zeros((n, n))
    by_group = np.empty(I)
    for i, (g, sl) in enumerate(zip(sample.groups, sample.slices())):
        pr = periodic_pseudoresiduals(g)
        by_group[i] = np.mean(pr.residuals**2 / pr.c2)
        pos = sl.start + pr.order
        c = np.sqrt(pr.c2)
        P[pos, np.roll(pos, 1)] += pr.a / c
        P[pos, np.roll(pos, -1)] += pr.b / c
        P[pos, pos] -= 1.0 / c
    pooled = float(np.sum(sample.sizes * by_group) / (n - I))
    return VarianceEstimate(by_group, pooled, P)


# ---------------------------------------------------------------------------
# real response: C3 / C4


class QuadRatio(NamedTuple):
    """Statistic ``Y'QY / Y'GY`` with both matrices for calibration."""

    statistic: float
    Q: np.ndarray
    G: np.ndarray


@dataclass(frozen=True)
class ShiftEstimate:
    """Per-group shifts; ``weights`` is ``W`` with ``gammas = W @ Y`` (linear case)."""

    gammas: np.ndarray
    weights: Optional[np.ndarray] = None


def _require(sample: GroupedSample, scenario: str | None = None, response: str | None = None):
    if not isinstance(sample, GroupedSample):
        raise InvalidInput("expected a GroupedSample")
    if scenario is not None and sample.scenario != scenario:
        raise InvalidInput(f"expected a {scenario} sample, got {sample.scenario}")
    if response is not None and sample.response_kind != response:
        raise InvalidInput(f"expected a {response} response")


def _group_matrix(sample: GroupedSample, kappa) -> np.ndarray:
    return scipy.linalg.block_diag(*[circ_lin_matrix(g.predictors, kappa) for g in sample.groups])


def _variance_ratio(sample: GroupedSample, num_matrix: np.ndarray, y: np.ndarray):
    var = pooled_variance(sample)
    if var.sigma2_pooled <= DEGENERATE_TOL * max(float(np.mean(y**2)), 1e-300):
        raise DegenerateVariance("pooled pseudoresidual variance is ~0")
    G = var.K / (sample.n - sample.I)
    Q = num_matrix.T @ num_matrix
    return var, 0.5 * (Q + Q.T), 0.5 * (G + G.T)


def stat_c3(sample: GroupedSample, kappa: float) -> QuadRatio:
    """Equality statistic ``sum (m_i - m)**2 / sigma2`` (same ``kappa`` for all fits)."""
    _require(sample, "circ-lin")
    y = sample.responses
    S = circ_lin_matrix(sample.predictors, kappa)
    Sd = _group_matrix(sample, kappa)
    var, Q, G = _variance_ratio(sample, Sd - S, y)
    stat = float(np.sum((Sd @ y - S @ y) ** 2) / var.sigma2_pooled)
    return QuadRatio(stat, Q, G)


def estimate_shifts_linear(sample: GroupedSample, prelim=None) -> ShiftEstimate:
    """Least-squares vertical shifts with ``gamma_1 = 0``.

    ``gamma = [D'RD]^-1 D'R Y`` with ``R = (I - S1)'(I - S1)`` and ``S1`` the
    pooled local fit using one concentration per observation (``prelim``,
    default the 8-neighbour rule). Group 1's column of ``D`` is dropped.
    """
    _require(sample, "circ-lin")
    theta = sample.predictors
    if prelim is None:
        prelim = preliminary_param_vector(theta, "circular")
    S1 = circ_lin_matrix(theta, np.asarray(prelim, dtype=float))
    M = np.eye(sample.n) - S1
    R = M.T @ M
    Dt = sample.indicator()[:, 1:]
    system = Dt.T @ R @ Dt
    ev = np.linalg.eigvalsh(0.5 * (system + system.T))
    if not ev[0] > 1e-12 * ev[-1]:
        raise SingularShiftSystem("shift normal equations are singular")
    Wt = np.linalg.solve(system, Dt.T @ R)
    W = np.vstack([np.zeros((1, sample.n)), Wt])
    return ShiftEstimate(W @ sample.responses, W)


def stat_c4(sample: GroupedSample, kappa: float, prelim=None) -> QuadRatio:
    """Parallelism statistic ``sum (gamma_i + m - m_i)**2 / sigma2``."""
    _require(sample, "circ-lin")
    y = sample.responses
    shifts = estimate_shifts_linear(sample, prelim)
    D = sample.indicator()
    DW = D @ shifts.weights
    S = circ_lin_matrix(sample.predictors, kappa)
    Sd = _group_matrix(sample, kappa)
    fitted = S @ (y - D @ shifts.gammas)
    M4 = DW + S @ (np.eye(sample.n) - DW) - Sd
    var, Q, G = _variance_ratio(sample, M4, y)
    stat = float(np.sum((D @ shifts.gammas + fitted - Sd @ y) ** 2) / var.sigma2_pooled)
    return QuadRatio(stat, Q, G)


def _resample_indices(sample: GroupedSample, boot_reps: int, seed, resample: str) -> np.ndarray:
    if int(boot_reps) != boot_reps or boot_reps < 1:
        raise InvalidInput("boot_reps must be a positive integer")
    if seed is None:
        raise InvalidInput("bootstrap calibration needs an explicit seed")
    if resample not in ("pooled", "within"):
        raise InvalidInput(f"unknown resampling scheme {resample!r}")
    n = sample.n
    out = np.empty((int(boot_reps), n), dtype=np.intp)
    slices = sample.slices()
    for b in range(int(boot_reps)):
        gen = np.random.default_rng(substream(seed, b))
        if resample == "pooled":
            out[b] = gen.integers(0, n, size=n)
        else:
            for sl in slices:
                out[b, sl] = gen.integers(sl.start, sl.stop, size=sl.stop - sl.start)
    return out


def ancova_test_circ_lin(
    sample: GroupedSample,
    kappa: float,
    which: Which = "equality",
    calibration: Literal["chi2", "bootstrap"] = "chi2",
    boot_reps: int = 500,
    seed: int | None = None,
    prelim=None,
    resample: str = "pooled",
) -> TestReport:
    """Equality / parallelism test for a circular predictor and real response."""
    _require(sample, "circ-lin")
    y = sample.responses
    if which == "equality":
        ratio = stat_c3(sample, kappa)
    elif which == "parallelism":
        if prelim is None:
            prelim = preliminary_param_vector(sample.predictors, "circular")
        ratio = stat_c4(sample, kappa, prelim)
    else:
        raise InvalidInput(f"unknown test {which!r}")
    obs = ratio.statistic
    label = smoothing_label("circular", kappa)
    if calibration == "chi2":
        p = chi2_quadform_pvalue(ratio.Q - obs * ratio.G)
        return TestReport(which, obs, p, "chi2", label)
    if calibration != "bootstrap":
        raise InvalidInput(f"unknown calibration {calibration!r}")
    S = circ_lin_matrix(sample.predictors, kappa)
    if which == "equality":
        null_fit = S @ y
    else:
        shifts = estimate_shifts_linear(sample, prelim)
        D = sample.indicator()
        null_fit = D @ shifts.gammas + S @ (y - D @ shifts.gammas)
    resid = y - null_fit
    idx = _resample_indices(sample, boot_reps, seed, resample)
    ystar = null_fit[None, :] + resid[idx]
    num = np.einsum("bi,ij,bj->b", ystar, ratio.Q, ystar)
    den = np.einsum("bi,ij,bj->b", ystar, ratio.G, ystar)
    with np.errstate(divide="ignore", invalid="ignore"):
        boot = num / den
    p = exceedance_pvalue(boot, obs)
    return TestReport(which, obs, p, "bootstrap", label, int(boot_reps), int(seed))


# ---------------------------------------------------------------------------
# circular response: C5 / C6


def dbar(sample: GroupedSample, group_fits) -> float:
    """Mean cosine distance of responses to their group fits, over ``n - I``."""
    phi = sample.responses
    return float(np.sum(1.0 - np.cos(phi - np.asarray(group_fits))) / (sample.n - sample.I))


def _closed_form_shifts(W_prelim: np.ndarray, slices, phi: np.ndarray) -> np.ndarray:
    """``(I,)`` or ``(I, B)`` shifts ``atan2(S_i, C_i)`` about the pilot fit."""
    dev = phi - direction_from_weights(W_prelim, phi)
    gam = []
    for sl in slices:
        c = np.cos(dev[sl]).sum(axis=0)
        s = np.sin(dev[sl]).sum(axis=0)
        if np.any(np.hypot(c, s) <= 1e-12 * (sl.stop - sl.start)):
            raise ZeroResultant("residual resultant of a group is zero; shift undefined")
        gam.append(wrap_angle(np.arctan2(s, c)))
    return np.array(gam)


class _CircOperators:
    """Weight matrices for one grouped sample, reused across bootstrap columns."""

    def __init__(self, sample: GroupedSample, param, prelim=None):
        kind = sample.predictor_kind
        x = sample.predictors
        self.sample = sample
        self.slices = sample.slices()
        self.labels = sample.labels
        self.W_pool = ll_weight_matrix(x, x, kind, param)
        self.W_groups = [ll_weight_matrix(g.predictors, g.predictors, kind, param) for g in sample.groups]
        self.W_prelim = None if prelim is None else ll_weight_matrix(x, x, kind, np.asarray(prelim, dtype=float))

    def group_fits(self, phi: np.ndarray) -> np.ndarray:
        out = np.empty_like(phi)
        for W, sl in zip(self.W_groups, self.slices):
            out[sl] = direction_from_weights(W, phi[sl])
        return out

    def _dbar(self, phi, gfit):
        d = np.sum(1.0 - np.cos(phi - gfit), axis=0) / (self.sample.n - self.sample.I)
        if np.any(d <= DEGENERATE_TOL):
            raise DegenerateVariance("responses coincide with their group fits (Dbar ~ 0)")
        return d

    def c5(self, phi: np.ndarray) -> np.ndarray:
        gfit = self.group_fits(phi)
        pfit = direction_from_weights(self.W_pool, phi)
        return np.sum(1.0 - np.cos(gfit - pfit), axis=0) / self._dbar(phi, gfit)

    def shifts(self, phi: np.ndarray) -> np.ndarray:
        return _closed_form_shifts(self.W_prelim, self.slices, phi)

    def parallel_fit(self, phi, gammas):
        """Pooled fit of the shift-corrected responses."""
        g = gammas[self.labels]
        return direction_from_weights(self.W_pool, wrap_angle(phi - g)), g

    def c6(self, phi: np.ndarray) -> np.ndarray:
        gammas = self.shifts(phi)
        pfit, g = self.parallel_fit(phi, gammas)
        gfit = self.group_fits(phi)
        return np.sum(1.0 - np.cos(g + pfit - gfit), axis=0) / self._dbar(phi, gfit)


def _check_circ(sample: GroupedSample, spec: KernelSpec):
    _require(sample, response="circular")
    if spec.circular != (sample.predictor_kind == "circular"):
        raise InvalidInput("kernel kind does not match the predictor kind")


def stat_c5(sample: GroupedSample, spec: KernelSpec) -> float:
    """Equality statistic ``sum [1 - cos(m_i - m)] / Dbar``."""
    _check_circ(sample, spec)
    ops = _CircOperators(sample, spec.param)
    return float(ops.c5(sample.responses))


def estimate_shifts_circular(sample: GroupedSample, prelim=None) -> ShiftEstimate:
    """Closed-form minimizers of the total cosine distance to a shifted pilot.

    With ``r = Phi - m1(x)`` for a pooled pilot fit ``m1`` using per-point
    smoothing (``prelim``, default the 8-neighbour rule), group ``i`` gets
    ``atan2(sum sin r, sum cos r)``. All ``I`` shifts are free.
    """
    _require(sample, response="circular")
    if prelim is None:
        prelim = preliminary_param_vector(sample.predictors, sample.predictor_kind)
    kind = sample.predictor_kind
    x = sample.predictors
    W1 = ll_weight_matrix(x, x, kind, np.asarray(prelim, dtype=float))
    return ShiftEstimate(_closed_form_shifts(W1, sample.slices(), sample.responses))


def stat_c6(sample: GroupedSample, spec: KernelSpec, shifts: Optional[ShiftEstimate] = None, prelim=None) -> float:
    """Parallelism statistic ``sum [1 - cos(gamma_i + m - m_i)] / Dbar``.

    ``m`` is the pooled fit of the responses rotated back by their group's
    shift.
    """
    _check_circ(sample, spec)
    phi = sample.responses
    if shifts is None:
        shifts = estimate_shifts_circular(sample, prelim)
    ops = _CircOperators(sample, spec.param)
    pfit, g = ops.parallel_fit(phi, np.asarray(shifts.gammas))
    gfit = ops.group_fits(phi)
    return float(np.sum(1.0 - np.cos(g + pfit - gfit)) / ops._dbar(phi, gfit))


def ancova_test_circ_response(
    sample: GroupedSample,
    spec: KernelSpec,
    which: Which = "equality",
    boot_reps: int = 500,
    seed: int | None = None,
    prelim=None,
    resample: str = "pooled",
) -> TestReport:
    """Bootstrap equality / parallelism test for a circular response.

    Residuals under the null fit are resampled (pooled over groups by
    default), added back onto the null fit and the statistic recomputed
    with the same main and preliminary smoothing.
    """
    _check_circ(sample, spec)
    phi = sample.responses
    if which == "parallelism":
        if prelim is None:
            prelim = preliminary_param_vector(sample.predictors, sample.predictor_kind)
        ops = _CircOperators(sample, spec.param, prelim)
        stat = ops.c6
        pfit, g = ops.parallel_fit(phi, ops.shifts(phi))
        null_fit = g + pfit
    elif which == "equality":
        ops = _CircOperators(sample, spec.param)
        stat = ops.c5
        null_fit = direction_from_weights(ops.W_pool, phi)
    else:
        raise InvalidInput(f"unknown test {which!r}")
    obs = float(stat(phi))
    resid = wrap_angle(phi - null_fit)
    idx = _resample_indices(sample, boot_reps, seed, resample)
    phistar = wrap_angle(null_fit[:, None] + resid[idx].T)
    boot = stat(phistar)
    p = exceedance_pvalue(boot, obs)
    label = smoothing_label(sample.predictor_kind, spec.param)
    return TestReport(which, obs, p, "bootstrap", label, int(boot_reps), int(seed))
