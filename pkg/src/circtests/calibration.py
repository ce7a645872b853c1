"""Null-distribution machinery shared by the no-effect and ANCOVA tests."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Literal, Optional

import numpy as np
from scipy import stats

from .core import substream
from .errors import DegenerateCumulants, InvalidInput


@dataclass(frozen=True)
class TestReport:
    """Outcome of one hypothesis test.

    ``smoothing`` maps ``kind`` (``"kappa"`` or ``"h"``) and ``value``.
    Bootstrap reports always carry ``boot_reps`` and ``seed``.
    """

    __test__ = False  # keep pytest from collecting it

    test: str
    statistic: float
    p_value: float
    calibration: Literal["chi2", "bootstrap"]
    smoothing: dict
    boot_reps: Optional[int] = None
    seed: Optional[int] = None

    def __post_init__(self):
        if not 0.0 <= self.p_value <= 1.0:
            raise InvalidInput("p-value outside [0, 1]")
        if self.calibration == "bootstrap" and (self.boot_reps is None or self.seed is None):
            raise InvalidInput("bootstrap reports need boot_reps and seed")

    def reject(self, alpha: float) -> bool:
        return self.p_value <= alpha

    def to_dict(self, alpha: Optional[float] = None) -> dict:
        out = asdict(self)
        if alpha is not None:
            out["alpha"] = alpha
            out["reject"] = self.reject(alpha)
        return out


def smoothing_label(predictor_kind: str, value: float) -> dict:
    return {"kind": "kappa" if predictor_kind == "circular" else "h", "value": float(value)}


def quadform_cumulants(C) -> tuple[float, float, float]:
    """First three cumulants of ``z' C z`` for iid standard normal ``z``.

    ``nu_s = 2**(s-1) (s-1)! tr(C**s)``, computed from the eigenvalues.
    """
    C = np.asarray(C, dtype=float)
    lam = np.linalg.eigvalsh(0.5 * (C + C.T))
    return float(lam.sum()), float(2.0 * np.sum(lam**2)), float(8.0 * np.sum(lam**3))


def chi2_quadform_pvalue(C) -> float:
    """``P(z' C z > 0)`` by a shifted and scaled chi-square.

    The form is matched to ``a * chi2_b + c`` on its first three cumulants
    with ``a = |nu3| / (4 nu2)`` and ``b = 8 nu2**3 / nu3**2``. A negative
    third cumulant means a left-skewed form; then ``-z'Cz`` is the one
    matched, i.e. ``z'Cz ~ (nu1 + a b) - a chi2_b``.
    """
    nu1, nu2, nu3 = quadform_cumulants(C)
    if not nu2 > 0:
        raise DegenerateCumulants("second cumulant is not positive")
    if nu3 == 0:
        raise DegenerateCumulants("third cumulant is zero")
    a = abs(nu3) / (4.0 * nu2)
    b = 8.0 * nu2**3 / nu3**2
    if nu3 > 0:
        c = nu1 - a * b
        p = stats.chi2.sf(-c / a, b)
    else:
        c = nu1 + a * b
        p = stats.chi2.cdf(c / a, b)
    return float(min(1.0, max(0.0, p)))


def bootstrap_indices(n: int, boot_reps: int, seed: int) -> np.ndarray:
    """``(boot_reps, n)`` resampling indices, row ``b`` from substream ``b``.

    Each row depends only on ``(seed, b)``, so replicates can be generated
    in any order or in parallel with identical results.
    """
    if int(boot_reps) != boot_reps or boot_reps < 1:
        raise InvalidInput("boot_reps must be a positive integer")
    if seed is None:
        raise InvalidInput("bootstrap calibration needs an explicit seed")
    out = np.empty((int(boot_reps), int(n)), dtype=np.intp)
    for b in range(int(boot_reps)):
        out[b] = np.random.default_rng(substream(seed, b)).integers(0, n, size=n)
    return out


def exceedance_pvalue(boot_stats, observed: float) -> float:
    """Fraction of bootstrap statistics at least as large as ``observed``."""
    boot_stats = np.asarray(boot_stats, dtype=float)
    return float(np.count_nonzero(boot_stats >= observed) / boot_stats.size)
