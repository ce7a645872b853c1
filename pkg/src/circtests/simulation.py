"""Data generators and a Monte Carlo rejection-rate harness.

Models (``beta`` is the free parameter; the first listed value is the null):

no-effect
    circ-lin   ``Y = beta sin(T) cos(T) + e``                  beta = 0
    lin-circ   ``F = 3pi/8 + beta cos(3X) + e``                beta = 0
    circ-circ  ``F = 3pi/4 + beta sin(2T + 2 sin(T + pi/2)) + e``  beta = 0

equality / parallelism (two groups; group 2 gets a shift under parallelism)
    circ-lin   ``cos(T) sin(T)`` vs ``beta cos(T) sin(T)``, shift .2    beta = 1
    lin-circ   ``2 sin(4X - 1)`` vs ``beta sin(4X - 1)``, shift pi/8   beta = 2
    circ-circ  ``2 sin(2T)`` vs ``beta sin(2T)``, shift pi/8           beta = 2

Circular predictors are uniform on ``[0, 2pi)``, linear ones uniform on
``[0, 1]``.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

import numpy as np

from . import __version__
from .ancova import GroupedSample, ancova_test_circ_lin, ancova_test_circ_response
from .core import TWO_PI, KernelSpec, make_rng, substream
from .errors import CircTestError, InvalidInput
from .estimators import RegressionSample, cv_select
from .noeffect import noeffect_test_circ_lin, noeffect_test_circ_response

log = logging.getLogger(__name__)

SCENARIOS = ("circ-lin", "lin-circ", "circ-circ")
TESTS = ("noeffect", "equality", "parallelism")
ERROR_LAWS = ("normal", "rescaled_exponential", "von_mises")

NULL_BETA = {
    ("noeffect", "circ-lin"): 0.0,
    ("noeffect", "lin-circ"): 0.0,
    ("noeffect", "circ-circ"): 0.0,
    ("ancova", "circ-lin"): 1.0,
    ("ancova", "lin-circ"): 2.0,
    ("ancova", "circ-circ"): 2.0,
}

# error law used in the reference study design when none is given
DEFAULT_ERROR = {
    ("noeffect", "circ-lin"): ("normal", 0.25),
    ("noeffect", "lin-circ"): ("von_mises", 2.0),
    ("noeffect", "circ-circ"): ("von_mises", 4.0),
    ("ancova", "circ-lin"): ("normal", 0.25),
    ("ancova", "lin-circ"): ("von_mises", 6.0),
    ("ancova", "circ-circ"): ("von_mises", 4.0),
}

PARALLEL_SHIFT = {"circ-lin": 0.2, "lin-circ": np.pi / 8, "circ-circ": np.pi / 8}


def _family(test: str) -> str:
    return "noeffect" if test == "noeffect" else "ancova"


@dataclass(frozen=True)
class ScenarioSpec:
    """One cell of a simulation table.

    ``n`` is a single size for no-effect tests and ``(n1, n2)`` for ANCOVA.
    The smoothing parameter is the per-dataset cross-validation choice times
    ``cv_factor`` (e.g. ``0.125`` for cv/8, ``4`` for 4cv).
    """

    scenario: str
    test: str
    beta: float
    n: tuple
    error: Optional[str] = None
    error_param: Optional[float] = None
    cv_factor: float = 1.0
    calibration: str = "chi2"
    alpha: float = 0.05
    mc_reps: int = 500
    boot_reps: int = 500
    seed: int = 0

    def __post_init__(self):
        n = (self.n,) if np.ndim(self.n) == 0 else tuple(self.n)
        object.__setattr__(self, "n", tuple(int(v) for v in n))
        if self.scenario not in SCENARIOS:
            raise InvalidInput(f"unknown scenario {self.scenario!r}")
        if self.test not in TESTS:
            raise InvalidInput(f"unknown test {self.test!r}")
        fam = _family(self.test)
        if self.error is None:
            law, par = DEFAULT_ERROR[(fam, self.scenario)]
            object.__setattr__(self, "error", law)
            if self.error_param is None:
                object.__setattr__(self, "error_param", par)
        if self.error not in ERROR_LAWS:
            raise InvalidInput(f"unknown error law {self.error!r}")
        if self.error_param is None or not self.error_param > 0:
            raise InvalidInput("error_param must be positive")
        circ_resp = self.scenario != "circ-lin"
        if circ_resp != (self.error == "von_mises"):
            raise InvalidInput("von Mises errors go with circular responses, and only with them")
        if len(self.n) != (1 if fam == "noeffect" else 2):
            raise InvalidInput("n must be one size (no-effect) or two group sizes (ANCOVA)")
        if min(self.n) < 3 or sum(self.n) < 9:
            raise InvalidInput("sample sizes too small (need >= 3 per group, >= 9 in total)")
        if self.calibration not in ("chi2", "bootstrap"):
            raise InvalidInput(f"unknown calibration {self.calibration!r}")
        if circ_resp and self.calibration == "chi2":
            raise InvalidInput("chi-square calibration needs a real response")
        if not 0 < self.alpha < 1:
            raise InvalidInput("alpha must lie in (0, 1)")
        if self.mc_reps < 1 or self.boot_reps < 1:
            raise InvalidInput("mc_reps and boot_reps must be >= 1")
        if not self.cv_factor > 0:
            raise InvalidInput("cv_factor must be positive")

    @property
    def null_beta(self) -> float:
        return NULL_BETA[(_family(self.test), self.scenario)]

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InvalidInput(f"unknown ScenarioSpec keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["n"] = list(self.n)
        return d


def draw_errors(law: str, param: float, size: int, rng) -> np.ndarray:
    """Zero-mean errors: ``normal(sd)``, ``Exp(rate) - 1/rate`` or ``vM(0, kappa)``."""
    gen = make_rng(rng)
    if law == "normal":
        return gen.normal(0.0, param, size)
    if law == "rescaled_exponential":
        return gen.exponential(1.0 / param, size) - 1.0 / param
    if law == "von_mises":
        return gen.vonmises(0.0, param, size)
    raise InvalidInput(f"unknown error law {law!r}")


def _predictors(scenario: str, size: int, gen) -> np.ndarray:
    if scenario == "lin-circ":
        return gen.uniform(0.0, 1.0, size)
    return gen.uniform(0.0, TWO_PI, size)


def _noeffect_mean(scenario, beta, x):
    if scenario == "circ-lin":
        return beta * np.sin(x) * np.cos(x)
    if scenario == "lin-circ":
        return 3 * np.pi / 8 + beta * np.cos(3 * x)
    return 3 * np.pi / 4 + beta * np.sin(2 * x + 2 * np.sin(x + np.pi / 2))


def _group_mean(scenario, coef, x):
    if scenario == "circ-lin":
        return coef * np.cos(x) * np.sin(x)
    if scenario == "lin-circ":
        return coef * np.sin(4 * x - 1)
    return coef * np.sin(2 * x)


_KINDS = {"circ-lin": ("circular", "linear"), "lin-circ": ("linear", "circular"), "circ-circ": ("circular", "circular")}


def generate_dataset(spec: ScenarioSpec, rng):
    """Draw one dataset: a RegressionSample (no-effect) or a GroupedSample."""
    gen = make_rng(rng)
    pk, rk = _KINDS[spec.scenario]
    if spec.test == "noeffect":
        x = _predictors(spec.scenario, spec.n[0], gen)
        y = _noeffect_mean(spec.scenario, spec.beta, x) + draw_errors(spec.error, spec.error_param, spec.n[0], gen)
        return RegressionSample(x, y, pk, rk)
    first = 1.0 if spec.scenario == "circ-lin" else 2.0
    groups = []
    for i, (size, coef) in enumerate(zip(spec.n, (first, spec.beta))):
        x = _predictors(spec.scenario, size, gen)
        y = _group_mean(spec.scenario, coef, x)
        if spec.test == "parallelism" and i == 1:
            y = y + PARALLEL_SHIFT[spec.scenario]
        y = y + draw_errors(spec.error, spec.error_param, size, gen)
        groups.append(RegressionSample(x, y, pk, rk))
    return GroupedSample(tuple(groups))


def run_test(spec: ScenarioSpec, data, boot_seed: int):
    """Select the smoothing parameter by CV (times ``cv_factor``) and test."""
    pooled = data if isinstance(data, RegressionSample) else data.pooled()
    param = cv_select(pooled).param * spec.cv_factor
    if spec.test == "noeffect":
        if spec.scenario == "circ-lin":
            return noeffect_test_circ_lin(data, param, spec.calibration, spec.boot_reps, boot_seed)
        kernel = KernelSpec(pooled.kernel_kind, param)
        return noeffect_test_circ_response(data, kernel, spec.boot_reps, boot_seed)
    if spec.scenario == "circ-lin":
        return ancova_test_circ_lin(data, param, spec.test, spec.calibration, spec.boot_reps, boot_seed)
    kernel = KernelSpec(pooled.kernel_kind, param)
    return ancova_test_circ_response(data, kernel, spec.test, spec.boot_reps, boot_seed)


def replicate_pvalue(spec: ScenarioSpec, r: int) -> float:
    """p-value of Monte Carlo replicate ``r``; NaN if the replicate failed."""
    data_rng = np.random.default_rng(substream(spec.seed, r, 0))
    boot_seed = int(substream(spec.seed, r, 1).generate_state(1)[0])
    try:
        data = generate_dataset(spec, data_rng)
        return run_test(spec, data, boot_seed).p_value
    except CircTestError as exc:
        log.warning("replicate %d failed: %s", r, exc)
        return math.nan


@dataclass(frozen=True)
class StudyRow:
    spec: ScenarioSpec
    rejection_rate: float
    mc_se: float
    failures: int
    runtime: float = field(compare=False)
    p_values: np.ndarray = field(repr=False, compare=False)

    def to_dict(self) -> dict:
        d = self.spec.to_dict()
        d["n"] = "x".join(str(v) for v in self.spec.n)
        d.update(rejection_rate=self.rejection_rate, mc_se=self.mc_se, failures=self.failures)
        return d


def _one(args):
    spec, r = args
    return replicate_pvalue(spec, r)


def rejection_study(spec: ScenarioSpec, workers: int = 1) -> StudyRow:
    """Fraction of ``mc_reps`` datasets with ``p <= alpha``.

    Replicate ``r`` draws from its own substream, so the result does not
    depend on ``workers``. Failed replicates are excluded and counted.
    """
    start = time.perf_counter()
    jobs = [(spec, r) for r in range(spec.mc_reps)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            pvals = np.array(list(pool.map(_one, jobs, chunksize=8)))
    else:
        pvals = np.array([_one(j) for j in jobs])
    ok = pvals[np.isfinite(pvals)]
    failures = int(pvals.size - ok.size)
    rate = float(np.mean(ok <= spec.alpha)) if ok.size else math.nan
    se = math.sqrt(rate * (1 - rate) / ok.size) if ok.size else math.nan
    runtime = time.perf_counter() - start
    log.info("%s %s beta=%s n=%s: rate=%.3f (%d failures, %.1fs)", spec.scenario, spec.test,
             spec.beta, spec.n, rate, failures, runtime)
    return StudyRow(spec, rate, se, failures, runtime, pvals)


CSV_COLUMNS = [f.name for f in fields(ScenarioSpec)] + ["rejection_rate", "mc_se", "failures"]


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: (repr(float(v)) if isinstance(v, float) else v) for k, v in row.to_dict().items()})
    return buf.getvalue()


def study_manifest(specs) -> str:
    """JSON manifest of a study: every spec (with its seed) and versions."""
    import scipy

    doc = {
        "package": "circtests",
        "version": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "specs": [s.to_dict() for s in specs],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"
