"""Angle arithmetic, circular summaries, kernels and random streams.

Angles are plain floats / numpy arrays in radians. Every function that
returns an angle wraps it to ``[0, 2*pi)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Union

import numpy as np
from scipy import special

from .errors import InvalidInput, ZeroResultant

TWO_PI = 2.0 * np.pi

# mean_direction refuses resultants shorter than this times n
ZERO_RESULTANT_TOL = 1e-12

SeedLike = Union[int, np.random.SeedSequence, np.random.Generator, None]


def wrap_angle(x):
    """Reduce ``x`` modulo 2*pi into ``[0, 2*pi)``.

    Works on scalars and arrays; scalars come back as ``float``.
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InvalidInput("wrap_angle requires finite input")
    out = np.mod(arr, TWO_PI)
    # np.mod(-tiny, 2pi) rounds to exactly 2pi
    out = np.where(out >= TWO_PI, 0.0, out)
    if out.ndim == 0:
        return float(out)
    return out


def circ_distance(a, b):
    """Cosine dissimilarity ``1 - cos(a - b)``, in ``[0, 2]``."""
    return 1.0 - np.cos(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))


def geodesic_distance(a, b):
    """Length of the shorter arc between ``a`` and ``b``, in ``[0, pi]``."""
    d = np.abs(wrap_angle(a) - wrap_angle(b))
    return np.minimum(d, TWO_PI - d)


def _resultant(v, axis=0):
    v = np.asarray(v, dtype=float)
    return np.sum(np.cos(v), axis=axis), np.sum(np.sin(v), axis=axis)


def mean_direction(v) -> float:
    """Sample mean direction ``atan2(sum sin, sum cos)``.

    Raises
    ------
    ZeroResultant
        If the resultant length is below ``1e-12 * n``; the direction is
        then numerically meaningless.
    """
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if v.size == 0:
        raise InvalidInput("mean_direction of an empty sample")
    c, s = _resultant(v)
    if np.hypot(c, s) < ZERO_RESULTANT_TOL * v.size:
        raise ZeroResultant("resultant vector is numerically zero")
    return wrap_angle(np.arctan2(s, c))


def mean_resultant_length(v) -> float:
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if v.size == 0:
        raise InvalidInput("empty sample")
    c, s = _resultant(v)
    return float(np.hypot(c, s) / v.size)


def circular_variance(v) -> float:
    """``1 - R/n`` where ``R`` is the resultant length."""
    return float(min(1.0, max(0.0, 1.0 - mean_resultant_length(v))))


def bessel_i0(kappa, scaled: bool = False):
    """Modified Bessel function of the first kind, order zero.

    With ``scaled=True`` returns ``exp(-kappa) * I0(kappa)``, which stays
    finite for any finite ``kappa``.
    """
    k = np.asarray(kappa, dtype=float)
    if not np.all(np.isfinite(k)) or np.any(k < 0):
        raise InvalidInput("bessel_i0 needs finite kappa >= 0")
    out = special.i0e(k) if scaled else special.i0(k)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class KernelSpec:
    """A smoothing kernel.

    ``kind="von_mises"`` takes a concentration ``param >= 0`` (0 gives the
    uniform circular density); ``kind="gaussian"`` takes a standard
    deviation ``param > 0``.
    """

    kind: Literal["von_mises", "gaussian"]
    param: float

    def __post_init__(self):
        if self.kind not in ("von_mises", "gaussian"):
            raise InvalidInput(f"unknown kernel kind {self.kind!r}")
        p = float(self.param)
        if not np.isfinite(p):
            raise InvalidInput("kernel parameter must be finite")
        if self.kind == "von_mises" and p < 0:
            raise InvalidInput("von Mises concentration must be >= 0")
        if self.kind == "gaussian" and p <= 0:
            raise InvalidInput("Gaussian bandwidth must be > 0")

    @property
    def circular(self) -> bool:
        return self.kind == "von_mises"


def kernel_eval(spec: KernelSpec, t):
    """Kernel density at ``t`` (an angular difference for von Mises)."""
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)):
        raise InvalidInput("kernel argument must be finite")
    p = float(spec.param)
    if spec.kind == "von_mises":
        # exp(k(cos t - 1)) / (2 pi e^-k I0(k)) avoids overflow at large k
        out = np.exp(p * (np.cos(t) - 1.0)) / (TWO_PI * bessel_i0(p, scaled=True))
    else:
        out = np.exp(-0.5 * (t / p) ** 2) / (p * np.sqrt(TWO_PI))
    return float(out) if out.ndim == 0 else out


def make_rng(seed: SeedLike = None) -> np.random.Generator:
    """Build a Generator from an int, SeedSequence or existing Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def substream(seed: int | np.random.SeedSequence, *index: int) -> np.random.SeedSequence:
    """Seed sequence for replicate ``index`` of a run seeded by ``seed``.

    The same ``(seed, index)`` pair always yields the same stream, no matter
    how many other replicates were drawn or in what order.
    """
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(seed.entropy, spawn_key=tuple(seed.spawn_key) + index)
    return np.random.SeedSequence(int(seed), spawn_key=index)


def sample_von_mises(mu: float, kappa: float, n: int, rng: SeedLike) -> np.ndarray:
    """``n`` iid von Mises(mu, kappa) draws wrapped to ``[0, 2*pi)``."""
    if not np.isfinite(kappa) or kappa < 0:
        raise InvalidInput("kappa must be finite and >= 0")
    if int(n) != n or n < 1:
        raise InvalidInput("n must be a positive integer")
    gen = make_rng(rng)
    if kappa == 0:
        return gen.uniform(0.0, TWO_PI, int(n))
    return wrap_angle(gen.vonmises(wrap_angle(mu), kappa, int(n)))
