"""Seeded randomness, the Fréchet point process and normal distribution helpers."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Union

import numpy as np
from scipy.special import erfc

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream identified by ``(seed, stream_id)``.

    Every call to :meth:`generator` starts the stream afresh, so an operation
    given the same ``RngStream`` always sees the same draws.  Replicate ``i``
    of an experiment uses ``stream_id=i``; the streams are derived through
    :class:`numpy.random.SeedSequence` and feed a counter-based Philox
    bit generator, so results never depend on the order in which
    replicates are computed.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            v = int(getattr(self, name))
            if not 0 <= v <= _MASK64:
                raise ValueError(f"{name} must be an unsigned 64-bit integer, got {v}")
            object.__setattr__(self, name, v)

    def generator(self, *path: int) -> np.random.Generator:
        """Fresh generator for this stream, or for the labelled substream ``path``."""
        ss = np.random.SeedSequence([self.seed, self.stream_id, *path])
        return np.random.Generator(np.random.Philox(ss))

    def replicate(self, i: int) -> "RngStream":
        return RngStream(self.seed, i)


RngLike = Union[RngStream, np.random.Generator]


def as_generator(rng: RngLike) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng).__name__}")


def split(rng: RngLike, n: int) -> list[np.random.Generator]:
    """``n`` independent generators derived from ``rng`` (labelled substreams)."""
    if isinstance(rng, RngStream):
        return [rng.generator(k) for k in range(n)]
    return list(as_generator(rng).spawn(n))


# -- Fréchet point process ----------------------------------------------------


@dataclass(frozen=True)
class FrechetAtoms:
    """Decreasing atoms ``U_1 > U_2 > ...`` of a Poisson process with intensity ``mass * u^-2 du``."""

    values: np.ndarray
    total_mass: float

    def count_above(self, u: float) -> int:
        return int(np.count_nonzero(self.values > u))


def frechet_atoms_from_exponentials(exps, mass: float = 1.0) -> np.ndarray:
    return mass / np.cumsum(np.asarray(exps, float))


def frechet_ppp_stream(rng: RngLike, mass: float, budget: int) -> FrechetAtoms:
    """The ``budget`` largest atoms of a Fréchet point process scaled by ``mass``."""
    if not mass > 0:
        raise ValueError("mass must be positive")
    if budget < 1:
        raise ValueError("budget must be at least 1")
    gen = as_generator(rng)
    exps = gen.standard_exponential(int(budget))
    return FrechetAtoms(frechet_atoms_from_exponentials(exps, mass), float(mass))


def iter_frechet_atoms(gen: np.random.Generator, mass: float = 1.0,
                       chunk: int = 32, growth: float = 2.0,
                       max_chunk: int = 4096) -> Iterator[np.ndarray]:
    """Yield successive chunks of Fréchet atoms in decreasing order, without end.

    Chunk sizes grow geometrically; values only depend on how many atoms
    have been consumed, not on the chunking.
    """
    total = 0.0
    size = chunk
    while True:
        g = total + np.cumsum(gen.standard_exponential(size))
        total = float(g[-1])
        yield mass / g
        size = min(int(size * growth), max_chunk)


def pareto_from_uniform(v):
    """Inverse CDF of the standard Pareto law ``P(Z > z) = 1/z``."""
    return 1.0 / np.asarray(v, float)


def sample_pareto(rng: RngLike, size=None):
    gen = as_generator(rng)
    v = 1.0 - gen.random(size)  # in (0, 1]
    z = pareto_from_uniform(v)
    return float(z) if size is None else z


# -- standard normal ----------------------------------------------------------

_SQRT2 = math.sqrt(2.0)
_SQRT2PI = math.sqrt(2.0 * math.pi)

# Acklam's rational approximation to the normal quantile
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)
_P_LOW = 0.02425


def std_normal_pdf(x):
    x = np.asarray(x, float)
    return np.exp(-0.5 * x * x) / _SQRT2PI


def std_normal_cdf(x):
    x = np.asarray(x, float)
    out = 0.5 * erfc(-x / _SQRT2)
    return float(out) if out.ndim == 0 else out


def std_normal_sf(x):
    x = np.asarray(x, float)
    out = 0.5 * erfc(x / _SQRT2)
    return float(out) if out.ndim == 0 else out


def _poly(coef, x):
    r = np.zeros_like(x)
    for c in coef:
        r = r * x + c
    return r


def inv_std_normal_cdf(p):
    """Standard normal quantile: rational approximation plus one Halley step."""
    p = np.asarray(p, float)
    if np.any(~((p > 0) & (p < 1))):
        raise ValueError("normal quantile requires 0 < p < 1")
    scalar = p.ndim == 0
    p = np.atleast_1d(p)
    x = np.empty_like(p)

    low = p < _P_LOW
    high = p > 1 - _P_LOW
    mid = ~(low | high)

    q = p[mid] - 0.5
    r = q * q
    x[mid] = q * _poly(_A, r) / (_poly(_B, r) * r + 1.0)
    if np.any(low):
        q = np.sqrt(-2.0 * np.log(p[low]))
        x[low] = _poly(_C, q) / (_poly(_D, q) * q + 1.0)
    if np.any(high):
        q = np.sqrt(-2.0 * np.log1p(-p[high]))
        x[high] = -_poly(_C, q) / (_poly(_D, q) * q + 1.0)

    # refine against the lower or upper tail, whichever is smaller
    upper = p > 0.5
    e = np.where(upper, (1.0 - p) - std_normal_sf(x), std_normal_cdf(x) - p)
    u = e * _SQRT2PI * np.exp(0.5 * x * x)
    x = x - u / (1.0 + 0.5 * x * u)
    x[p == 0.5] = 0.0
    return float(x[0]) if scalar else x


# -- goodness of fit ----------------------------------------------------------


def frechet_cdf(x):
    x = np.asarray(x, float)
    with np.errstate(divide="ignore"):
        return np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)


def ks_distance(sample, cdf) -> float:
    """Kolmogorov-Smirnov distance between a sample and a continuous CDF."""
    x = np.sort(np.asarray(sample, float).ravel())
    n = x.size
    if n == 0:
        raise ValueError("empty sample")
    f = np.asarray(cdf(x), float)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))


def ks_two_sample(a, b) -> float:
    a = np.sort(np.asarray(a, float).ravel())
    b = np.sort(np.asarray(b, float).ravel())
    allv = np.concatenate([a, b])
    fa = np.searchsorted(a, allv, side="right") / a.size
    fb = np.searchsorted(b, allv, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))
