"""Estimators built on extracted extreme events."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .core import inv_std_normal_cdf, std_normal_cdf
from .extract import ExtremeEventSet
from .grid import Field, Grid

logger = logging.getLogger(__name__)

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class EstimateResult:
    name: str
    estimate: float
    objective: float
    iterations: int
    n: int
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def golden_section_max(f: Callable[[float], float], lo: float, hi: float,
                       tol: float = 1e-8, n_scan: int = 32, max_iter: int = 500):
    """Maximise ``f`` on ``[lo, hi]``: coarse scan, then golden section around the best point.

    Returns ``(x, f(x), iterations)``.  Unimodality is not assumed globally,
    only within the bracket of the best scan point.
    """
    if not hi > lo:
        raise ValueError("empty search interval")
    xs = np.linspace(lo, hi, n_scan)
    fs = np.array([f(x) for x in xs])
    fs = np.where(np.isfinite(fs), fs, -np.inf)
    i = int(np.argmax(fs))
    a, b = xs[max(i - 1, 0)], xs[min(i + 1, n_scan - 1)]
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    it = 0
    while b - a > tol and it < max_iter:
        it += 1
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    x, fx = (c, fc) if fc >= fd else (d, fd)
    if fs[i] > fx:  # the bracket endpoint itself was best
        x, fx = float(xs[i]), float(fs[i])
    return float(x), float(fx), it


# -- symmetric logistic -------------------------------------------------------


def _check_q(q: float) -> None:
    if not q > 1:
        raise ValueError(f"logistic parameter q must exceed 1, got {q}")


def logistic_increment_cdf(s, q: float):
    """``P(W <= s) = (1 + sum_j s_j^-q)^(1/q - 1)``; the last axis of ``s`` indexes coordinates."""
    _check_q(q)
    s = np.asarray(s, float)
    with np.errstate(divide="ignore"):
        tot = np.sum(s ** -q, axis=-1) if s.ndim else s ** -q
    return (1.0 + tot) ** (1.0 / q - 1.0)


def logistic_increment_logpdf(s, q: float):
    """Log density of the increment vector, obtained by differentiating the CDF in every coordinate.

    ``log prod_j (j q - 1) + sum_j (-q - 1) log s_j + (1/q - k - 1) log(1 + sum_j s_j^-q)``.
    """
    _check_q(q)
    s = np.atleast_1d(np.asarray(s, float))
    k = s.shape[-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.log(s)
        const = float(np.sum(np.log(np.arange(1, k + 1) * q - 1.0)))
        tot = np.sum(np.exp(-q * logs), axis=-1)
        return const - (q + 1.0) * np.sum(logs, axis=-1) + (1.0 / q - k - 1.0) * np.log1p(tot)


def logistic_increment_density(s, q: float):
    return np.exp(logistic_increment_logpdf(s, q))


def _increment_matrix(events) -> np.ndarray:
    if isinstance(events, ExtremeEventSet):
        if events.kind != "increments":
            raise ValueError(f"logistic MLE needs increment events, got {events.kind}")
        flat = events.samples.reshape(len(events), -1)
        anchor = events.grid.flat_index_of(events.anchor["t0"])
        return np.delete(flat, anchor, axis=1)
    return np.atleast_2d(np.asarray(events, float))


def logistic_mle(events, q_bounds=(1.0 + 1e-6, 20.0), tol: float = 1e-8) -> EstimateResult:
    """Maximum likelihood for ``q`` from increment vectors (the anchor coordinate is dropped)."""
    w = _increment_matrix(events)
    if w.shape[0] == 0:
        raise ValueError("empty event set")
    if np.any(~(w > 0)):
        r = int(np.flatnonzero(np.any(~(w > 0), axis=1))[0])
        raise ValueError(f"increment sample {r} has a nonpositive entry")
    lo, hi = q_bounds
    lo = max(float(lo), 1.0 + 1e-12)

    def loglik(q):
        ll = logistic_increment_logpdf(w, q)
        return float(np.sum(ll))

    q, ll, it = golden_section_max(loglik, lo, float(hi), tol=tol)
    if not np.isfinite(ll):
        bad = logistic_increment_logpdf(w, q)
        r = int(np.flatnonzero(~np.isfinite(bad))[0])
        raise FloatingPointError(f"non-finite log-likelihood at sample {r}")
    at_bound = abs(q - lo) <= 10 * tol or abs(q - hi) <= 10 * tol
    return EstimateResult("q", q, ll, it, int(w.shape[0]),
                          {"q_bounds": [lo, float(hi)], "at_bound": bool(at_bound), "k": int(w.shape[1])})


# -- shapes -------------------------------------------------------------------


def mean_shape(events) -> Field:
    """Pointwise mean of extracted profiles, accumulated in a fixed order.

    Event sets are averaged in order of their selection index; a plain list
    of fields is first sorted lexicographically by value so the result does
    not depend on the input order.
    """
    if isinstance(events, ExtremeEventSet):
        if len(events) == 0:
            raise ValueError("empty event set")
        order = np.argsort(events.selection, kind="stable")
        arr, grid = events.samples[order], events.grid
    else:
        fields = list(events)
        if not fields:
            raise ValueError("no profiles")
        grid = fields[0].grid
        if any(f.grid != grid for f in fields):
            raise ValueError("profiles live on different windows")
        arr = np.stack([f.values for f in fields])
        flat = arr.reshape(len(fields), -1)
        arr = arr[np.lexsort(flat.T[::-1])]
    total = np.zeros(grid.shape)
    for row in arr:
        total += row
    return Field(grid, total / arr.shape[0], kind="profile")


def _fit_points(meanshape: Field, locations) -> tuple[np.ndarray, np.ndarray]:
    g = meanshape.grid
    if locations is None:
        pts, vals = g.points, meanshape.values.ravel()
    else:
        pts = np.asarray(locations, float).reshape(-1, g.ndim)
        vals = np.array([meanshape.at(p) for p in pts])
    return pts, vals


def shape_curve(r, family: str, beta: float, nu: Optional[float] = None) -> np.ndarray:
    """Peak-one profile of a fitted family at distances ``r``."""
    r = np.asarray(r, float)
    if family == "gaussian":
        return np.exp(-0.5 * (beta * r) ** 2)
    if family == "exponential":
        return np.exp(-beta * r)
    if family == "student":
        return (1.0 + (beta * r) ** 2 / nu) ** (-(nu + 1.0) / 2.0)
    raise ValueError(f"unknown shape family {family!r}")


def fit_shape_beta(meanshape: Field, family: str = "gaussian", locations=None,
                   nu: Optional[float] = None, beta_bounds=(1e-3, 50.0)) -> EstimateResult:
    """Least-squares fit of the scale ``beta`` of a peak-one profile.

    Gaussian and exponential fits regress ``log F`` on ``-|t|^2 / 2`` and
    ``-|t|`` through the origin; the student fit minimises squared error in
    ``beta`` directly.
    """
    pts, vals = _fit_points(meanshape, locations)
    r2 = np.sum(pts * pts, axis=1)
    if family in ("gaussian", "exponential"):
        good = vals > 0
        if not np.all(good):
            logger.warning("dropping %d fit locations with nonpositive mean shape", int(np.sum(~good)))
        x = -0.5 * r2[good] if family == "gaussian" else -np.sqrt(r2[good])
        y = np.log(vals[good])
        if not np.any(x != 0):
            raise ValueError("no usable fit locations away from the origin")
        slope = float(np.dot(x, y) / np.dot(x, x))
        if not slope > 0:
            raise ValueError(f"fitted slope {slope} is not positive")
        resid = y - slope * x
        ss_tot = float(np.sum((y - y.mean()) ** 2))
        r_sq = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
        beta = math.sqrt(slope) if family == "gaussian" else slope
        return EstimateResult("beta", beta, float(np.sum(resid ** 2)), 1, int(good.sum()),
                              {"family": family, "r_squared": r_sq})
    if family == "student":
        if nu is None or not nu > 0:
            raise ValueError("student fit needs nu > 0")

        def neg_sse(logb):
            b = math.exp(logb)
            model = shape_curve(np.sqrt(r2), "student", b, nu)
            return -float(np.sum((vals - model) ** 2))

        lb, val, it = golden_section_max(neg_sse, math.log(beta_bounds[0]), math.log(beta_bounds[1]),
                                         tol=1e-10)
        ss_tot = float(np.sum((vals - vals.mean()) ** 2))
        return EstimateResult("beta", math.exp(lb), -val, it, int(vals.size),
                              {"family": "student", "nu": nu,
                               "r_squared": 1.0 + val / ss_tot if ss_tot > 0 else 1.0})
    raise ValueError(f"unknown shape family {family!r}")


# -- extremal coefficient and variogram ---------------------------------------


@dataclass(frozen=True)
class ThetaEstimate:
    theta: float
    raw: float
    clamped: bool

    def __float__(self):
        return self.theta


def _inner_window(events: ExtremeEventSet, inner) -> Grid:
    K = events.grid
    if inner is None:
        return K
    if isinstance(inner, Grid):
        lo, hi = inner.lo, inner.hi
    else:
        lo, hi = inner
    sub = K.subgrid(lo, hi)
    return sub


def extremal_coefficient_from_shapes(events: ExtremeEventSet, h, inner=None) -> ThetaEstimate:
    """Ratio of summed integrals of ``max(F(t), F(t + h))`` and ``F(t)`` over the inner window.

    Both totals are summed exactly (``math.fsum``), so the value does not
    depend on summation order.  The estimate is clamped to ``[1, 2]``.
    Profile mass outside the inner window or its shift is lost, which biases
    the estimate towards 1; choose the window to cover the bulk of a storm.
    """
    if events.kind != "shapes":
        raise ValueError(f"extremal coefficient needs shape events, got {events.kind}")
    if len(events) == 0:
        raise ValueError("empty event set")
    K = events.grid
    sub = _inner_window(events, inner)
    off = np.asarray(K.offsets_of(h))
    base = np.asarray(K.index_of(sub.lo))
    shifted = base + off
    if np.any(shifted < 0) or np.any(shifted + np.asarray(sub.shape) > np.asarray(K.shape)):
        raise ValueError("inner window shifted by h leaves the profile window")
    s0 = (slice(None),) + tuple(slice(a, a + n) for a, n in zip(base, sub.shape))
    s1 = (slice(None),) + tuple(slice(a, a + n) for a, n in zip(shifted, sub.shape))
    f0 = events.samples[s0]
    f1 = events.samples[s1]
    w = sub.trapezoid_weights
    num = math.fsum((np.maximum(f0, f1) * w).ravel())
    den = math.fsum((f0 * w).ravel())
    if not den > 0:
        raise ValueError("profiles vanish on the inner window")
    raw = num / den
    theta = min(max(raw, 1.0), 2.0)
    return ThetaEstimate(theta, raw, theta != raw)


def theta_from_variogram(gamma):
    """Extremal coefficient ``2 Phi(sqrt(gamma) / 2)`` of a Brown-Resnick field."""
    return 2.0 * std_normal_cdf(np.sqrt(np.asarray(gamma, float)) / 2.0)


@dataclass(frozen=True)
class VariogramEstimate:
    gamma: float
    theta: float
    clamped: bool
    boundary: Optional[str] = None


def variogram_from_theta(theta: float) -> VariogramEstimate:
    """``(2 Phi^-1(theta / 2))^2``; ``theta = 1`` gives exactly zero, ``theta = 2`` a boundary flag."""
    th = float(theta)
    if th < 1.0 or th > 2.0:
        raise ValueError(f"extremal coefficient {th} outside [1, 2]")
    if th == 1.0:
        return VariogramEstimate(0.0, th, False, "theta=1: complete dependence")
    if th == 2.0:
        return VariogramEstimate(math.inf, th, False, "theta=2: independence, variogram unbounded")
    x = inv_std_normal_cdf(th / 2.0)
    return VariogramEstimate(float((2.0 * x) ** 2), th, False)


def variogram_from_shapes(events: ExtremeEventSet, h, inner=None) -> VariogramEstimate:
    est = extremal_coefficient_from_shapes(events, h, inner)
    v = variogram_from_theta(est.theta)
    return VariogramEstimate(v.gamma, est.theta, est.clamped, v.boundary)


# -- unit mean ----------------------------------------------------------------


@dataclass
class UnitMeanReport:
    deviation: Field
    stderr: Field
    flagged: np.ndarray
    n: int

    @property
    def ok(self) -> bool:
        return not bool(np.any(self.flagged))


def unit_mean_diagnostic(w_samples, grid: Grid | None = None, n_se: float = 3.0) -> UnitMeanReport:
    """Pointwise ``|mean - 1|`` with Monte-Carlo standard errors; flags deviations beyond ``n_se`` errors."""
    if isinstance(w_samples, np.ndarray):
        if grid is None:
            raise ValueError("a grid is required for array input")
        arr = w_samples.reshape((-1,) + grid.shape)
    else:
        fields: Sequence[Field] = list(w_samples)
        if not fields:
            raise ValueError("no samples")
        grid = fields[0].grid
        arr = np.stack([f.values for f in fields])
    n = arr.shape[0]
    if n == 0:
        raise ValueError("no samples")
    dev = np.abs(arr.mean(axis=0) - 1.0)
    se = arr.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros(grid.shape)
    flagged = dev > n_se * se
    return UnitMeanReport(Field(grid, dev), Field(grid, se), flagged, n)
