"""Simulation of max-stable fields from their incremental and M3 representations."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Protocol

import numpy as np

from .core import RngLike, RngStream, iter_frechet_atoms, split
from .grid import Field, Grid
from .models import (
    DiscreteShape,
    GaussianFieldSampler,
    ShapeDistribution,
    VariogramModel,
    as_shape_distribution,
    cov_from_variogram,
    radial_tail_mass,
)

logger = logging.getLogger(__name__)

DEFAULT_ATOM_BUDGET = 1000
_SQRT2PI = math.sqrt(2 * math.pi)


@dataclass
class SimConfig:
    grid: Grid
    margin: float = 0.0
    atom_budget: int = DEFAULT_ATOM_BUDGET
    reps: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.margin < 0:
            raise ValueError("window margin must be nonnegative")
        if self.atom_budget < 1:
            raise ValueError("atom budget must be at least 1")


@dataclass(frozen=True)
class StormEvent:
    u: float
    center: tuple
    shape_id: int = 0

    def to_record(self, shape_params=None) -> dict:
        return {"u": self.u, "center": list(self.center), "shape_params": shape_params}


@dataclass
class SimResult:
    """A simulated field with its stopping diagnostics.

    ``exact`` is False when the atom budget ran out before the stopping rule
    fired; ``residual`` is then the last atom's contribution bound
    ``U * max W`` on the grid.
    """

    field: Field
    exact: bool
    n_atoms: int
    residual: float = 0.0
    events: list = field(default_factory=list)

    @property
    def values(self) -> np.ndarray:
        return self.field.values


class IncrementSampler(Protocol):
    """Draws ``size`` nonnegative unit-mean processes on a grid, shape ``(size, grid.size)``.

    ``bound`` is an almost-sure bound on their supremum, or None.
    """

    grid: Grid
    bound: Optional[float]

    def sample(self, gen: np.random.Generator, size: int) -> np.ndarray: ...


class ConstantIncrements:
    """The degenerate process ``W = 1``."""

    def __init__(self, grid: Grid):
        self.grid = grid
        self.bound = 1.0

    def sample(self, gen, size):
        return np.ones((size, self.grid.size))


class DeterministicIncrements(ConstantIncrements):
    """A fixed function; unit mean forces it to be identically one."""

    def __init__(self, grid: Grid, values):
        v = np.broadcast_to(np.asarray(values, float), grid.shape)
        if not np.all(v == 1.0):
            bad = grid.points[np.flatnonzero(v.ravel() != 1.0)[0]]
            raise ValueError(f"deterministic increment process must have mean one; "
                             f"W = {v.ravel()[np.flatnonzero(v.ravel() != 1.0)[0]]} at {tuple(bad)}")
        super().__init__(grid)


class BrownResnickIncrements:
    """Log-Gaussian increments ``exp(Y(t) - gamma(t - t0) / 2)`` with ``Y(t0) = 0``."""

    def __init__(self, variogram: VariogramModel, grid: Grid, t0):
        self.grid = grid
        self.t0 = tuple(np.atleast_1d(np.asarray(t0, float)))
        self.anchor = grid.flat_index_of(self.t0)
        cov = cov_from_variogram(variogram, grid, self.t0)
        self.variance = np.diag(cov).copy()
        self.gauss = GaussianFieldSampler(cov)
        self.bound = None

    def sample(self, gen, size):
        y = self.gauss.sample(gen, size)
        w = np.exp(y - 0.5 * self.variance)
        w[:, self.anchor] = 1.0
        return w


class ExtremalGaussianIncrements:
    """Spectral process ``sqrt(2 pi) * max(0, Y)`` for a unit-variance Gaussian ``Y``."""

    def __init__(self, cov, grid: Grid):
        cov = np.asarray(cov, float)
        if cov.shape != (grid.size, grid.size):
            raise ValueError("covariance does not match the grid")
        if not np.allclose(np.diag(cov), 1.0, rtol=0, atol=1e-12):
            raise ValueError("extremal Gaussian model needs a unit-diagonal covariance")
        self.grid = grid
        self.gauss = GaussianFieldSampler(cov)
        self.bound = None

    def sample(self, gen, size):
        return _SQRT2PI * np.maximum(0.0, self.gauss.sample(gen, size))


def correlation_matrix(kind: str, scale: float, grid: Grid) -> np.ndarray:
    """Stationary correlation on the grid: ``exponential`` or ``gaussian`` in ``|h| / scale``."""
    pts = grid.points
    r = np.sqrt(np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=-1)) / scale
    if kind == "exponential":
        return np.exp(-r)
    if kind == "gaussian":
        return np.exp(-r * r)
    raise ValueError(f"unknown correlation {kind!r}")


def logistic_increments_from_uniforms(v: np.ndarray, q: float, method: str = "closed") -> np.ndarray:
    """Map uniforms ``v`` (shape ``(..., k)``) to the logistic increment vector.

    Coordinate ``j`` (1-based) is the conditional inverse given the earlier ones:
    ``P(W_j <= s | W_1..W_{j-1}) = (1 + s^-q / A)^(1/q - j)`` with
    ``A = 1 + sum_{i<j} W_i^-q``.  This inverts in closed form; ``method="brentq"``
    solves each equation numerically instead (slow, kept as a cross-check).
    """
    v = np.asarray(v, float)
    if method == "brentq":
        return _logistic_by_roots(v, q)
    if method != "closed":
        raise ValueError(f"unknown inversion method {method!r}")
    out = np.empty_like(v)
    acc = np.ones(v.shape[:-1])
    with np.errstate(divide="ignore", over="ignore"):
        for j in range(1, v.shape[-1] + 1):
            expo = q / (1.0 - j * q)
            sq = acc * np.expm1(expo * np.log(v[..., j - 1]))
            out[..., j - 1] = sq ** (-1.0 / q)
            acc = acc + sq
    return out


def _logistic_by_roots(v: np.ndarray, q: float, xtol: float = 1e-10) -> np.ndarray:
    from scipy.optimize import brentq

    flat = v.reshape(-1, v.shape[-1])
    out = np.empty_like(flat)
    for r, row in enumerate(flat):
        acc = 1.0
        for j, vj in enumerate(row, start=1):
            # solve in x = log s, where the conditional CDF is monotone
            f = lambda x: (1.0 + np.exp(-q * x) / acc) ** (1.0 / q - j) - vj
            lo, hi = -1.0, 1.0
            while f(lo) > 0:
                lo *= 2
            while f(hi) < 0:
                hi *= 2
            x = brentq(f, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps)
            out[r, j - 1] = np.exp(x)
            acc += np.exp(-q * x)
    return out.reshape(v.shape)


class LogisticIncrements:
    """Increment vector ``(1, W_1, ..., W_k)`` of the symmetric logistic model."""

    def __init__(self, q: float, k: int):
        if not q > 1:
            raise ValueError("logistic dependence parameter must exceed 1")
        if k < 1:
            raise ValueError("need at least one increment coordinate")
        self.q = float(q)
        self.k = int(k)
        self.grid = Grid((0.0,), (float(k),), (1.0,))
        self.bound = None

    def sample(self, gen, size):
        v = 1.0 - gen.random((size, self.k))
        out = np.ones((size, self.k + 1))
        out[:, 1:] = logistic_increments_from_uniforms(v, self.q)
        return out


class CallableIncrements:
    """Adapter for a user function ``f(gen, size) -> array``."""

    def __init__(self, grid: Grid, func: Callable, bound: Optional[float] = None):
        self.grid = grid
        self.func = func
        self.bound = bound

    def sample(self, gen, size):
        return np.asarray(self.func(gen, size), float).reshape(size, self.grid.size)


# -- incremental representation -----------------------------------------------


def simulate_incremental(w_sampler: IncrementSampler, rng: RngLike,
                         atom_budget: int = DEFAULT_ATOM_BUDGET,
                         mass: float = 1.0) -> SimResult:
    """``max_i U_i W_i`` over Fréchet atoms ``U_i``.

    With a declared bound ``b`` on ``sup W`` generation stops at the first
    atom with ``U * b`` below the running minimum, which is exact.  Otherwise
    exactly ``atom_budget`` atoms are used and the result is flagged
    approximate.
    """
    grid = w_sampler.grid
    bound = w_sampler.bound
    gen_u, gen_w = split(rng, 2)
    xi = np.zeros(grid.size)
    used = 0
    residual = 0.0
    for u in iter_frechet_atoms(gen_u, mass):
        u = u[: atom_budget - used]
        w = w_sampler.sample(gen_w, u.size)
        prod = u[:, None] * w
        if bound is not None:
            running = np.maximum(xi, np.maximum.accumulate(prod, axis=0))
            floor_before = np.concatenate([[xi.min()], running[:-1].min(axis=1)])
            stop = np.flatnonzero(u * bound < floor_before)
            if stop.size:
                i = stop[0]
                if i > 0:
                    xi = running[i - 1]
                return SimResult(Field(grid, xi), True, used + i)
            xi = running[-1]
        else:
            xi = np.maximum(xi, prod.max(axis=0))
            residual = float(prod[-1].max())
        used += u.size
        if used >= atom_budget:
            break
    if bound is not None:
        logger.warning("atom budget %d exhausted before exact stopping; result approximate", atom_budget)
    return SimResult(Field(grid, xi), False, used, residual)


def simulate_brown_resnick(variogram: VariogramModel, grid: Grid, t0, rng: RngLike,
                           atom_budget: int = DEFAULT_ATOM_BUDGET) -> SimResult:
    return simulate_incremental(BrownResnickIncrements(variogram, grid, t0), rng, atom_budget)


def simulate_extremal_gaussian(cov, grid: Grid, rng: RngLike,
                               atom_budget: int = DEFAULT_ATOM_BUDGET) -> SimResult:
    return simulate_incremental(ExtremalGaussianIncrements(cov, grid), rng, atom_budget)


def simulate_logistic_vector(q: float, k: int, rng: RngLike,
                             atom_budget: int = DEFAULT_ATOM_BUDGET) -> np.ndarray:
    """One symmetric logistic vector of length ``k + 1`` with standard Fréchet margins."""
    return simulate_incremental(LogisticIncrements(q, k), rng, atom_budget).values.copy()


# -- mixed moving maxima ------------------------------------------------------


def _window(grid: Grid, margin) -> tuple[np.ndarray, np.ndarray, float]:
    lo, hi = grid.expand(margin)
    return lo, hi, float(np.prod(hi - lo))


def simulate_m3(shape, grid: Grid, margin: float, rng: RngLike,
                atom_budget: int = 10**6, keep_events: bool = True) -> SimResult:
    """Mixed moving maxima ``max_i U_i F_i(t - T_i)`` with centres in ``grid`` enlarged by ``margin``.

    Stops exactly once ``U * sup F`` falls below the running minimum.  The
    returned events are the atoms attaining the maximum somewhere on the grid.
    """
    dist = as_shape_distribution(shape)
    if dist.ndim != grid.ndim:
        raise ValueError("shape and grid dimensions differ")
    _warn_margin(dist, margin)
    lo, hi, vol = _window(grid, margin)
    lam = dist.sup
    gen_u, gen_c, gen_s = split(rng, 3)
    pts = grid.points
    xi = np.zeros(grid.size)
    owner = np.full(grid.size, -1)
    atoms_u, atoms_c, atoms_s = [], [], []
    used = 0
    exact = False
    for u in iter_frechet_atoms(gen_u, vol):
        u = u[: atom_budget - used]
        m = u.size
        centers = lo + (hi - lo) * gen_c.random((m, grid.ndim))
        comps = dist.draw(gen_s, m)
        stop = np.flatnonzero(u * lam < xi.min())
        if stop.size and stop[0] == 0:
            exact = True
            break
        vals = u[:, None] * dist.evaluate(comps, pts[None, :, :] - centers[:, None, :])
        running = np.maximum(xi, np.maximum.accumulate(vals, axis=0))
        floor_before = np.concatenate([[xi.min()], running[:-1].min(axis=1)])
        stop = np.flatnonzero(u * lam < floor_before)
        n_take = stop[0] if stop.size else m
        if n_take:
            block = vals[:n_take]
            best = block.argmax(axis=0)
            better = block[best, np.arange(grid.size)] > xi
            owner = np.where(better, used + best, owner)
            xi = running[n_take - 1]
            if keep_events:
                atoms_u.append(u[:n_take])
                atoms_c.append(centers[:n_take])
                atoms_s.append(comps[:n_take])
        used += n_take
        if stop.size:
            exact = True
            break
        if used >= atom_budget:
            break
    if not exact:
        logger.warning("M3 atom budget %d exhausted; field approximate", atom_budget)
    events = []
    if keep_events and atoms_u:
        all_u = np.concatenate(atoms_u)
        all_c = np.concatenate(atoms_c)
        all_s = np.concatenate(atoms_s)
        for i in np.unique(owner[owner >= 0]):
            events.append(StormEvent(float(all_u[i]), tuple(float(c) for c in all_c[i]), int(all_s[i])))
    return SimResult(Field(grid, xi), exact, used, 0.0, events)


def _warn_margin(dist: ShapeDistribution, margin: float, tol: float = 1e-4) -> None:
    shape = getattr(dist, "shape", None)
    if shape is None or getattr(shape, "family", "") == "tabulated":
        return
    tail = radial_tail_mass(shape, margin)
    if tail > tol:
        logger.warning("window margin %.3g leaves shape tail mass %.3g; expect edge bias", margin, tail)


def events_field(events, shape, grid: Grid) -> np.ndarray:
    """Pointwise maximum over a list of storm events."""
    dist = as_shape_distribution(shape)
    out = np.zeros(grid.size)
    for ev in events:
        off = grid.points - np.asarray(ev.center)[None, :]
        v = ev.u * dist.evaluate(np.array([ev.shape_id]), off[None])[0]
        out = np.maximum(out, v)
    return out.reshape(grid.shape)


def _check_integer_grid(grid: Grid) -> None:
    if any(s != 1.0 for s in grid.step) or any(a != round(a) for a in grid.lo):
        raise ValueError("discrete M3 needs an integer lattice with unit step")


def simulate_m3_discrete(shape: DiscreteShape, grid: Grid, rng: RngLike,
                         atom_budget: int = 10**6) -> SimResult:
    """Discrete mixed moving maxima on the integer lattice.

    Storm centres are uniform over the lattice sites of the grid enlarged by
    the shape radius, which covers every storm that can reach the grid.
    """
    if not isinstance(shape, DiscreteShape):
        raise TypeError("simulate_m3_discrete needs a DiscreteShape")
    _check_integer_grid(grid)
    if shape.ndim != grid.ndim:
        raise ValueError("shape and grid dimensions differ")
    rad = np.asarray(shape.radius)
    lo = np.asarray(grid.lo).astype(np.int64) - rad
    extent = np.asarray(grid.shape) + 2 * rad
    n_sites = float(np.prod(extent))
    pts = grid.points.astype(np.int64)
    lam = shape.sup
    gen_u, gen_c = split(rng, 2)
    xi = np.zeros(grid.size)
    used = 0
    exact = False
    padded = np.pad(shape.values, 1)  # index 0 / -1 read as zero
    for u in iter_frechet_atoms(gen_u, n_sites):
        u = u[: atom_budget - used]
        m = u.size
        centers = lo + np.floor(gen_c.random((m, grid.ndim)) * extent).astype(np.int64)
        off = pts[None, :, :] - centers[:, None, :] + rad + 1
        inside = np.all((off >= 1) & (off <= 2 * rad + 1), axis=-1)
        off = np.where(inside[..., None], off, 0)
        vals = u[:, None] * padded[tuple(off[..., k] for k in range(grid.ndim))]
        running = np.maximum(xi, np.maximum.accumulate(vals, axis=0))
        floor_before = np.concatenate([[xi.min()], running[:-1].min(axis=1)])
        stop = np.flatnonzero(u * lam < floor_before)
        n_take = stop[0] if stop.size else m
        if n_take:
            xi = running[n_take - 1]
        used += n_take
        if stop.size:
            exact = True
            break
        if used >= atom_budget:
            break
    return SimResult(Field(grid, xi), exact, used)


def simulate_mda_sample(c: float, eps: float, kappa: float, shape, grid: Grid, margin: float,
                        rng: RngLike, chunk: int = 512) -> Field:
    """One draw of ``kappa v max u f(. - t)`` over a Poisson cloud with intensity ``c 1{u >= eps} u^-2``.

    The atom count is Poisson with mean ``c |window| / eps`` and each ``u``
    is ``eps`` over a uniform.  Normalised maxima of copies converge to the
    M3 process with the same shape law.
    """
    if not (c > 0 and eps > 0 and kappa > 0):
        raise ValueError("c, eps and kappa must be positive")
    dist = as_shape_distribution(shape)
    lo, hi, vol = _window(grid, margin)
    gen_n, gen_u, gen_c, gen_s = split(rng, 4)
    n = int(gen_n.poisson(c * vol / eps))
    u = eps / (1.0 - gen_u.random(n))
    centers = lo + (hi - lo) * gen_c.random((n, grid.ndim))
    comps = dist.draw(gen_s, n)
    out = np.full(grid.size, float(kappa))
    live = np.flatnonzero(u * dist.sup > kappa)
    pts = grid.points
    for s in range(0, live.size, chunk):
        idx = live[s:s + chunk]
        vals = u[idx, None] * dist.evaluate(comps[idx], pts[None] - centers[idx, None, :])
        out = np.maximum(out, vals.max(axis=0))
    return Field(grid, out)


# -- replicate drivers --------------------------------------------------------


def replicate(fn: Callable[[RngStream], object], n: int, seed: int, start: int = 0) -> np.ndarray:
    """Stack ``fn(RngStream(seed, i))`` for ``i`` in ``start .. start + n - 1``.

    ``fn`` may return a Field, a SimResult or an array.
    """
    rows = []
    for i in range(start, start + n):
        r = fn(RngStream(seed, i))
        if isinstance(r, SimResult):
            r = r.values
        elif isinstance(r, Field):
            r = r.values
        rows.append(np.asarray(r, float))
    return np.stack(rows)
