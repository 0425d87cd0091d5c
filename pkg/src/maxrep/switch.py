"""Switching between mixed moving maxima and incremental representations."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .core import RngLike, as_generator
from .grid import Field, Grid
from .models import (
    FixedShape,
    ShapeDistribution,
    ShapeMixture,
    ShapeModel,
    TabulatedShapes,
    as_shape_distribution,
)

logger = logging.getLogger(__name__)


# -- sampling from a tabulated density ---------------------------------------


class GridDensitySampler:
    """Draws from the multilinear interpolant of nonnegative values on a grid.

    A cell is chosen with probability equal to its interpolated mass (the mean
    of its corner values), then a point inside it by rejection from the
    uniform law.
    """

    def __init__(self, grid: Grid, values):
        v = np.asarray(values, float).reshape(grid.shape)
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("density values must be finite and nonnegative")
        if any(n < 2 for n in grid.shape):
            raise ValueError("density grid needs at least two points per axis")
        self.grid = grid
        self.values = v
        d = grid.ndim
        corners = []
        for bits in np.ndindex(*(2,) * d):
            sl = tuple(slice(b, n - 1 + b) for b, n in zip(bits, grid.shape))
            corners.append(v[sl])
        self.corners = np.stack([c.ravel() for c in corners], axis=1)  # (cells, 2^d)
        self.bits = np.array(list(np.ndindex(*(2,) * d)), dtype=float)
        self.cell_shape = tuple(n - 1 for n in grid.shape)
        mass = self.corners.mean(axis=1) * grid.cell_volume
        self.total = float(mass.sum())
        if not self.total > 0:
            raise ValueError("density vanishes on the grid")
        self.cdf = np.cumsum(mass) / self.total
        self.cell_max = self.corners.max(axis=1)

    def sample(self, gen: np.random.Generator, size: int) -> np.ndarray:
        g = self.grid
        cells = np.minimum(np.searchsorted(self.cdf, gen.random(size), side="right"),
                           self.cdf.size - 1)
        out = np.empty((size, g.ndim))
        todo = np.arange(size)
        while todo.size:
            c = cells[todo]
            frac = gen.random((todo.size, g.ndim))
            # multilinear weight of each corner at frac
            w = np.prod(np.where(self.bits[None, :, :] == 1, frac[:, None, :], 1 - frac[:, None, :]), axis=2)
            dens = np.sum(w * self.corners[c], axis=1)
            ok = gen.random(todo.size) * self.cell_max[c] < dens
            idx = np.stack(np.unravel_index(c[ok], self.cell_shape), axis=1)
            out[todo[ok]] = np.asarray(g.lo) + (idx + frac[ok]) * np.asarray(g.step)
            todo = todo[~ok]
        return out


def _tabulation_grid(shape: ShapeModel, step: Optional[float], tail: float = 1e-12) -> Grid:
    if shape.family == "tabulated":
        return shape.grid
    r = shape.default_support(tail)
    if step is None:
        step = r / (400 if shape.ndim == 1 else 60)
    n = math.ceil(r / step)
    return Grid.centered(n * step, step, shape.ndim)


def _components(dist: ShapeDistribution) -> list[ShapeModel]:
    if isinstance(dist, (FixedShape, ShapeMixture, TabulatedShapes)):
        return [dist.component(j) for j in range(dist.n_components)]
    raise TypeError(f"unsupported shape distribution {type(dist).__name__}")


# -- M3 -> incremental --------------------------------------------------------


class M3Increments:
    """Increment process of an M3 model: ``W(t) = G(t - S) / G(-S)``.

    ``G`` follows the size-biased shape law ``(integral f) P_F(df)`` and,
    given ``G``, the shift ``S`` has density proportional to ``G(-s)``.
    For a finite shape mixture the size-biasing is applied to the mixture
    weights exactly.
    """

    def __init__(self, shape, grid: Grid, step: Optional[float] = None):
        dist = as_shape_distribution(shape)
        if dist.ndim != grid.ndim:
            raise ValueError("shape and grid dimensions differ")
        self.grid = grid
        self.dist = dist
        self.shapes = _components(dist)
        ints = np.array([s.profile_integral * s.lam for s in self.shapes])  # integral of each F_j
        if isinstance(dist, TabulatedShapes):
            ints = ints * dist.scale
        w = dist.weights * ints
        self.weights = w / w.sum()
        self.samplers = []
        for s in self.shapes:
            tg = _tabulation_grid(s, step)
            vals = s(tg.points)
            if np.any(vals <= 0):
                raise ValueError("shape vanishes somewhere on its tabulation grid; "
                                 "use m3_to_v_representation for shapes with bounded support")
            # T = -S has density G, so tabulate G itself
            self.samplers.append(GridDensitySampler(tg, vals))
        self.bound = None

    def draw_shifts(self, gen: np.random.Generator, size: int) -> tuple[np.ndarray, np.ndarray]:
        """Component index and ``T = -S`` for ``size`` draws."""
        comp = np.zeros(size, dtype=np.int64)
        if len(self.shapes) > 1:
            comp = np.minimum(np.searchsorted(np.cumsum(self.weights), gen.random(size), side="right"),
                              len(self.shapes) - 1)
        T = np.empty((size, self.grid.ndim))
        for j in np.unique(comp):
            rows = comp == j
            T[rows] = self.samplers[j].sample(gen, int(rows.sum()))
        return comp, T

    def ratios(self, comp: np.ndarray, T: np.ndarray, points: np.ndarray) -> np.ndarray:
        """``G(t + T) / G(T)`` for every row and every point ``t``."""
        out = np.empty((T.shape[0], points.shape[0]))
        for j in np.unique(comp):
            rows = comp == j
            s = self.shapes[j]
            num = s(points[None, :, :] + T[rows][:, None, :])
            den = s(T[rows])
            out[rows] = num / den[:, None]
        return out

    def sample(self, gen: np.random.Generator, size: int) -> np.ndarray:
        comp, T = self.draw_shifts(gen, size)
        return self.ratios(comp, T, self.grid.points)


def m3_to_incremental_sample(shape, grid: Grid, rng: RngLike, size: Optional[int] = None,
                             step: Optional[float] = None):
    """Samples of the increment process ``W`` (with ``W(0) = 1``) of an M3 model.

    Returns a Field for ``size=None``, otherwise an array ``(size, *grid.shape)``.
    """
    if not grid.contains(np.zeros(grid.ndim)):
        raise ValueError("grid must contain the origin")
    sampler = M3Increments(shape, grid, step)
    gen = as_generator(rng)
    w = sampler.sample(gen, 1 if size is None else size)
    if size is None:
        return Field(grid, w[0])
    return w.reshape((size,) + grid.shape)


# -- M3 -> V with an arbitrary shift density ---------------------------------


class ShiftDensity:
    ndim: int

    def sample(self, gen, size) -> np.ndarray:
        raise NotImplementedError

    def pdf(self, r) -> np.ndarray:
        raise NotImplementedError

    @property
    def pdf_min(self) -> float:
        """Lower bound of the density on its support (0 if unbounded below)."""
        return 0.0


class UniformShift(ShiftDensity):
    def __init__(self, lo, hi):
        self.lo = np.atleast_1d(np.asarray(lo, float))
        self.hi = np.atleast_1d(np.asarray(hi, float))
        if np.any(self.hi <= self.lo):
            raise ValueError("empty uniform box")
        self.ndim = self.lo.size
        self.vol = float(np.prod(self.hi - self.lo))

    @classmethod
    def around(cls, grid: Grid, margin) -> "UniformShift":
        return cls(*grid.expand(margin))

    def sample(self, gen, size):
        return self.lo + (self.hi - self.lo) * gen.random((size, self.ndim))

    def pdf(self, r):
        r = np.asarray(r, float)
        inside = np.all((r >= self.lo) & (r <= self.hi), axis=-1)
        return np.where(inside, 1.0 / self.vol, 0.0)

    @property
    def pdf_min(self) -> float:
        return 1.0 / self.vol


class GaussianShift(ShiftDensity):
    """Isotropic normal density, positive everywhere."""

    def __init__(self, center, scale: float):
        self.center = np.atleast_1d(np.asarray(center, float))
        self.scale = float(scale)
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        self.ndim = self.center.size

    def sample(self, gen, size):
        return self.center + self.scale * gen.standard_normal((size, self.ndim))

    def pdf(self, r):
        z = (np.asarray(r, float) - self.center) / self.scale
        d = self.ndim
        return np.exp(-0.5 * np.sum(z * z, axis=-1)) / ((2 * math.pi) ** (d / 2) * self.scale ** d)


class VSampler:
    """``V(t) = F(t - R) / g(R)`` with ``R ~ g`` and ``F ~ P_F``.

    A uniform ``g`` gives the bound ``sup F / min g`` and hence exact
    stopping; otherwise the bound is unknown.
    """

    def __init__(self, shape, density: ShiftDensity, grid: Grid):
        self.dist = as_shape_distribution(shape)
        if density.ndim != grid.ndim or self.dist.ndim != grid.ndim:
            raise ValueError("dimension mismatch between shape, shift density and grid")
        self.density = density
        self.grid = grid
        self.bound = self.dist.sup / density.pdf_min if density.pdf_min > 0 else None

    def sample(self, gen, size):
        r = self.density.sample(gen, size)
        comp = self.dist.draw(gen, size)
        g = self.density.pdf(r)
        if np.any(g <= 0):
            raise ValueError("shift density vanishes at a drawn point")
        f = self.dist.evaluate(comp, self.grid.points[None, :, :] - r[:, None, :])
        return f / g[:, None]


def m3_to_v_representation(shape, density: ShiftDensity, grid: Grid, rng: RngLike,
                           size: Optional[int] = None):
    """Samples of the spectral process ``V`` for a chosen positive shift density ``g``."""
    pts = grid.points
    if np.any(density.pdf(pts) <= 0):
        raise ValueError("shift density must be positive on the grid")
    s = VSampler(shape, density, grid)
    v = s.sample(as_generator(rng), 1 if size is None else size)
    if size is None:
        return Field(grid, v[0])
    return v.reshape((size,) + grid.shape)


def conditional_increment_law_m3(shape: ShapeModel, points, rng: RngLike, n: int,
                                 step: Optional[float] = None) -> np.ndarray:
    """``n`` draws of ``(f(t_l + T) / f(T))_l`` with ``T`` of density ``f``.

    Values off the tabulation of a tabulated shape are zero.
    """
    if not isinstance(shape, ShapeModel):
        raise TypeError("needs a deterministic ShapeModel")
    pts = np.asarray(points, float).reshape(-1, shape.ndim)
    tg = _tabulation_grid(shape, step)
    sampler = GridDensitySampler(tg, shape(tg.points))
    gen = as_generator(rng)
    T = sampler.sample(gen, n)
    num = shape(pts[None, :, :] + T[:, None, :])
    return num / shape(T)[:, None]


# -- incremental -> M3 --------------------------------------------------------


@dataclass
class WeightedShapeSample:
    profile: Field
    gamma: float
    tau: tuple
    weight: float


@dataclass
class M3Fit:
    """Profiles ``W(tau + .) / gamma`` on a common offset grid, their weights and ``c``."""

    samples: list
    c: float
    offsets: Grid
    profiles: np.ndarray
    weights: np.ndarray
    n_drawn: int
    n_dropped: int
    boundary_ratio: float = 0.0

    @property
    def drop_fraction(self) -> float:
        return self.n_dropped / self.n_drawn

    def shape_distribution(self) -> TabulatedShapes:
        """Shape law ``F = c * profile`` with profiles drawn by weight."""
        return TabulatedShapes(self.offsets, self.profiles, self.weights, scale=self.c)

    def mean_profile(self) -> Field:
        w = self.weights / self.weights.sum()
        return Field(self.offsets, np.tensordot(w, self.profiles, axes=1), kind="profile")


def central_box(grid: Grid, fraction: float = 0.5) -> tuple[np.ndarray, np.ndarray]:
    lo, hi = np.asarray(grid.lo), np.asarray(grid.hi)
    mid, half = (lo + hi) / 2, (hi - lo) * fraction / 2
    return mid - half, mid + half


def incremental_to_m3(w_sampler, nsamples: int, rng: RngLike, K=None,
                      chunk: int = 2000) -> M3Fit:
    """Mixed moving maxima representation of a stationary incremental model.

    Each draw ``W`` contributes its maximum ``gamma``, the lexicographic
    argmax ``tau`` and the profile ``W(tau + .) / gamma``; draws with ``tau``
    outside ``K`` (default: central half of the grid) are dropped.  Profiles
    are weighted by ``gamma`` and ``c`` is the reciprocal of the weighted mean
    profile integral.  Profiles are stored on the offsets
    ``grid - K`` and set to zero where ``tau + offset`` leaves the grid.
    ``boundary_ratio`` is the largest ``W / gamma`` seen on the grid boundary;
    values near one mean ``W`` has not decayed inside the grid.
    """
    grid: Grid = w_sampler.grid
    klo, khi = central_box(grid) if K is None else K
    kmask = grid.box_mask(klo, khi).ravel()
    if not kmask.any():
        raise ValueError("reference set K contains no grid point")
    kidx = np.flatnonzero(kmask)
    kmulti = np.stack(np.unravel_index(kidx, grid.shape), axis=1)
    kmin, kmax = kmulti.min(axis=0), kmulti.max(axis=0)
    gshape = np.asarray(grid.shape)
    # offset index range so that tau + offset covers the whole grid for every tau in K
    off_lo = -kmax
    off_n = gshape - 1 - kmin - off_lo + 1
    offsets = Grid(tuple(off_lo * np.asarray(grid.step)),
                   tuple((off_lo + off_n - 1) * np.asarray(grid.step)), grid.step)

    gen = as_generator(rng)
    prof, gam, taus, ints = [], [], [], []
    drawn = 0
    tw = grid.trapezoid_weights.ravel()
    edge = np.ones(grid.shape, dtype=bool)
    edge[tuple(slice(1, n - 1) for n in grid.shape)] = False
    edge = edge.ravel()
    bmax = 0.0
    while drawn < nsamples:
        m = min(chunk, nsamples - drawn)
        w = w_sampler.sample(gen, m)
        drawn += m
        am = np.argmax(w, axis=1)
        keep = np.flatnonzero(kmask[am])
        for i in keep:
            g = w[i, am[i]]
            tau = np.asarray(np.unravel_index(am[i], grid.shape))
            p = np.zeros(tuple(off_n))
            start = tau + off_lo  # index of grid.lo relative to the offset window origin
            dst = tuple(slice(-s, -s + n) for s, n in zip(start, gshape))
            p[dst] = w[i].reshape(grid.shape) / g
            prof.append(p)
            gam.append(g)
            taus.append(tuple(float(a[j]) for a, j in zip(grid.axes, tau)))
            ints.append(float(np.dot(w[i], tw)) / g)
            bmax = max(bmax, float(w[i, edge].max()) / g)
    n_keep = len(gam)
    n_drop = drawn - n_keep
    if n_keep == 0:
        raise ValueError("no sample attains its maximum inside K; the process may lack "
                         "a unique interior maximum (e.g. constant W)")
    if n_drop / drawn > 0.2:
        logger.warning("%.1f%% of samples dropped (maximum outside K); expect truncation bias",
                       100 * n_drop / drawn)
    gam = np.asarray(gam)
    ints = np.asarray(ints)
    c = float(gam.sum() / np.dot(gam, ints))
    profiles = np.stack(prof)
    samples = [WeightedShapeSample(Field(offsets, p, kind="profile"), float(g), t, float(g))
               for p, g, t in zip(profiles, gam, taus)]
    return M3Fit(samples, c, offsets, profiles, gam, drawn, n_drop, bmax)


# -- exponent measure oracle -------------------------------------------------


def logistic_exponent_density(x, q: float):
    """Density of the exponent measure of the symmetric logistic law in ``d = len(x)`` coordinates."""
    x = np.asarray(x, float)
    d = x.shape[-1]
    tot = np.sum(x ** -q, axis=-1)
    const = np.prod(np.arange(1, d) * q - 1.0)
    return const * np.prod(x ** (-q - 1.0), axis=-1) * tot ** (1.0 / q - d)


class QuadratureError(RuntimeError):
    pass


def _nquad_checked(func, ranges, rtol: float = 1e-4):
    # quadpack warnings are superseded by the explicit two-tolerance check
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        coarse = integrate.nquad(func, ranges, opts={"epsabs": 1e-7, "epsrel": 1e-6, "limit": 200})[0]
        fine = integrate.nquad(func, ranges, opts={"epsabs": 1e-10, "epsrel": 1e-9, "limit": 200})[0]
    if abs(fine - coarse) > rtol * max(abs(fine), 1e-12):
        raise QuadratureError(f"quadrature did not converge: {coarse} vs {fine}")
    return fine


def increment_law_from_exponent_measure(density: Callable, s_grid, k: int) -> np.ndarray:
    """``P(W <= s) = mu({x_0 > 1, x_j <= x_0 s_j})`` on each row of ``s_grid``.

    ``density(x)`` takes a vector ``(x_0, .., x_k)``; ``k`` is 1 or 2.  The
    unbounded ``x_0`` range is mapped to ``(0, 1)`` by ``x_0 = 1 / v``.
    """
    if k not in (1, 2):
        raise ValueError("quadrature oracle supports k = 1 or 2")
    s_grid = np.asarray(s_grid, float).reshape(-1, k)
    out = np.empty(s_grid.shape[0])
    for r, s in enumerate(s_grid):
        if np.any(s <= 0):
            out[r] = 0.0
            continue
        if np.all(np.isinf(s)):
            s = None

        def f(*args):
            *xs, v = args
            x0 = 1.0 / v
            return float(density(np.array([x0, *xs]))) / (v * v)

        def rng_j(j):
            if s is None:
                return lambda *a: (0.0, np.inf)
            return lambda *a: (0.0, s[j] / a[-1])

        ranges = [rng_j(j) for j in range(k)] + [(0.0, 1.0)]
        out[r] = _nquad_checked(f, ranges)
    return out


def exponent_measure_box(density: Callable, lo, hi) -> float:
    """``mu`` of the box ``[lo, hi]`` (which must stay away from the origin)."""
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    return _nquad_checked(lambda *x: float(density(np.array(x))), list(zip(lo, hi)))
