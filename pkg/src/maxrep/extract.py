"""Peaks-over-threshold selection of single extreme events."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .grid import Field, Grid

logger = logging.getLogger(__name__)

Replicates = Union[np.ndarray, Sequence[Field]]


@dataclass(frozen=True)
class ThresholdPolicy:
    """``quantile`` of the conditioning statistic, or ``power``: ``a_n = n^rho``."""

    kind: str
    value: float

    def __post_init__(self):
        if self.kind not in ("quantile", "power"):
            raise ValueError(f"unknown threshold policy {self.kind!r}")
        if not 0 < self.value < 1:
            raise ValueError(f"{self.kind} parameter must lie in (0, 1), got {self.value}")

    @classmethod
    def parse(cls, text: str) -> "ThresholdPolicy":
        kind, _, val = text.partition(":")
        if not val:
            raise ValueError(f"threshold policy {text!r} should look like quantile:0.95 or power:0.5")
        return cls(kind.strip(), float(val))

    def spec(self) -> str:
        return f"{self.kind}:{self.value!r}"


def choose_threshold(stats, policy: ThresholdPolicy) -> float:
    """Threshold ``a_n`` for ``stats`` (the conditioning statistic, one per replicate).

    ``stats`` may be a plain replicate count for the power policy.
    """
    if policy.kind == "power":
        n = int(stats) if np.ndim(stats) == 0 else len(stats)
        if n < 1:
            raise ValueError("need at least one replicate")
        return float(n) ** policy.value
    s = np.asarray(stats, float).ravel()
    if s.size == 0:
        raise ValueError("need at least one replicate")
    return float(np.quantile(s, policy.value))


@dataclass
class ExtremeEventSet:
    """Normalised extreme events: increments ``eta / eta(t0)`` or shifted shape profiles.

    ``samples`` has shape ``(m, *grid.shape)`` where ``grid`` is the sample
    window (the full grid for increments, the offset window K for shapes,
    the point list index for discrete shapes).
    """

    kind: str
    grid: Grid
    samples: np.ndarray
    exceedances: np.ndarray
    selection: np.ndarray
    threshold: float
    anchor: dict = field(default_factory=dict)
    dropped: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("increments", "shapes", "shapes-discrete"):
            raise ValueError(f"unknown event kind {self.kind!r}")
        self.samples = np.asarray(self.samples, float)
        self.exceedances = np.asarray(self.exceedances, float)
        self.selection = np.asarray(self.selection, dtype=np.int64)

    def __len__(self) -> int:
        return int(self.samples.shape[0])

    @property
    def fields(self) -> list[Field]:
        k = "profile" if self.kind != "increments" else "field"
        return [Field(self.grid, s, kind=k) for s in self.samples]


def as_array(replicates: Replicates, grid: Grid | None = None) -> tuple[np.ndarray, Grid]:
    """Stack replicates into an ``(n, *grid.shape)`` array."""
    if isinstance(replicates, np.ndarray):
        if grid is None:
            raise ValueError("a grid is required for array input")
        arr = replicates.reshape((-1,) + grid.shape)
        return arr.astype(float, copy=False), grid
    reps = list(replicates)
    if not reps:
        raise ValueError("no replicates")
    g = grid or reps[0].grid
    if any(r.grid != g for r in reps):
        raise ValueError("replicates live on different grids")
    return np.stack([r.values for r in reps]), g


def extract_increments(replicates: Replicates, t0, threshold: float,
                       grid: Grid | None = None) -> ExtremeEventSet:
    """Replicates with ``eta(t0) > threshold``, divided by ``eta(t0)``."""
    arr, grid = as_array(replicates, grid)
    idx0 = grid.index_of(t0)
    at0 = arr[(slice(None),) + idx0]
    sel = np.flatnonzero(at0 > threshold)
    zero = sel[at0[sel] <= 0]
    if zero.size:
        logger.warning("%d selected replicates vanish at t0 and are excluded", zero.size)
        sel = sel[at0[sel] > 0]
    denom = at0[sel].reshape((-1,) + (1,) * grid.ndim)
    samples = arr[sel] / denom
    return ExtremeEventSet("increments", grid, samples, at0[sel] / threshold, sel, float(threshold),
                           anchor={"t0": [float(x) for x in np.atleast_1d(t0)]},
                           dropped={"zero_at_t0": int(zero.size)})


def argmax_lexicographic(f, region: Grid | None = None, grid: Grid | None = None) -> tuple:
    """Lexicographically smallest maximiser of a field over ``region`` (default: whole grid).

    Row-major order agrees with lexicographic order, so the first maximiser
    found by :func:`numpy.argmax` is the one wanted.
    """
    if isinstance(f, Field):
        grid, values = f.grid, f.values
    else:
        values = np.asarray(f, float).reshape(grid.shape)
    if region is None:
        region = grid
    sub = values[grid.slices_for(region)]
    k = np.unravel_index(int(np.argmax(sub)), sub.shape)
    return tuple(float(ax[i]) for ax, i in zip(region.axes, k))


def _box_slices(grid: Grid, lo, hi) -> tuple[Grid, tuple[slice, ...]]:
    sub = grid.subgrid(lo, hi)
    return sub, grid.slices_for(sub)


def extract_shapes(replicates: Replicates, Q, L, K: Grid, threshold: float,
                   grid: Grid | None = None) -> ExtremeEventSet:
    """Single-storm profiles normalised at their maximum.

    ``Q`` is a box ``(lo, hi)`` (or a subgrid), ``L`` the margin of the
    enlarged box ``Q + L`` and ``K`` the window of offsets to keep.  A
    replicate is selected when its maximum over ``Q`` equals its maximum over
    ``Q + L`` and is at least ``threshold``; the sample is
    ``eta(tau + .) / eta(tau)`` on ``K`` with ``tau`` the lexicographic argmax
    over ``Q``.  Replicates for which ``tau + K`` leaves the grid are dropped.
    """
    arr, grid = as_array(replicates, grid)
    n = arr.shape[0]
    qlo, qhi = (Q.lo, Q.hi) if isinstance(Q, Grid) else Q
    qlo = np.broadcast_to(np.asarray(qlo, float), (grid.ndim,))
    qhi = np.broadcast_to(np.asarray(qhi, float), (grid.ndim,))
    m = np.broadcast_to(np.asarray(L, float), (grid.ndim,))
    if np.any(m < 0):
        raise ValueError("dilation margin L must be nonnegative")
    big_lo, big_hi = qlo - m, qhi + m
    if np.any(big_lo < np.asarray(grid.lo) - 1e-9) or np.any(big_hi > np.asarray(grid.hi) + 1e-9):
        raise ValueError("Q + L does not fit inside the grid")
    qgrid, qsl = _box_slices(grid, qlo, qhi)
    _, bsl = _box_slices(grid, big_lo, big_hi)
    if K.step != grid.step:
        raise ValueError("output window K must share the grid step")
    k0 = np.asarray(grid.offsets_of(K.lo))
    kshape = np.asarray(K.shape)

    flat_q = arr[(slice(None),) + qsl].reshape(n, -1)
    max_q = flat_q.max(axis=1)
    max_big = arr[(slice(None),) + bsl].reshape(n, -1).max(axis=1)
    sel = np.flatnonzero((max_q == max_big) & (max_q >= threshold))

    qstart = np.asarray(grid.index_of(qgrid.lo))
    gshape = np.asarray(grid.shape)
    keep, samples = [], []
    for i in sel:
        tau = qstart + np.asarray(np.unravel_index(int(np.argmax(flat_q[i])), qgrid.shape))
        start = tau + k0
        if np.any(start < 0) or np.any(start + kshape > gshape):
            continue
        window = arr[(i,) + tuple(slice(a, a + b) for a, b in zip(start, kshape))]
        samples.append(window / arr[(i,) + tuple(tau)])
        keep.append(i)
    n_drop = sel.size - len(keep)
    if n_drop:
        logger.info("dropped %d replicates whose window tau + K leaves the grid", n_drop)
    keep = np.asarray(keep, dtype=np.int64)
    samples = np.stack(samples) if samples else np.empty((0,) + K.shape)
    return ExtremeEventSet("shapes", K, samples, max_q[keep] / threshold, keep, float(threshold),
                           anchor={"Q": [qlo.tolist(), qhi.tolist()], "L": m.tolist(), "K": K.spec()},
                           dropped={"window_outside_grid": int(n_drop)})


def extract_shapes_discrete(replicates: Replicates, t0, L, points, threshold: float,
                            grid: Grid | None = None) -> ExtremeEventSet:
    """Ratio vectors ``eta(t0 + t_j) / eta(t0)`` given that ``t0`` is the maximum over ``t0 + L``.

    ``L`` is an integer radius (a box of lattice offsets) and ``points`` the
    offsets ``t_1 .. t_k``.
    """
    arr, grid = as_array(replicates, grid)
    n = arr.shape[0]
    i0 = np.asarray(grid.index_of(t0))
    rad = np.broadcast_to(np.asarray(L, dtype=np.int64), (grid.ndim,))
    lo, hi = i0 - rad, i0 + rad + 1
    if np.any(lo < 0) or np.any(hi > np.asarray(grid.shape)):
        raise ValueError("t0 + L does not fit inside the grid")
    pts = np.atleast_2d(np.asarray(points, float))
    if pts.shape[1] != grid.ndim:
        pts = pts.reshape(-1, grid.ndim)
    offs = np.array([grid.offsets_of(p) for p in pts], dtype=np.int64)
    tgt = i0 + offs
    if np.any(tgt < 0) or np.any(tgt >= np.asarray(grid.shape)):
        raise ValueError("some t0 + t_j lies outside the grid")
    at0 = arr[(slice(None),) + tuple(i0)]
    local = arr[(slice(None),) + tuple(slice(a, b) for a, b in zip(lo, hi))].reshape(n, -1).max(axis=1)
    sel = np.flatnonzero((at0 == local) & (at0 >= threshold) & (at0 > 0))
    vals = arr[(sel[:, None],) + tuple(tgt[:, d][None, :] for d in range(grid.ndim))]
    samples = vals / at0[sel, None]
    k = len(offs)
    return ExtremeEventSet("shapes-discrete", Grid((0.0,), (float(k - 1),), (1.0,)), samples,
                           at0[sel] / threshold, sel, float(threshold),
                           anchor={"t0": i0.tolist(), "L": rad.tolist(), "points": pts.tolist()})
