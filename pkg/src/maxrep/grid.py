"""Regular lattices and fields sampled on them."""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Regular lattice ``lo + i * step`` in one or two (or more) dimensions.

    Points are ordered row-major, which coincides with the lexicographic
    order of their coordinates.
    """

    lo: tuple[float, ...]
    hi: tuple[float, ...]
    step: tuple[float, ...]

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lo))
        hi = tuple(float(v) for v in np.atleast_1d(self.hi))
        step = tuple(float(v) for v in np.atleast_1d(self.step))
        if not (len(lo) == len(hi) == len(step)) or len(lo) == 0:
            raise ValueError("lo, hi and step must have the same, nonzero length")
        for a, b, s in zip(lo, hi, step):
            if not s > 0:
                raise ValueError(f"grid step must be positive, got {s}")
            if b < a:
                raise ValueError(f"grid upper bound {b} below lower bound {a}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "step", step)

    @classmethod
    def parse(cls, spec: str) -> "Grid":
        """Parse ``min:max:step`` per dimension, dimensions joined by ``;``."""
        lo, hi, step = [], [], []
        for part in spec.split(";"):
            bits = part.strip().split(":")
            if len(bits) != 3:
                raise ValueError(f"bad grid dimension {part!r}, expected min:max:step")
            a, b, s = (float(x) for x in bits)
            lo.append(a)
            hi.append(b)
            step.append(s)
        return cls(tuple(lo), tuple(hi), tuple(step))

    @classmethod
    def centered(cls, half_width, step, ndim: int = 1) -> "Grid":
        hw = np.broadcast_to(np.asarray(half_width, float), (ndim,))
        st = np.broadcast_to(np.asarray(step, float), (ndim,))
        return cls(tuple(-hw), tuple(hw), tuple(st))

    def spec(self) -> str:
        return ";".join(f"{a!r}:{b!r}:{s!r}" for a, b, s in zip(self.lo, self.hi, self.step))

    @property
    def ndim(self) -> int:
        return len(self.lo)

    @cached_property
    def shape(self) -> tuple[int, ...]:
        return tuple(int(round((b - a) / s)) + 1 for a, b, s in zip(self.lo, self.hi, self.step))

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @cached_property
    def axes(self) -> tuple[np.ndarray, ...]:
        return tuple(a + s * np.arange(n) for a, s, n in zip(self.lo, self.step, self.shape))

    @cached_property
    def points(self) -> np.ndarray:
        """All lattice points, shape ``(size, ndim)``, row-major."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.step))

    @property
    def volume(self) -> float:
        return float(np.prod([b - a for a, b in zip(self.lo, self.hi)]))

    @cached_property
    def trapezoid_weights(self) -> np.ndarray:
        """Tensor-product trapezoid weights (cell volume, halved per boundary axis)."""
        w = np.ones(self.shape)
        for ax, n in enumerate(self.shape):
            if n == 1:
                continue
            sl = [slice(None)] * self.ndim
            for end in (0, n - 1):
                sl[ax] = end
                w[tuple(sl)] *= 0.5
        return w * self.cell_volume

    def index_of(self, point, atol: float = 1e-9) -> tuple[int, ...]:
        """Multi-index of a lattice point; raises if the point is off-lattice."""
        p = np.atleast_1d(np.asarray(point, float))
        if p.shape != (self.ndim,):
            raise ValueError(f"point of dimension {p.shape} on a {self.ndim}-d grid")
        idx = []
        for x, a, s, n in zip(p, self.lo, self.step, self.shape):
            r = (x - a) / s
            i = int(round(r))
            if abs(r - i) > atol or not 0 <= i < n:
                raise ValueError(f"point {tuple(p)} is not on the grid")
            idx.append(i)
        return tuple(idx)

    def flat_index_of(self, point) -> int:
        return int(np.ravel_multi_index(self.index_of(point), self.shape))

    def contains(self, point) -> bool:
        try:
            self.index_of(point)
        except ValueError:
            return False
        return True

    def offsets_of(self, lag, atol: float = 1e-9) -> tuple[int, ...]:
        """Integer lattice offset of a lag vector; raises if off-lattice."""
        h = np.atleast_1d(np.asarray(lag, float))
        if h.shape != (self.ndim,):
            raise ValueError(f"lag of dimension {h.shape} on a {self.ndim}-d grid")
        out = []
        for x, s in zip(h, self.step):
            r = x / s
            i = int(round(r))
            if abs(r - i) > atol:
                raise ValueError(f"lag {tuple(h)} is not a lattice vector")
            out.append(i)
        return tuple(out)

    def box_mask(self, lo, hi, atol: float = 1e-9) -> np.ndarray:
        """Boolean mask of lattice points inside the closed box ``[lo, hi]``."""
        lo = np.broadcast_to(np.asarray(lo, float), (self.ndim,))
        hi = np.broadcast_to(np.asarray(hi, float), (self.ndim,))
        masks = [(ax >= a - atol) & (ax <= b + atol) for ax, a, b in zip(self.axes, lo, hi)]
        out = masks[0]
        for m in masks[1:]:
            out = np.multiply.outer(out, m)
        return out.reshape(self.shape)

    def subgrid(self, lo, hi) -> "Grid":
        """Lattice points of this grid inside the box ``[lo, hi]``, as a grid."""
        lo = np.broadcast_to(np.asarray(lo, float), (self.ndim,))
        hi = np.broadcast_to(np.asarray(hi, float), (self.ndim,))
        new_lo, new_hi = [], []
        for ax, a, b in zip(self.axes, lo, hi):
            inside = ax[(ax >= a - 1e-9) & (ax <= b + 1e-9)]
            if inside.size == 0:
                raise ValueError("box contains no lattice point")
            new_lo.append(inside[0])
            new_hi.append(inside[-1])
        return Grid(tuple(new_lo), tuple(new_hi), self.step)

    def slices_for(self, sub: "Grid") -> tuple[slice, ...]:
        """Index slices selecting ``sub`` (a lattice-aligned subgrid) inside this grid."""
        start = self.index_of(sub.lo)
        return tuple(slice(i, i + n) for i, n in zip(start, sub.shape))

    def expand(self, margin) -> tuple[np.ndarray, np.ndarray]:
        """Bounding box of the grid enlarged by ``margin`` on every side."""
        m = np.broadcast_to(np.asarray(margin, float), (self.ndim,))
        return np.asarray(self.lo) - m, np.asarray(self.hi) + m


@dataclass
class Field:
    """Real values sampled on a :class:`Grid`."""

    grid: Grid
    values: np.ndarray
    kind: str = "field"
    meta: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(self.grid.shape)

    def at(self, point) -> float:
        return float(self.values[self.grid.index_of(point)])

    def integral(self) -> float:
        return grid_integral(self)


def grid_integral(field: Field) -> float:
    """Trapezoid-rule integral of a field over its grid."""
    if field.grid.size == 0 or field.values.size == 0:
        raise ValueError("cannot integrate over an empty grid")
    return float(np.sum(field.values * field.grid.trapezoid_weights))
