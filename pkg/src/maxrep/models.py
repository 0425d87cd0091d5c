"""Variogram and shape-function families, Gaussian field simulation."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import quad
from scipy.linalg import cholesky, LinAlgError
from scipy.optimize import brentq
from scipy.ndimage import map_coordinates
from scipy.special import gammaln

from .core import RngLike, as_generator
from .grid import Field, Grid, grid_integral

logger = logging.getLogger(__name__)


class ModelSyntaxError(ValueError):
    """A model string could not be parsed; ``position`` is the offending offset."""

    def __init__(self, message: str, text: str, position: int):
        super().__init__(f"{message} at position {position}: {text!r}")
        self.text = text
        self.position = position


def parse_model_string(text: str) -> tuple[str, dict]:
    """Split ``"name:key=value,key=value"`` into a name and a parameter dict.

    Values are numbers or JSON arrays (``sigma=[[1,0],[0,1]]``).
    """
    name, sep, rest = text.partition(":")
    name = name.strip().lower()
    if not name:
        raise ModelSyntaxError("missing model name", text, 0)
    params = {}
    if not sep:
        return name, params
    pos = len(name) + 1
    i = 0
    while i < len(rest):
        eq = rest.find("=", i)
        if eq < 0:
            raise ModelSyntaxError("expected key=value", text, pos + i)
        key = rest[i:eq].strip()
        if not key.isidentifier():
            raise ModelSyntaxError(f"bad parameter name {key!r}", text, pos + i)
        j = eq + 1
        depth = 0
        while j < len(rest):
            ch = rest[j]
            if ch == "[":
                depth += 1
            elif ch == "]":
                depth -= 1
                if depth < 0:
                    raise ModelSyntaxError("unbalanced ']'", text, pos + j)
            elif ch == "," and depth == 0:
                break
            j += 1
        if depth != 0:
            raise ModelSyntaxError("unbalanced '['", text, pos + eq + 1)
        raw = rest[eq + 1:j].strip()
        try:
            params[key] = json.loads(raw)
        except json.JSONDecodeError:
            raise ModelSyntaxError(f"bad value for {key!r}", text, pos + eq + 1) from None
        i = j + 1
    return name, params


def _points(x, ndim: int) -> np.ndarray:
    """Coerce positions to shape ``(..., ndim)``."""
    x = np.asarray(x, float)
    if ndim == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        return x[..., None]
    if x.shape[-1:] != (ndim,):
        raise ValueError(f"expected points with trailing dimension {ndim}, got shape {x.shape}")
    return x


def _check_spd(sigma: np.ndarray) -> np.ndarray:
    sigma = np.atleast_2d(np.asarray(sigma, float))
    if sigma.shape[0] != sigma.shape[1] or not np.allclose(sigma, sigma.T):
        raise ValueError("sigma must be a symmetric square matrix")
    try:
        cholesky(sigma, lower=True)
    except LinAlgError:
        raise ValueError("sigma must be positive definite") from None
    return sigma


# -- variograms ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class VariogramModel:
    """``fbm``: ``(|h| / scale) ** alpha``; ``smith``: ``h' sigma^-1 h``."""

    kind: str
    alpha: float = 1.0
    scale: float = 1.0
    sigma: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind == "fbm":
            if not 0 < self.alpha <= 2:
                raise ValueError("fbm exponent must lie in (0, 2]")
            if not self.scale > 0:
                raise ValueError("fbm scale must be positive")
        elif self.kind == "smith":
            if self.sigma is None:
                raise ValueError("smith variogram needs sigma")
            s = _check_spd(self.sigma)
            object.__setattr__(self, "sigma", s)
            object.__setattr__(self, "_prec", np.linalg.inv(s))
        else:
            raise ValueError(f"unknown variogram kind {self.kind!r}")

    @classmethod
    def fbm(cls, alpha: float = 1.0, scale: float = 1.0) -> "VariogramModel":
        return cls("fbm", alpha=float(alpha), scale=float(scale))

    @classmethod
    def smith(cls, sigma) -> "VariogramModel":
        return cls("smith", sigma=np.atleast_2d(np.asarray(sigma, float)))

    @classmethod
    def parse(cls, text: str) -> "VariogramModel":
        name, p = parse_model_string(text)
        allowed = {"fbm": {"alpha", "scale"}, "smith": {"sigma"}}
        if name not in allowed:
            raise ModelSyntaxError(f"unknown variogram {name!r}", text, 0)
        _extra(p, allowed[name], text)
        try:
            if name == "fbm":
                return cls.fbm(p.get("alpha", 1.0), p.get("scale", 1.0))
            return cls.smith(p.get("sigma", [[1.0]]))
        except (TypeError, ValueError) as e:
            raise ModelSyntaxError(str(e), text, len(name) + 1) from None

    def spec(self) -> str:
        if self.kind == "fbm":
            return f"fbm:alpha={self.alpha!r},scale={self.scale!r}"
        return f"smith:sigma={json.dumps(self.sigma.tolist())}"

    @property
    def ndim(self) -> Optional[int]:
        return None if self.kind == "fbm" else self.sigma.shape[0]

    def __call__(self, h, ndim: Optional[int] = None) -> np.ndarray:
        d = self.ndim or ndim or (np.asarray(h).shape[-1] if np.ndim(h) > 1 else 1)
        h = _points(h, d)
        if self.kind == "fbm":
            r = np.sqrt(np.sum(h * h, axis=-1))
            return (r / self.scale) ** self.alpha
        return np.einsum("...i,ij,...j->...", h, self._prec, h)


def _extra(params: dict, allowed: set, text: str) -> None:
    bad = set(params) - allowed
    if bad:
        k = sorted(bad)[0]
        raise ModelSyntaxError(f"unexpected parameter {k!r}", text, text.find(k))


def variogram_eval(model: VariogramModel, h) -> float | np.ndarray:
    out = model(h)
    return float(out) if np.ndim(out) == 0 else out


def cov_from_variogram(model: VariogramModel, grid: Grid, t0) -> np.ndarray:
    """Covariance of the intrinsic Gaussian field with ``Y(t0) = 0`` on ``grid``."""
    grid.index_of(t0)
    pts = grid.points
    t0 = np.asarray(t0, float).reshape(1, -1)
    g0 = model(pts - t0, grid.ndim)
    gst = model(pts[:, None, :] - pts[None, :, :], grid.ndim)
    c = 0.5 * (g0[:, None] + g0[None, :] - gst)
    return 0.5 * (c + c.T)


# -- Gaussian fields ----------------------------------------------------------

JITTER_LADDER = (0.0, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8)


def cholesky_with_jitter(cov: np.ndarray) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor, adding diagonal jitter from 1e-12 up to 1e-8 if needed."""
    cov = np.asarray(cov, float)
    n = cov.shape[0]
    for jitter in JITTER_LADDER:
        try:
            L = cholesky(cov + jitter * np.eye(n), lower=True)
        except LinAlgError:
            continue
        if jitter:
            logger.info("Cholesky needed diagonal jitter %.0e", jitter)
        return L, jitter
    raise LinAlgError(f"covariance not positive semidefinite within jitter {JITTER_LADDER[-1]:.0e}")


class GaussianFieldSampler:
    """Zero-mean Gaussian vectors with a fixed covariance.

    Coordinates with exactly zero variance (e.g. the anchor of an intrinsic
    field) are held at zero and excluded from the factorisation.
    """

    def __init__(self, cov):
        cov = np.asarray(cov, float)
        if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
            raise ValueError("covariance must be a square matrix")
        self.n = cov.shape[0]
        self.active = np.flatnonzero(np.diag(cov) != 0.0)
        if self.active.size:
            sub = cov[np.ix_(self.active, self.active)]
            self.chol, self.jitter = cholesky_with_jitter(sub)
        else:
            self.chol, self.jitter = np.zeros((0, 0)), 0.0

    def sample(self, gen: np.random.Generator, size: int) -> np.ndarray:
        out = np.zeros((size, self.n))
        if self.active.size:
            z = gen.standard_normal((size, self.active.size))
            out[:, self.active] = z @ self.chol.T
        return out


def simulate_gaussian_field(cov, rng: RngLike, grid: Optional[Grid] = None):
    """One zero-mean Gaussian sample with covariance ``cov``; a Field if ``grid`` given."""
    values = GaussianFieldSampler(cov).sample(as_generator(rng), 1)[0]
    if grid is None:
        return values
    return Field(grid, values)


# -- shape functions ----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ShapeModel:
    """A storm profile normalised to unit integral.

    ``profile`` is the peak-one version ``F1 = F / lam``; ``__call__``
    evaluates ``F`` itself.  Parametric families are isotropic in ``beta``
    (the Gaussian family also accepts a covariance ``sigma``); tabulated
    shapes interpolate multilinearly and vanish off their grid.
    """

    family: str
    ndim: int = 1
    beta: float = 1.0
    nu: Optional[float] = None
    sigma: Optional[np.ndarray] = None
    grid: Optional[Grid] = None
    values: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        fam = self.family
        if fam in ("gaussian", "exponential", "student"):
            if self.sigma is not None:
                if fam != "gaussian":
                    raise ValueError("only the gaussian family takes sigma")
                s = _check_spd(self.sigma)
                object.__setattr__(self, "sigma", s)
                object.__setattr__(self, "ndim", s.shape[0])
                object.__setattr__(self, "_prec", np.linalg.inv(s))
            elif not self.beta > 0:
                raise ValueError("beta must be positive")
            if fam == "student":
                if self.nu is None or not self.nu > 0:
                    raise ValueError("student shape needs nu > 0")
                if not self.nu + 1 > self.ndim:
                    raise ValueError("student shape is not integrable unless nu + 1 > ndim")
        elif fam == "tabulated":
            if self.grid is None or self.values is None:
                raise ValueError("tabulated shape needs grid and values")
            vals = np.asarray(self.values, float).reshape(self.grid.shape)
            if np.any(vals < 0) or not np.all(np.isfinite(vals)):
                raise ValueError("tabulated shape values must be finite and nonnegative")
            total = grid_integral(Field(self.grid, vals))
            if not total > 0:
                raise ValueError("tabulated shape has zero integral")
            object.__setattr__(self, "values", vals)
            object.__setattr__(self, "ndim", self.grid.ndim)
            object.__setattr__(self, "_total", total)
        else:
            raise ValueError(f"unknown shape family {fam!r}")

    # constructors
    @classmethod
    def gaussian(cls, beta: float = 1.0, ndim: int = 1) -> "ShapeModel":
        return cls("gaussian", ndim=ndim, beta=float(beta))

    @classmethod
    def gaussian_cov(cls, sigma) -> "ShapeModel":
        return cls("gaussian", sigma=np.atleast_2d(np.asarray(sigma, float)))

    @classmethod
    def exponential(cls, beta: float = 1.0, ndim: int = 1) -> "ShapeModel":
        return cls("exponential", ndim=ndim, beta=float(beta))

    @classmethod
    def student(cls, beta: float, nu: float, ndim: int = 1) -> "ShapeModel":
        return cls("student", ndim=ndim, beta=float(beta), nu=float(nu))

    @classmethod
    def tabulated(cls, grid: Grid, values) -> "ShapeModel":
        return cls("tabulated", grid=grid, values=np.asarray(values, float))

    @classmethod
    def parse(cls, text: str, ndim: int = 1) -> "ShapeModel":
        name, p = parse_model_string(text)
        allowed = {"gaussian": {"beta", "sigma", "ndim"}, "exponential": {"beta", "ndim"},
                   "student": {"beta", "nu", "ndim"}}
        if name not in allowed:
            raise ModelSyntaxError(f"unknown shape family {name!r}", text, 0)
        _extra(p, allowed[name], text)
        try:
            d = int(p.get("ndim", ndim))
            if name == "gaussian" and "sigma" in p:
                return cls.gaussian_cov(p["sigma"])
            if name == "student":
                if "nu" not in p:
                    raise ValueError("student shape needs nu")
                return cls.student(p.get("beta", 1.0), p["nu"], d)
            return cls(name, ndim=d, beta=float(p.get("beta", 1.0)))
        except (TypeError, ValueError) as e:
            raise ModelSyntaxError(str(e), text, len(name) + 1) from None

    def spec(self) -> str:
        if self.family == "tabulated":
            return "tabulated"
        if self.sigma is not None:
            return f"gaussian:sigma={json.dumps(self.sigma.tolist())}"
        s = f"{self.family}:beta={self.beta!r}"
        if self.nu is not None:
            s += f",nu={self.nu!r}"
        if self.ndim != 1:
            s += f",ndim={self.ndim}"
        return s

    # evaluation
    def _raw(self, x: np.ndarray) -> np.ndarray:
        """Peak-one profile for parametric families, raw values for tabulated ones."""
        if self.family == "tabulated":
            g = self.grid
            coords = [(x[..., k] - g.lo[k]) / g.step[k] for k in range(g.ndim)]
            flat = np.stack([c.ravel() for c in coords])
            out = map_coordinates(self.values, flat, order=1, mode="constant", cval=0.0,
                                  prefilter=False)
            return out.reshape(x.shape[:-1])
        if self.sigma is not None:
            q = np.einsum("...i,ij,...j->...", x, self._prec, x)
            return np.exp(-0.5 * q)
        r2 = np.sum(x * x, axis=-1)
        b = self.beta
        if self.family == "gaussian":
            return np.exp(-0.5 * b * b * r2)
        if self.family == "exponential":
            return np.exp(-b * np.sqrt(r2))
        return (1.0 + b * b * r2 / self.nu) ** (-(self.nu + 1.0) / 2.0)

    @property
    def profile_integral(self) -> float:
        """Integral of the peak-one profile ``F1`` (equals ``1 / lam``)."""
        d = self.ndim
        if self.family == "tabulated":
            return self._total / self._raw_at_origin
        if self.sigma is not None:
            return float((2 * math.pi) ** (d / 2) * math.sqrt(np.linalg.det(self.sigma)))
        b = self.beta
        if self.family == "gaussian":
            return (math.sqrt(2 * math.pi) / b) ** d
        if self.family == "exponential":
            return float(2 * math.pi ** (d / 2) * math.exp(math.lgamma(d) - math.lgamma(d / 2)) / b ** d)
        nu = self.nu
        return float((math.sqrt(nu) / b) ** d * math.pi ** (d / 2)
                     * math.exp(gammaln((nu + 1 - d) / 2) - gammaln((nu + 1) / 2)))

    @property
    def _raw_at_origin(self) -> float:
        return float(self._raw(np.zeros((1, self.ndim)))[0])

    @property
    def lam(self) -> float:
        """``F(0)`` of the unit-integral shape."""
        if self.family == "tabulated":
            return self._raw_at_origin / self._total
        return 1.0 / self.profile_integral

    @property
    def sup(self) -> float:
        """Upper bound of ``F`` over all of space."""
        if self.family == "tabulated":
            return float(self.values.max()) / self._total
        return self.lam

    def profile(self, t) -> np.ndarray:
        x = _points(t, self.ndim)
        if self.family == "tabulated":
            return self._raw(x) / self._raw_at_origin
        return self._raw(x)

    def __call__(self, t) -> np.ndarray:
        x = _points(t, self.ndim)
        if self.family == "tabulated":
            return self._raw(x) / self._total
        return self._raw(x) * self.lam

    def default_support(self, tail: float = 1e-10) -> float:
        """Radius beyond which the profile drops below ``tail``."""
        if self.family == "tabulated":
            return float(max(max(abs(a), abs(b)) for a, b in zip(self.grid.lo, self.grid.hi)))
        if self.sigma is not None:
            return float(math.sqrt(-2 * math.log(tail) * np.max(np.linalg.eigvalsh(self.sigma))))
        b = self.beta
        if self.family == "gaussian":
            return math.sqrt(-2 * math.log(tail)) / b
        if self.family == "exponential":
            return -math.log(tail) / b
        return math.sqrt(self.nu * (tail ** (-2 / (self.nu + 1)) - 1)) / b


def shape_eval(model: ShapeModel, t):
    out = model(t)
    return float(out) if np.ndim(out) == 0 else out


def shape_lambda(model: ShapeModel) -> float:
    return model.lam


def shape_total_integral(model: ShapeModel) -> float:
    """Integral of the peak-one profile over the whole space."""
    return model.profile_integral


@dataclass
class ShapeReport:
    ok: bool
    maxima: list
    tail_mass: float
    sup_integral: float
    message: str = ""


def validate_shape(model: ShapeModel, window: Grid, radius: float, K=None) -> ShapeReport:
    """Check the unique-peak condition on ``window`` and measure the tail mass.

    ``tail_mass`` is the integral over the window of ``sup_{k in K} F(k - s)``
    restricted to ``|s| > radius`` (``K`` defaults to the origin alone);
    ``sup_integral`` is the same integral over the whole window.
    """
    if not window.contains(np.zeros(window.ndim)):
        raise ValueError("validation window must contain the origin")
    pts = window.points
    vals = model(pts)
    top = vals.max()
    at_max = np.flatnonzero(vals == top)
    maxima = [tuple(float(c) for c in pts[i]) for i in at_max]
    origin = window.flat_index_of(np.zeros(window.ndim))
    unique = at_max.size == 1 and at_max[0] == origin

    K = np.zeros((1, window.ndim)) if K is None else _points(K, window.ndim).reshape(-1, window.ndim)
    sup_vals = np.max(np.stack([model(k[None, :] - pts) for k in K]), axis=0)
    outside = np.sqrt(np.sum(pts * pts, axis=1)) > radius
    w = window.trapezoid_weights.ravel()
    tail = float(np.sum(sup_vals * w * outside))
    total = float(np.sum(sup_vals * w))
    ok = unique and np.isfinite(total)
    if unique:
        msg = "unique maximum at the origin"
    else:
        msg = f"maximum {top:.6g} not uniquely attained at the origin; maxima at {maxima}"
    return ShapeReport(ok, maxima, tail, total, msg)


def radial_tail_mass(model: ShapeModel, radius: float) -> float:
    """Mass of the unit-integral shape outside the ball of the given radius."""
    d = model.ndim
    if model.family == "tabulated":
        pts = model.grid.points
        w = model.grid.trapezoid_weights.ravel()
        out = np.sqrt(np.sum(pts * pts, axis=1)) > radius
        return float(np.sum(model(pts) * w * out))
    if model.sigma is not None:
        # isotropic majorant with the largest axis of sigma
        iso = ShapeModel.gaussian(1.0 / math.sqrt(np.max(np.linalg.eigvalsh(model.sigma))), d)
        return radial_tail_mass(iso, radius)
    area = 2 * math.pi ** (d / 2) / math.gamma(d / 2)

    def integrand(r):
        return model(np.full(d, 0.0) + np.eye(d)[0] * r) * area * r ** (d - 1)

    val, _ = quad(lambda r: float(integrand(r)), radius, np.inf, limit=200)
    return float(val)


def choose_margin(model: ShapeModel, tol: float = 1e-4) -> float:
    """Smallest radius whose exterior carries shape mass below ``tol``.

    Storms centred further away contribute less than ``tol`` to the expected
    supremum at any grid point.
    """
    if model.family == "tabulated":
        return model.default_support()
    hi = model.default_support(1e-3)
    while radial_tail_mass(model, hi) > tol:
        hi *= 2
    if radial_tail_mass(model, 0.0) <= tol:
        return 0.0
    return float(brentq(lambda r: radial_tail_mass(model, r) - tol, 0.0, hi, xtol=1e-6))


# -- shape distributions ------------------------------------------------------


class ShapeDistribution:
    """A finite mixture of shapes; atom ``j`` is drawn with probability ``weights[j]``.

    Subclasses only need to evaluate their components at offsets.
    """

    ndim: int
    weights: np.ndarray

    @property
    def n_components(self) -> int:
        return len(self.weights)

    def draw(self, gen: np.random.Generator, size: int) -> np.ndarray:
        if self.n_components == 1:
            return np.zeros(size, dtype=np.int64)
        cdf = np.cumsum(self.weights)
        cdf /= cdf[-1]
        return np.minimum(np.searchsorted(cdf, gen.random(size), side="right"),
                          self.n_components - 1)

    def evaluate(self, components: np.ndarray, offsets: np.ndarray) -> np.ndarray:
        """``F_j(x)`` for ``offsets`` of shape ``(m, ..., ndim)``, one component per row."""
        raise NotImplementedError

    @property
    def sup(self) -> float:
        raise NotImplementedError

    def mean_integral(self) -> float:
        raise NotImplementedError


class FixedShape(ShapeDistribution):
    def __init__(self, shape: ShapeModel):
        self.shape = shape
        self.ndim = shape.ndim
        self.weights = np.ones(1)

    def evaluate(self, components, offsets):
        return self.shape(offsets)

    @property
    def sup(self) -> float:
        return self.shape.sup

    def mean_integral(self) -> float:
        return 1.0

    def component(self, j: int) -> ShapeModel:
        return self.shape


class ShapeMixture(ShapeDistribution):
    """Random choice among unit-integral shapes."""

    def __init__(self, shapes, probs=None):
        self.shapes = list(shapes)
        if not self.shapes:
            raise ValueError("empty shape mixture")
        self.ndim = self.shapes[0].ndim
        if any(s.ndim != self.ndim for s in self.shapes):
            raise ValueError("mixed dimensions in shape mixture")
        p = np.ones(len(self.shapes)) if probs is None else np.asarray(probs, float)
        if np.any(p < 0) or not p.sum() > 0:
            raise ValueError("mixture probabilities must be nonnegative")
        self.weights = p / p.sum()

    def evaluate(self, components, offsets):
        out = np.empty(offsets.shape[:-1])
        for j in np.unique(components):
            rows = components == j
            out[rows] = self.shapes[j](offsets[rows])
        return out

    @property
    def sup(self) -> float:
        return max(s.sup for s in self.shapes)

    def mean_integral(self) -> float:
        return 1.0

    def component(self, j: int) -> ShapeModel:
        return self.shapes[j]


class TabulatedShapes(ShapeDistribution):
    """Weighted stack of tabulated profiles on a common offset grid, scaled by ``scale``.

    Component ``j`` evaluates to ``scale * profiles[j](x)``; this is how an
    estimated shape law (profiles with size-biasing weights) is resimulated.
    """

    def __init__(self, grid: Grid, profiles, weights=None, scale: float = 1.0):
        self.grid = grid
        self.profiles = np.asarray(profiles, float).reshape((-1,) + grid.shape)
        if np.any(self.profiles < 0):
            raise ValueError("profiles must be nonnegative")
        m = self.profiles.shape[0]
        w = np.ones(m) if weights is None else np.asarray(weights, float)
        if w.shape != (m,) or np.any(w < 0) or not w.sum() > 0:
            raise ValueError("need one nonnegative weight per profile")
        self.weights = w / w.sum()
        self.scale = float(scale)
        self.ndim = grid.ndim

    def evaluate(self, components, offsets):
        g = self.grid
        lead = offsets.shape[:-1]
        comp = np.broadcast_to(np.asarray(components).reshape((-1,) + (1,) * (len(lead) - 1)), lead)
        coords = [comp.ravel().astype(float)]
        coords += [((offsets[..., k] - g.lo[k]) / g.step[k]).ravel() for k in range(g.ndim)]
        out = map_coordinates(self.profiles, np.stack(coords), order=1, mode="constant",
                              cval=0.0, prefilter=False)
        return self.scale * out.reshape(lead)

    @property
    def sup(self) -> float:
        return self.scale * float(self.profiles.max())

    def mean_integral(self) -> float:
        ints = np.sum(self.profiles * self.grid.trapezoid_weights, axis=tuple(range(1, self.profiles.ndim)))
        return self.scale * float(np.dot(self.weights, ints))

    def component(self, j: int) -> ShapeModel:
        return ShapeModel.tabulated(self.grid, self.scale * self.profiles[j])


def as_shape_distribution(shape) -> ShapeDistribution:
    if isinstance(shape, ShapeDistribution):
        return shape
    if isinstance(shape, ShapeModel):
        return FixedShape(shape)
    raise TypeError(f"expected a ShapeModel or ShapeDistribution, got {type(shape).__name__}")


@dataclass(frozen=True, eq=False)
class DiscreteShape:
    """Shape function on the integer lattice, stored on a centred offset box.

    ``values[c + k]`` is ``F(k)`` where ``c`` is the centre index; the values
    must sum to one.
    """

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, float)
        if any(n % 2 == 0 for n in v.shape):
            raise ValueError("discrete shape needs odd extent in every dimension (centred)")
        if np.any(v < 0):
            raise ValueError("discrete shape must be nonnegative")
        if abs(v.sum() - 1.0) > 1e-9:
            raise ValueError(f"discrete shape must sum to 1, sums to {v.sum():.12g}")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_shape(cls, shape: ShapeModel, radius: int) -> "DiscreteShape":
        """Restrict a continuous shape to integer offsets and renormalise."""
        g = Grid.centered(radius, 1, shape.ndim)
        v = shape(g.points).reshape(g.shape)
        return cls(v / v.sum())

    @property
    def ndim(self) -> int:
        return self.values.ndim

    @property
    def radius(self) -> tuple[int, ...]:
        return tuple(n // 2 for n in self.values.shape)

    @property
    def lam(self) -> float:
        return float(self.values[tuple(r for r in self.radius)])

    @property
    def sup(self) -> float:
        return float(self.values.max())
