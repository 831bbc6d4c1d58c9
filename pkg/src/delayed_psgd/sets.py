"""Closed convex feasible sets with exact Euclidean projections.

Supported kinds: ``whole-space``, ``box`` (bounds may be infinite), ``l2-ball`` and
the probability ``simplex`` {x >= 0, sum(x) = 1}. Projections accept a single
vector of shape ``(d,)`` or a batch of shape ``(..., d)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

KINDS = ("whole-space", "box", "l2-ball", "simplex")
DEFAULT_TOL = 1e-9


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class FeasibleSet:
    kind: str
    dimension: int
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None
    center: Optional[np.ndarray] = None
    radius: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown set kind {self.kind!r}; expected one of {KINDS}")
        if int(self.dimension) < 1:
            raise ValueError("dimension must be >= 1")
        object.__setattr__(self, "dimension", int(self.dimension))
        d = self.dimension
        if self.kind == "box":
            lo, hi = _frozen(self.lower), _frozen(self.upper)
            if lo.shape != (d,) or hi.shape != (d,):
                raise ValueError(f"box bounds must have shape ({d},)")
            if np.any(np.isnan(lo)) or np.any(np.isnan(hi)):
                raise ValueError("box bounds must not be NaN")
            if np.any(lo > hi):
                raise ValueError("box requires lower <= upper componentwise")
            if np.any(lo == np.inf) or np.any(hi == -np.inf):
                raise ValueError("box would be empty")
            object.__setattr__(self, "lower", lo)
            object.__setattr__(self, "upper", hi)
        elif self.kind == "l2-ball":
            c = _frozen(self.center)
            if c.shape != (d,) or not np.all(np.isfinite(c)):
                raise ValueError(f"ball center must be a finite vector of shape ({d},)")
            if not (np.isfinite(self.radius) and self.radius > 0):
                raise ValueError(f"ball radius must be positive, got {self.radius}")
            object.__setattr__(self, "center", c)
            object.__setattr__(self, "radius", float(self.radius))

    # constructors ---------------------------------------------------------

    @classmethod
    def whole_space(cls, dimension: int) -> "FeasibleSet":
        return cls("whole-space", dimension)

    @classmethod
    def box(cls, lower, upper) -> "FeasibleSet":
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        return cls("box", lower.size, lower=lower, upper=np.atleast_1d(upper))

    @classmethod
    def l2_ball(cls, center, radius: float) -> "FeasibleSet":
        center = np.atleast_1d(np.asarray(center, dtype=float))
        return cls("l2-ball", center.size, center=center, radius=radius)

    @classmethod
    def simplex(cls, dimension: int) -> "FeasibleSet":
        return cls("simplex", dimension)

    @property
    def is_bounded(self) -> bool:
        if self.kind == "whole-space":
            return False
        if self.kind == "box":
            return bool(np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper)))
        return True

    def __eq__(self, other):
        if not isinstance(other, FeasibleSet):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(repr(self.to_dict()))

    def to_dict(self) -> dict:
        if self.kind == "whole-space":
            return {"kind": "whole-space", "dimension": self.dimension}
        if self.kind == "box":
            return {"kind": "box", "lower": _jsonable(self.lower), "upper": _jsonable(self.upper)}
        if self.kind == "l2-ball":
            return {"kind": "l2-ball", "center": self.center.tolist(), "radius": self.radius}
        return {"kind": "simplex", "dimension": self.dimension}


def _jsonable(v: np.ndarray) -> list:
    # JSON has no infinities; emit them as strings that parse back with float()
    return [float(x) if np.isfinite(x) else ("inf" if x > 0 else "-inf") for x in v]


def _check_input(fset: FeasibleSet, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.ndim == 0 or y.shape[-1] != fset.dimension:
        raise ValueError(f"expected vectors of dimension {fset.dimension}, got shape {y.shape}")
    if not np.all(np.isfinite(y)):
        raise ValueError("input contains NaN or Inf components")
    return y


def project_simplex(y: np.ndarray) -> np.ndarray:
    """Sort-and-threshold projection onto the probability simplex, row-wise."""
    d = y.shape[-1]
    u = -np.sort(-y, axis=-1)
    css = np.cumsum(u, axis=-1) - 1.0
    ind = np.arange(1, d + 1)
    cond = u - css / ind > 0
    rho = np.count_nonzero(cond, axis=-1) - 1
    theta = np.take_along_axis(css, rho[..., None], axis=-1) / (rho[..., None] + 1.0)
    return np.maximum(y - theta, 0.0)


def project(fset: FeasibleSet, y) -> np.ndarray:
    """Euclidean projection of ``y`` onto ``fset``."""
    y = _check_input(fset, y)
    if fset.kind == "whole-space":
        return y.copy()
    if fset.kind == "box":
        return np.clip(y, fset.lower, fset.upper)
    if fset.kind == "l2-ball":
        diff = y - fset.center
        norm = np.linalg.norm(diff, axis=-1, keepdims=True)
        scale = np.where(norm > fset.radius, fset.radius / np.where(norm > 0, norm, 1.0), 1.0)
        return fset.center + diff * scale
    return project_simplex(y)


def distance(fset: FeasibleSet, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(np.isnan(x)):
        raise ValueError("input contains NaN components")
    return np.linalg.norm(x - project(fset, x), axis=-1)


def contains(fset: FeasibleSet, x, tol: float = DEFAULT_TOL):
    """True where the distance from ``x`` to the set is at most ``tol``."""
    if tol < 0:
        raise ValueError("tol must be non-negative")
    dist = distance(fset, x)
    return bool(dist <= tol) if np.ndim(dist) == 0 else dist <= tol


def sample(fset: FeasibleSet, rng: np.random.Generator, size: int) -> np.ndarray:
    """Draw ``size`` points spread over a bounded set (uniform for box and ball)."""
    d = fset.dimension
    if not fset.is_bounded:
        raise ValueError(f"cannot sample from unbounded set of kind {fset.kind!r}")
    if fset.kind == "box":
        return rng.uniform(fset.lower, fset.upper, size=(size, d))
    if fset.kind == "l2-ball":
        z = rng.standard_normal((size, d))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        r = fset.radius * rng.uniform(size=(size, 1)) ** (1.0 / d)
        return fset.center + r * z
    return rng.dirichlet(np.ones(d), size=size)


def extreme_points(fset: FeasibleSet, limit: int = 4096) -> np.ndarray:
    """Corners of a box or vertices of the simplex; empty if there are more than ``limit``."""
    d = fset.dimension
    if fset.kind == "simplex" and d <= limit:
        return np.eye(d)
    if fset.kind == "box" and fset.is_bounded and 2**d <= limit:
        bits = (np.arange(2**d)[:, None] >> np.arange(d)) & 1
        return np.where(bits == 1, fset.upper, fset.lower)
    return np.empty((0, d))
