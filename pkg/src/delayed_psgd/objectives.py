"""Sum-decomposable test objectives f(x) = sum_i f_i(x) with certified constants.

Agents are indexed ``0 .. n-1``. Each local function works on points of shape
``(..., d)`` and is defined on all of R^d, so zeroth-order estimators may probe
slightly outside the feasible set.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy.stats import ortho_group

from . import sets
from .sets import FeasibleSet

CONVEXITY_CLASSES = ("nonconvex", "convex", "strongly-convex")


@dataclass(frozen=True, eq=False)
class Quadratic:
    """``0.5 x^T A x + b^T x + offset`` with symmetric ``A``."""

    A: np.ndarray
    b: np.ndarray
    offset: float = 0.0
    kind: str = field(default="quadratic", init=False)

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        b = np.array(self.b, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or b.shape != (A.shape[0],):
            raise ValueError("quadratic needs square A of shape (d, d) and b of shape (d,)")
        if not np.allclose(A, A.T, rtol=0, atol=1e-12 * max(1.0, np.abs(A).max())):
            raise ValueError("quadratic A must be symmetric")
        A = 0.5 * (A + A.T)
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "offset", float(self.offset))

    @property
    def dimension(self) -> int:
        return self.b.size

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * np.einsum("...j,jk,...k->...", x, self.A, x) + x @ self.b + self.offset

    def grad(self, x):
        return np.asarray(x, dtype=float) @ self.A + self.b

    def smoothness(self, fset: Optional[FeasibleSet] = None) -> float:
        return float(np.max(np.abs(np.linalg.eigvalsh(self.A))))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "A": self.A.tolist(), "b": self.b.tolist(), "offset": self.offset}


@dataclass(frozen=True, eq=False)
class Huber:
    """Huber function of the distance to ``reference``; 1-smooth and convex."""

    reference: np.ndarray
    threshold: float
    kind: str = field(default="huber", init=False)

    def __post_init__(self):
        ref = np.array(self.reference, dtype=float).reshape(-1)
        ref.setflags(write=False)
        object.__setattr__(self, "reference", ref)
        if not self.threshold > 0:
            raise ValueError("huber threshold must be positive")
        object.__setattr__(self, "threshold", float(self.threshold))

    @property
    def dimension(self) -> int:
        return self.reference.size

    def value(self, x):
        r = np.linalg.norm(np.asarray(x, dtype=float) - self.reference, axis=-1)
        dl = self.threshold
        return np.where(r <= dl, 0.5 * r**2, dl * r - 0.5 * dl**2)

    def grad(self, x):
        diff = np.asarray(x, dtype=float) - self.reference
        r = np.linalg.norm(diff, axis=-1, keepdims=True)
        scale = np.where(r <= self.threshold, 1.0, self.threshold / np.where(r > 0, r, 1.0))
        return diff * scale

    def smoothness(self, fset: Optional[FeasibleSet] = None) -> float:
        return 1.0

    def to_dict(self) -> dict:
        return {"kind": self.kind, "reference": self.reference.tolist(), "threshold": self.threshold}


@dataclass(frozen=True, eq=False)
class SineQuadratic:
    """``0.5 w ||x - c||^2 + a * sum_j sin(omega (x_j - c_j))``.

    Hessian eigenvalues lie in ``[w - |a| omega^2, w + |a| omega^2]``, so the
    function is nonconvex whenever ``|a| omega^2 > w``.
    """

    amplitude: float
    frequency: float
    quad_weight: float
    center: np.ndarray
    kind: str = field(default="sine-quadratic", init=False)

    def __post_init__(self):
        c = np.array(self.center, dtype=float).reshape(-1)
        c.setflags(write=False)
        object.__setattr__(self, "center", c)
        for name in ("amplitude", "frequency", "quad_weight"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @property
    def dimension(self) -> int:
        return self.center.size

    def value(self, x):
        y = np.asarray(x, dtype=float) - self.center
        return 0.5 * self.quad_weight * np.sum(y * y, axis=-1) + self.amplitude * np.sum(
            np.sin(self.frequency * y), axis=-1
        )

    def grad(self, x):
        y = np.asarray(x, dtype=float) - self.center
        return self.quad_weight * y + self.amplitude * self.frequency * np.cos(self.frequency * y)

    def smoothness(self, fset: Optional[FeasibleSet] = None) -> float:
        return abs(self.quad_weight) + abs(self.amplitude) * self.frequency**2

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "amplitude": self.amplitude,
            "frequency": self.frequency,
            "quad_weight": self.quad_weight,
            "center": self.center.tolist(),
        }


@dataclass(frozen=True, eq=False)
class Quartic:
    """``weight * sum_j (x_j - c_j)^4``; smooth only on bounded sets."""

    weight: float
    center: np.ndarray
    kind: str = field(default="quartic", init=False)

    def __post_init__(self):
        c = np.array(self.center, dtype=float).reshape(-1)
        c.setflags(write=False)
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "weight", float(self.weight))

    @property
    def dimension(self) -> int:
        return self.center.size

    def value(self, x):
        y = np.asarray(x, dtype=float) - self.center
        return self.weight * np.sum(y**4, axis=-1)

    def grad(self, x):
        y = np.asarray(x, dtype=float) - self.center
        return 4.0 * self.weight * y**3

    def smoothness(self, fset: Optional[FeasibleSet] = None) -> float:
        if fset is None or not fset.is_bounded:
            return np.inf
        if fset.kind == "box":
            reach = np.maximum(np.abs(fset.lower - self.center), np.abs(fset.upper - self.center))
        elif fset.kind == "l2-ball":
            reach = np.abs(fset.center - self.center) + fset.radius
        else:
            reach = np.maximum(np.abs(self.center), np.abs(1.0 - self.center))
        return float(12.0 * abs(self.weight) * np.max(reach) ** 2)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "weight": self.weight, "center": self.center.tolist()}


LocalFunction = Union[Quadratic, Huber, SineQuadratic, Quartic]
_LOCAL_KINDS = {"quadratic": Quadratic, "huber": Huber, "sine-quadratic": SineQuadratic, "quartic": Quartic}


def local_from_dict(d: dict) -> LocalFunction:
    d = dict(d)
    kind = d.pop("kind")
    if kind not in _LOCAL_KINDS:
        raise ValueError(f"unknown local function kind {kind!r}")
    return _LOCAL_KINDS[kind](**d)


class ObjectiveSuite:
    """The global objective ``f = sum_i f_i`` plus its declared constants."""

    def __init__(
        self,
        locals_: Sequence[LocalFunction],
        smoothness_L: float,
        strong_convexity_mu: float = 0.0,
        convexity_class: str = "nonconvex",
        optimum: Optional[tuple] = None,
        domain: Optional[FeasibleSet] = None,
        tol: float = sets.DEFAULT_TOL,
    ):
        if len(locals_) < 1:
            raise ValueError("need at least one local function")
        dims = {f.dimension for f in locals_}
        if len(dims) != 1:
            raise ValueError(f"local functions disagree on dimension: {sorted(dims)}")
        if convexity_class not in CONVEXITY_CLASSES:
            raise ValueError(f"convexity_class must be one of {CONVEXITY_CLASSES}")
        if not smoothness_L > 0:
            raise ValueError("smoothness_L must be positive")
        if strong_convexity_mu < 0:
            raise ValueError("strong_convexity_mu must be >= 0")
        if (strong_convexity_mu > 0) != (convexity_class == "strongly-convex"):
            raise ValueError("strong_convexity_mu > 0 exactly when convexity_class is strongly-convex")
        self.locals = tuple(locals_)
        self.n = len(self.locals)
        self.d = dims.pop()
        if domain is not None and domain.dimension != self.d:
            raise ValueError("domain dimension does not match the local functions")
        self.smoothness_L = float(smoothness_L)
        self.strong_convexity_mu = float(strong_convexity_mu)
        self.convexity_class = convexity_class
        self.domain = domain
        self.tol = tol
        for i, f in enumerate(self.locals):
            Li = f.smoothness(domain)
            if Li > self.smoothness_L * (1 + 1e-12):
                raise ValueError(f"agent {i}: local smoothness {Li} exceeds declared L {self.smoothness_L}")
        self._optimum = None
        if optimum is not None:
            x_star = np.array(optimum[0], dtype=float)
            x_star.setflags(write=False)
            self._optimum = (x_star, float(optimum[1]))
            if domain is not None:
                if not sets.contains(domain, x_star, tol):
                    raise ValueError("declared optimum lies outside the feasible set")
                gnorm = np.linalg.norm(sum(f.grad(x_star) for f in self.locals))
                interior = np.allclose(sets.project(domain, x_star), x_star) and _is_interior(domain, x_star)
                if interior and gnorm > 1e-8 * max(1.0, self.smoothness_L * self.n):
                    raise ValueError(f"interior optimum has gradient norm {gnorm}")
        self._build_stacked()

    # batched fast paths for homogeneous suites ----------------------------

    def _build_stacked(self):
        kinds = {f.kind for f in self.locals}
        self._stack_kind = kinds.pop() if len(kinds) == 1 else None
        if self._stack_kind == "quadratic":
            self._A = np.stack([f.A for f in self.locals])
            self._b = np.stack([f.b for f in self.locals])
            self._c = np.array([f.offset for f in self.locals])
        elif self._stack_kind == "sine-quadratic":
            self._amp = np.array([f.amplitude for f in self.locals])[:, None]
            self._freq = np.array([f.frequency for f in self.locals])[:, None]
            self._w = np.array([f.quad_weight for f in self.locals])[:, None]
            self._ctr = np.stack([f.center for f in self.locals])

    def agent_values(self, X) -> np.ndarray:
        """``f_i(X[i])`` for every agent; ``X`` has shape ``(n, d)`` or ``(n, m, d)``."""
        X = np.asarray(X, dtype=float)
        if self._stack_kind == "quadratic":
            if X.ndim == 2:
                AX = np.einsum("nij,nj->ni", self._A, X)
                return 0.5 * np.sum(X * AX, axis=-1) + np.sum(X * self._b, axis=-1) + self._c
            AX = np.einsum("nij,nmj->nmi", self._A, X)
            return 0.5 * np.sum(X * AX, axis=-1) + np.sum(X * self._b[:, None], axis=-1) + self._c[:, None]
        if self._stack_kind == "sine-quadratic" and X.ndim == 2:
            Y = X - self._ctr
            return 0.5 * self._w[:, 0] * np.sum(Y * Y, axis=-1) + self._amp[:, 0] * np.sum(
                np.sin(self._freq * Y), axis=-1
            )
        return np.stack([f.value(X[i]) for i, f in enumerate(self.locals)])

    def agent_grads(self, X) -> np.ndarray:
        """``grad f_i(X[i])`` for every agent; ``X`` has shape ``(n, d)``."""
        X = np.asarray(X, dtype=float)
        if self._stack_kind == "quadratic":
            return np.einsum("nij,nj->ni", self._A, X) + self._b
        if self._stack_kind == "sine-quadratic":
            Y = X - self._ctr
            return self._w * Y + self._amp * self._freq * np.cos(self._freq * Y)
        return np.stack([f.grad(X[i]) for i, f in enumerate(self.locals)])

    # checked public evaluation --------------------------------------------

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (self.d,):
            raise ValueError(f"expected points of dimension {self.d}, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError("point contains NaN or Inf")
        if self.domain is not None and not np.all(sets.contains(self.domain, x, self.tol)):
            raise ValueError("point lies outside the feasible set")
        return x

    def _agent(self, i: int) -> LocalFunction:
        if not 0 <= i < self.n:
            raise IndexError(f"agent index {i} outside [0, {self.n})")
        return self.locals[i]

    def value(self, x):
        """Unchecked global value, usable on arrays of points."""
        x = np.asarray(x, dtype=float)
        return sum(f.value(x) for f in self.locals)

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        if self._stack_kind == "quadratic":
            return x @ self._A.sum(axis=0) + self._b.sum(axis=0)
        return sum(f.grad(x) for f in self.locals)

    def optimum(self):
        return self._optimum

    def describe(self) -> dict:
        return {
            "n": self.n,
            "d": self.d,
            "L": self.smoothness_L,
            "mu": self.strong_convexity_mu,
            "convexity_class": self.convexity_class,
        }


def local_value(suite: ObjectiveSuite, i: int, x) -> float:
    f = suite._agent(i)
    return f.value(suite._check(x))


def local_grad(suite: ObjectiveSuite, i: int, x) -> np.ndarray:
    f = suite._agent(i)
    return f.grad(suite._check(x))


def global_value(suite: ObjectiveSuite, x):
    return suite.value(suite._check(x))


def global_grad(suite: ObjectiveSuite, x) -> np.ndarray:
    return suite.grad(suite._check(x))


def optimum(suite: ObjectiveSuite):
    return suite.optimum()


def _is_interior(fset: FeasibleSet, x) -> bool:
    if fset.kind == "whole-space":
        return True
    if fset.kind == "box":
        return bool(np.all(x > fset.lower) and np.all(x < fset.upper))
    if fset.kind == "l2-ball":
        return bool(np.linalg.norm(x - fset.center) < fset.radius)
    return False


# suite builders -----------------------------------------------------------


def _random_orthogonal(d: int, rng: np.random.Generator) -> np.ndarray:
    if d == 1:
        return np.ones((1, 1))
    return ortho_group.rvs(d, random_state=rng)


def quadratic_suite(
    n: int,
    spectrum: Sequence[float],
    x_star,
    seed: int = 0,
    heterogeneity: float = 1.0,
    domain: Optional[FeasibleSet] = None,
) -> ObjectiveSuite:
    """Split the Hessian ``Q diag(spectrum) Q^T`` across ``n`` agents.

    Each eigen-direction's curvature is divided among agents with Dirichlet
    weights, so the local Hessians are PSD, sum exactly to the target, and have
    eigenvalues at most ``max(spectrum)``. Linear terms carry zero-sum
    perturbations of size ``heterogeneity`` so local minimizers differ while the
    global minimizer stays at ``x_star`` with ``f* = 0``.
    """
    lam = np.asarray(spectrum, dtype=float)
    if np.any(lam < 0):
        raise ValueError("spectrum must be non-negative")
    d = lam.size
    x_star = np.asarray(x_star, dtype=float)
    if x_star.shape != (d,):
        raise ValueError("x_star must match the spectrum length")
    rng = np.random.default_rng(seed)
    Q = _random_orthogonal(d, rng)
    weights = rng.dirichlet(np.ones(n), size=d).T if n > 1 else np.ones((1, d))
    e = rng.standard_normal((n, d))
    e -= e.mean(axis=0)
    if n > 1:
        e *= heterogeneity / np.sqrt(np.mean(np.sum(e * e, axis=1)))
    else:
        e[:] = 0.0
    locals_ = []
    for i in range(n):
        A = (Q * (lam * weights[i])) @ Q.T
        A = 0.5 * (A + A.T)
        b = -A @ x_star + e[i]
        c = 0.5 * x_star @ A @ x_star - e[i] @ x_star
        locals_.append(Quadratic(A, b, c))
    mu = float(lam.min())
    # each local Hessian is dominated by the global one, so max(spectrum) bounds it
    L = float(lam.max())
    cls = "strongly-convex" if mu > 0 else "convex"
    return ObjectiveSuite(
        locals_,
        smoothness_L=L,
        strong_convexity_mu=mu,
        convexity_class=cls,
        optimum=(x_star, 0.0),
        domain=domain,
    )


def strongly_convex_quadratic_suite(n, d, mu, L, x_star, seed=0, heterogeneity=1.0, domain=None):
    """Global Hessian with eigenvalues evenly spread over ``[mu, L]``."""
    if not 0 < mu <= L:
        raise ValueError("need 0 < mu <= L")
    spectrum = np.linspace(mu, L, d) if d > 1 else np.array([mu])
    return quadratic_suite(n, spectrum, x_star, seed, heterogeneity, domain)


def convex_quadratic_suite(n, d, rank, L, x_star, seed=0, heterogeneity=1.0, curvature_min=1.0, domain=None):
    """Rank-deficient Hessian: ``rank`` eigenvalues in ``[curvature_min, L]``, the rest zero."""
    if not 1 <= rank < d:
        raise ValueError("rank must satisfy 1 <= rank < d for a rank-deficient suite")
    spectrum = np.zeros(d)
    spectrum[:rank] = np.linspace(curvature_min, L, rank) if rank > 1 else L
    return quadratic_suite(n, spectrum, x_star, seed, heterogeneity, domain)


def huber_suite(n, d, threshold=1.0, reference=None, domain=None) -> ObjectiveSuite:
    """All agents share one Huber reference point, which is the global minimizer."""
    ref = np.zeros(d) if reference is None else np.asarray(reference, dtype=float)
    locals_ = [Huber(ref, threshold) for _ in range(n)]
    return ObjectiveSuite(
        locals_, smoothness_L=1.0, convexity_class="convex", optimum=(ref, 0.0), domain=domain
    )


def sine_quadratic_suite(
    n, d, amplitude=1.0, frequency=2.0, quad_weight=1.0, center_scale=1.0, seed=0, domain=None
) -> ObjectiveSuite:
    """Nonconvex suite (for ``|amplitude| frequency^2 > quad_weight``) with random centers."""
    rng = np.random.default_rng(seed)
    centers = center_scale * rng.uniform(-1.0, 1.0, size=(n, d))
    locals_ = [SineQuadratic(amplitude, frequency, quad_weight, c) for c in centers]
    L = abs(quad_weight) + abs(amplitude) * frequency**2
    curv = quad_weight - abs(amplitude) * frequency**2
    if curv > 0:
        return ObjectiveSuite(
            locals_, L, strong_convexity_mu=n * curv, convexity_class="strongly-convex", domain=domain
        )
    return ObjectiveSuite(locals_, L, convexity_class="nonconvex", domain=domain)


def quartic_suite(n, d, weight=1.0, center=None, domain=None) -> ObjectiveSuite:
    if domain is None or not domain.is_bounded:
        raise ValueError("a quartic suite needs a bounded domain to certify L")
    c = np.zeros(d) if center is None else np.asarray(center, dtype=float)
    locals_ = [Quartic(weight, c) for _ in range(n)]
    L = max(f.smoothness(domain) for f in locals_)
    opt = (c, 0.0) if np.all(sets.contains(domain, c)) else None
    return ObjectiveSuite(locals_, L, convexity_class="convex", optimum=opt, domain=domain)
