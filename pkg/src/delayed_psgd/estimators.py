"""Agent-side stochastic gradient estimators g_i(x, xi).

Every source declares a bias bound q(t) and, once certified, a second-moment
bound G. Randomness always comes from a caller-owned ``numpy.random.Generator``.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import sets
from .objectives import ObjectiveSuite
from .schedules import DecaySchedule
from .sets import FeasibleSet

KINDS = ("exact", "additive-noise", "gaussian-two-point", "sphere-two-point")
ZEROTH_ORDER = ("gaussian-two-point", "sphere-two-point")
SAFETY_FACTOR = 1.1


class NumericalFailure(ArithmeticError):
    """A gradient estimate came out non-finite."""

    def __init__(self, message: str, agent=None, t=None):
        super().__init__(f"{message} (agent={agent}, t={t})")
        self.agent = agent
        self.t = t


@dataclass(frozen=True)
class GradientSource:
    """Estimator kind plus its declared constants.

    ``shift`` adds a constant, undeclared offset to every coordinate. It exists so
    the certification suites can be shown to catch a mis-declared source.
    """

    kind: str
    bias_schedule: DecaySchedule
    sigma: float = 0.0
    smoothing: Optional[DecaySchedule] = None
    second_moment_G: Optional[float] = None
    shift: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown source kind {self.kind!r}; expected one of {KINDS}")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if self.kind in ZEROTH_ORDER:
            if self.smoothing is None or self.smoothing.kind == "zero" or self.smoothing.scale <= 0:
                raise ValueError("zeroth-order sources need a positive smoothing schedule u(t)")
        if self.second_moment_G is not None and not self.second_moment_G > 0:
            raise ValueError("second_moment_G must be positive")

    @classmethod
    def exact(cls, G=None) -> "GradientSource":
        return cls("exact", DecaySchedule.zero(), second_moment_G=G)

    @classmethod
    def additive_noise(cls, sigma: float, G=None, shift: float = 0.0) -> "GradientSource":
        return cls("additive-noise", DecaySchedule.zero(), sigma=float(sigma), second_moment_G=G, shift=shift)

    @classmethod
    def gaussian_two_point(cls, smoothing: DecaySchedule, L: float, d: int, G=None) -> "GradientSource":
        return cls("gaussian-two-point", smoothing.scaled(L * math.sqrt(d)), smoothing=smoothing, second_moment_G=G)

    @classmethod
    def sphere_two_point(cls, smoothing: DecaySchedule, L: float, G=None) -> "GradientSource":
        return cls("sphere-two-point", smoothing.scaled(L), smoothing=smoothing, second_moment_G=G)

    def with_G(self, G: float) -> "GradientSource":
        return dataclasses.replace(self, second_moment_G=float(G))

    @property
    def draws_directions(self) -> bool:
        return self.kind != "exact"


def bias_bound(source: GradientSource, t) -> float:
    """The declared q(t)."""
    return source.bias_schedule(t)


def _directions(source: GradientSource, rng: np.random.Generator, shape) -> np.ndarray:
    z = rng.standard_normal(shape)
    if source.kind == "sphere-two-point":
        z /= np.linalg.norm(z, axis=-1, keepdims=True)
    return z


def _finite_or_raise(g: np.ndarray, agent, t) -> np.ndarray:
    if not np.all(np.isfinite(g)):
        raise NumericalFailure("non-finite gradient estimate", agent=agent, t=t)
    return g


def estimate_agents(source, suite: ObjectiveSuite, points, t: int, rng=None, directions=None) -> np.ndarray:
    """One estimate per agent: row ``i`` is ``g_i(points[i])``.

    Draws exactly one ``(n, d)`` standard-normal block from ``rng`` for every
    stochastic kind, so the stream position depends only on how many calls were made.
    """
    X = np.asarray(points, dtype=float)
    n, d = X.shape
    if source.kind == "exact":
        g = suite.agent_grads(X)
    elif source.kind == "additive-noise":
        noise = rng.standard_normal((n, d)) if directions is None else np.asarray(directions)
        g = suite.agent_grads(X) + source.sigma * noise + source.shift
    else:
        z = _directions(source, rng, (n, d)) if directions is None else np.asarray(directions, dtype=float)
        u = source.smoothing(t)
        diff = suite.agent_values(X + u * z) - suite.agent_values(X - u * z)
        coef = diff / (2.0 * u)
        if source.kind == "sphere-two-point":
            coef = coef * d
        g = coef[:, None] * z
    if not np.all(np.isfinite(g)):
        bad = int(np.argmax(~np.all(np.isfinite(g), axis=1)))
        raise NumericalFailure("non-finite gradient estimate", agent=bad, t=t)
    return g


def sample_estimates(source, suite: ObjectiveSuite, i: int, x, t: int, rng, count: int, z=None) -> np.ndarray:
    """``count`` independent draws of ``g_i(x)``, shape ``(count, d)``."""
    f = suite._agent(i)
    x = np.asarray(x, dtype=float)
    d = x.size
    if source.kind == "exact":
        return np.broadcast_to(f.grad(x), (count, d)).copy()
    if source.kind == "additive-noise":
        noise = rng.standard_normal((count, d)) if z is None else np.asarray(z, dtype=float).reshape(count, d)
        return _finite_or_raise(f.grad(x) + source.sigma * noise + source.shift, i, t)
    if z is None:
        z = _directions(source, rng, (count, d))
    else:
        z = np.asarray(z, dtype=float).reshape(count, d)
    u = source.smoothing(t)
    coef = (f.value(x + u * z) - f.value(x - u * z)) / (2.0 * u)
    if source.kind == "sphere-two-point":
        coef = coef * d
    return _finite_or_raise(coef[:, None] * z, i, t)


def estimate(source, suite: ObjectiveSuite, i: int, x, t: int, rng=None, z=None) -> np.ndarray:
    """A single stochastic gradient sample of agent ``i`` at ``x``.

    ``z`` forces the perturbation direction (or the noise vector for the
    additive-noise kind) instead of drawing it from ``rng``.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    return sample_estimates(source, suite, i, x, t, rng, 1, z=z)[0]


def conditional_mean(source, suite, i, x, t, sample_count: int, rng, chunk: int = 200_000):
    """Monte Carlo estimate of ``E[g_i(x) | x]``.

    Returns ``(mean, standard_error)`` where the standard error is
    ``sqrt(trace(Cov) / N)``, the natural scale of ``||mean - E g||``.
    """
    if sample_count < 2:
        raise ValueError("sample_count must be >= 2")
    if source.kind == "exact":
        return suite._agent(i).grad(np.asarray(x, dtype=float)), 0.0
    d = np.asarray(x).size
    total = np.zeros(d)
    total_sq = np.zeros(d)
    done = 0
    while done < sample_count:
        m = min(chunk, sample_count - done)
        g = sample_estimates(source, suite, i, x, t, rng, m)
        total += g.sum(axis=0)
        total_sq += np.sum(g * g, axis=0)
        done += m
    mean = total / sample_count
    var = np.maximum(total_sq / sample_count - mean**2, 0.0) * sample_count / (sample_count - 1)
    return mean, float(math.sqrt(np.sum(var) / sample_count))


def second_moment(source, suite, i, x, t, sample_count: int, rng):
    """Monte Carlo ``E||g_i(x)||^2`` and its standard error."""
    sq = np.sum(sample_estimates(source, suite, i, x, t, rng, sample_count) ** 2, axis=1)
    se = float(sq.std(ddof=1) / math.sqrt(sample_count)) if sample_count > 1 else math.inf
    return float(sq.mean()), se


def certify_second_moment(
    source: GradientSource,
    suite: ObjectiveSuite,
    fset: FeasibleSet,
    rng: np.random.Generator,
    n_points: int = 200,
    sample_count: int = 2000,
    safety: float = SAFETY_FACTOR,
) -> float:
    """Second-moment certificate G on a compact feasible set.

    Exact and additive-noise sources use ``(sup ||grad f_i|| + bias + noise)^2``;
    zeroth-order sources use the largest Monte Carlo ``E||g_i||^2`` at t = 0.
    Candidate points are random samples plus box corners / simplex vertices.
    ``safety`` inflates the result.
    """
    if not fset.is_bounded:
        raise ValueError("G can only be certified on a bounded feasible set")
    pts = np.vstack([sets.sample(fset, rng, n_points), sets.extreme_points(fset)])
    d = fset.dimension
    if source.kind in ("exact", "additive-noise"):
        sup = max(float(np.max(np.linalg.norm(f.grad(pts), axis=1))) for f in suite.locals)
        bound = (sup + abs(source.shift) * math.sqrt(d) + source.sigma * math.sqrt(d)) ** 2
        return safety * max(bound, np.finfo(float).tiny)
    best = 0.0
    for i in range(suite.n):
        z = _directions(source, rng, (sample_count, d))
        for x in pts:
            g = sample_estimates(source, suite, i, x, 0, None, sample_count, z=z)
            best = max(best, float(np.mean(np.sum(g * g, axis=1))))
    return safety * best
