"""Derived quantities: gradient mapping, averaged iterates, rates, radii, oracles."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import sets
from .engine import RunConfig, Trajectory
from .objectives import ObjectiveSuite
from .schedules import StepSizeSchedule
from .sets import FeasibleSet

VALUE_KINDS = (
    "grad-map-sq",
    "dist-sq",
    "suboptimality",
    "averaged-suboptimality",
    "running-mean-grad-map-sq",
)


@dataclass
class MetricSeries:
    times: np.ndarray
    values: np.ndarray
    ensemble_size: int = 1
    value_kind: str = "dist-sq"
    standard_errors: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.shape != self.values.shape or self.times.ndim != 1:
            raise ValueError("times and values must be 1-D arrays of equal length")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("metric values must be finite")
        if self.ensemble_size < 1:
            raise ValueError("ensemble_size must be >= 1")
        if self.value_kind not in VALUE_KINDS:
            raise ValueError(f"unknown value kind {self.value_kind!r}")
        if self.standard_errors is None:
            self.standard_errors = np.full(self.values.shape, np.inf)

    def at(self, times) -> "MetricSeries":
        idx = np.searchsorted(self.times, times)
        if np.any(idx >= self.times.size) or np.any(self.times[idx] != times):
            raise KeyError("requested times are not on this series' grid")
        return MetricSeries(
            self.times[idx], self.values[idx], self.ensemble_size, self.value_kind, self.standard_errors[idx]
        )


# projected gradient mapping ------------------------------------------------


def gradient_mapping(fset: FeasibleSet, x, v, eta):
    """``(x - Pi_S[x - eta v]) / eta``, row-wise for batched inputs."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if np.any(eta <= 0):
        raise ValueError("eta must be positive")
    if x.shape[-1] != fset.dimension or v.shape[-1] != fset.dimension:
        raise ValueError("dimension mismatch")
    e = eta[..., None] if eta.ndim else eta
    return (x - sets.project(fset, x - e * v)) / e


def grad_map_sq_path(trajectory: Trajectory, suite: ObjectiveSuite, fset: FeasibleSet, step: StepSizeSchedule):
    """``||h(t)||^2`` at every stored tick."""
    X = trajectory.iterates
    h = gradient_mapping(fset, X, suite.grad(X), step(trajectory.times))
    return np.sum(h * h, axis=1)


def weighted_average_path(trajectory: Trajectory, step: StepSizeSchedule) -> np.ndarray:
    """Row ``T`` is the step-weighted average of ``x(0..T)``."""
    if not trajectory.dense:
        raise ValueError("weighted averages need a dense trajectory")
    w = step(np.arange(trajectory.horizon + 1))
    return np.cumsum(w[:, None] * trajectory.iterates, axis=0) / np.cumsum(w)[:, None]


def weighted_average_iterate(trajectory: Trajectory, step: StepSizeSchedule, T: Optional[int] = None) -> np.ndarray:
    T = trajectory.horizon if T is None else T
    if not 0 <= T <= trajectory.horizon:
        raise ValueError("T outside the recorded horizon")
    w = step(np.arange(T + 1))
    xs = np.stack([trajectory.iterate(t) for t in range(T + 1)])
    return (w[:, None] * xs).sum(axis=0) / w.sum()


def sample_weighted_index(step: StepSizeSchedule, T: int, rng: np.random.Generator, size=None):
    """Draw ``s`` in ``[0, T]`` with ``P(s = t)`` proportional to ``eta(t)``."""
    if T < 0:
        raise ValueError("T must be >= 0")
    w = step(np.arange(T + 1))
    return rng.choice(T + 1, size=size, p=w / w.sum())


def metric_path(kind: str, trajectory: Trajectory, config: RunConfig) -> np.ndarray:
    """Per-path metric values at ``trajectory.times``."""
    suite, fset, step = config.suite, config.fset, config.step
    if kind in ("grad-map-sq", "running-mean-grad-map-sq"):
        h2 = grad_map_sq_path(trajectory, suite, fset, step)
        if kind == "grad-map-sq":
            return h2
        if not trajectory.dense:
            raise ValueError("running means need a dense trajectory")
        return np.cumsum(h2) / np.arange(1, h2.size + 1)
    opt = suite.optimum()
    if opt is None:
        raise ValueError(f"metric {kind!r} needs a suite with a known optimum")
    x_star, f_star = opt
    if kind == "dist-sq":
        return np.sum((trajectory.iterates - x_star) ** 2, axis=1)
    if kind == "suboptimality":
        return suite.value(trajectory.iterates) - f_star
    if kind == "averaged-suboptimality":
        return suite.value(weighted_average_path(trajectory, step)) - f_star
    raise ValueError(f"unknown metric kind {kind!r}")


def metric_series(kind: str, trajectory: Trajectory, config: RunConfig, times=None) -> MetricSeries:
    vals = metric_path(kind, trajectory, config)
    series = MetricSeries(trajectory.times, vals, 1, kind)
    trajectory.metrics[kind] = vals
    return series if times is None else series.at(np.asarray(times))


def empirical_R(trajectory: Trajectory, suite: ObjectiveSuite) -> float:
    """Largest squared distance to the optimum seen along the run."""
    x_star, _ = suite.optimum()
    return float(np.max(np.sum((trajectory.iterates - x_star) ** 2, axis=1)))


# ensembles and rate fits -----------------------------------------------------


def ensemble_mean(series_list: Sequence[MetricSeries]) -> MetricSeries:
    if not series_list:
        raise ValueError("need at least one series")
    t0 = series_list[0].times
    kinds = {s.value_kind for s in series_list}
    for s in series_list[1:]:
        if s.times.shape != t0.shape or np.any(s.times != t0):
            raise ValueError("series live on different time grids")
    if len(kinds) != 1:
        raise ValueError("cannot average different metric kinds")
    V = np.stack([s.values for s in series_list])
    k = len(series_list)
    se = V.std(axis=0, ddof=1) / math.sqrt(k) if k > 1 else np.full(t0.shape, np.inf)
    return MetricSeries(t0.copy(), V.mean(axis=0), k, kinds.pop(), se)


def log_spaced_times(t_min: int, t_max: int, per_decade: int = 20) -> np.ndarray:
    if not 1 <= t_min < t_max:
        raise ValueError("need 1 <= t_min < t_max")
    count = int(math.ceil(per_decade * math.log10(t_max / t_min))) + 1
    return np.unique(np.round(np.logspace(math.log10(t_min), math.log10(t_max), count)).astype(np.int64))


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r_squared: float

    def __iter__(self):
        return iter((self.slope, self.intercept, self.r_squared))


def fit_rate(series: MetricSeries, t_min: float, t_max: float) -> RateFit:
    """Least-squares slope of ``log(value)`` against ``log(t)`` inside the window."""
    mask = (series.times >= t_min) & (series.times <= t_max)
    idx = np.flatnonzero(mask)
    if idx.size < 10:
        raise ValueError(f"need >= 10 samples in [{t_min}, {t_max}], found {idx.size}")
    if np.any(series.times[idx] <= 0):
        raise ValueError("rate fits need positive times")
    bad = idx[series.values[idx] <= 0]
    if bad.size:
        raise ValueError(f"non-positive value {series.values[bad[0]]} at index {bad[0]} (t={series.times[bad[0]]})")
    lx = np.log(series.times[idx].astype(float))
    ly = np.log(series.values[idx])
    A = np.column_stack([lx, np.ones_like(lx)])
    (slope, intercept), *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return RateFit(float(slope), float(intercept), r2)


def neighborhood_radius(n, G, C, L, mu, eta, q=None) -> float:
    """Asymptotic bound on ``E||x(t) - x*||^2`` under constant step ``eta``.

    With ``q=None`` the bias term is dropped (diminishing-bias variant).
    """
    if not (mu > 0 and G > 0 and C > 0 and L > 0 and eta > 0):
        raise ValueError("constants must be positive")
    if eta >= 1.0 / mu:
        raise ValueError(f"eta={eta} must be below 1/mu={1.0 / mu}")
    r = n**2 * G * (1 + 2 * math.sqrt(C)) * eta / mu + 2 * n**4 * C * G * L**2 * eta**2 / mu**2
    if q is not None:
        if q < 0:
            raise ValueError("q must be >= 0")
        r += 2 * n**2 * q**2 / mu**2
    return float(r)


# brute-force projection oracles ---------------------------------------------


def _enumerate_simplex(y: np.ndarray) -> np.ndarray:
    d = y.size
    best, best_dist = None, np.inf
    for k in range(1, d + 1):
        for support in itertools.combinations(range(d), k):
            s = list(support)
            x = np.zeros(d)
            x[s] = y[s] - (y[s].sum() - 1.0) / k
            if np.all(x[s] >= 0):
                dist = np.sum((x - y) ** 2)
                if dist < best_dist:
                    best, best_dist = x, dist
    return best


def _enumerate_box(y: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    # each coordinate sits at its lower bound, upper bound, or stays free
    d = y.size
    best, best_dist = None, np.inf
    for pattern in itertools.product((0, 1, 2), repeat=d):
        p = np.array(pattern)
        x = np.where(p == 0, lo, np.where(p == 1, hi, y))
        if np.any(~np.isfinite(x)) or np.any(x < lo) or np.any(x > hi):
            continue
        dist = np.sum((x - y) ** 2)
        if dist < best_dist:
            best, best_dist = x, dist
    return best


def brute_force_project(fset: FeasibleSet, y, mode: str = "enumerate") -> np.ndarray:
    """Independent projection oracle.

    ``enumerate`` tries every active set (simplex supports, box bound patterns)
    and needs ``d <= 5``; ``closed-form`` covers whole-space, box and ball.
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (fset.dimension,):
        raise ValueError("dimension mismatch")
    if mode == "enumerate":
        if fset.dimension > 5:
            raise ValueError("enumeration oracle is limited to d <= 5")
        if fset.kind == "simplex":
            return _enumerate_simplex(y)
        if fset.kind == "box":
            return _enumerate_box(y, fset.lower, fset.upper)
        raise ValueError(f"enumeration mode does not support {fset.kind!r}")
    if mode == "closed-form":
        if fset.kind == "whole-space":
            return y.copy()
        if fset.kind == "box":
            return np.minimum(np.maximum(y, fset.lower), fset.upper)
        if fset.kind == "l2-ball":
            diff = y - fset.center
            norm = math.sqrt(float(diff @ diff))
            return y.copy() if norm <= fset.radius else fset.center + diff * (fset.radius / norm)
        raise ValueError(f"closed-form mode does not support {fset.kind!r}")
    raise ValueError(f"unknown oracle mode {mode!r}")
