"""Server loop: aggregate stale agent estimates and take a projected step.

Randomness is split into named streams (``estimator``, ``delay``) derived from the
master seed. Each stream hands out a fresh Philox generator per tick ``t``, keyed
by ``(seed, stream, t)``, so any tick can be replayed in isolation and changing
the delay model never perturbs the estimator noise.

In direct mode the estimate applied at tick ``t`` for agent ``i`` is evaluated at
the stale iterate ``x(tau_i(t))`` with the tick-``t`` estimator randomness (row
``i`` of the block). In buffered mode every agent computes a message at each tick
``s`` with the tick-``s`` randomness, and the server later applies whichever
message is newest, i.e. randomness is keyed by the stamp.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import delays, sets
from .delays import BufferState, DelayModel
from .estimators import GradientSource, NumericalFailure, estimate_agents
from .objectives import ObjectiveSuite
from .schedules import StepSizeSchedule
from .sets import FeasibleSet

STREAMS = {"estimator": 1, "delay": 2, "index": 3}
DENSE_LIMIT = 100_000
FEASIBILITY_TOL = 1e-9


class InvariantViolation(RuntimeError):
    pass


class SimulationError(RuntimeError):
    """A run aborted; ``trajectory`` holds everything recorded before the failure."""

    def __init__(self, message, trajectory=None, t=None, agent=None):
        super().__init__(message)
        self.trajectory = trajectory
        self.t = t
        self.agent = agent


class StreamFactory:
    """Per-tick generators for each named stream of one run."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._keys = {
            name: np.random.SeedSequence([self.seed & (2**64 - 1), code]).generate_state(2, np.uint64)
            for name, code in STREAMS.items()
        }

    def at(self, name: str, t: int) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=self._keys[name], counter=[0, int(t), 0, 0]))


@dataclass
class RunConfig:
    suite: ObjectiveSuite
    fset: FeasibleSet
    source: GradientSource
    delay: DelayModel
    step: StepSizeSchedule
    horizon: int
    x0: np.ndarray
    seed: int = 0
    mode: str = "direct"
    record_agent_estimates: bool = False
    dense_limit: int = DENSE_LIMIT

    def __post_init__(self):
        self.x0 = np.asarray(self.x0, dtype=float)
        d = self.suite.d
        if self.fset.dimension != d or self.x0.shape != (d,):
            raise ValueError(f"dimension mismatch: suite d={d}, set d={self.fset.dimension}, x0 {self.x0.shape}")
        if not sets.contains(self.fset, self.x0, FEASIBILITY_TOL):
            raise ValueError("x0 must lie in the feasible set")
        if int(self.horizon) != self.horizon or self.horizon < 0:
            raise ValueError("horizon must be a non-negative integer")
        self.horizon = int(self.horizon)
        if self.mode not in delays.MODES:
            raise ValueError(f"mode must be one of {delays.MODES}")

    @property
    def randomness_keying(self) -> str:
        return "(agent, t)" if self.mode == "direct" else "(agent, stamp)"

    def constants(self) -> dict:
        out = self.suite.describe()
        out.update(
            G=self.source.second_moment_G,
            C=self.delay.second_moment_C,
            kappa=str(self.delay.kappa),
            seed=self.seed,
            mode=self.mode,
            randomness_keying=self.randomness_keying,
        )
        return out


@dataclass
class Trajectory:
    horizon: int
    n: int
    d: int
    times: np.ndarray  # ticks at which iterates are stored
    iterates: np.ndarray  # (len(times), d)
    step_times: np.ndarray  # ticks at which per-step records are stored
    applied_gradients: np.ndarray  # (len(step_times), d)
    stale_stamps: np.ndarray  # (n, len(step_times))
    step_sizes: np.ndarray
    agent_sq_norms: np.ndarray  # sum_i ||g_i||^2 per step
    agent_estimates: Optional[np.ndarray] = None  # (len(step_times), n, d)
    metrics: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def dense(self) -> bool:
        return self.times.size == self.horizon + 1

    def iterate(self, t: int) -> np.ndarray:
        if self.dense:
            return self.iterates[t]
        idx = np.searchsorted(self.times, t)
        if idx >= self.times.size or self.times[idx] != t:
            raise KeyError(f"iterate {t} was not recorded (strided trajectory)")
        return self.iterates[idx]


def record_times(T: int, dense_limit: int = DENSE_LIMIT, per_decade: int = 200) -> np.ndarray:
    if T <= dense_limit:
        return np.arange(T + 1)
    pts = np.unique(np.round(np.logspace(0, math.log10(T), int(per_decade * math.log10(T)) + 1)).astype(np.int64))
    return np.unique(np.concatenate([[0], pts, [T]]))


def aggregate(per_agent_estimates) -> np.ndarray:
    """Sum of the agents' (possibly stale) estimates; silent agents send zeros."""
    est = [np.asarray(g, dtype=float) for g in per_agent_estimates]
    if not est:
        raise ValueError("need at least one agent estimate")
    dims = {g.shape for g in est}
    if len(dims) != 1:
        raise ValueError(f"agent estimates disagree in shape: {sorted(dims)}")
    return np.sum(np.stack(est), axis=0)


def projected_update(fset: FeasibleSet, x, g, eta: float) -> np.ndarray:
    return sets.project(fset, np.asarray(x, dtype=float) - eta * np.asarray(g, dtype=float))


class EngineState:
    """Mutable state of a single run; never shared across runs."""

    def __init__(self, config: RunConfig):
        self.config = config
        c = config
        n, d, T = c.suite.n, c.suite.d, c.horizon
        self.n, self.d = n, d
        self.streams = StreamFactory(c.seed)
        self.X = np.empty((T + 1, d))
        self.X[0] = c.x0
        self.t = 0
        self.times = record_times(T, c.dense_limit)
        self.step_times = self.times[self.times < T]
        self._step_index = {int(s): k for k, s in enumerate(self.step_times)} if not self.dense else None
        m = self.step_times.size
        self.G = np.zeros((m, d))
        self.stamps = np.zeros((n, m), dtype=np.int64)
        self.etas = np.zeros(m)
        self.sq = np.zeros(m)
        self.est = np.zeros((m, n, d)) if c.record_agent_estimates else None
        if c.mode == "buffered":
            self.buffer = BufferState(n, c.delay.kappa)
            self.messages = [dict() for _ in range(n)]

    @property
    def dense(self) -> bool:
        return self.times.size == self.config.horizon + 1

    def _slot(self, t: int):
        if self._step_index is None:
            return t
        return self._step_index.get(t)

    def trajectory(self, upto: Optional[int] = None) -> Trajectory:
        upto = self.t if upto is None else upto
        keep_x = self.times <= upto
        keep_s = self.step_times < upto
        c = self.config
        return Trajectory(
            horizon=upto,
            n=self.n,
            d=self.d,
            times=self.times[keep_x],
            iterates=self.X[self.times[keep_x]].copy(),
            step_times=self.step_times[keep_s],
            applied_gradients=self.G[keep_s].copy(),
            stale_stamps=self.stamps[:, keep_s].copy(),
            step_sizes=self.etas[keep_s].copy(),
            agent_sq_norms=self.sq[keep_s].copy(),
            agent_estimates=None if self.est is None else self.est[keep_s].copy(),
            meta=c.constants(),
        )


def stale_estimates(state: EngineState, t: int):
    """Stamps ``tau_i(t)`` and the per-agent estimates the server applies at ``t``."""
    c = state.config
    n = state.n
    if c.mode == "direct":
        taus = delays.sample_taus(c.delay, t, state.streams.at("delay", t), n)
        est = estimate_agents(c.source, c.suite, state.X[taus], t, state.streams.at("estimator", t))
        return taus, est
    fresh = estimate_agents(c.source, c.suite, np.tile(state.X[t], (n, 1)), t, state.streams.at("estimator", t))
    transit = delays.sample_transit(c.delay, state.streams.at("delay", t), n)
    taus = np.empty(n, dtype=np.int64)
    est = np.zeros((n, state.d))
    for i in range(n):
        state.messages[i][t] = fresh[i]
        state.buffer.push(i, t, t + 1 + int(transit[i]))
        tau = delays.buffered_tau(state.buffer, i, t)
        taus[i] = tau
        if tau >= 0:
            est[i] = state.messages[i][tau]
            for s in [s for s in state.messages[i] if s < tau]:
                del state.messages[i][s]
    return taus, est


def step(state: EngineState, t: Optional[int] = None) -> np.ndarray:
    """Advance the run by one tick and return ``x(t+1)``."""
    c = state.config
    t = state.t if t is None else t
    if t != state.t:
        raise ValueError(f"engine is at tick {state.t}, cannot step tick {t}")
    x = state.X[t]
    if not sets.contains(c.fset, x, FEASIBILITY_TOL):
        raise InvariantViolation(f"iterate x({t}) left the feasible set")
    taus, est = stale_estimates(state, t)
    g = aggregate(est)
    eta_t = c.step(t)
    x_next = projected_update(c.fset, x, g, eta_t)
    if not np.all(np.isfinite(x_next)):
        raise NumericalFailure("non-finite iterate", t=t)
    state.X[t + 1] = x_next
    k = state._slot(t)
    if k is not None:
        state.G[k] = g
        state.stamps[:, k] = taus
        state.etas[k] = eta_t
        state.sq[k] = float(np.sum(est * est))
        if state.est is not None:
            state.est[k] = est
    state.t = t + 1
    return x_next


def run(config: RunConfig) -> Trajectory:
    """Execute ``config.horizon`` ticks. Bit-reproducible given the seed."""
    state = EngineState(config)
    T = config.horizon
    try:
        for t in range(T):
            step(state, t)
        if T > 0 and not sets.contains(config.fset, state.X[T], FEASIBILITY_TOL):
            raise InvariantViolation(f"iterate x({T}) left the feasible set")
    except (NumericalFailure, InvariantViolation, FloatingPointError) as exc:
        traj = state.trajectory(state.t)
        raise SimulationError(
            f"run aborted at t={state.t}: {exc}", traj, t=state.t, agent=getattr(exc, "agent", None)
        ) from exc
    return state.trajectory(T)


def replay_estimates(config: RunConfig, trajectory: Trajectory, t: int) -> np.ndarray:
    """Recompute the per-agent estimates applied at tick ``t`` from recorded data alone."""
    if not trajectory.dense:
        raise ValueError("replay needs a dense trajectory")
    streams = StreamFactory(config.seed)
    taus = trajectory.stale_stamps[:, t]
    n, d = trajectory.n, trajectory.d
    if config.mode == "direct":
        pts = trajectory.iterates[taus]
        return estimate_agents(config.source, config.suite, pts, t, streams.at("estimator", t))
    out = np.zeros((n, d))
    for i, tau in enumerate(taus):
        if tau < 0:
            continue
        pts = np.tile(trajectory.iterates[tau], (n, 1))
        out[i] = estimate_agents(config.source, config.suite, pts, int(tau), streams.at("estimator", int(tau)))[i]
    return out
