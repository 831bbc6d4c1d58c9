"""Stale-timestamp generators satisfying the scaled-delay contract.

Two modes are offered:

* direct sampling: ``tau_i(t)`` is drawn independently for every ``(i, t)`` from a
  delay distribution truncated to the window ``[ceil(kappa t), t]``;
* buffered: agents emit one message per tick, messages travel with a sampled
  transit delay, and the server uses the newest message that has arrived.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .schedules import Kappa, as_kappa, ceil_kappa_t

KINDS = ("zero", "fixed", "uniform-scaled", "geometric-scaled")
MODES = ("direct", "buffered")


@dataclass(frozen=True)
class DelayModel:
    kind: str
    kappa: Kappa
    D: int = 0
    D_max: int = 0
    mean: float = 0.0
    cap_by_kappa: bool = False
    second_moment_C: Optional[float] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown delay kind {self.kind!r}; expected one of {KINDS}")
        object.__setattr__(self, "kappa", as_kappa(self.kappa))
        if self.kind == "fixed" and (self.D < 0 or int(self.D) != self.D):
            raise ValueError("fixed delay D must be a non-negative integer")
        if self.kind == "uniform-scaled" and (self.D_max < 0 or int(self.D_max) != self.D_max):
            raise ValueError("D_max must be a non-negative integer")
        if self.kind == "geometric-scaled" and not self.mean > 0:
            raise ValueError("geometric delay mean must be positive")
        object.__setattr__(self, "D", int(self.D))
        object.__setattr__(self, "D_max", int(self.D_max))
        if self.second_moment_C is None:
            object.__setattr__(self, "second_moment_C", max(untruncated_second_moment(self), 1e-12))
        elif not self.second_moment_C > 0:
            raise ValueError("declared second moment C must be positive")

    @property
    def C(self) -> float:
        return self.second_moment_C

    def to_dict(self) -> dict:
        params = {
            "zero": {},
            "fixed": {"D": self.D},
            "uniform-scaled": {"D_max": self.D_max},
            "geometric-scaled": {"mean": self.mean, "cap_by_kappa": self.cap_by_kappa},
        }[self.kind]
        return {"kind": self.kind, "kappa": _kappa_json(self.kappa), "params": params, "C": self.second_moment_C}


def _kappa_json(kappa):
    return str(kappa) if not isinstance(kappa, float) else kappa


def untruncated_second_moment(model: DelayModel) -> float:
    """``E[delay^2]`` before window truncation; an upper bound for every t."""
    if model.kind == "zero":
        return 0.0
    if model.kind == "fixed":
        return float(model.D**2)
    if model.kind == "uniform-scaled":
        D = model.D_max
        return D * (2 * D + 1) / 6.0
    p = 1.0 / (1.0 + model.mean)
    return (1 - p) * (2 - p) / p**2


def window(model: DelayModel, t: int) -> int:
    """Largest admissible delay at time ``t``: ``t - ceil(kappa t)``."""
    return int(t) - ceil_kappa_t(model.kappa, int(t))


def delay_pmf(model: DelayModel, t: int):
    """Exact distribution of ``t - tau(t)`` in direct mode: ``(support, probabilities)``."""
    if t < 0:
        raise ValueError("t must be >= 0")
    W = window(model, t)
    if model.kind == "zero":
        return np.array([0]), np.array([1.0])
    if model.kind == "fixed":
        return np.array([min(model.D, W)]), np.array([1.0])
    if model.kind == "uniform-scaled":
        m = min(model.D_max, W)
        return np.arange(m + 1), np.full(m + 1, 1.0 / (m + 1))
    p = 1.0 / (1.0 + model.mean)
    k = np.arange(W + 1)
    pk = p * (1 - p) ** k
    if model.cap_by_kappa:
        pk[-1] = (1 - p) ** W  # tail mass piles onto the cap
    else:
        pk = pk / pk.sum()
    return k, pk


def exact_delay_second_moment(model: DelayModel, t: int) -> float:
    k, pk = delay_pmf(model, t)
    return float(np.sum(pk * k.astype(float) ** 2))


def _sample_delays(model: DelayModel, W: Optional[int], rng: np.random.Generator, size: int) -> np.ndarray:
    """Delays capped at ``W`` (``None`` means no cap)."""
    if model.kind == "zero":
        return np.zeros(size, dtype=np.int64)
    if model.kind == "fixed":
        D = model.D if W is None else min(model.D, W)
        return np.full(size, D, dtype=np.int64)
    if model.kind == "uniform-scaled":
        m = model.D_max if W is None else min(model.D_max, W)
        return rng.integers(0, m + 1, size=size)
    p = 1.0 / (1.0 + model.mean)
    log_q = math.log1p(-p)
    if W is None:
        return rng.geometric(p, size=size) - 1
    if model.cap_by_kappa:
        return np.minimum(rng.geometric(p, size=size) - 1, W)
    top = -math.expm1((W + 1) * log_q)  # P(delay <= W)
    u = rng.uniform(0.0, top, size=size)
    k = np.ceil(np.log1p(-u) / log_q) - 1
    return np.clip(k, 0, W).astype(np.int64)


def sample_taus(model: DelayModel, t: int, rng: np.random.Generator, n: int) -> np.ndarray:
    """Independent stamps for ``n`` agents at time ``t``; each lies in ``[ceil(kappa t), t]``."""
    if t < 0:
        raise ValueError("t must be >= 0")
    return int(t) - _sample_delays(model, window(model, t), rng, n)


def sample_tau(model: DelayModel, i: int, t: int, rng: np.random.Generator) -> int:
    return int(sample_taus(model, t, rng, 1)[0])


def sample_transit(model: DelayModel, rng: np.random.Generator, n: int) -> np.ndarray:
    """Raw transit delays for buffered mode, without window truncation."""
    return _sample_delays(model, None, rng, n)


class BufferState:
    """Per-agent record of which stamped messages have reached the server.

    A message stamped ``s`` with transit delay ``delta`` arrives at
    ``s + 1 + delta``, so nothing computed at tick ``t`` is usable before ``t + 1``.
    With ``enforce_deadline`` the server also force-delivers the message stamped
    ``min(ceil(kappa t), t - 1)`` so staleness never exceeds the scaled window.
    """

    def __init__(self, n: int, kappa: Optional[Kappa] = None, enforce_deadline: bool = True):
        self.n = n
        self.kappa = None if kappa is None else as_kappa(kappa)
        self.enforce_deadline = enforce_deadline and self.kappa is not None
        self._pending = [[] for _ in range(n)]
        self._latest = [-1] * n
        self._now = [-1] * n

    def push(self, i: int, stamp: int, arrival: int) -> None:
        if arrival <= stamp:
            raise ValueError("a message cannot arrive before or at the tick it was computed")
        heapq.heappush(self._pending[i], (int(arrival), int(stamp)))

    def latest(self, i: int) -> int:
        return self._latest[i]


def buffered_tau(state: BufferState, i: int, t: int) -> int:
    """Newest stamp from agent ``i`` that has arrived by ``t``, or -1 if none.

    ``t`` must be non-decreasing across calls for a given agent.
    """
    if t < state._now[i]:
        raise ValueError("buffer queries must move forward in time")
    state._now[i] = t
    heap = state._pending[i]
    latest = state._latest[i]
    while heap and heap[0][0] <= t:
        _, stamp = heapq.heappop(heap)
        latest = max(latest, stamp)
    if state.enforce_deadline and t >= 1:
        latest = max(latest, min(ceil_kappa_t(state.kappa, t), t - 1))
    state._latest[i] = latest
    return latest
