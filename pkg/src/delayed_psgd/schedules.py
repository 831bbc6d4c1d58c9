"""Deterministic time-indexed sequences: step sizes, bias bounds, smoothing radii.

All schedules are immutable and evaluate on integer times ``t >= 0`` (scalars or
integer arrays).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Union

import numpy as np

Kappa = Union[float, Fraction]


def as_kappa(value) -> Kappa:
    """Normalize a delay-scale parameter.

    Strings such as ``"1/2"`` and ``Fraction`` inputs stay exact; floats stay floats.
    """
    if isinstance(value, str):
        value = Fraction(value)
    if isinstance(value, Fraction):
        kappa: Kappa = value
    else:
        kappa = float(value)
    if not 0 < kappa < 1:
        raise ValueError(
            f"kappa must satisfy 0 < kappa < 1 (scaled delay tau >= kappa*t); got {value}"
        )
    return kappa


def ceil_kappa_t(kappa: Kappa, t):
    """Return ``ceil(kappa * t)`` for integer ``t`` (scalar or array).

    Rational ``kappa`` uses exact integer arithmetic so lattice points such as
    ``kappa*t == 3`` never round up to 4.
    """
    if isinstance(kappa, Fraction):
        num, den = kappa.numerator, kappa.denominator
        if np.ndim(t) == 0:
            return -((-num * int(t)) // den)
        t = np.asarray(t, dtype=np.int64)
        return -((-num * t) // den)
    if np.ndim(t) == 0:
        return int(math.ceil(kappa * int(t)))
    return np.ceil(kappa * np.asarray(t, dtype=np.float64)).astype(np.int64)


@dataclass(frozen=True)
class StepSizeSchedule:
    """Step size eta(t).

    kind is one of ``constant`` (uses ``eta``), ``power`` (``eta0 / (t+1)**alpha``)
    or ``custom`` (``table[t]``, held at the last entry beyond the table).
    """

    kind: str
    eta: float = 0.0
    eta0: float = 0.0
    alpha: float = 0.0
    table: tuple = field(default=())

    def __post_init__(self):
        if self.kind == "constant":
            if not self.eta > 0:
                raise ValueError(f"constant step size must be positive, got {self.eta}")
        elif self.kind == "power":
            if not self.eta0 > 0:
                raise ValueError(f"eta0 must be positive, got {self.eta0}")
            if not 0 < self.alpha <= 1:
                raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        elif self.kind == "custom":
            tab = np.asarray(self.table, dtype=float)
            if tab.ndim != 1 or tab.size == 0:
                raise ValueError("custom step table must be a non-empty sequence")
            if np.any(tab <= 0) or np.any(np.diff(tab) > 0):
                raise ValueError("custom step table must be positive and non-increasing")
            object.__setattr__(self, "table", tuple(float(v) for v in tab))
        else:
            raise ValueError(f"unknown step size kind {self.kind!r}")

    @classmethod
    def constant(cls, eta: float) -> "StepSizeSchedule":
        return cls("constant", eta=float(eta))

    @classmethod
    def power(cls, eta0: float, alpha: float) -> "StepSizeSchedule":
        return cls("power", eta0=float(eta0), alpha=float(alpha))

    @classmethod
    def custom(cls, table) -> "StepSizeSchedule":
        return cls("custom", table=tuple(table))

    def __call__(self, t):
        scalar = np.ndim(t) == 0
        tt = np.asarray(t)
        if np.any(tt < 0):
            raise ValueError("step size is defined for t >= 0 only")
        if self.kind == "constant":
            out = np.full(tt.shape, self.eta)
        elif self.kind == "power":
            out = self.eta0 / (tt.astype(float) + 1.0) ** self.alpha
        else:
            tab = np.asarray(self.table)
            out = tab[np.minimum(tt.astype(np.int64), tab.size - 1)]
        return float(out) if scalar else out

    def to_dict(self) -> dict:
        if self.kind == "constant":
            return {"kind": "constant", "eta": self.eta}
        if self.kind == "power":
            return {"kind": "power", "eta0": self.eta0, "alpha": self.alpha}
        return {"kind": "custom", "table": list(self.table)}


@dataclass(frozen=True)
class DecaySchedule:
    """Non-increasing sequence ``scale / (t+1)**beta``.

    Used both for the declared estimator bias q(t) and the smoothing radius u(t).
    ``kind`` is ``zero``, ``constant`` or ``power``; ``constant`` is the power law
    with ``beta = 0``.
    """

    kind: str
    scale: float = 0.0
    beta: float = 0.0

    def __post_init__(self):
        if self.kind not in ("zero", "constant", "power"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.scale < 0 or not math.isfinite(self.scale):
            raise ValueError(f"schedule scale must be finite and >= 0, got {self.scale}")
        if self.beta < 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if self.kind == "zero":
            object.__setattr__(self, "scale", 0.0)
            object.__setattr__(self, "beta", 0.0)
        elif self.kind == "constant":
            object.__setattr__(self, "beta", 0.0)

    @classmethod
    def zero(cls) -> "DecaySchedule":
        return cls("zero")

    @classmethod
    def constant(cls, value: float) -> "DecaySchedule":
        return cls("constant", scale=float(value))

    @classmethod
    def power(cls, scale: float, beta: float) -> "DecaySchedule":
        return cls("power", scale=float(scale), beta=float(beta))

    def scaled(self, factor: float) -> "DecaySchedule":
        if self.kind == "zero" or factor == 0:
            return DecaySchedule.zero()
        return DecaySchedule(self.kind, scale=self.scale * factor, beta=self.beta)

    def __call__(self, t):
        scalar = np.ndim(t) == 0
        tt = np.asarray(t, dtype=float)
        if np.any(tt < 0):
            raise ValueError("schedule is defined for t >= 0 only")
        out = self.scale / (tt + 1.0) ** self.beta
        return float(out) if scalar else out


# Bias q(t) and smoothing u(t) share one shape.
BiasSchedule = DecaySchedule
SmoothingSchedule = DecaySchedule


def eta(schedule: StepSizeSchedule, t):
    return schedule(t)


def p(schedule: StepSizeSchedule, kappa: Kappa, t):
    """Delayed-step proxy ``eta(ceil(kappa * t))``."""
    kappa = as_kappa(kappa)
    return schedule(ceil_kappa_t(kappa, t))


def ratio_limit_estimate(schedule: StepSizeSchedule, kappa: Kappa, horizon: int) -> float:
    """``eta(ceil(kappa*T)) / eta(T)``; tends to ``(1/kappa)**alpha`` for power schedules."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    kappa = as_kappa(kappa)
    return schedule(ceil_kappa_t(kappa, horizon)) / schedule(horizon)
