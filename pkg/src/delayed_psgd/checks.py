"""Property and certification suites behind ``delayed-psgd check``.

Every check returns a :class:`CheckResult`; a failing result carries the first
counterexample found so it can be dumped verbatim.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import analysis, delays, engine, sets
from .delays import DelayModel
from .estimators import GradientSource, bias_bound, certify_second_moment, conditional_mean, second_moment
from .objectives import huber_suite, sine_quadratic_suite, strongly_convex_quadratic_suite
from .schedules import DecaySchedule, StepSizeSchedule, ceil_kappa_t
from .sets import FeasibleSet

SE_SLACK = 5.0


@dataclass
class CheckResult:
    name: str
    passed: bool
    cases: int
    detail: str = ""
    counterexample: Optional[dict] = field(default=None)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        text = f"[{status}] {self.name} ({self.cases} cases)"
        if self.detail:
            text += f": {self.detail}"
        if self.counterexample is not None:
            text += f"\n    counterexample: {self.counterexample}"
        return text


def _first(mask: np.ndarray) -> Optional[int]:
    idx = np.flatnonzero(mask)
    return int(idx[0]) if idx.size else None


# projections -----------------------------------------------------------------


def default_sets(d: int = 4) -> list:
    return [
        FeasibleSet.whole_space(d),
        FeasibleSet.box(-np.ones(d), 2 * np.ones(d)),
        FeasibleSet.box(np.r_[-1.0, np.full(d - 1, -np.inf)], np.r_[np.inf, np.full(d - 1, 0.5)]),
        FeasibleSet.l2_ball(np.linspace(-0.5, 0.5, d), 1.5),
        FeasibleSet.simplex(d),
    ]


def check_projection_properties(rng, n_cases: int = 100_000, tol: float = 1e-9, fsets=None) -> list:
    """Idempotence, nonexpansiveness and the variational inequality on random inputs."""
    fsets = default_sets() if fsets is None else fsets
    per = int(math.ceil(n_cases / len(fsets)))
    out = []
    idem_bad = nonexp_bad = vi_bad = None
    worst = {"idempotence": 0.0, "nonexpansive": 0.0, "variational": 0.0}
    for fs in fsets:
        d = fs.dimension
        scale = rng.choice([0.1, 1.0, 10.0], size=(per, 1))
        y = rng.standard_normal((per, d)) * scale * 3
        w = rng.standard_normal((per, d)) * scale * 3
        py, pw = sets.project(fs, y), sets.project(fs, w)
        ppy = sets.project(fs, py)
        e1 = np.max(np.abs(ppy - py), axis=1)
        k = _first(e1 > tol)
        if k is not None and idem_bad is None:
            idem_bad = {"set": fs.to_dict(), "y": y[k].tolist(), "error": float(e1[k])}
        worst["idempotence"] = max(worst["idempotence"], float(e1.max()))
        e2 = np.linalg.norm(py - pw, axis=1) - np.linalg.norm(y - w, axis=1)
        k = _first(e2 > tol)
        if k is not None and nonexp_bad is None:
            nonexp_bad = {"set": fs.to_dict(), "y": y[k].tolist(), "w": w[k].tolist(), "excess": float(e2[k])}
        worst["nonexpansive"] = max(worst["nonexpansive"], float(e2.max()))
        # <y - Pi(y), s - Pi(y)> <= 0 for feasible s; feasible points are projections of random draws
        s = sets.project(fs, rng.standard_normal((per, d)) * scale * 3)
        e3 = np.sum((y - py) * (s - py), axis=1) / np.maximum(1.0, np.linalg.norm(y - py, axis=1))
        k = _first(e3 > tol)
        if k is not None and vi_bad is None:
            vi_bad = {"set": fs.to_dict(), "y": y[k].tolist(), "s": s[k].tolist(), "inner": float(e3[k])}
        worst["variational"] = max(worst["variational"], float(e3.max()))
    total = per * len(fsets)
    out.append(CheckResult("projection idempotence", idem_bad is None, total, f"max error {worst['idempotence']:.2e}", idem_bad))
    out.append(CheckResult("projection nonexpansiveness", nonexp_bad is None, total, f"max excess {worst['nonexpansive']:.2e}", nonexp_bad))
    out.append(CheckResult("projection variational inequality", vi_bad is None, total, f"max inner {worst['variational']:.2e}", vi_bad))
    return out


def check_simplex_oracle(rng, n_points: int = 1000, tol: float = 1e-8) -> CheckResult:
    """Sort-based simplex projection against the exhaustive-support oracle, d <= 5."""
    worst, bad = 0.0, None
    for k in range(n_points):
        d = 1 + k % 5
        y = rng.standard_normal(d) * rng.choice([0.1, 1.0, 5.0])
        fs = FeasibleSet.simplex(d)
        err = float(np.max(np.abs(sets.project(fs, y) - analysis.brute_force_project(fs, y, "enumerate"))))
        worst = max(worst, err)
        if err > tol and bad is None:
            bad = {"y": y.tolist(), "error": err}
    return CheckResult("simplex projection vs enumeration", bad is None, n_points, f"max error {worst:.2e}", bad)


# gradient mapping -------------------------------------------------------------


def check_gradient_mapping(rng, n_cases: int = 100_000, tol: float = 1e-9, fsets=None) -> list:
    """``||P||^2 <= <v, P> <= ||v||^2`` and 1-Lipschitz dependence on ``v``."""
    fsets = default_sets() if fsets is None else fsets
    per = int(math.ceil(n_cases / len(fsets)))
    bad_a = bad_b = None
    for fs in fsets:
        d = fs.dimension
        x = sets.project(fs, rng.standard_normal((per, d)) * 2)
        v = rng.standard_normal((per, d)) * rng.choice([0.1, 1.0, 10.0], size=(per, 1))
        w = v + rng.standard_normal((per, d))
        eta = rng.uniform(1e-3, 2.0, per)
        P = analysis.gradient_mapping(fs, x, v, eta)
        Q = analysis.gradient_mapping(fs, x, w, eta)
        pp, vp, vv = np.sum(P * P, 1), np.sum(v * P, 1), np.sum(v * v, 1)
        scale = np.maximum(1.0, vv)
        viol = np.maximum(pp - vp, vp - vv) / scale
        k = _first(viol > tol)
        if k is not None and bad_a is None:
            bad_a = {"set": fs.to_dict(), "x": x[k].tolist(), "v": v[k].tolist(), "eta": float(eta[k])}
        lip = np.linalg.norm(P - Q, axis=1) - np.linalg.norm(v - w, axis=1)
        k = _first(lip > tol * np.maximum(1.0, np.linalg.norm(v, axis=1)))
        if k is not None and bad_b is None:
            bad_b = {"set": fs.to_dict(), "x": x[k].tolist(), "v": v[k].tolist(), "w": w[k].tolist(), "eta": float(eta[k])}
    total = per * len(fsets)
    return [
        CheckResult("gradient mapping ||P||^2 <= <v,P> <= ||v||^2", bad_a is None, total, counterexample=bad_a),
        CheckResult("gradient mapping is 1-Lipschitz in v", bad_b is None, total, counterexample=bad_b),
    ]


# delays ----------------------------------------------------------------------


def default_delay_models() -> list:
    return [
        DelayModel("zero", "1/2"),
        DelayModel("fixed", "1/3", D=7),
        DelayModel("uniform-scaled", "1/2", D_max=10),
        DelayModel("geometric-scaled", 0.7, mean=4.0),
        DelayModel("geometric-scaled", "1/4", mean=20.0, cap_by_kappa=True),
    ]


def check_delay_bounds(rng, models=None, n_samples: int = 1_000_000, t_max: int = 100_000) -> CheckResult:
    """``ceil(kappa t) <= tau <= t`` on random ``(t, agent)`` draws.

    Buffered runs are held to ``min(ceil(kappa t), t - 1) <= tau <= t - 1``.
    """
    models = default_delay_models() if models is None else models
    per = int(math.ceil(n_samples / len(models)))
    bad = None
    for m in models:
        ts = rng.integers(0, t_max + 1, size=per // 8)
        ts[:64] = np.arange(64)  # always include the tiny-t edge cases
        for t in ts:
            taus = delays.sample_taus(m, int(t), rng, 8)
            lo = ceil_kappa_t(m.kappa, int(t))
            if np.any(taus < lo) or np.any(taus > t):
                bad = bad or {"model": m.to_dict(), "t": int(t), "taus": taus.tolist(), "lower": int(lo)}
    # buffered mode: a full run of the buffer with deadlines, t >= 1
    n_buf, T_buf = 4, 5000
    for m in models:
        state = delays.BufferState(n_buf, m.kappa)
        for t in range(T_buf):
            transit = delays.sample_transit(m, rng, n_buf)
            for i in range(n_buf):
                state.push(i, t, t + 1 + int(transit[i]))
                tau = delays.buffered_tau(state, i, t)
                # a tick-t message cannot be used at t, so the floor is capped at t - 1
                lo = min(ceil_kappa_t(m.kappa, t), t - 1)
                if t >= 1 and not (lo <= tau <= t - 1):
                    bad = bad or {"model": m.to_dict(), "mode": "buffered", "t": t, "agent": i, "tau": tau}
    total = per // 8 * 8 * len(models) + n_buf * T_buf * len(models)
    return CheckResult("hard delay bound ceil(kappa t) <= tau <= t", bad is None, total, counterexample=bad)


def check_delay_certificate(models=None, t_max: int = 10_000) -> CheckResult:
    """Exact ``E[(t - tau)^2]`` never exceeds the declared C for ``t <= t_max``."""
    models = default_delay_models() if models is None else models
    bad, worst = None, 0.0
    for m in models:
        for t in range(t_max + 1):
            mom = delays.exact_delay_second_moment(m, t)
            worst = max(worst, mom / m.C)
            if mom > m.C * (1 + 1e-12):
                bad = {"model": m.to_dict(), "t": t, "second_moment": mom, "declared_C": m.C}
                break
        if bad:
            break
    return CheckResult(
        "delay second moment <= declared C", bad is None, len(models) * (t_max + 1), f"max ratio {worst:.4f}", bad
    )


# estimators ------------------------------------------------------------------


def default_estimator_cases(d: int = 5, n: int = 3):
    box = FeasibleSet.box(-2 * np.ones(d), 2 * np.ones(d))
    quad = strongly_convex_quadratic_suite(n, d, 1.0, 4.0, np.zeros(d), seed=3, domain=box)
    sine = sine_quadratic_suite(n, d, amplitude=0.5, frequency=2.0, seed=4, domain=box)
    hub = huber_suite(n, d, 0.5, np.zeros(d), domain=box)
    u = DecaySchedule.power(0.2, 0.5)
    cases = []
    for suite in (quad, sine, hub):
        L = suite.smoothness_L
        cases.append((suite, box, GradientSource.gaussian_two_point(u, L, d)))
        cases.append((suite, box, GradientSource.sphere_two_point(u, L)))
    cases.append((quad, box, GradientSource.additive_noise(0.5)))
    cases.append((quad, box, GradientSource.exact()))
    return cases


def check_estimator_bias(rng, cases=None, n_points: int = 100, sample_count: int = 100_000) -> CheckResult:
    """``||E g_i(x) - grad f_i(x)|| <= q(t) + 5 SE`` at random points, agents and ticks."""
    cases = default_estimator_cases() if cases is None else cases
    bad, worst, total = None, -math.inf, 0
    for suite, fs, source in cases:
        pts = sets.sample(fs, rng, n_points)
        for k, x in enumerate(pts):
            i = int(rng.integers(suite.n))
            t = int(rng.integers(0, 1000))
            mean, se = conditional_mean(source, suite, i, x, t, sample_count, rng)
            err = float(np.linalg.norm(mean - suite._agent(i).grad(x)))
            q = bias_bound(source, t)
            worst = max(worst, err - q - SE_SLACK * se)
            total += 1
            if err > q + SE_SLACK * se:
                bad = {"source": source.kind, "shift": source.shift, "agent": i, "t": t, "x": x.tolist(),
                       "bias": err, "declared_q": q, "se": se}
                break
        if bad:
            break
    return CheckResult("estimator bias <= q(t) + 5 SE", bad is None, total, f"max excess {worst:.3e}", bad)


def check_second_moment(rng, cases=None, n_points: int = 50, sample_count: int = 20_000) -> CheckResult:
    """Certified G dominates ``E||g_i(x)||^2`` within 5 relative SE."""
    cases = default_estimator_cases() if cases is None else cases
    bad, total, worst = None, 0, 0.0
    for suite, fs, source in cases:
        if source.second_moment_G is None:
            source = source.with_G(certify_second_moment(source, suite, fs, rng))
        pts = np.vstack([sets.sample(fs, rng, n_points), sets.extreme_points(fs)[:n_points]])
        for x in pts:
            i = int(rng.integers(suite.n))
            t = int(rng.integers(0, 1000))
            m, se = second_moment(source, suite, i, x, t, sample_count, rng)
            total += 1
            worst = max(worst, m / source.second_moment_G)
            if m > source.second_moment_G + SE_SLACK * se:
                bad = {"source": source.kind, "agent": i, "t": t, "x": x.tolist(), "moment": m,
                       "G": source.second_moment_G, "se": se}
                break
        if bad:
            break
    return CheckResult("second moment <= certified G", bad is None, total, f"max E||g||^2/G {worst:.3f}", bad)


# engine-level surrogates -----------------------------------------------------


def default_engine_config(seed: int = 0, horizon: int = 2000, mode: str = "direct") -> engine.RunConfig:
    d, n = 6, 4
    box = FeasibleSet.box(-3 * np.ones(d), 3 * np.ones(d))
    suite = strongly_convex_quadratic_suite(n, d, 1.0, 5.0, np.full(d, 0.3), seed=5, domain=box)
    source = GradientSource.additive_noise(0.5)
    source = source.with_G(certify_second_moment(source, suite, box, np.random.default_rng(0)))
    return engine.RunConfig(
        suite=suite,
        fset=box,
        source=source,
        delay=DelayModel("uniform-scaled", "1/2", D_max=6),
        step=StepSizeSchedule.power(0.05, 0.5),
        horizon=horizon,
        x0=np.full(d, 3.0),
        seed=seed,
        mode=mode,
    )


def check_aggregate_surrogate(configs) -> CheckResult:
    """``||sum_i g_i||^2 <= n sum_i ||g_i||^2`` at every recorded engine step."""
    bad, total = None, 0
    for cfg in configs:
        traj = engine.run(cfg)
        lhs = np.sum(traj.applied_gradients**2, axis=1)
        rhs = traj.n * traj.agent_sq_norms
        total += lhs.size
        k = _first(lhs > rhs * (1 + 1e-12) + 1e-300)
        if k is not None:
            bad = {"seed": cfg.seed, "mode": cfg.mode, "t": int(traj.step_times[k]), "lhs": float(lhs[k]), "rhs": float(rhs[k])}
            break
    return CheckResult("aggregate surrogate at every step", bad is None, total, counterexample=bad)


def check_staleness_bound(config_factory: Callable[[int], engine.RunConfig], seeds, checkpoints=None) -> CheckResult:
    """Ensemble ``E||x(t) - x(tau_i(t))||^2 <= n^2 G C p(t)^2`` within 5 SE."""
    trajs = [engine.run(config_factory(s)) for s in seeds]
    cfg = config_factory(seeds[0])
    T = cfg.horizon
    checkpoints = analysis.log_spaced_times(1, T - 1, 10) if checkpoints is None else np.asarray(checkpoints)
    n, G, C = cfg.suite.n, cfg.source.second_moment_G, cfg.delay.C
    bad, worst = None, 0.0
    for t in checkpoints:
        vals = []
        for tr in trajs:
            taus = tr.stale_stamps[:, t]
            taus = taus[taus >= 0]
            diffs = tr.iterates[t] - tr.iterates[taus]
            vals.append(np.mean(np.sum(diffs * diffs, axis=1)) if taus.size else 0.0)
        vals = np.asarray(vals)
        mean = vals.mean()
        se = vals.std(ddof=1) / math.sqrt(vals.size) if vals.size > 1 else 0.0
        p = float(cfg.step(ceil_kappa_t(cfg.delay.kappa, int(t))))
        bound = n**2 * G * C * p**2
        worst = max(worst, mean / bound)
        if mean > bound + SE_SLACK * se:
            bad = {"t": int(t), "mean": float(mean), "bound": bound, "se": float(se)}
            break
    return CheckResult(
        "staleness bound n^2 G C p(t)^2", bad is None, len(checkpoints) * len(seeds), f"max ratio {worst:.3e}", bad
    )


# suites ----------------------------------------------------------------------

SUITES = ("projections", "gradient-mapping", "delays", "estimators", "engine")


def run_suite(name: str, rng=None, quick: bool = False) -> list:
    """Run one named suite; ``quick`` shrinks every sample count by ~100x."""
    rng = np.random.default_rng(20240601) if rng is None else rng
    s = 100 if quick else 1
    if name == "projections":
        return check_projection_properties(rng, 100_000 // s) + [check_simplex_oracle(rng, max(50, 1000 // s))]
    if name == "gradient-mapping":
        return check_gradient_mapping(rng, 100_000 // s)
    if name == "delays":
        return [check_delay_bounds(rng, n_samples=1_000_000 // s), check_delay_certificate(t_max=10_000 // s)]
    if name == "estimators":
        return [
            check_estimator_bias(rng, n_points=100 // s if not quick else 5, sample_count=100_000 // s),
            check_second_moment(rng, n_points=50 // s if not quick else 5, sample_count=20_000 // s),
        ]
    if name == "engine":
        horizon = 2000 // (10 if quick else 1)
        cfgs = [default_engine_config(seed, horizon, mode) for seed in range(3) for mode in delays.MODES]
        seeds = list(range(10 if quick else 20))
        return [
            check_aggregate_surrogate(cfgs),
            check_staleness_bound(lambda sd: default_engine_config(sd, horizon), seeds),
        ]
    raise ValueError(f"unknown suite {name!r}; expected one of {SUITES}")


def run_all(names=None, rng=None, quick: bool = False) -> list:
    results = []
    for name in names or SUITES:
        results.extend(run_suite(name, rng, quick))
    return results
