"""Experiment specs: JSON config parsing, multi-seed execution and file output.

Layout written by :func:`run_experiment`::

    <output_dir>/<name>/<seed>/trajectory.csv
    <output_dir>/<name>/metric_<kind>.csv
    <output_dir>/<name>/fit.json        (when a fit is configured)
    <output_dir>/<name>/summary.json

Every CSV starts with a ``#`` comment line echoing the run constants.
"""

from __future__ import annotations

import copy
import csv
import io
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import analysis, delays, engine, sets
from .delays import DelayModel
from .estimators import GradientSource, certify_second_moment
from .objectives import (
    ObjectiveSuite,
    convex_quadratic_suite,
    huber_suite,
    quartic_suite,
    sine_quadratic_suite,
    strongly_convex_quadratic_suite,
)
from .schedules import DecaySchedule, StepSizeSchedule, as_kappa
from .sets import FeasibleSet

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


# schema: allowed keys and defaults per section / kind
_TOP = {
    "name": None,
    "horizon": None,
    "seeds": {"base": 0, "count": 1},
    "suite": None,
    "set": None,
    "source": {"kind": "exact"},
    "delay": {"kind": "zero", "kappa": 0.5},
    "step": None,
    "x0": None,
    "metrics": ["dist-sq"],
    "checkpoints_per_decade": 20,
    "fit": None,
    "output_dir": "out",
    "workers": 1,
}

_SUITE_KINDS = {
    "strongly-convex-quadratic": {"n": None, "d": None, "mu": None, "L": None, "seed": 0, "heterogeneity": 1.0, "x_star": None},
    "convex-quadratic": {"n": None, "d": None, "rank": None, "L": None, "mu": 1.0, "seed": 0, "heterogeneity": 1.0, "x_star": None},
    "huber": {"n": None, "d": None, "threshold": 1.0, "reference": None},
    "sine-quadratic": {"n": None, "d": None, "amplitude": 1.0, "frequency": 2.0, "quad_weight": 1.0, "center_scale": 1.0, "seed": 0},
    "quartic": {"n": None, "d": None, "weight": 1.0, "center": None},
}

_SET_KINDS = {
    "whole-space": {},
    "box": {"lower": None, "upper": None},
    "l2-ball": {"center": None, "radius": None},
    "simplex": {},
}
_SET_ALIASES = {"l2ball": "l2-ball", "ball": "l2-ball", "whole": "whole-space", "R^d": "whole-space"}

_SOURCE_KINDS = {
    "exact": {"G": None},
    "additive-noise": {"sigma": None, "shift": 0.0, "G": None},
    "gaussian-two-point": {"u0": None, "beta": 0.5, "q0": None, "G": None},
    "sphere-two-point": {"u0": None, "beta": 0.5, "q0": None, "G": None},
}

_DELAY_PARAMS = {
    "zero": {},
    "fixed": {"D": None},
    "uniform-scaled": {"D_max": None},
    "geometric-scaled": {"mean": None, "cap_by_kappa": False},
}

_STEP_KINDS = {
    "constant": {"eta": None},
    "power": {"eta0": None, "alpha": None},
    "custom": {"table": None},
}

_FIT = {"metric": None, "t_min": None, "t_max": None, "expected_slope": None, "tolerance": None, "max_slope": None}


def _fill(section: str, given: dict, schema: dict) -> dict:
    if not isinstance(given, dict):
        raise ConfigError(f"{section} must be an object")
    unknown = sorted(set(given) - set(schema))
    if unknown:
        raise ConfigError(f"unknown key {section}.{unknown[0]!r}")
    out = {}
    for key, default in schema.items():
        if key in given:
            out[key] = given[key]
        elif default is None and key not in ("x_star", "reference", "center", "G", "q0", "x0", "fit",
                                             "expected_slope", "tolerance", "max_slope"):
            raise ConfigError(f"missing required key {section}.{key}")
        else:
            out[key] = copy.deepcopy(default)
    return out


def _kinded(section: str, given: dict, kinds: dict, aliases: Optional[dict] = None) -> dict:
    if not isinstance(given, dict) or "kind" not in given:
        raise ConfigError(f"{section} needs a 'kind'")
    kind = (aliases or {}).get(given["kind"], given["kind"])
    if kind not in kinds:
        raise ConfigError(f"unknown {section}.kind {given['kind']!r}; expected one of {sorted(kinds)}")
    rest = {k: v for k, v in given.items() if k != "kind"}
    return {"kind": kind, **_fill(f"{section}[{kind}]", rest, kinds[kind])}


def _vector(section: str, value, d: int) -> list:
    arr = np.asarray([float(v) for v in value] if isinstance(value, (list, tuple)) else float(value), dtype=float)
    arr = np.broadcast_to(arr, (d,)) if arr.ndim == 0 else arr
    if arr.shape != (d,):
        raise ConfigError(f"{section} must have length {d}")
    return [float(v) for v in arr]


def _bound_list(section: str, value, d: int) -> list:
    vals = value if isinstance(value, (list, tuple)) else [value] * d
    if len(vals) != d:
        raise ConfigError(f"{section} must have length {d}")
    out = []
    for v in vals:
        f = float(v)
        out.append(f if math.isfinite(f) else ("inf" if f > 0 else "-inf"))
    return out


@dataclass
class ExperimentSpec:
    """Validated, normalized experiment description (plain JSON-compatible data)."""

    name: str
    horizon: int
    seeds: tuple
    suite: dict
    set: dict
    source: dict
    delay: dict
    step: dict
    x0: Optional[list]
    metrics: tuple
    checkpoints_per_decade: int = 20
    fit: Optional[dict] = None
    output_dir: str = "out"
    workers: int = 1
    _components: Optional[dict] = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "horizon": self.horizon,
            "seeds": list(self.seeds),
            "suite": self.suite,
            "set": self.set,
            "source": self.source,
            "delay": self.delay,
            "step": self.step,
            "x0": self.x0,
            "metrics": list(self.metrics),
            "checkpoints_per_decade": self.checkpoints_per_decade,
            "fit": self.fit,
            "output_dir": self.output_dir,
            "workers": self.workers,
        }


def emit(spec: ExperimentSpec) -> str:
    return json.dumps(spec.to_dict(), indent=2, sort_keys=True)


def parse_config(text, base_dir: Optional[str] = None) -> ExperimentSpec:
    """Validate a JSON config document (text or already-decoded dict)."""
    raw = json.loads(text) if isinstance(text, (str, bytes)) else copy.deepcopy(text)
    top = _fill("config", raw, _TOP)
    name = str(top["name"])
    if not name or "/" in name or name.startswith("."):
        raise ConfigError("name must be a plain, non-empty directory name")
    T = top["horizon"]
    if not isinstance(T, int) or isinstance(T, bool) or T < 1:
        raise ConfigError("horizon must be an integer >= 1")

    seeds = top["seeds"]
    if isinstance(seeds, dict):
        s = _fill("seeds", seeds, {"base": 0, "count": 1})
        if not isinstance(s["count"], int) or s["count"] < 1:
            raise ConfigError("seeds.count must be an integer >= 1")
        seeds = [int(s["base"]) + k for k in range(s["count"])]
    if not isinstance(seeds, list) or not seeds or not all(isinstance(v, int) for v in seeds):
        raise ConfigError("seeds must be a non-empty list of integers or {base, count}")
    if len(set(seeds)) != len(seeds):
        raise ConfigError("seeds must be distinct")
    if any(not 0 <= v < 2**64 for v in seeds):
        raise ConfigError("seeds must be 64-bit unsigned integers")

    suite = _kinded("suite", top["suite"], _SUITE_KINDS)
    n, d = suite["n"], suite["d"]
    if not (isinstance(n, int) and n >= 1 and isinstance(d, int) and d >= 1):
        raise ConfigError("suite.n and suite.d must be positive integers")
    for key in ("x_star", "reference", "center"):
        if suite.get(key) is not None:
            suite[key] = _vector(f"suite.{key}", suite[key], d)

    fs = _kinded("set", top["set"], _SET_KINDS, _SET_ALIASES)
    if fs["kind"] == "box":
        fs["lower"] = _bound_list("set.lower", fs["lower"], d)
        fs["upper"] = _bound_list("set.upper", fs["upper"], d)
    elif fs["kind"] == "l2-ball":
        fs["center"] = _vector("set.center", fs["center"], d)
        fs["radius"] = float(fs["radius"])

    source = _kinded("source", top["source"], _SOURCE_KINDS)
    delay_raw = top["delay"]
    if not isinstance(delay_raw, dict):
        raise ConfigError("delay must be an object")
    unknown = sorted(set(delay_raw) - {"kind", "kappa", "params", "mode", "C"})
    if unknown:
        raise ConfigError(f"unknown key delay.{unknown[0]!r}")
    dkind = delay_raw.get("kind", "zero")
    if dkind not in _DELAY_PARAMS:
        raise ConfigError(f"unknown delay.kind {dkind!r}")
    try:
        kappa = as_kappa(delay_raw.get("kappa", 0.5))
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"delay.kappa: {exc}") from None
    delay = {
        "kind": dkind,
        "kappa": str(kappa) if not isinstance(kappa, float) else kappa,
        "params": _fill(f"delay.params[{dkind}]", delay_raw.get("params", {}), _DELAY_PARAMS[dkind]),
        "mode": delay_raw.get("mode", "direct"),
        "C": delay_raw.get("C"),
    }
    if delay["mode"] not in delays.MODES:
        raise ConfigError(f"delay.mode must be one of {delays.MODES}")

    step = _kinded("step", top["step"], _STEP_KINDS)
    metrics = top["metrics"]
    if not isinstance(metrics, list) or not metrics:
        raise ConfigError("metrics must be a non-empty list")
    for m in metrics:
        if m not in analysis.VALUE_KINDS:
            raise ConfigError(f"unknown metric {m!r}; expected one of {analysis.VALUE_KINDS}")

    fit = top["fit"]
    if fit is not None:
        fit = _fill("fit", fit, _FIT)
        if fit["metric"] not in metrics:
            raise ConfigError("fit.metric must be one of the configured metrics")
        if not 1 <= fit["t_min"] < fit["t_max"] <= T:
            raise ConfigError(f"fit window [{fit['t_min']}, {fit['t_max']}] must lie inside [1, horizon={T}]")
        two_sided = fit["expected_slope"] is not None and fit["tolerance"] is not None
        if not two_sided and fit["max_slope"] is None:
            raise ConfigError("fit needs expected_slope with tolerance, or max_slope")

    x0 = top["x0"]
    if x0 is not None:
        x0 = _vector("x0", x0, d)
    cpd = top["checkpoints_per_decade"]
    if not isinstance(cpd, int) or cpd < 1:
        raise ConfigError("checkpoints_per_decade must be a positive integer")
    workers = top["workers"]
    if not isinstance(workers, int) or workers < 1:
        raise ConfigError("workers must be a positive integer")
    out_dir = str(top["output_dir"])
    if base_dir is not None and not os.path.isabs(out_dir):
        out_dir = os.path.normpath(os.path.join(base_dir, out_dir))

    spec = ExperimentSpec(
        name=name,
        horizon=T,
        seeds=tuple(seeds),
        suite=suite,
        set=fs,
        source=source,
        delay=delay,
        step=step,
        x0=x0,
        metrics=tuple(metrics),
        checkpoints_per_decade=cpd,
        fit=fit,
        output_dir=out_dir,
        workers=workers,
    )
    # constructing the objects runs every remaining domain check
    try:
        build_components(spec, certify=False)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return spec


def load_config(path) -> ExperimentSpec:
    path = Path(path)
    return parse_config(path.read_text(), base_dir=None)


# building runtime objects ----------------------------------------------------


def _build_set(cfg: dict, d: int) -> FeasibleSet:
    kind = cfg["kind"]
    if kind == "whole-space":
        return FeasibleSet.whole_space(d)
    if kind == "simplex":
        return FeasibleSet.simplex(d)
    if kind == "box":
        return FeasibleSet.box([float(v) for v in cfg["lower"]], [float(v) for v in cfg["upper"]])
    return FeasibleSet.l2_ball(cfg["center"], cfg["radius"])


def _build_suite(cfg: dict, fset: FeasibleSet) -> ObjectiveSuite:
    kind, n, d = cfg["kind"], cfg["n"], cfg["d"]
    if kind in ("strongly-convex-quadratic", "convex-quadratic"):
        x_star = cfg["x_star"]
        if x_star is None:
            x_star = np.random.default_rng(cfg["seed"]).uniform(-1.0, 1.0, d)
            x_star = sets.project(fset, x_star)
        if kind == "strongly-convex-quadratic":
            return strongly_convex_quadratic_suite(
                n, d, cfg["mu"], cfg["L"], x_star, cfg["seed"], cfg["heterogeneity"], domain=fset
            )
        return convex_quadratic_suite(
            n, d, cfg["rank"], cfg["L"], x_star, cfg["seed"], cfg["heterogeneity"], curvature_min=cfg["mu"], domain=fset
        )
    if kind == "huber":
        return huber_suite(n, d, cfg["threshold"], cfg["reference"], domain=fset)
    if kind == "sine-quadratic":
        return sine_quadratic_suite(
            n, d, cfg["amplitude"], cfg["frequency"], cfg["quad_weight"], cfg["center_scale"], cfg["seed"], domain=fset
        )
    return quartic_suite(n, d, cfg["weight"], cfg["center"], domain=fset)


def _build_source(cfg: dict, suite: ObjectiveSuite) -> GradientSource:
    kind = cfg["kind"]
    if kind == "exact":
        src = GradientSource.exact()
    elif kind == "additive-noise":
        src = GradientSource.additive_noise(cfg["sigma"], shift=cfg["shift"])
    else:
        u = DecaySchedule.constant(cfg["u0"]) if cfg["beta"] == 0 else DecaySchedule.power(cfg["u0"], cfg["beta"])
        if kind == "gaussian-two-point":
            src = GradientSource.gaussian_two_point(u, suite.smoothness_L, suite.d)
        else:
            src = GradientSource.sphere_two_point(u, suite.smoothness_L)
        if cfg["q0"] is not None:
            src = GradientSource(src.kind, DecaySchedule(src.bias_schedule.kind, cfg["q0"], cfg["beta"]), smoothing=u)
    if cfg["G"] is not None:
        src = src.with_G(cfg["G"])
    return src


def _build_delay(cfg: dict) -> DelayModel:
    p = cfg["params"]
    return DelayModel(
        cfg["kind"],
        as_kappa(cfg["kappa"]),
        D=p.get("D", 0),
        D_max=p.get("D_max", 0),
        mean=p.get("mean", 0.0),
        cap_by_kappa=p.get("cap_by_kappa", False),
        second_moment_C=cfg["C"],
    )


def _build_step(cfg: dict) -> StepSizeSchedule:
    if cfg["kind"] == "constant":
        return StepSizeSchedule.constant(cfg["eta"])
    if cfg["kind"] == "power":
        return StepSizeSchedule.power(cfg["eta0"], cfg["alpha"])
    return StepSizeSchedule.custom(cfg["table"])


def default_x0(fset: FeasibleSet) -> np.ndarray:
    """A deliberately far-from-center start: the upper box corner, a ball boundary point, or e_1."""
    d = fset.dimension
    if fset.kind == "box":
        return np.where(np.isfinite(fset.upper), fset.upper, np.where(np.isfinite(fset.lower), fset.lower, 0.0))
    if fset.kind == "l2-ball":
        return fset.center + fset.radius * np.eye(d)[0]
    if fset.kind == "simplex":
        return np.eye(d)[0]
    return np.ones(d)


def build_components(spec: ExperimentSpec, certify: bool = True) -> dict:
    """Construct the seed-independent objects; certifies G once when undeclared."""
    if spec._components is not None and (spec._components["source"].second_moment_G is not None or not certify):
        return spec._components
    d = spec.suite["d"]
    fset = _build_set(spec.set, d)
    suite = _build_suite(spec.suite, fset)
    source = _build_source(spec.source, suite)
    if certify and source.second_moment_G is None:
        if fset.is_bounded:
            G = certify_second_moment(source, suite, fset, np.random.default_rng(0))
            source = source.with_G(G)
        else:
            log.warning("G left undeclared: the feasible set is unbounded")
    comps = {
        "set": fset,
        "suite": suite,
        "source": source,
        "delay": _build_delay(spec.delay),
        "step": _build_step(spec.step),
        "x0": np.asarray(spec.x0, dtype=float) if spec.x0 is not None else default_x0(fset),
    }
    if not sets.contains(fset, comps["x0"]):
        raise ConfigError("x0 must lie in the feasible set")
    spec._components = comps
    return comps


def build_run_config(spec: ExperimentSpec, seed: int, certify: bool = True, **overrides) -> engine.RunConfig:
    c = build_components(spec, certify=certify)
    kwargs = dict(
        suite=c["suite"],
        fset=c["set"],
        source=c["source"],
        delay=c["delay"],
        step=c["step"],
        horizon=spec.horizon,
        x0=c["x0"],
        seed=seed,
        mode=spec.delay["mode"],
    )
    kwargs.update(overrides)
    return engine.RunConfig(**kwargs)


# execution -------------------------------------------------------------------


def checkpoint_times(spec: ExperimentSpec) -> np.ndarray:
    times = analysis.log_spaced_times(1, spec.horizon, spec.checkpoints_per_decade) if spec.horizon > 1 else np.array([1])
    return np.concatenate([[0], times])


def _fmt(v) -> str:
    return repr(float(v))


def constants_header(constants: dict) -> str:
    return "# " + " ".join(f"{k}={constants[k]}" for k in sorted(constants))


def trajectory_csv(traj: engine.Trajectory, constants: dict) -> str:
    buf = io.StringIO()
    buf.write(constants_header(constants) + "\n")
    w = csv.writer(buf, lineterminator="\r\n")
    n = traj.n
    w.writerow(["t", "eta"] + [f"x{j}" for j in range(traj.d)] + [f"tau{i}" for i in range(n)])
    step_row = {int(t): k for k, t in enumerate(traj.step_times)}
    for row, t in enumerate(traj.times):
        k = step_row.get(int(t))
        eta = _fmt(traj.step_sizes[k]) if k is not None else ""
        taus = [str(int(v)) for v in traj.stale_stamps[:, k]] if k is not None else [""] * n
        w.writerow([str(int(t)), eta] + [_fmt(v) for v in traj.iterates[row]] + taus)
    return buf.getvalue()


def check_trajectory_invariants(traj: engine.Trajectory, config: engine.RunConfig) -> list:
    """Feasibility, exact update replay, and the pointwise aggregate bound; returns failure messages."""
    failures = []
    inside = sets.contains(config.fset, traj.iterates, engine.FEASIBILITY_TOL)
    if not np.all(inside):
        failures.append(f"infeasible iterate at t={int(traj.times[np.argmin(inside)])}")
    lhs = np.sum(traj.applied_gradients**2, axis=1)
    rhs = traj.n * traj.agent_sq_norms
    bad = np.flatnonzero(lhs > rhs * (1 + 1e-9) + 1e-300)
    if bad.size:
        failures.append(f"||sum g_i||^2 > n sum ||g_i||^2 at t={int(traj.step_times[bad[0]])}")
    if traj.dense and traj.horizon > 0:
        X = traj.iterates
        replay = sets.project(config.fset, X[:-1] - traj.step_sizes[:, None] * traj.applied_gradients)
        mismatch = np.flatnonzero(np.any(replay != X[1:], axis=1))
        if mismatch.size:
            failures.append(f"recorded update does not replay at t={int(mismatch[0])}")
    return failures


def _run_seed(args):
    spec, seed, times = args
    config = build_run_config(spec, seed)
    traj = engine.run(config)
    constants = config.constants()
    values = {}
    for kind in spec.metrics:
        values[kind] = analysis.metric_path(kind, traj, config)[np.searchsorted(traj.times, times)]
    r = analysis.empirical_R(traj, config.suite) if config.suite.optimum() is not None else None
    return {
        "seed": seed,
        "csv": trajectory_csv(traj, constants),
        "metrics": values,
        "failures": check_trajectory_invariants(traj, config),
        "R": r,
        "constants": constants,
    }


@dataclass
class ExperimentResult:
    status: int
    output_dir: Path
    ensembles: dict
    fit: Optional[dict]
    failures: list
    constants: dict
    R: Optional[float] = None


def metric_csv(series: analysis.MetricSeries, constants: dict) -> str:
    buf = io.StringIO()
    buf.write(constants_header(constants) + "\n")
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(["t", "mean", "standard_error", "ensemble_size"])
    for t, m, se in zip(series.times, series.values, series.standard_errors):
        w.writerow([str(int(t)), _fmt(m), _fmt(se), str(series.ensemble_size)])
    return buf.getvalue()


def read_metric_csv(path) -> analysis.MetricSeries:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(line for line in fh if not line.startswith("#"))]
    header, body = rows[0], rows[1:]
    if header[:2] != ["t", "mean"]:
        raise ValueError(f"{path}: expected columns t, mean, ...")
    t = np.array([int(r[0]) for r in body])
    m = np.array([float(r[1]) for r in body])
    se = np.array([float(r[2]) for r in body]) if len(header) > 2 else None
    k = int(body[0][3]) if len(header) > 3 and body else 1
    return analysis.MetricSeries(t, m, k, "dist-sq", se)


def evaluate_fit(series: analysis.MetricSeries, fit_cfg: dict, n_seeds: int) -> dict:
    res = analysis.fit_rate(series, fit_cfg["t_min"], fit_cfg["t_max"])
    ok = True
    if fit_cfg.get("expected_slope") is not None and fit_cfg.get("tolerance") is not None:
        ok &= abs(res.slope - fit_cfg["expected_slope"]) <= fit_cfg["tolerance"]
    if fit_cfg.get("max_slope") is not None:
        ok &= res.slope <= fit_cfg["max_slope"]
    return {
        "metric": fit_cfg.get("metric"),
        "slope": res.slope,
        "intercept": res.intercept,
        "r_squared": res.r_squared,
        "window": [fit_cfg["t_min"], fit_cfg["t_max"]],
        "n_seeds": n_seeds,
        "expected_slope": fit_cfg.get("expected_slope"),
        "tolerance": fit_cfg.get("tolerance"),
        "max_slope": fit_cfg.get("max_slope"),
        "passed": bool(ok),
    }


def run_experiment(spec: ExperimentSpec, workers: Optional[int] = None, write: bool = True) -> ExperimentResult:
    """Run every seed, write outputs, and grade invariants and the rate fit.

    ``status`` is 0 on success and 1 when an invariant or the fit assertion fails.
    """
    build_components(spec)  # certify G once, before fanning out
    times = checkpoint_times(spec)
    jobs = [(spec, seed, times) for seed in spec.seeds]
    workers = spec.workers if workers is None else workers
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_seed, jobs))
    else:
        results = [_run_seed(job) for job in jobs]

    out = Path(spec.output_dir) / spec.name
    constants = dict(results[0]["constants"])
    constants.pop("seed", None)
    constants["seeds"] = ",".join(str(s) for s in spec.seeds)
    failures = [f"seed {r['seed']}: {msg}" for r in results for msg in r["failures"]]

    ensembles = {}
    for kind in spec.metrics:
        series = [analysis.MetricSeries(times, r["metrics"][kind], 1, kind) for r in results]
        ensembles[kind] = analysis.ensemble_mean(series)

    fit_report = None
    if spec.fit is not None:
        try:
            fit_report = evaluate_fit(ensembles[spec.fit["metric"]], spec.fit, len(spec.seeds))
        except ValueError as exc:
            failures.append(f"fit: {exc}")
        else:
            if not fit_report["passed"]:
                failures.append(f"fit: slope {fit_report['slope']:.4f} outside the configured range")

    R = max((r["R"] for r in results if r["R"] is not None), default=None)
    if write:
        try:
            for r in results:
                p = out / str(r["seed"])
                p.mkdir(parents=True, exist_ok=True)
                (p / "trajectory.csv").write_text(r["csv"], newline="")
            for kind, series in ensembles.items():
                (out / f"metric_{kind}.csv").write_text(metric_csv(series, constants), newline="")
            if fit_report is not None:
                (out / "fit.json").write_text(json.dumps(fit_report, indent=2, sort_keys=True))
            summary = {
                "constants": constants,
                "config": spec.to_dict(),
                "fit": fit_report,
                "failures": failures,
                "R_max_dist_sq": R,
                "status": 1 if failures else 0,
            }
            (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True, default=str))
        except OSError as exc:
            raise OSError(f"failed writing outputs under {out}: {exc}") from exc
    return ExperimentResult(1 if failures else 0, out, ensembles, fit_report, failures, constants, R)
