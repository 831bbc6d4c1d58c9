import numpy as np

from delayed_psgd import checks, cli
from delayed_psgd.delays import DelayModel
from delayed_psgd.estimators import GradientSource
from delayed_psgd.objectives import strongly_convex_quadratic_suite
from delayed_psgd.sets import FeasibleSet


def test_quick_check_is_green(capsys):
    assert cli.main(["check", "--quick"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and "checks passed" in out


def test_misdeclared_C_is_caught():
    m = DelayModel("uniform-scaled", "1/2", D_max=10, second_moment_C=5.0)
    res = checks.check_delay_certificate([m], t_max=200)
    assert not res.passed
    # window 0..W is uniform, so (W)(2W+1)/6 first exceeds 5 at W=4, i.e. t=8
    assert res.counterexample["t"] == 8
    assert "t" in res.line() and "FAIL" in res.line()


def test_biased_unbiased_source_is_caught(rng):
    d = 3
    box = FeasibleSet.box(-np.ones(d), np.ones(d))
    suite = strongly_convex_quadratic_suite(2, d, 1.0, 2.0, np.zeros(d), domain=box)
    bad = GradientSource.additive_noise(0.5, shift=0.05)
    res = checks.check_estimator_bias(rng, [(suite, box, bad)], n_points=5, sample_count=100_000)
    assert not res.passed and res.counterexample["declared_q"] == 0.0
    ok = checks.check_estimator_bias(rng, [(suite, box, GradientSource.additive_noise(0.5))], n_points=5,
                                     sample_count=100_000)
    assert ok.passed


def test_too_small_G_is_caught(rng):
    d = 2
    box = FeasibleSet.box(-np.ones(d), np.ones(d))
    suite = strongly_convex_quadratic_suite(2, d, 1.0, 2.0, np.zeros(d), domain=box)
    res = checks.check_second_moment(rng, [(suite, box, GradientSource.additive_noise(1.0, G=0.1))], n_points=3,
                                     sample_count=2000)
    assert not res.passed


def test_check_with_config(tmp_path, capsys):
    import json

    path = tmp_path / "c.json"
    path.write_text(json.dumps({
        "name": "c", "horizon": 100,
        "suite": {"kind": "sine-quadratic", "n": 2, "d": 2},
        "set": {"kind": "l2-ball", "center": 0.0, "radius": 2.0},
        "source": {"kind": "gaussian-two-point", "u0": 0.1},
        "delay": {"kind": "uniform-scaled", "kappa": 0.5, "params": {"D_max": 4}},
        "step": {"kind": "constant", "eta": 0.01},
    }))
    assert cli.main(["check", "delays", "estimators", "engine", "--config", str(path), "--quick"]) == 0
