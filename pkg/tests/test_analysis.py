import math

import numpy as np
import pytest

from adamlab import analysis, noise, objectives
from adamlab.errors import (
    ConfigurationError,
    CoverageGapError,
    InvalidParameterError,
)
from adamlab.optimizers import HyperParams, Schedule, run_trajectory


def const_schedule(eta, beta2=0.999):
    return Schedule(kind="constant", inputs={}, eta0=eta, beta2_0=beta2)


def test_fit_exact_power_laws():
    Ts = [100, 1000, 10_000, 100_000]
    fit = analysis.fit_rate_exponent([(T, T**-0.5) for T in Ts])
    assert fit.slope == pytest.approx(-0.5, abs=1e-12)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)

    fit = analysis.fit_rate_exponent([(T, 3.0 * T**-0.25) for T in Ts])
    assert fit.slope == pytest.approx(-0.25, abs=1e-12)
    assert fit.intercept == pytest.approx(math.log(3.0), abs=1e-10)

    fit = analysis.fit_rate_exponent([(T, 7.0) for T in Ts])
    assert fit.slope == pytest.approx(0.0, abs=1e-12)


def test_fit_errors():
    with pytest.raises(InvalidParameterError):
        analysis.fit_rate_exponent([(10, 1.0), (100, 0.5), (1000, 0.1)])
    with pytest.raises(InvalidParameterError):
        analysis.fit_rate_exponent([(10, 1.0), (100, -0.5), (1000, 0.1), (2000, 0.1)])


def test_steps_to_epsilon_hinge_crossing():
    # GD at eta=0.1 from the gap-10 start of the 0.5-hinge: 390 full-slope
    # steps, float drift included, then entry
    obj = objectives.build_f2(0.5)
    w1 = objectives.init_point_for_gap(obj, 10.0)
    traj = run_trajectory(
        "gd", obj, noise.OracleConfig(), const_schedule(0.1),
        HyperParams(eta=0.1, beta1=0.0), w1, 500,
    )
    assert analysis.steps_to_epsilon(traj, 0.5) == 391


def test_steps_to_epsilon_edges():
    obj = objectives.build_f2(0.5)
    traj = run_trajectory(
        "gd", obj, noise.OracleConfig(), const_schedule(0.1),
        HyperParams(eta=0.1), np.array([0.1]), 10,
    )
    assert analysis.steps_to_epsilon(traj, 0.5) == 1  # already below

    w1 = objectives.init_point_for_gap(obj, 10.0)
    frozen = run_trajectory(
        "sgdm", obj, noise.OracleConfig(), const_schedule(0.1),
        HyperParams(eta=0.1, beta1=1.0), w1, 50,
    )
    assert analysis.steps_to_epsilon(frozen, 0.5) is None


def test_check_lemma1_on_trajectory_and_bound_values():
    assert analysis.lemma1_bound(0.1, 0.5, 0.9) == pytest.approx(0.186052, abs=1e-6)
    assert analysis.lemma1_bound(0.1, 0.0, 0.9) == pytest.approx(
        0.1 / math.sqrt(0.1), rel=1e-12
    )
    obj = objectives.build_f1(1.0, 1.0)
    w1 = objectives.init_point_for_gap(obj, 10.0)
    hyper = HyperParams(eta=0.1, beta1=0.5, beta2=0.9)
    traj = run_trajectory(
        "adam", obj, noise.OracleConfig(), const_schedule(0.1, 0.9), hyper, w1, 2000
    )
    rep = analysis.check_lemma1(traj, hyper)
    assert rep.passed
    assert rep.instances == 2000
    with pytest.raises(ConfigurationError):
        analysis.check_lemma1(traj, HyperParams(eta=0.1, beta1=0.9, beta2=0.5))


def test_check_lemma1_random_steps():
    rep = analysis.check_lemma1_random(10_000, seed=3)
    assert rep.violations == 0
    assert rep.worst_slack <= 1e-9


def test_check_lemma2_f1_and_quadratic():
    rep = analysis.check_lemma2(objectives.build_f1(1.0, 1.0), 10_000, seed=1)
    assert rep.violations == 0, rep.witness
    rep = analysis.check_lemma2(objectives.build_quadratic(1.0), 10_000, seed=2)
    assert rep.violations == 0, rep.witness


def test_lemma2_degenerate_triple_is_tight():
    # w1 = w2 = w3 reduces the inequality to f(w) <= f(w), slack exactly zero
    obj = objectives.build_f1(1.0, 1.0)
    w = np.array([1.7])
    lhs = obj.value(w)
    rhs = obj.value(w) + float(obj.grad(w) @ (w - w)) + 0.0
    assert lhs == rhs


def test_check_lemma3_example_and_random():
    # length-1 sequence a=[1], b0=1, beta2=0.5, beta1=0
    lhs = 1.0 / 1.0
    rhs = (1.0 / 0.5) * (math.log(1.0) - 1 * math.log(0.5))
    assert lhs < rhs
    assert rhs == pytest.approx(2 * math.log(2.0), rel=1e-12)
    rep = analysis.check_lemma3(1000, 100, seed=5)
    assert rep.violations == 0, rep.witness


def test_check_lemma3_zero_sequence_equality():
    beta1, beta2, b0, T = 0.3, 0.8, 2.0, 50
    b, c, lhs = b0, 0.0, 0.0
    for _ in range(T):
        b = beta2 * b
        c = beta1 * c
        lhs += c * c / b
    coeff = (1 - beta1) ** 2 / ((1 - beta1 / math.sqrt(beta2)) ** 2 * (1 - beta2))
    rhs = coeff * (math.log(b / b0) - T * math.log(beta2))
    assert lhs == 0.0
    assert abs(rhs) < 1e-9


def _lemma45_run(eta=0.001, beta1=0.5, beta2=0.9, T=2000):
    obj = objectives.build_f1(1.0, 1.0)
    w1 = objectives.init_point_for_gap(obj, 10.0)
    hyper = HyperParams(eta=eta, beta1=beta1, beta2=beta2, nu0=1.0)
    traj = run_trajectory(
        "adam", obj, noise.OracleConfig(), const_schedule(eta, beta2), hyper, w1, T
    )
    return traj, obj, hyper


def test_check_lemma45_zero_violations():
    traj, obj, hyper = _lemma45_run()
    rep = analysis.check_lemma45(traj, obj, hyper)
    assert rep.violations == 0, rep.witness
    assert rep.skipped == 0  # displacement precondition holds throughout


def test_check_lemma45_preconditions():
    traj, obj, _ = _lemma45_run()
    with pytest.raises(ConfigurationError):
        analysis.check_lemma45(traj, obj, HyperParams(eta=0.001, beta1=0.9, beta2=0.5))
    coarse = _lemma45_run(T=100)[0]
    coarse.record_every = 2  # simulate a sparse record
    with pytest.raises(ConfigurationError):
        analysis.check_lemma45(coarse, obj, HyperParams(eta=0.001, beta1=0.5, beta2=0.9))


def test_check_lemma45_skips_beyond_displacement_cap():
    # eta far above the cap (1 - beta1^(1/8))/(6 l1): the second bound is
    # skipped from the first oversized step on, never asserted
    traj, obj, hyper = _lemma45_run(eta=0.2, T=300)
    rep = analysis.check_lemma45(traj, obj, hyper)
    assert rep.skipped > 0
    assert rep.violations == 0


def test_tune_best_single_cell():
    obj = objectives.build_f2(0.5)
    w1 = objectives.init_point_for_gap(obj, 10.0)
    (eta, beta), steps = analysis.tune_best(
        "gd", obj, noise.OracleConfig(), w1, 1000, 0.5,
        eta_grid=[0.1], beta_grid=[0.0],
    )
    assert (eta, beta) == (0.1, 0.0)
    assert steps == 391


def test_tune_best_hinge_floor():
    # no grid eta can beat the hinge-crossing floor (y1 - 1)/(eta_max * eps)
    obj = objectives.build_f2(0.5)
    w1 = objectives.init_point_for_gap(obj, 10.0)
    grid = [0.01, 0.1, 1.0, 10.0]
    (eta, _), steps = analysis.tune_best(
        "gd", obj, noise.OracleConfig(), w1, 100_000, 0.5,
        eta_grid=grid, beta_grid=[0.0],
    )
    floor = (w1[0] - 1.0) / (max(grid) * 0.5)
    assert steps >= floor
    assert eta == 10.0


def test_tune_best_worker_invariance():
    obj = objectives.build_f2(0.5)
    w1 = objectives.init_point_for_gap(obj, 5.0)
    kw = dict(eta_grid=[0.05, 0.2, 1.0], beta_grid=[0.0, 0.9])
    r1 = analysis.tune_best("gd", obj, noise.OracleConfig(), w1, 5000, 0.5, **kw)
    r2 = analysis.tune_best(
        "gd", obj, noise.OracleConfig(), w1, 5000, 0.5, workers=2, **kw
    )
    assert r1 == r2


def test_tune_best_never():
    obj = objectives.build_f2(0.5)
    w1 = objectives.init_point_for_gap(obj, 10.0)
    (eta, beta), steps = analysis.tune_best(
        "gd", obj, noise.OracleConfig(), w1, 10, 0.5,
        eta_grid=[1e-4], beta_grid=[0.0],
    )
    assert steps is None and eta is None


PROBE_ARGS = dict(l0=1.0, l1=1.0, epsilon=0.5, delta1=14.0)


def test_probe_classifications():
    thr, boundary = analysis.gdm_thresholds(1.0, 1.0, 0.5, 14.0)
    assert analysis.gdm_regime_probe(eta=thr / 100, beta=0.3, **PROBE_ARGS) == "f2_catches"
    assert analysis.gdm_regime_probe(eta=thr * 2, beta=0.0, **PROBE_ARGS) == "f1_catches"
    assert (
        analysis.gdm_regime_probe(eta=thr * 2, beta=1 - 1e-12, **PROBE_ARGS)
        == "f3_catches"
    )
    # boundary eta classifies to the large-eta side; boundary beta to f1
    assert analysis.gdm_regime_probe(eta=thr, beta=0.0, **PROBE_ARGS) == "f1_catches"
    assert analysis.gdm_regime_probe(eta=thr, beta=boundary, **PROBE_ARGS) == "f1_catches"


def test_probe_coverage_gap_errors():
    thr, _ = analysis.gdm_thresholds(1.0, 1.0, 0.5, 14.0)
    with pytest.raises(CoverageGapError):
        # f3 range requires epsilon <= 1/2
        analysis.gdm_regime_probe(
            eta=10.0, beta=1 - 1e-12, l0=1.0, l1=1.0, epsilon=0.8, delta1=50.0
        )
    with pytest.raises(CoverageGapError):
        # f1 range requires delta1 >= (l0/l1^2)(e - 1/2)
        analysis.gdm_regime_probe(
            eta=100.0, beta=0.0, l0=1.0, l1=1.0, epsilon=0.5, delta1=1.0
        )
    with pytest.raises(InvalidParameterError):
        analysis.gdm_regime_probe(eta=-1.0, beta=0.0, **PROBE_ARGS)


def test_regime_guarantee_horizons():
    hor, floor = analysis.regime_guarantee("f1_catches", 3.0, 0.0, **PROBE_ARGS)
    assert hor is None and floor == 14.0
    hor, floor = analysis.regime_guarantee("f2_catches", 0.1, 0.0, **PROBE_ARGS)
    y1 = 14.0 / 0.5 + 0.5
    assert hor == int((y1 - 1.0) / (0.1 * 0.5))
    assert floor == 0.5
    beta = 0.999
    hor, floor = analysis.regime_guarantee("f3_catches", 3.0, beta, **PROBE_ARGS)
    assert hor == int(math.floor(1.0 / (1.0 - beta))) + int(14.0**2 / (16 * 0.5**3))
