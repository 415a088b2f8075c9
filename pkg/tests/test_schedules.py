import math

import pytest

from adamlab.errors import ConfigurationError
from adamlab.optimizers import make_schedule, thm3_beta2_formula, thm5_beta2_formula


def test_constant_echoes_inputs():
    s = make_schedule("constant", {"eta": 0.3, "beta2": 0.7})
    for t in (1, 10, 10**6):
        assert s.eta_at(t) == 0.3
        assert s.beta2_at(t) == 0.7


def test_thm6_agnostic_example():
    s = make_schedule("thm6_agnostic", {})
    assert s.eta_at(16) == 0.25
    assert s.beta2_at(16) == pytest.approx(0.875, abs=1e-15)
    assert s.per_step
    eta0, etas, b20, b2s = s.arrays(32)
    assert etas[15] == 0.25 and b2s[15] == pytest.approx(0.875, abs=1e-15)


def test_thm1_example():
    # at beta1 = 0 the factor sqrt(1 - beta1^2/beta2) is exactly 1
    s = make_schedule(
        "thm1_deterministic",
        {"T": 100, "delta1": 1.0, "l0": 1.0, "beta1": 0.0, "beta2": 0.99},
    )
    assert s.eta_at(1) == pytest.approx(0.1, rel=1e-12)
    assert s.beta2_at(1) == 0.99
    s2 = make_schedule(
        "thm1_deterministic",
        {"T": 100, "delta1": 1.0, "l0": 1.0, "beta1": 0.5, "beta2": 0.99},
    )
    want = math.sqrt(1.0 - 0.25 / 0.99) / (10.0 * 0.5)
    assert s2.eta_at(1) == pytest.approx(want, rel=1e-12)


def test_thm1_regime_validation():
    with pytest.raises(ConfigurationError):
        make_schedule(
            "thm1_deterministic",
            {"T": 100, "delta1": 1.0, "l0": 1.0, "beta1": 0.9, "beta2": 0.5},
        )


def test_missing_input_names_field():
    with pytest.raises(ConfigurationError, match="delta1"):
        make_schedule("thm1_deterministic", {"T": 100, "l0": 1.0, "beta1": 0.0,
                                             "beta2": 0.9})
    with pytest.raises(ConfigurationError, match="sigma1"):
        make_schedule("thm5_stochastic", {"T": 100, "delta1": 1.0, "l0": 1.0,
                                          "l1": 1.0, "beta1": 0.0})
    with pytest.raises(ConfigurationError):
        make_schedule("bogus", {})


def test_thm5_formula_regime_matches_to_1e12():
    # beta2 formula is valid once T > (1-beta1)(256 sigma1^2 l1)^2 l0 delta1
    T, delta1, beta1 = 2**21, 10.0, 0.0
    s = make_schedule(
        "thm5_stochastic",
        {"T": T, "delta1": delta1, "l0": 1.0, "l1": 1.0, "sigma1": 1.0,
         "beta1": beta1},
    )
    assert s.formula_valid
    eta_want = (1 - beta1) * math.sqrt(1.0 * delta1) / math.sqrt(T)
    beta2_want = 1.0 - eta_want**2 * (256.0) ** 2 / (1 - beta1)
    assert s.eta_at(1) == pytest.approx(eta_want, rel=1e-12)
    assert s.beta2_at(1) == pytest.approx(beta2_want, rel=1e-12)
    assert s.beta2_at(1) == thm5_beta2_formula(T, delta1, 1.0, 1.0, 1.0, beta1)


def test_thm5_desk_scale_fallback():
    s = make_schedule(
        "thm5_stochastic",
        {"T": 2**12, "delta1": 10.0, "l0": 1.0, "l1": 1.0, "sigma1": 1.0,
         "beta1": 0.0},
    )
    assert not s.formula_valid  # raw formula would give beta2 < 0 here
    assert s.beta2_at(1) == pytest.approx(1.0 - 2 ** -6.0)
    assert 0.0 < s.beta2_at(1) < 1.0
    # eta still follows the stated formula
    assert s.eta_at(1) == pytest.approx(math.sqrt(10.0 / 2**12), rel=1e-12)


def test_thm3_closed_form_at_beta1_zero():
    T, delta1 = 2**32, 10.0
    s = make_schedule(
        "thm3_stochastic",
        {"T": T, "delta1": delta1, "l0": 1.0, "l1": 1.0, "sigma0": 1.0,
         "sigma1": 1.0, "beta1": 0.0},
    )
    assert s.formula_valid
    eta = math.sqrt(delta1) / (math.sqrt(2.0) * math.sqrt(T))
    assert s.eta_at(1) == pytest.approx(eta, rel=1e-12)
    assert s.beta2_at(1) == pytest.approx(1.0 - (eta * 1024 * 2.0) ** 2, rel=1e-12)


def test_thm3_fixed_point_self_consistent():
    # with beta1 > 0 the relation is implicit; the solved beta2 must satisfy it
    eta, l0, l1, sigma1, beta1 = 1e-5, 1.0, 1.0, 1.0, 0.5
    b2 = thm3_beta2_formula(eta, l0, l1, sigma1, beta1)
    assert b2 is not None
    denom = math.sqrt(1 - beta1**2 / b2) * (1 - beta1 / math.sqrt(b2))
    residual = b2 - (1.0 - (eta * 1024 * sigma1**2 * (l0 + l1) * (1 - beta1) / denom) ** 2)
    assert abs(residual) < 1e-12


def test_thm3_desk_scale_fallback():
    s = make_schedule(
        "thm3_stochastic",
        {"T": 2**12, "delta1": 10.0, "l0": 1.0, "l1": 1.0, "sigma0": 1.0,
         "sigma1": 1.0, "beta1": 0.0},
    )
    assert not s.formula_valid
    assert 0.0 < s.beta2_at(1) < 1.0
