import math

import numpy as np
import pytest

from adamlab import objectives
from adamlab.errors import GapDomainError, InvalidParameterError

E = math.e


def test_f1_reference_values():
    f1 = objectives.build_f1(1.0, 1.0)
    assert f1.value([0.0]) == pytest.approx(0.5, abs=1e-15)
    assert f1.value([1.0]) == pytest.approx(1.0, abs=1e-15)
    assert f1.grad([2.0])[0] == pytest.approx(E, rel=1e-12)
    assert f1.f_star == 0.5


def test_f2_reference_values():
    f2 = objectives.build_f2(0.5)
    assert f2.value([0.0]) == 0.0
    assert f2.value([1.0]) == pytest.approx(0.25, abs=1e-15)
    assert f2.grad([3.0])[0] == 0.5
    assert f2.f_star == 0.0
    assert (f2.l0, f2.l1) == (0.5, 0.0)


def test_f3_reference_values():
    f3 = objectives.build_f3(1.0, 1.0, 0.5)
    assert f3.value([0.0]) == pytest.approx(0.5, abs=1e-15)
    assert f3.value([-1.0]) == pytest.approx(1.0, abs=1e-14)
    assert f3.grad([0.5])[0] == pytest.approx(0.25, abs=1e-15)
    assert f3.f_star == 0.5


def test_g2_reference_values():
    g2 = objectives.build_g2(0.5)
    assert g2.value([-1.0]) == pytest.approx(0.25, abs=1e-15)
    assert g2.grad([0.0])[0] == 0.0
    assert g2.value([-3.0]) == pytest.approx(1.25, abs=1e-15)
    assert g2.name == "g2"


def test_composite_examples():
    comp = objectives.build_composite(
        [objectives.build_f1(1.0, 1.0), objectives.build_f2(0.5)]
    )
    assert comp.dim == 2
    assert comp.value([0.0, 0.0]) == pytest.approx(0.5, abs=1e-15)
    assert np.allclose(comp.grad([0.0, 0.0]), [0.0, 0.0])
    comp2 = objectives.build_composite(
        [objectives.build_f1(1.0, 1.0), objectives.build_f3(1.0, 1.0, 0.5)]
    )
    assert comp2.f_star == pytest.approx(1.0, abs=1e-15)
    assert comp2.l0 == 1.0 and comp2.l1 == 1.0


def test_invalid_parameters():
    with pytest.raises(InvalidParameterError):
        objectives.build_f1(0.0, 1.0)
    with pytest.raises(InvalidParameterError):
        objectives.build_f1(1.0, -2.0)
    with pytest.raises(InvalidParameterError):
        objectives.build_f2(0.0)
    with pytest.raises(InvalidParameterError):
        objectives.build_f3(1.0, 1.0, -0.1)
    with pytest.raises(InvalidParameterError):
        objectives.build_composite([])
    with pytest.raises(InvalidParameterError):
        objectives.from_id("nope", {})


def test_from_id_round_trip():
    comp = objectives.from_id(
        "composite:f1+f2+f3", {"l0": 1.0, "l1": 1.0, "epsilon": 0.5}
    )
    assert comp.dim == 3
    assert comp.name == "composite:f1+f2+f3"
    f1 = objectives.from_id("f1", {"l0": 2.0, "l1": 0.5})
    assert f1.f_star == pytest.approx(2.0 / (2 * 0.25))


@pytest.mark.parametrize(
    "builder",
    [
        lambda: objectives.build_f1(1.0, 1.0),
        lambda: objectives.build_f1(2.0, 0.5),
        lambda: objectives.build_f2(0.5),
        lambda: objectives.build_f3(1.0, 1.0, 0.5),
        lambda: objectives.build_f3(2.0, 2.0, 0.25),
        lambda: objectives.build_g2(0.3),
    ],
)
def test_branch_continuity_and_c1(builder):
    # one-sided values and derivatives agree at every kink to 1e-12 (absolute)
    obj = builder()
    for kink in obj.kinks()[0]:
        lo = np.nextafter(kink, -np.inf)
        hi = np.nextafter(kink, np.inf)
        assert abs(obj.value([lo]) - obj.value([hi])) <= 1e-12
        assert abs(obj.grad([lo])[0] - obj.grad([hi])[0]) <= 1e-12


@pytest.mark.parametrize(
    "builder",
    [
        lambda: objectives.build_f1(1.0, 1.0),
        lambda: objectives.build_f2(0.5),
        lambda: objectives.build_f3(1.0, 1.0, 0.5),
        lambda: objectives.build_g2(0.5),
        lambda: objectives.from_id(
            "composite:f1+f2+f3", {"l0": 1.0, "l1": 1.0, "epsilon": 0.5}
        ),
    ],
)
def test_gradient_matches_central_differences(builder):
    obj = builder()
    rng = np.random.default_rng(42)
    kinks = obj.kinks()
    h = 1e-6
    checked = 0
    while checked < 1000:
        w = rng.uniform(-4.0, 4.0, size=obj.dim)
        # stay clear of branch boundaries so both stencil points share a branch
        if any(
            abs(w[i] - k) < 10 * h for i in range(obj.dim) for k in kinks[i]
        ):
            continue
        g = obj.grad(w)
        for i in range(obj.dim):
            wp, wm = w.copy(), w.copy()
            wp[i] += h
            wm[i] -= h
            fd = (obj.value(wp) - obj.value(wm)) / (2 * h)
            denom = max(abs(g[i]), 1e-3)
            assert abs(fd - g[i]) / denom < 1e-6
        checked += 1


def test_value_lower_bounded_by_f_star():
    rng = np.random.default_rng(3)
    for obj in (
        objectives.build_f1(1.0, 1.0),
        objectives.build_f2(0.5),
        objectives.build_f3(1.0, 1.0, 0.5),
    ):
        for w in rng.uniform(-30, 30, size=300):
            assert obj.value([w]) >= obj.f_star - 1e-12


def test_init_point_examples():
    f1 = objectives.build_f1(1.0, 1.0)
    x1 = objectives.init_point_for_gap(f1, 10.0)[0]
    assert x1 == pytest.approx(1.0 + math.log(10.5), rel=1e-12)
    assert f1.value([x1]) - f1.f_star == pytest.approx(10.0, rel=1e-10)

    f2 = objectives.build_f2(0.5)
    y1 = objectives.init_point_for_gap(f2, 10.0)[0]
    assert y1 == 20.5

    f3 = objectives.build_f3(1.0, 1.0, 0.5)
    z1 = objectives.init_point_for_gap(f3, 10.0)[0]
    assert z1 == pytest.approx(-(1.0 + math.log(10.5)), rel=1e-12)
    assert f3.value([z1]) - f3.f_star == pytest.approx(10.0, rel=1e-10)


@pytest.mark.parametrize("delta1", [0.75, 2.0, 5.0, 10.0, 40.0, 123.4])
def test_gap_calibration_relative_error(delta1):
    for builder in (
        lambda: objectives.build_f1(1.0, 1.0),
        lambda: objectives.build_f1(2.0, 0.5),
        lambda: objectives.build_f2(0.5),
        lambda: objectives.build_f3(1.0, 1.0, 0.5),
    ):
        obj = builder()
        try:
            w = objectives.init_point_for_gap(obj, delta1)
        except GapDomainError:
            continue
        gap = obj.value(w) - obj.f_star
        assert abs(gap - delta1) / delta1 < 1e-10


def test_gap_domain_errors():
    f1 = objectives.build_f1(1.0, 1.0)
    with pytest.raises(GapDomainError):
        objectives.init_point_for_gap(f1, 0.4)  # below l0/(2 l1^2)
    f2 = objectives.build_f2(0.5)
    with pytest.raises(GapDomainError):
        objectives.init_point_for_gap(f2, 0.1)
    with pytest.raises(InvalidParameterError):
        objectives.init_point_for_gap(f1, -1.0)


def test_init_sides():
    f3 = objectives.build_f3(1.0, 1.0, 0.5)
    z_neg = objectives.init_point_for_gap(f3, 10.0, side=-1)[0]
    z_pos = objectives.init_point_for_gap(f3, 10.0, side=+1)[0]
    assert z_neg < 0 < z_pos
    assert f3.value([z_pos]) - f3.f_star == pytest.approx(10.0, rel=1e-10)
    f1 = objectives.build_f1(1.0, 1.0)
    assert objectives.init_point_for_gap(f1, 10.0, side=-1)[0] < 0


def test_certify_smoothness_f1_passes():
    f1 = objectives.build_f1(1.0, 1.0)
    cert = objectives.certify_smoothness(f1, 10_000, radius=1.0, seed=1, box=(-5, 5))
    assert cert.pairs_tested == 10_000
    assert cert.max_violation <= 1e-9
    assert cert.passed
    assert cert.violating_pair is None


def test_certify_smoothness_quadratic_exact():
    q = objectives.build_quadratic(1.0)
    cert = objectives.certify_smoothness(q, 2000, radius=2.0, seed=2, box=(-5, 5))
    assert cert.max_violation <= 0.0


def test_certify_smoothness_f2_regimes():
    f2 = objectives.build_f2(0.5)
    # declared (eps, 0) and the user's ambient l0 >= eps both pass
    assert objectives.certify_smoothness(f2, 5000, 1.0, 3, box=(-5, 5)).passed
    assert objectives.certify_smoothness(
        f2, 5000, 1.0, 4, box=(-5, 5), l0=1.0, l1=1.0
    ).passed


def test_certify_smoothness_catches_wrong_constants():
    # a quadratic steeper than its declared l0 must fail
    q = objectives.build_quadratic(2.0)
    cert = objectives.certify_smoothness(q, 2000, 1.0, 5, box=(-5, 5), l0=1.0, l1=0.0)
    assert not cert.passed
    assert cert.violating_pair is not None


def test_parts_split():
    comp = objectives.from_id(
        "composite:f1+f2", {"l0": 1.0, "l1": 1.0, "epsilon": 0.5}
    )
    parts = comp.parts()
    assert len(parts) == 2
    assert parts[0].value([1.0]) == pytest.approx(1.0)
    assert parts[1].value([1.0]) == pytest.approx(0.25)
