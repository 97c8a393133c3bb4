import numpy as np
import pytest

from semimap import dsl
from semimap.cli import load_fixture
from semimap.errors import NotRegular, PossiblyInfinitePreimage
from semimap.region import Region
from semimap.regularity import (
    NuSchedule,
    classify_point,
    classify_value,
    estimate_nu,
    implicit_solve,
    local_inverse_cert,
    mvt_inclusion_check,
    mvt_inequality_check,
    sard_scan,
    sign_at,
)

SCHED = NuSchedule(seed=0)


def test_nu_identity_is_one_everywhere():
    m = load_fixture("identity2")
    for x in [[0.0, 0.0], [1.3, -0.7]]:
        est = estimate_nu(m, x, SCHED)
        assert est.verdict == "converged"
        assert est.value == pytest.approx(1.0, abs=1e-9)


def test_nu_decreasing_estimates_are_monotone_enough():
    # estimates over shrinking radii should settle, not oscillate wildly
    m = load_fixture("ex_cbrt_x")
    est = estimate_nu(m, [0.0, 0.0], SCHED)
    tail = est.estimates[-3:]
    assert max(tail) - min(tail) < 1e-6


def test_nu_smooth_point_matches_jacobian_conorm():
    from semimap.conorm import conorm

    m = load_fixture("complex_square")
    jd = dsl.differentiate(m)
    x = [1.0, 0.5]
    est = estimate_nu(m, x, SCHED)
    assert est.verdict == "converged"
    assert est.value == pytest.approx(conorm(dsl.eval_jacobian(jd, x)), rel=1e-2)


def test_classify_three_worked_examples():
    c1 = classify_point(load_fixture("ex_cbrt_x"), [0.0, 0.0], SCHED)
    assert c1.kind == "regular"
    assert c1.nu.value == pytest.approx(1.0, abs=1e-4)

    c2 = classify_point(load_fixture("ex_cbrt_cbrt"), [0.0, 0.0], SCHED)
    assert c2.kind == "regular"
    assert c2.nu.verdict == "infinite"

    c3 = classify_point(load_fixture("ex_sqrt_abs"), [0.0, 0.0], SCHED)
    assert c3.kind == "critical"
    assert c3.nu.value <= 1e-4


def test_sign_at_stable_across_guard():
    m = load_fixture("ex_cbrt_cbrt")
    s = sign_at(m, [0.0, 0.0], seed=0)
    assert s.sign == 1
    assert s.all_agree

    m2 = load_fixture("conjugation")
    assert sign_at(m2, [0.3, 0.4], seed=0).sign == -1


def test_classify_value_regular_and_critical():
    m = load_fixture("complex_square")
    region = Region.ball([0, 0], 2.0)
    v = classify_value(m, region, [1.0, 0.0], SCHED)
    assert v.kind == "regular-value"
    assert len(v.preimages) == 2

    v0 = classify_value(m, region, [0.0, 0.0], SCHED)
    assert v0.kind == "critical-value"


def test_sard_occupancy_decreases():
    m = load_fixture("complex_square")
    scan = sard_scan(m, Region.box([-1, -1], [1, 1]), seed=0)
    assert scan.decreasing
    assert scan.occupancy[1] <= 0.5 * scan.occupancy[0]

    m2 = load_fixture("ex_sqrt_abs")
    scan2 = sard_scan(m2, Region.box([-1, -1], [1, 1]), seed=0)
    assert scan2.decreasing


def test_sard_identity_has_no_critical_values():
    scan = sard_scan(load_fixture("identity2"), Region.box([-1, -1], [1, 1]), seed=0)
    assert scan.occupancy == (0.0, 0.0)


def test_mvt_inclusion_smooth_segments():
    m = load_fixture("complex_square")
    rng = np.random.default_rng(0)
    for _ in range(20):
        a, b = rng.uniform(-2, 2, size=(2, 2))
        res = mvt_inclusion_check(m, a, b, seed=0)
        assert res.holds


def test_mvt_needs_convexification_on_kink():
    m = load_fixture("neg_abs")
    res = mvt_inclusion_check(m, [-1.0], [1.0], seed=0)
    assert res.holds  # hull of one-sided slopes contains the mean slope 0
    raw = mvt_inclusion_check(m, [-1.0], [1.0], seed=0, convexify=False)
    assert not raw.holds  # pointwise derivatives alone miss it


def test_mvt_inequality():
    m = load_fixture("identity2")
    res = mvt_inequality_check(m, [0.0, 0.0], 1.0, seed=0)
    assert res.holds
    assert res.min_ratio == pytest.approx(1.0, rel=1e-9)
    assert res.bound <= 1.0


def test_local_inverse_cert_identity():
    cert = local_inverse_cert(load_fixture("identity2"), [0.0, 0.0], SCHED)
    assert cert.delta >= 0.99
    assert cert.radius > 0


def test_local_inverse_cert_rejects_critical_point():
    with pytest.raises(NotRegular):
        local_inverse_cert(load_fixture("ex_sqrt_abs"), [0.0, 0.0], SCHED)


def test_implicit_solve_cubic():
    F = dsl.parse_map("map rel(x1, x2) = (x2 - x1 * x1 * x1)")
    sol = implicit_solve(F, [0.0], [0.0], [-1.0], [1.0], grid_resolution=41)
    assert not sol.diverged_cells
    xs = sol.x_grid[:, 0]
    assert np.max(np.abs(sol.y_values[:, 0] - xs**3)) < 1e-8


def test_quaternion_square_fiber_growth():
    m = load_fixture("quat_square")
    region = Region.box([-2, -2, -2, -2], [2, 2, 2, 2])
    with pytest.raises(PossiblyInfinitePreimage):
        classify_value(m, region, [-1.0, 0.0, 0.0, 0.0], SCHED)
