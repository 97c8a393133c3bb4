"""Acceptance gate: one test per headline capability, each printing a
single pass/fail line (run with -s or look at captured stdout)."""

import time

import numpy as np
import pytest

from semimap import dsl
from semimap.cli import fixture_path, load_fixture, main
from semimap.degree import LinearHomotopy, axiom_suite, degree_formula, winding_degree_2d
from semimap.errors import NotRegular, PossiblyInfinitePreimage
from semimap.globalcheck import hadamard_uniform_check, kinf_probe
from semimap.region import Region
from semimap.regularity import (
    NuSchedule,
    classify_point,
    local_inverse_cert,
    mvt_inclusion_check,
    implicit_solve,
    sard_scan,
    sign_at,
)

SCHED = NuSchedule(seed=0)


def report(name, ok):
    print(f"[{'PASS' if ok else 'FAIL'}] {name}")
    assert ok, name


def test_criterion_01_regularity_index_triple():
    t0 = time.perf_counter()
    c1 = classify_point(load_fixture("ex_cbrt_x"), [0.0, 0.0], SCHED)
    c2 = classify_point(load_fixture("ex_cbrt_cbrt"), [0.0, 0.0], SCHED)
    c3 = classify_point(load_fixture("ex_sqrt_abs"), [0.0, 0.0], SCHED)
    elapsed = time.perf_counter() - t0
    ok = (
        c1.kind == "regular" and abs(c1.nu.value - 1.0) <= 0.05
        and c2.nu.verdict == "infinite"
        and c3.kind == "critical" and c3.nu.value <= 1e-4
        and elapsed < 5.0
    )
    report(f"regularity-index triple (1.0 / inf / 0) in {elapsed:.2f}s", ok)


def test_criterion_02_degree_of_componentwise_cbrt():
    m = load_fixture("ex_cbrt_cbrt")
    degs = [degree_formula(m, Region.ball([0, 0], r), [0.0, 0.0], SCHED).degree
            for r in (0.5, 1.0, 2.0)]
    sign = sign_at(m, [0.0, 0.0], seed=0).sign
    ok = degs == [1, 1, 1] and sign == 1
    report(f"componentwise-cbrt degree {degs} with sign {sign:+d}", ok)


def test_criterion_03_formula_vs_winding_oracle():
    disagreements = 0
    cases = [("complex_square", 2), ("complex_cube", 3), ("conjugation", -1)]
    ball = Region.ball([0, 0], 2.0)
    for name, want in cases:
        m = load_fixture(name)
        f = degree_formula(m, ball, [0.3, 0.1], SCHED).degree
        w = winding_degree_2d(m, ball, [0.3, 0.1])
        if not (f == w == want):
            disagreements += 1
    rng = np.random.default_rng(0)
    done = 0
    while done < 50:
        A = rng.uniform(-2, 2, size=(2, 2))
        if np.min(np.linalg.svd(A, compute_uv=False)) < 0.1:
            continue
        m = dsl.parse_map(
            f"map lin(x1, x2) = (({A[0,0]}) * x1 + ({A[0,1]}) * x2,"
            f" ({A[1,0]}) * x1 + ({A[1,1]}) * x2)"
        )
        want = int(np.sign(np.linalg.det(A)))
        f = degree_formula(m, ball, [0.0, 0.0], SCHED).degree
        w = winding_degree_2d(m, ball, [0.0, 0.0])
        if not (f == w == want):
            disagreements += 1
        done += 1
    report(f"degree formula vs winding oracle, {disagreements} disagreements",
           disagreements == 0)


def test_criterion_04_degree_axioms():
    m = load_fixture("complex_square")
    subs = [Region.ball([-0.3, 0], 0.2), Region.ball([0.3, 0], 0.2)]
    suite = axiom_suite(m, m, Region.ball([0, 0], 1.0), subs, [0.09, 0.0],
                        steps=20, schedule=SCHED)
    ok = (
        suite.all_pass
        and suite.decomposition["degree_whole"] == 2
        and len(suite.homotopy["degrees"]) == 20
    )
    report("degree axioms: decomposition, local constancy, 20-step homotopy", ok)


def test_criterion_05_quaternion_square():
    m = load_fixture("quat_square")
    jd = dsl.differentiate(m)
    rng = np.random.default_rng(0)
    pts = rng.uniform(-2, 2, size=(1000, 4))
    dets = np.array([np.linalg.det(dsl.eval_jacobian(jd, p)) for p in pts])
    closed_form = 16.0 * pts[:, 0] ** 2 * np.sum(pts**2, axis=1)
    det_ok = np.allclose(dets, closed_form, rtol=1e-9, atol=1e-9)

    from semimap.globalcheck import pourciau_check
    from semimap.regularity import classify_value

    pc = pourciau_check(m, schedule=SCHED, seed=0).passed
    region = Region.box([-2, -2, -2, -2], [2, 2, 2, 2])
    try:
        classify_value(m, region, [-1.0, 0.0, 0.0, 0.0], SCHED)
        fiber_flagged = False
    except PossiblyInfinitePreimage:
        fiber_flagged = True
    ok = det_ok and pc and fiber_flagged
    report("quaternion square: det identity, injectivity check, sphere fiber flagged", ok)


def test_criterion_06_mean_value_inclusion():
    m = load_fixture("complex_square")
    rng = np.random.default_rng(0)
    holds = 0
    for _ in range(100):
        a, b = rng.uniform(-2, 2, size=(2, 2))
        if mvt_inclusion_check(m, a, b, seed=0).holds:
            holds += 1
    kink = load_fixture("neg_abs")
    convex = mvt_inclusion_check(kink, [-1.0], [1.0], seed=0).holds
    raw = mvt_inclusion_check(kink, [-1.0], [1.0], seed=0, convexify=False).holds
    ok = holds == 100 and convex and not raw
    report(f"mean-value inclusion {holds}/100 smooth, kink needs convex hull", ok)


def test_criterion_07_local_inverse_certificate():
    cert = local_inverse_cert(load_fixture("ex_cbrt_x"), [0.0, 0.0], SCHED,
                              pair_samples=10_000)
    pairs_ok = cert.min_ratio >= cert.delta * (1 - 1e-6)
    try:
        local_inverse_cert(load_fixture("ex_sqrt_abs"), [0.0, 0.0], SCHED)
        rejected = False
    except NotRegular:
        rejected = True
    ok = cert.delta >= 0.9 and pairs_ok and rejected
    report(f"local-inverse certificate delta={cert.delta:.3f} on r={cert.radius:g}, "
           "critical point rejected", ok)


def test_criterion_08_implicit_solve():
    F1 = dsl.parse_map("map cubic(x1, x2) = (x2 - x1 * x1 * x1)")
    s1 = implicit_solve(F1, [0.0], [0.0], [-1.0], [1.0], grid_resolution=41)
    e1 = float(np.max(np.abs(s1.y_values[:, 0] - s1.x_grid[:, 0] ** 3)))

    F2 = dsl.parse_map("map circle(x1, x2) = (x1 * x1 + x2 * x2 - 1)")
    s2 = implicit_solve(F2, [0.0], [1.0], [-0.9], [0.9], grid_resolution=41)
    e2 = float(np.max(np.abs(s2.y_values[:, 0] - np.sqrt(1 - s2.x_grid[:, 0] ** 2))))
    ok = e1 <= 1e-8 and e2 <= 1e-8
    report(f"implicit solve errors {e1:.2e} (cubic), {e2:.2e} (circle)", ok)


def test_criterion_09_critical_value_occupancy():
    box = Region.box([-1, -1], [1, 1])
    s1 = sard_scan(load_fixture("complex_square"), box, seed=0)
    s2 = sard_scan(load_fixture("ex_sqrt_abs"), box, seed=0)
    ok = (
        s1.decreasing and s1.occupancy[1] <= 0.5 * s1.occupancy[0]
        and s2.decreasing and s2.occupancy[1] <= 0.5 * s2.occupancy[0]
    )
    report(f"critical-value occupancy halves: {s1.occupancy} and {s2.occupancy}", ok)


def test_criterion_10_global_diagnostics_and_reports(tmp_path):
    good = dsl.parse_map("map d(x1) = (2 * x1)")
    bad = dsl.parse_map("map c(x1) = (x1 * x1 * x1)")
    had_ok = (
        hadamard_uniform_check(good, delta=1.0, seed=0).passed
        and hadamard_uniform_check(bad, delta=0.5, seed=0).verdict == "fail"
        and hadamard_uniform_check(bad, delta=0.5, seed=0).witness
        == hadamard_uniform_check(bad, delta=0.5, seed=0).witness
    )
    hits = kinf_probe(load_fixture("shear_product"), targets=[(0.0, 1.0)], seed=0)
    cluster_ok = any(
        np.linalg.norm(np.asarray(e.candidate) - [0.0, 1.0]) < 0.05 for e in hits
    )
    empty_ok = kinf_probe(load_fixture("identity2"), seed=0) == []

    a, b = tmp_path / "a.json", tmp_path / "b.json"
    args = ["global", "--map", str(fixture_path("identity2")), "--seed", "5"]
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    bytes_ok = a.read_bytes() == b.read_bytes()
    ok = had_ok and cluster_ok and empty_ok and bytes_ok
    report("global diagnostics: uniform bound, asymptotic witness, "
           "byte-identical seeded reports", ok)
