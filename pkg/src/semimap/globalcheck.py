"""Sampled diagnostics for global surjectivity / invertibility criteria.

Every "pass" here means "no counterexample found at the recorded budget";
the theorems quantify over all of R^n and sampling cannot prove them, so
each section carries its seeds and sample counts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import dsl
from .conorm import conorm_many
from .errors import PossiblyInfinitePreimage
from .region import Region, sample_sphere
from .regularity import NuSchedule, _fast_nu_at, sard_scan
from .roots import find_preimages

BOX_LEVELS_DEFAULT = 5
SPHERE_SAMPLES_DEFAULT = 192
_DESCENT_ITERS = 160
_INTEGRAL_WINDOW_FLOOR = 0.1


def _minimize_on_sphere(func, center, radius, u0, iters=_DESCENT_ITERS):
    """Projected gradient descent of func(center + radius*u) over unit u."""
    center = np.asarray(center, dtype=float)
    u = np.asarray(u0, dtype=float)
    u = u / np.linalg.norm(u)
    n = len(u)
    val = func(center + radius * u)
    step = 0.25
    for _ in range(iters):
        h = 1e-6
        grad = np.empty(n)
        for j in range(n):
            e = np.zeros(n)
            e[j] = h
            up = (u + e) / np.linalg.norm(u + e)
            um = (u - e) / np.linalg.norm(u - e)
            grad[j] = (func(center + radius * up) - func(center + radius * um)) / (2 * h)
        gn = np.linalg.norm(grad)
        if gn < 1e-14:
            break
        improved = False
        lam = step
        for _ in range(20):
            cand = u - lam * grad / gn
            cand /= np.linalg.norm(cand)
            cv = func(center + radius * cand)
            if cv < val:
                u, val = cand, cv
                improved = True
                step = min(0.5, lam * 2.0)
                break
            lam *= 0.5
        if not improved:
            break
    return u, val


def _pointwise_nu(m, jd, pts, guard_tol, seed):
    return _fast_nu_at(m, jd, np.atleast_2d(pts), guard_tol, None, seed)


@dataclass
class Section:
    verdict: str  # "pass" | "fail" | "inconclusive"
    witness: list | None
    evidence: dict
    budget: dict

    @property
    def passed(self):
        return self.verdict == "pass"


def properness_probe(m: dsl.MapDef, radii=(1.0, 2.0, 4.0, 8.0, 16.0),
                     sphere_samples=SPHERE_SAMPLES_DEFAULT, seed=0) -> Section:
    """min ||f|| over spheres of growing radius; proper maps push it up.

    Each sphere minimum is refined by projected descent from the best
    random sample, so bad directions (e.g. a collapsed axis) are found."""
    radii = list(radii)
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be increasing")
    rng = np.random.default_rng([seed, 11])
    center = np.zeros(m.arity)

    def fnorm(x):
        v = dsl.eval_map(m, x[None], strict=False)[0]
        return float(np.linalg.norm(v)) if np.all(np.isfinite(v)) else np.inf

    minima, argmins = [], []
    for r in radii:
        pts = sample_sphere(rng, center, r, sphere_samples)
        vals = np.linalg.norm(dsl.eval_map(m, pts, strict=False), axis=1)
        vals = np.where(np.isfinite(vals), vals, np.inf)
        best = pts[int(np.argmin(vals))]
        u, val = _minimize_on_sphere(fnorm, center, r, best / r)
        minima.append(val)
        argmins.append(center + r * u)
    increasing = all(b > a for a, b in zip(minima, minima[1:]))
    grew = minima[-1] > max(1.5 * minima[0], 1e-6)
    if increasing and grew:
        verdict, witness = "pass", None
    elif minima[-1] <= max(minima[0], 1e-6):
        verdict, witness = "fail", argmins[-1].tolist()
    else:
        verdict, witness = "inconclusive", None
    return Section(
        verdict, witness,
        {"radii": radii, "min_norms": minima},
        {"sphere_samples": sphere_samples, "seed": seed},
    )


def pourciau_check(m: dsl.MapDef, box_levels=3, sign_samples=400,
                   surjectivity_targets=3, schedule: NuSchedule = NuSchedule(),
                   quasi_interior_probe=True, seed=0) -> Section:
    """Sampled version of the surjectivity criterion: one-signed Jacobian
    determinant, measure-zero critical set, then direct solve spot-checks
    (plus an openness probe around each solved value)."""
    jd = dsl.differentiate(m)
    rng = np.random.default_rng([seed, 13])
    evidence: dict = {}

    signs_seen = set()
    sign_witnesses = {}
    for k in range(box_levels + 1):
        half = 2.0**k
        pts = rng.uniform(-half, half, size=(sign_samples, m.arity))
        mats, ok = dsl.eval_jacobian_batch(jd, pts, guard_tol=schedule.guard_tol)
        dets = np.linalg.det(mats[ok])
        scale = np.maximum(np.abs(dets).max(initial=1.0), 1.0)
        for p, d in zip(pts[ok], dets):
            if abs(d) > 1e-12 * scale:
                s = 1 if d > 0 else -1
                signs_seen.add(s)
                sign_witnesses.setdefault(s, p.tolist())
    sign_ok = len(signs_seen) <= 1
    evidence["sign_constancy"] = {
        "signs_seen": sorted(signs_seen),
        "witnesses": sign_witnesses if not sign_ok else {},
    }

    # critical-point occupancy on the domain side
    box = Region.box([-2.0] * m.arity, [2.0] * m.arity)
    gres = 9 if m.arity <= 2 else 5
    pts1 = box.grid(gres)
    pts2 = box.grid(2 * gres - 1)
    nu1 = _pointwise_nu(m, jd, pts1, schedule.guard_tol, seed)
    nu2 = _pointwise_nu(m, jd, pts2, schedule.guard_tol, seed)
    frac1 = float(np.mean(nu1 <= schedule.eps_critical))
    frac2 = float(np.mean(nu2 <= schedule.eps_critical))
    crit_ok = frac2 <= max(0.75 * frac1, 0.02) or (frac1 == 0.0 and frac2 == 0.0)
    evidence["critical_occupancy"] = {"fractions": [frac1, frac2], "grid": [gres, 2 * gres - 1]}

    # surjectivity spot checks by direct solve over a growing region
    solves = []
    openness = []
    for tix in range(surjectivity_targets):
        y = rng.normal(scale=1.0, size=m.arity)
        found = None
        for half in (2.0, 4.0, 8.0):
            reg = Region.box([-half] * m.arity, [half] * m.arity)
            try:
                pre = find_preimages(m, reg, y, grid_resolution=5 if m.arity > 2 else 9,
                                     seed=seed + tix, check_growth=False)
            except PossiblyInfinitePreimage:
                pre = None
            if pre is not None and len(pre.points) > 0:
                found = pre.points[0]
                break
        solves.append({"target": y.tolist(),
                       "solved": found is not None,
                       "root": None if found is None else found.tolist()})
        if found is not None and quasi_interior_probe:
            eps = 1e-2
            offs = _compass_offsets(m.n_out, eps)
            ok_offsets = 0
            for off in offs:
                Xo, ro = _warm_solve(m, jd, found, y + off)
                if ro <= 1e-8:
                    ok_offsets += 1
            openness.append({"target": y.tolist(), "offsets_solved": ok_offsets,
                             "offsets_total": len(offs)})
    surj_ok = all(s["solved"] for s in solves)
    evidence["surjectivity"] = solves
    if openness:
        evidence["quasi_interior"] = openness

    if not sign_ok:
        verdict, witness = "fail", list(sign_witnesses.values())
    elif not crit_ok:
        verdict, witness = "fail", None
    elif not surj_ok:
        verdict, witness = "fail", [s["target"] for s in solves if not s["solved"]]
    else:
        verdict, witness = "pass", None
    return Section(verdict, witness, evidence,
                   {"box_levels": box_levels, "sign_samples": sign_samples,
                    "targets": surjectivity_targets, "seed": seed})


def _compass_offsets(n, eps):
    if n == 2:
        d = np.array([[1, 0], [1, 1], [0, 1], [-1, 1], [-1, 0], [-1, -1], [0, -1], [1, -1]],
                     dtype=float)
        return eps * d / np.linalg.norm(d, axis=1, keepdims=True)
    offs = []
    for j in range(n):
        e = np.zeros(n)
        e[j] = eps
        offs.extend([e, -e])
    return np.asarray(offs)


def _warm_solve(m, jd, x0, y):
    from .roots import NewtonParams, newton_batch

    X, res = newton_batch(m, jd, np.atleast_2d(x0), y, params=NewtonParams(max_iter=40))
    return X[0], float(res[0])


def hadamard_uniform_check(m: dsl.MapDef, delta, box_levels=3, samples=600,
                           schedule: NuSchedule = NuSchedule(), seed=0) -> Section:
    """Search for points with regularity index below delta over expanding
    boxes; a pass is sampled evidence, not a proof."""
    if delta <= 0:
        raise ValueError("delta must be > 0")
    jd = dsl.differentiate(m)
    rng = np.random.default_rng([seed, 17])
    worst_val, worst_pt = np.inf, None
    for k in range(box_levels + 1):
        half = 2.0**k
        pts = rng.uniform(-half, half, size=(samples, m.arity))
        nu = _pointwise_nu(m, jd, pts, schedule.guard_tol, seed)
        i = int(np.argmin(nu))
        if nu[i] < worst_val:
            worst_val, worst_pt = float(nu[i]), pts[i]
    # local refinement of the worst sample strengthens a near-witness
    if worst_pt is not None and worst_val < 10 * delta:

        def nu_at(x):
            return float(_pointwise_nu(m, jd, x[None], schedule.guard_tol, seed)[0])

        x = worst_pt.copy()
        val = worst_val
        step = 0.1 * (1.0 + np.linalg.norm(x))
        for _ in range(60):
            moved = False
            for j in range(m.arity):
                for s in (step, -step):
                    cand = x.copy()
                    cand[j] += s
                    cv = nu_at(cand)
                    if cv < val:
                        x, val = cand, cv
                        moved = True
            if not moved:
                step *= 0.5
                if step < 1e-9:
                    break
        worst_val, worst_pt = val, x
    if worst_val < delta:
        verdict, witness = "fail", worst_pt.tolist()
    else:
        verdict, witness = "pass", None
    return Section(
        verdict, witness,
        {"delta": delta, "min_nu_found": worst_val,
         "note": "sampled evidence, not proof"},
        {"box_levels": box_levels, "samples": samples, "seed": seed},
    )


def hadamard_integral_check(m: dsl.MapDef, c_expr: dsl.ExprNode, t_max=16.0,
                            samples=600, schedule: NuSchedule = NuSchedule(),
                            seed=0) -> Section:
    """Pointwise nu(x) >= c(||x||) on samples plus a divergence trend for
    the integral of c: doubling-window increments must not collapse."""
    jd = dsl.differentiate(m)
    rng = np.random.default_rng([seed, 19])
    pts = rng.normal(size=(samples, m.arity))
    pts *= (rng.uniform(0, t_max, size=(samples, 1))
            / np.linalg.norm(pts, axis=1, keepdims=True))
    nu = _pointwise_nu(m, jd, pts, schedule.guard_tol, seed)
    radii = np.linalg.norm(pts, axis=1)
    cvals = dsl.eval_expr(c_expr, radii[:, None])
    if np.any(cvals <= 0):
        raise ValueError("c(t) must be positive on [0, t_max]")
    slack = nu - cvals
    i = int(np.argmin(slack))
    pointwise_ok = bool(slack[i] >= 0)

    windows = []
    increments = []
    prev = 0.0
    for j in range(6):
        hi = t_max * 2.0**j
        grid = np.linspace(0.0, hi, 4097)
        total = float(np.trapezoid(dsl.eval_expr(c_expr, grid[:, None]), grid))
        increments.append(total - prev)
        windows.append(hi)
        prev = total
    diverges = all(inc >= _INTEGRAL_WINDOW_FLOOR * increments[0] for inc in increments[1:])

    if pointwise_ok and diverges:
        verdict, witness = "pass", None
    elif not pointwise_ok:
        verdict, witness = "fail", pts[i].tolist()
    else:
        verdict, witness = "fail", None
    return Section(
        verdict, witness,
        {"min_slack": float(slack[i]), "windows": windows,
         "window_increments": increments, "diverges": diverges,
         "note": "sampled evidence, not proof"},
        {"samples": samples, "t_max": t_max, "seed": seed},
    )


@dataclass
class KinfEvidence:
    candidate: list
    radii: list
    products: list  # ||x_k|| * nu(x_k) along the witness sequence
    f_values: list


def kinf_probe(m: dsl.MapDef, ray_count=6, radii=None,
               schedule: NuSchedule = NuSchedule(), seed=0,
               targets=None) -> list[KinfEvidence]:
    """Hunt for asymptotic critical values: sequences with ||x|| -> inf,
    f(x) convergent and ||x|| * nu(x) -> 0.

    Two families are explored: straight rays, and constrained descent
    tracks x_R = argmin over the sphere of ||f - y0|| for anchor values y0
    (f at moderate sample points by default, or caller-supplied targets).
    An empty list means no evidence found, not a proof of emptiness."""
    if radii is None:
        radii = [2.0**k for k in range(1, 11)]
    jd = dsl.differentiate(m)
    rng = np.random.default_rng([seed, 23])
    center = np.zeros(m.arity)
    evidence = []

    def nu_at(x):
        return float(_pointwise_nu(m, jd, np.atleast_2d(x), schedule.guard_tol, seed)[0])

    def record_if_evidence(track):
        rs = [t[0] for t in track]
        fs = [t[1] for t in track]
        prods = [t[2] for t in track]
        if len(fs) < 3:
            return
        tail_step = np.linalg.norm(np.asarray(fs[-1]) - np.asarray(fs[-2]))
        if not np.all(np.isfinite(fs[-1])):
            return
        f_converges = tail_step <= 0.05 * (1.0 + np.linalg.norm(fs[-1]))
        prod_vanishes = (
            np.isfinite(prods[-1])
            and prods[-1] <= 0.1 * max(prods[0], 1e-30)
            and prods[-1] <= 0.2
        )
        if f_converges and prod_vanishes:
            evidence.append(KinfEvidence(
                list(np.asarray(fs[-1], dtype=float)), rs, prods,
                [list(np.asarray(f, dtype=float)) for f in fs],
            ))

    # straight rays
    for _ in range(ray_count):
        u = rng.normal(size=m.arity)
        u /= np.linalg.norm(u)
        track = []
        for r in radii:
            x = r * u
            fx = dsl.eval_map(m, x[None], strict=False)[0]
            track.append((r, fx, r * nu_at(x)))
        record_if_evidence(track)

    # constrained descent toward anchor values
    if targets is None:
        anchors = []
        for _ in range(ray_count):
            x0 = 1.5 * rng.normal(size=m.arity)
            anchors.append(dsl.eval_map(m, x0[None], strict=False)[0])
    else:
        anchors = [np.asarray(t, dtype=float) for t in targets]
    for y0 in anchors:
        if not np.all(np.isfinite(y0)):
            continue

        def dist_fn(x):
            v = dsl.eval_map(m, x[None], strict=False)[0] - y0
            return float(np.linalg.norm(v)) if np.all(np.isfinite(v)) else np.inf

        u = rng.normal(size=m.arity)
        u /= np.linalg.norm(u)
        track = []
        for r in radii:
            u, _ = _minimize_on_sphere(dist_fn, center, r, u)
            x = r * u
            fx = dsl.eval_map(m, x[None], strict=False)[0]
            track.append((r, fx, r * nu_at(x)))
        record_if_evidence(track)

    # merge clusters by candidate proximity
    merged = []
    for ev in evidence:
        if not any(np.linalg.norm(np.asarray(ev.candidate) - np.asarray(e.candidate)) < 0.15
                   for e in merged):
            merged.append(ev)
    return merged


@dataclass
class GlobalReport:
    map_name: str
    properness: Section | None = None
    pourciau: Section | None = None
    hadamard_uniform: Section | None = None
    hadamard_integral: Section | None = None
    kinf_evidence: list = field(default_factory=list)
    seed: int = 0


def global_report(m: dsl.MapDef, delta=None, c_expr=None,
                  schedule: NuSchedule = NuSchedule(), seed=0) -> GlobalReport:
    rep = GlobalReport(m.name, seed=seed)
    rep.properness = properness_probe(m, seed=seed)
    rep.pourciau = pourciau_check(m, schedule=schedule, seed=seed)
    if delta is not None:
        rep.hadamard_uniform = hadamard_uniform_check(m, delta, schedule=schedule, seed=seed)
    if c_expr is not None:
        rep.hadamard_integral = hadamard_integral_check(m, c_expr, schedule=schedule, seed=seed)
    rep.kinf_evidence = kinf_probe(m, schedule=schedule, seed=seed)
    return rep
