"""Regularity index estimation and the local theorems built on it.

The regularity index of f at x is the limit, as r -> 0+, of the infimum of
the co-norm over the convex hull of Jacobians of f on the ball B_r(x) off
the non-smooth locus. It is estimated on a geometric radius schedule with
seeded sampling; +infinity is reported as a verdict flag, never as a float.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import nnls

from . import dsl
from .conorm import hull_conorm_inf
from .errors import (
    AllSamplesOnGuard,
    ConditionFails,
    NotRegular,
    SegmentOnGuard,
    SignDisagreement,
)
from .region import Region, sample_ball

EPS_CRITICAL = 1e-4
EPS_REGULAR = 1e-2
NU_CAP = 1e6
R0_DEFAULT = 0.5
LEVELS_DEFAULT = 8
SAMPLES_PER_LEVEL = 48
_MAX_TOTAL_LEVELS = 60
_REJECTION_LIMIT = 1000


@dataclass(frozen=True)
class NuSchedule:
    r0: float = R0_DEFAULT
    levels: int = LEVELS_DEFAULT
    samples: int = SAMPLES_PER_LEVEL
    nu_cap: float = NU_CAP
    eps_critical: float = EPS_CRITICAL
    eps_regular: float = EPS_REGULAR
    guard_tol: float = dsl.GUARD_TOL_DEFAULT
    seed: int = 0

    def __post_init__(self):
        if self.r0 <= 0 or self.levels < 2:
            raise ValueError("schedule needs r0 > 0 and at least 2 levels")


@dataclass
class NuEstimate:
    point: np.ndarray
    radii: list
    estimates: list
    slacks: list
    verdict: str  # "converged" | "infinite" | "zero"
    value: float | None
    sample_budget: int
    seed: int


def _sample_off_guards(jd, rng, center, r, count, guard_tol):
    """Rejection-sample `count` ball points with every |guard| > guard_tol*r."""
    center = np.asarray(center, dtype=float)
    tol = guard_tol * r
    kept = []
    misses = 0
    while sum(len(k) for k in kept) < count:
        batch = sample_ball(rng, center, r, max(count, 32))
        ok = np.all(dsl.guard_values(jd, batch) > tol, axis=-1)
        if not np.any(ok):
            misses += len(batch)
            if misses >= _REJECTION_LIMIT:
                raise AllSamplesOnGuard(
                    f"no sample off the guard set in B_{r:g}(x) after {misses} draws"
                )
            continue
        misses = 0
        kept.append(batch[ok])
    return np.vstack(kept)[:count]


def _lipschitz_slack(mats, pts, r):
    """Sampling slack 2 * Lip(df) * r from consecutive-pair differences."""
    if len(mats) < 2:
        return 0.0
    dm = np.linalg.norm((mats[1:] - mats[:-1]).reshape(len(mats) - 1, -1), axis=1)
    dx = np.linalg.norm(pts[1:] - pts[:-1], axis=1)
    good = dx > 0
    if not np.any(good):
        return 0.0
    lip = float(np.max(dm[good] / dx[good]))
    return 2.0 * lip * r


def _level_estimate(m, jd, x, r, schedule, k):
    rng = np.random.default_rng([schedule.seed, k])
    pts = _sample_off_guards(jd, rng, x, r, schedule.samples, schedule.guard_tol)
    mats, ok = dsl.eval_jacobian_batch(jd, pts, guard_tol=schedule.guard_tol * r)
    mats, pts = mats[ok], pts[ok]
    if len(mats) == 0:
        raise AllSamplesOnGuard(f"all Jacobians invalid in B_{r:g}(x)")
    est = hull_conorm_inf(mats, samples=schedule.samples, seed=schedule.seed * 7919 + k)
    return est, _lipschitz_slack(mats, pts, r)


def estimate_nu(m: dsl.MapDef, x, schedule: NuSchedule = NuSchedule()) -> NuEstimate:
    """Radius-indexed hull co-norm estimates of the regularity index at x.

    Levels follow r_k = r0 * 2^-k. When the estimates keep growing the
    schedule is extended (the index may be infinite); the "infinite"
    verdict is only issued once an estimate clears nu_cap.
    """
    x = np.asarray(x, dtype=float)
    jd = dsl.differentiate(m)
    radii, estimates, slacks = [], [], []
    k = 0
    while True:
        r = schedule.r0 * 2.0**-k
        est, slack = _level_estimate(m, jd, x, r, schedule, k)
        radii.append(r)
        estimates.append(est)
        slacks.append(slack)
        k += 1
        if k < schedule.levels:
            continue
        if estimates[-1] > schedule.nu_cap:
            break
        diverging = (
            estimates[-1] >= schedule.eps_regular
            and estimates[-1] > 1.2 * estimates[-2]
            and estimates[-2] > 1.2 * estimates[-3]
        )
        # steady decay between the two thresholds means the limit has not
        # settled either; keep shrinking until it commits to a side
        decaying = (
            estimates[-1] >= schedule.eps_critical
            and estimates[-1] < schedule.eps_regular
            and estimates[-1] < 0.8 * estimates[-2]
        )
        if k >= _MAX_TOTAL_LEVELS or not (diverging or decaying):
            break
    budget = k * schedule.samples
    final = estimates[-1]
    if final > schedule.nu_cap:
        verdict, value = "infinite", None
    elif final < schedule.eps_critical:
        verdict, value = "zero", final
    else:
        verdict, value = "converged", final
    return NuEstimate(x, radii, estimates, slacks, verdict, value, budget, schedule.seed)


@dataclass
class PointClass:
    kind: str  # "regular" | "critical" | "undetermined"
    nu: NuEstimate

    @property
    def value(self):
        return self.nu.value


def classify_point(m: dsl.MapDef, x, schedule: NuSchedule = NuSchedule()) -> PointClass:
    est = estimate_nu(m, x, schedule)
    if est.verdict == "infinite":
        return PointClass("regular", est)
    if est.verdict == "zero":
        return PointClass("critical", est)
    if est.value >= schedule.eps_regular:
        return PointClass("regular", est)
    return PointClass("undetermined", est)


@dataclass
class ValueClass:
    kind: str  # "regular-value" | "critical-value" | "undetermined"
    preimages: list  # (point, PointClass) pairs


def classify_value(m: dsl.MapDef, region: Region, y,
                   schedule: NuSchedule = NuSchedule(),
                   grid_resolution=9) -> ValueClass:
    """Classify y through its preimages inside the region; an empty fiber
    is a regular value."""
    from .roots import find_preimages

    pre = find_preimages(m, region, y, grid_resolution=grid_resolution,
                         seed=schedule.seed)
    pairs = [(pt, classify_point(m, pt, schedule)) for pt in pre.points]
    kinds = [c.kind for _, c in pairs]
    if any(k == "critical" for k in kinds):
        return ValueClass("critical-value", pairs)
    if any(k == "undetermined" for k in kinds):
        return ValueClass("undetermined", pairs)
    return ValueClass("regular-value", pairs)


@dataclass
class SignResult:
    point: np.ndarray
    sign: int
    probe_count: int
    all_agree: bool


def sign_at(m: dsl.MapDef, x, probes=12, radius=1e-3, seed=0,
            guard_tol=dsl.GUARD_TOL_DEFAULT) -> SignResult:
    """Common determinant sign near a regular point, from probes on
    shrinking balls off the guard set."""
    x = np.asarray(x, dtype=float)
    jd = dsl.differentiate(m)
    rng = np.random.default_rng([seed, 211])
    signs = []
    for jix in range(probes):
        r = radius * 2.0**-jix
        pts = _sample_off_guards(jd, rng, x, r, 2, guard_tol)
        mats, ok = dsl.eval_jacobian_batch(jd, pts, guard_tol=guard_tol * r)
        for A in mats[ok]:
            d = float(np.linalg.det(A))
            if d != 0:
                signs.append(1 if d > 0 else -1)
    if not signs:
        raise SignDisagreement("no usable probes near the point")
    if len(set(signs)) > 1:
        raise SignDisagreement(f"determinant signs disagree near {x.tolist()}")
    return SignResult(x, signs[0], len(signs), True)


# ---------------------------------------------------------------------------
# Sard scan


@dataclass
class SardScan:
    grid_resolutions: tuple
    value_resolutions: tuple
    occupancy: tuple  # fraction of value-space cells occupied, per resolution
    critical_counts: tuple
    decreasing: bool


def _fast_nu_at(m, jd, pts, guard_tol, eps, seed):
    """Pointwise regularity proxy for grid scans: sigma(df) off guards, a
    tiny local hull estimate on them."""
    from .conorm import conorm_many

    mats, ok = dsl.eval_jacobian_batch(jd, pts, guard_tol=guard_tol)
    nu = np.full(len(pts), np.inf)
    nu[ok] = conorm_many(mats[ok])
    rng = np.random.default_rng([seed, 31])
    for i in np.where(~ok)[0]:
        r = 1e-4 * (1.0 + np.linalg.norm(pts[i]))
        try:
            ball = _sample_off_guards(jd, rng, pts[i], r, 24, guard_tol)
        except AllSamplesOnGuard:
            nu[i] = 0.0
            continue
        bm, bok = dsl.eval_jacobian_batch(jd, ball, guard_tol=guard_tol * r)
        nu[i] = hull_conorm_inf(bm[bok], samples=24, seed=seed) if np.any(bok) else 0.0
    return nu


def sard_scan(m: dsl.MapDef, region: Region, grid_resolution=9,
              value_resolution=8, eps_critical=EPS_CRITICAL,
              guard_tol=dsl.GUARD_TOL_DEFAULT, seed=0) -> SardScan:
    """Occupancy of critical values in value space at two resolutions.

    Grid points are classified, critical ones are mapped forward, and the
    fraction of occupied value-space cells is reported; it must shrink as
    both resolutions double (critical values have measure zero).
    """
    jd = dsl.differentiate(m)
    all_pts = region.grid(2 * grid_resolution - 1)
    vals = dsl.eval_map(m, all_pts, strict=False)
    vlo = np.min(vals, axis=0)
    vhi = np.max(vals, axis=0)
    span = np.where(vhi > vlo, vhi - vlo, 1.0)

    def occupancy(gres, vres):
        pts = region.grid(gres)
        nu = _fast_nu_at(m, jd, pts, guard_tol, eps_critical, seed)
        crit = pts[nu <= eps_critical]
        if len(crit) == 0:
            return 0.0, 0
        cv = dsl.eval_map(m, crit, strict=False)
        cells = np.clip(((cv - vlo) / span * vres).astype(int), 0, vres - 1)
        occupied = len(np.unique(cells, axis=0))
        return occupied / float(vres**region.dim), len(crit)

    f1, c1 = occupancy(grid_resolution, value_resolution)
    f2, c2 = occupancy(2 * grid_resolution - 1, 2 * value_resolution)
    return SardScan(
        (grid_resolution, 2 * grid_resolution - 1),
        (value_resolution, 2 * value_resolution),
        (f1, f2),
        (c1, c2),
        decreasing=f2 <= 0.5 * f1 if f1 > 0 else f2 == 0.0,
    )


# ---------------------------------------------------------------------------
# Mean value checks


@dataclass
class MvtInclusion:
    holds: bool
    distance: float
    tolerance: float
    convexified: bool
    sample_count: int
    weights: np.ndarray | None = field(default=None, repr=False)


def _dist_to_hull(vectors, target):
    """Distance from target to co{vectors} via a simplex-constrained
    least-squares solve (NNLS on an augmented system)."""
    V = np.asarray(vectors, dtype=float).T  # (n, s)
    scale = max(1.0, float(np.max(np.abs(V))), float(np.max(np.abs(target))))
    alpha = 1e3 * scale
    A = np.vstack([V, alpha * np.ones((1, V.shape[1]))])
    b = np.concatenate([np.asarray(target, dtype=float), [alpha]])
    w, _ = nnls(A, b)
    return float(np.linalg.norm(V @ w - target)), w


def mvt_inclusion_check(m: dsl.MapDef, x, x2, hull_samples=4096, seed=0,
                        convexify=True,
                        guard_tol=dsl.GUARD_TOL_DEFAULT) -> MvtInclusion:
    """Membership of f(x') - f(x) in the convex hull of {A (x'-x)} for
    Jacobians A sampled along the segment off the guard set.

    convexify=False is a diagnostic mode testing membership in the raw
    (unconvexified) image set; it is expected to fail for maps like -|x|.
    """
    x = np.asarray(x, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    jd = dsl.differentiate(m)
    t = (np.arange(hull_samples) + 0.5) / hull_samples
    pts = x[None, :] + t[:, None] * (x2 - x)[None, :]
    off = np.all(dsl.guard_values(jd, pts) > guard_tol, axis=-1)
    if not np.any(off):
        raise SegmentOnGuard("every sampled segment point lies on a guard zero set")
    mats, ok = dsl.eval_jacobian_batch(jd, pts[off], guard_tol=guard_tol)
    mats = mats[ok]
    if len(mats) == 0:
        raise SegmentOnGuard("no valid Jacobian on the segment")
    dx = x2 - x
    vecs = np.einsum("sij,j->si", mats, dx)
    target = dsl.eval_map(m, x2) - dsl.eval_map(m, x)
    tol = 1e-6 * max(float(np.linalg.norm(dx)), 1e-30)
    if convexify:
        dist, w = _dist_to_hull(vecs, target)
        return MvtInclusion(dist <= tol, dist, tol, True, len(vecs), w)
    dist = float(np.min(np.linalg.norm(vecs - target, axis=1)))
    return MvtInclusion(dist <= tol, dist, tol, False, len(vecs))


@dataclass
class MvtInequality:
    center: np.ndarray
    radius: float
    bound: float
    hull_estimate: float
    slack: float
    min_ratio: float
    holds: bool


def mvt_inequality_check(m: dsl.MapDef, center, r, pair_samples=2000, seed=0,
                         schedule: NuSchedule = NuSchedule()) -> MvtInequality:
    """||f(x') - f(x)|| >= (hull estimate - slack) * ||x' - x|| on sampled
    pairs from B_r(center). The slack covers the gap between the sampled
    hull upper bound and the true infimum."""
    center = np.asarray(center, dtype=float)
    jd = dsl.differentiate(m)
    rng = np.random.default_rng([schedule.seed, seed, 47])
    pts = _sample_off_guards(jd, rng, center, r, schedule.samples, schedule.guard_tol)
    mats, ok = dsl.eval_jacobian_batch(jd, pts, guard_tol=schedule.guard_tol * r)
    est = hull_conorm_inf(mats[ok], samples=schedule.samples, seed=seed)
    slack_lip = _lipschitz_slack(mats[ok], pts[ok], r)
    slack = min(0.25 * est, slack_lip / max(1, len(mats)) ** (1.0 / m.arity)) + 1e-9
    bound = max(est - slack, 0.0)
    a = sample_ball(rng, center, r, pair_samples)
    b = sample_ball(rng, center, r, pair_samples)
    keep = np.linalg.norm(a - b, axis=1) > 1e-12
    a, b = a[keep], b[keep]
    ratios = np.linalg.norm(dsl.eval_map(m, b) - dsl.eval_map(m, a), axis=1)
    ratios /= np.linalg.norm(b - a, axis=1)
    min_ratio = float(np.min(ratios)) if len(ratios) else np.inf
    return MvtInequality(center, r, bound, est, slack, min_ratio,
                         holds=min_ratio >= bound - 1e-9)


# ---------------------------------------------------------------------------
# Local inverse certificate


@dataclass
class LocalInverseCert:
    center: np.ndarray
    radius: float
    delta: float
    pair_count: int
    min_ratio: float
    worst_pairs: list  # up to 10 (x, x', ratio) triples with the lowest ratios


def local_inverse_cert(m: dsl.MapDef, x, schedule: NuSchedule = NuSchedule(),
                       pair_samples=10_000) -> LocalInverseCert:
    """Radius and expansion constant delta with ||f(x')-f(x)|| >= delta
    ||x'-x|| validated on sampled pairs; refuses non-regular centers."""
    x = np.asarray(x, dtype=float)
    cls = classify_point(m, x, schedule)
    if cls.kind != "regular":
        raise NotRegular(f"point classified {cls.kind}, no inverse certificate")
    est = cls.nu
    # prefer the largest radius whose hull estimate is already close to the
    # limit estimate, so delta does not degrade with the radius choice
    limit = est.estimates[-1]
    target = max(schedule.eps_regular, 0.9 * min(limit, schedule.nu_cap))
    level = None
    for k, e in enumerate(est.estimates):
        if e >= target:
            level = k
            break
    if level is None:
        raise NotRegular("no schedule radius with a regular hull estimate")
    r = est.radii[level]
    delta0 = est.estimates[level]
    rng = np.random.default_rng([schedule.seed, 83])
    a = sample_ball(rng, x, r, pair_samples)
    b = sample_ball(rng, x, r, pair_samples)
    keep = np.linalg.norm(a - b, axis=1) > 1e-12
    a, b = a[keep], b[keep]
    ratios = np.linalg.norm(dsl.eval_map(m, b) - dsl.eval_map(m, a), axis=1)
    ratios /= np.linalg.norm(b - a, axis=1)
    min_ratio = float(np.min(ratios))
    delta = min(delta0, min_ratio)
    order = np.argsort(ratios)[:10]
    worst = [(a[i], b[i], float(ratios[i])) for i in order]
    return LocalInverseCert(x, r, delta, len(ratios), min_ratio, worst)


# ---------------------------------------------------------------------------
# Implicit function solver


@dataclass
class ImplicitSolution:
    x_grid: np.ndarray  # (cells, n)
    y_values: np.ndarray  # (cells, p), nan rows where Newton diverged
    residuals: np.ndarray
    diverged_cells: list
    condition_estimate: float


def implicit_solve(F: dsl.MapDef, xbar, ybar, box_lo, box_hi, grid_resolution=21,
                   newton_max_iter=80, newton_tol=1e-10,
                   schedule: NuSchedule = NuSchedule()) -> ImplicitSolution:
    """Continuation solve of F(x, y) = 0 for y = G(x) on a grid around xbar.

    F has arity n + p with p components (x first, then y). The grid is
    walked breadth-first from the cell nearest xbar so every Newton start
    is warm. Requires the hull co-norm of dF/dy near (xbar, ybar) to clear
    the regularity threshold."""
    xbar = np.atleast_1d(np.asarray(xbar, dtype=float))
    ybar = np.atleast_1d(np.asarray(ybar, dtype=float))
    n, p = len(xbar), len(ybar)
    if F.arity != n + p or F.n_out != p:
        raise ValueError("F must have arity n+p and p components")
    z0 = np.concatenate([xbar, ybar])
    if np.linalg.norm(dsl.eval_map(F, z0)) > newton_tol * 10:
        raise ValueError("F(xbar, ybar) is not (numerically) zero")
    jd_y = dsl.partial_jacobian(F, range(n, n + p))

    # condition estimate: hull co-norm of dF/dy over points near (xbar, ybar)
    rng = np.random.default_rng([schedule.seed, 59])
    r0 = 0.05 * (1.0 + float(np.linalg.norm(z0)))
    pts = _sample_off_guards(jd_y, rng, z0, r0, schedule.samples, schedule.guard_tol)
    mats, ok = dsl.eval_jacobian_batch(jd_y, pts, guard_tol=schedule.guard_tol * r0)
    cond = hull_conorm_inf(mats[ok], samples=schedule.samples, seed=schedule.seed)
    if cond < schedule.eps_regular:
        raise ConditionFails(f"dF/dy hull co-norm estimate {cond:.3g} below threshold")

    box_lo = np.atleast_1d(np.asarray(box_lo, dtype=float))
    box_hi = np.atleast_1d(np.asarray(box_hi, dtype=float))
    axes = [np.linspace(box_lo[i], box_hi[i], grid_resolution) for i in range(n)]
    mesh = np.meshgrid(*axes, indexing="ij")
    xg = np.stack([mm.ravel() for mm in mesh], axis=-1)
    cells = len(xg)
    shape = (grid_resolution,) * n

    start = int(np.argmin(np.linalg.norm(xg - xbar, axis=1)))
    order, seen = [start], {start}
    queue = [start]
    strides = np.array([int(np.prod(shape[i + 1:])) for i in range(n)])
    while queue:
        cell = queue.pop(0)
        idx = np.unravel_index(cell, shape)
        for axis in range(n):
            for step in (-1, 1):
                jdx = list(idx)
                jdx[axis] += step
                if 0 <= jdx[axis] < grid_resolution:
                    nb = int(np.dot(jdx, strides))
                    if nb not in seen:
                        seen.add(nb)
                        order.append(nb)
                        queue.append(nb)

    yvals = np.full((cells, p), np.nan)
    resid = np.full(cells, np.nan)
    diverged = []
    warm = {start: ybar}
    pos = {c: i for i, c in enumerate(order)}
    for cell in order:
        xc = xg[cell]
        y0 = warm.get(cell, ybar)
        y, rres = _newton_in_y(F, jd_y, xc, y0, n, p, newton_max_iter, newton_tol,
                               schedule.guard_tol)
        if rres <= newton_tol:
            yvals[cell] = y
            resid[cell] = rres
            idx = np.unravel_index(cell, shape)
            for axis in range(n):
                for step in (-1, 1):
                    jdx = list(idx)
                    jdx[axis] += step
                    if 0 <= jdx[axis] < grid_resolution:
                        nb = int(np.dot(jdx, strides))
                        if nb not in warm or pos[nb] > pos[cell]:
                            warm[nb] = y
        else:
            diverged.append(cell)
    return ImplicitSolution(xg, yvals, resid, diverged, cond)


def _newton_in_y(F, jd_y, xc, y0, n, p, max_iter, tol, guard_tol):
    from .roots import fd_jacobian  # fallback only

    y = np.asarray(y0, dtype=float).copy()
    z = np.concatenate([xc, y])
    res = float(np.linalg.norm(dsl.eval_map(F, z[None], strict=False)))
    for _ in range(max_iter):
        if res <= tol or not np.isfinite(res):
            break
        J, ok = dsl.eval_jacobian_batch(jd_y, z[None], guard_tol=guard_tol)
        if not ok[0] or not np.all(np.isfinite(J)):
            # finite differences in the y block
            J = np.empty((1, p, p))
            for jix in range(p):
                h = 1e-7 * (1.0 + abs(z[n + jix]))
                zp, zm = z.copy(), z.copy()
                zp[n + jix] += h
                zm[n + jix] -= h
                J[0, :, jix] = (
                    dsl.eval_map(F, zp[None], strict=False)
                    - dsl.eval_map(F, zm[None], strict=False)
                )[0] / (2 * h)
        Fv = dsl.eval_map(F, z[None], strict=False)[0]
        dy = -np.linalg.pinv(J[0]) @ Fv
        lam, accepted = 1.0, False
        for _ in range(24):
            yt = y + lam * dy
            zt = np.concatenate([xc, yt])
            rt = float(np.linalg.norm(dsl.eval_map(F, zt[None], strict=False)))
            if np.isfinite(rt) and rt < res:
                y, z, res = yt, zt, rt
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            break
    return y, res
