"""Brouwer degree: the sign-sum formula plus independent low-dimensional
oracles (1-D endpoint signs, 2-D winding number) and the degree axioms as
empirical checks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dsl
from .errors import (
    BoundaryTooClose,
    BoundaryValueError,
    CriticalValueError,
    PreconditionViolated,
    RefinementExhausted,
)
from .region import Region
from .regularity import NuSchedule, SignResult, classify_point, sign_at
from .roots import NewtonParams, find_preimages

BOUNDARY_SAMPLES_DEFAULT = 256
BOUNDARY_MARGIN_TOL = 1e-9
WINDING_RESIDUAL_MAX = 0.1


@dataclass
class DegreeResult:
    degree: int
    preimages: list  # (point, SignResult) pairs
    target: np.ndarray
    boundary_margin: float
    method: str  # "formula" | "winding" | "interval-1d"
    seed: int


def _project_boundary(region: Region, x):
    """Nearest boundary point of the region to x."""
    x = np.asarray(x, dtype=float)
    if region.kind == "ball":
        c = np.asarray(region.center, dtype=float)
        d = x - c
        n = np.linalg.norm(d)
        if n == 0.0:
            d, n = np.eye(region.dim)[0], 1.0
        return c + region.radius * d / n
    lo, hi = region.bounding_box()
    p = np.clip(x, lo, hi)
    dlo, dhi = p - lo, hi - p
    k = int(np.argmin(np.minimum(dlo, dhi)))
    p[k] = lo[k] if dlo[k] <= dhi[k] else hi[k]
    return p


def boundary_margin(m: dsl.MapDef, region: Region, y, samples=BOUNDARY_SAMPLES_DEFAULT,
                    seed=0, refine_iters=120) -> float:
    """Estimate of dist(y, f(boundary)): sampling plus projected
    coordinate descent from the best sample, so on-boundary targets drive
    the margin to ~0 instead of the sampling resolution."""
    y = np.asarray(y, dtype=float)
    rng = np.random.default_rng([seed, 101])
    pts = region.sample_boundary(rng, samples)
    if region.dim == 1:
        lo, hi = region.bounding_box()
        pts = np.array([[lo[0]], [hi[0]]])
    vals = dsl.eval_map(m, pts, strict=False)
    d = np.linalg.norm(vals - y, axis=1)
    d = np.where(np.isfinite(d), d, np.inf)
    best = int(np.argmin(d))
    b, val = pts[best].copy(), float(d[best])
    lo, hi = region.bounding_box()
    step = 0.05 * float(np.max(np.asarray(hi) - np.asarray(lo)))
    for _ in range(refine_iters):
        improved = False
        for k in range(region.dim):
            for s in (step, -step):
                cand = b.copy()
                cand[k] += s
                cand = _project_boundary(region, cand)
                cv = float(np.linalg.norm(dsl.eval_map(m, cand[None], strict=False)[0] - y))
                if np.isfinite(cv) and cv < val:
                    b, val, improved = cand, cv, True
        if not improved:
            step *= 0.5
            if step < 1e-14:
                break
    return val


def degree_formula(m: dsl.MapDef, region: Region, y, schedule: NuSchedule = NuSchedule(),
                   grid_resolution=9, newton=NewtonParams(),
                   check_growth=True) -> DegreeResult:
    """Degree as the sum of local determinant signs over the fiber.

    Requires a positive boundary margin and every preimage to classify as
    a regular point."""
    y = np.asarray(y, dtype=float)
    margin = boundary_margin(m, region, y, seed=schedule.seed)
    lo, hi = region.bounding_box()
    scale = max(1.0, float(np.max(np.asarray(hi) - np.asarray(lo))))
    if margin <= max(BOUNDARY_MARGIN_TOL, 1e-5 * scale):
        raise BoundaryValueError(f"target within {margin:g} of f(boundary)")
    pre = find_preimages(m, region, y, grid_resolution=grid_resolution,
                         newton=newton, seed=schedule.seed,
                         check_growth=check_growth)
    pairs = []
    total = 0
    for pt in pre.points:
        cls = classify_point(m, pt, schedule)
        if cls.kind != "regular":
            raise CriticalValueError(
                f"preimage {pt.tolist()} classified {cls.kind}; formula inapplicable"
            )
        sr = sign_at(m, pt, seed=schedule.seed)
        pairs.append((pt, sr))
        total += sr.sign
    return DegreeResult(total, pairs, y, margin, "formula", schedule.seed)


def winding_degree_2d(m: dsl.MapDef, region: Region, y, boundary_samples=64,
                      refine_limit=18) -> int:
    """Planar degree as the winding number of f(boundary) around y.

    Accumulates turning angles along the boundary parametrization and
    adaptively bisects any step whose increment exceeds pi/2."""
    if region.dim != 2:
        raise ValueError("winding oracle requires n = 2")
    y = np.asarray(y, dtype=float)

    def angle_of(ts):
        b = region.boundary_path_2d(np.asarray(ts))
        v = dsl.eval_map(m, b) - y
        r = np.linalg.norm(v, axis=-1)
        if np.any(r < 1e-12):
            raise BoundaryTooClose("f(boundary) touches the target")
        return np.arctan2(v[..., 1], v[..., 0])

    ts = list(np.linspace(0.0, 1.0, boundary_samples, endpoint=False)) + [1.0]
    angles = list(angle_of(ts))

    def wrap(d):
        return (d + np.pi) % (2 * np.pi) - np.pi

    total = 0.0
    stack = [(ts[i], ts[i + 1], angles[i], angles[i + 1], 0)
             for i in range(len(ts) - 1)]
    while stack:
        t0, t1, a0, a1, depth = stack.pop()
        d = wrap(a1 - a0)
        if abs(d) <= np.pi / 2:
            total += d
            continue
        if depth >= refine_limit:
            raise RefinementExhausted("winding step stayed above pi/2")
        tm = 0.5 * (t0 + t1)
        am = float(angle_of([tm])[0])
        stack.append((t0, tm, a0, am, depth + 1))
        stack.append((tm, t1, am, a1, depth + 1))
    turns = total / (2 * np.pi)
    residual = abs(turns - round(turns))
    if residual >= WINDING_RESIDUAL_MAX:
        raise RefinementExhausted(f"winding residual {residual:.3f} too large")
    return int(round(turns))


def degree_1d(m: dsl.MapDef, interval: Region, y) -> int:
    """1-D degree from endpoint signs: (sign(f(b)-y) - sign(f(a)-y)) / 2."""
    if interval.dim != 1:
        raise ValueError("degree_1d requires n = 1")
    lo, hi = interval.bounding_box()
    fa = float(dsl.eval_map(m, [lo[0]])[0]) - float(np.atleast_1d(y)[0])
    fb = float(dsl.eval_map(m, [hi[0]])[0]) - float(np.atleast_1d(y)[0])
    if fa == 0.0 or fb == 0.0:
        raise BoundaryValueError("target equals an endpoint value")
    return int((np.sign(fb) - np.sign(fa)) // 2)


def _degree_any(m, region, y, schedule, **kw):
    if region.dim == 1:
        return degree_1d(m, region, y)
    return degree_formula(m, region, y, schedule, **kw).degree


@dataclass
class LinearHomotopy:
    """H(x, t) = (1-t) f(x) + t g(x), realized as a map for each fixed t."""

    f: dsl.MapDef
    g: dsl.MapDef

    def at(self, t: float) -> dsl.MapDef:
        t = float(t)
        comps = tuple(
            dsl.add(dsl.mul(dsl.const(1.0 - t), cf), dsl.mul(dsl.const(t), cg))
            for cf, cg in zip(self.f.components, self.g.components)
        )
        return dsl.MapDef(f"H_{t:g}", self.f.arity, comps)


@dataclass
class AxiomReport:
    decomposition: dict | None
    local_constancy: dict | None
    homotopy: dict | None

    @property
    def all_pass(self):
        secs = [self.decomposition, self.local_constancy, self.homotopy]
        return all(s is None or s["pass"] for s in secs)


def check_domain_decomposition(m, region, subregions, y,
                               schedule: NuSchedule = NuSchedule(),
                               complement_samples=512) -> dict:
    """deg over the region equals the sum over disjoint subregions when the
    target avoids the image of the complement."""
    y = np.asarray(y, dtype=float)
    rng = np.random.default_rng([schedule.seed, 131])
    pts = region.sample_interior(rng, complement_samples)
    outside = [p for p in pts if not any(s.contains(p) for s in subregions)]
    bnd = [region.sample_boundary(rng, 64)] + [
        s.sample_boundary(rng, 64) for s in subregions
    ]
    check_pts = np.vstack([np.asarray(outside).reshape(-1, region.dim)] + bnd)
    d = np.linalg.norm(dsl.eval_map(m, check_pts, strict=False) - y, axis=1)
    if np.min(d) <= BOUNDARY_MARGIN_TOL:
        raise PreconditionViolated(
            "target lies on the image of the complement",
            witness=check_pts[int(np.argmin(d))],
        )
    whole = _degree_any(m, region, y, schedule)
    parts = [_degree_any(m, s, y, schedule) for s in subregions]
    return {
        "pass": whole == sum(parts),
        "degree_whole": whole,
        "degree_parts": parts,
    }


def check_local_constancy(m, region, y, schedule: NuSchedule = NuSchedule(),
                          probe_count=8) -> dict:
    """deg(f, region, .) is constant on the boundary-margin ball around y."""
    y = np.asarray(y, dtype=float)
    margin = boundary_margin(m, region, y, seed=schedule.seed)
    if margin <= BOUNDARY_MARGIN_TOL:
        raise PreconditionViolated("zero boundary margin at the base target", witness=y)
    base = _degree_any(m, region, y, schedule)
    rng = np.random.default_rng([schedule.seed, 137])
    dirs = rng.normal(size=(probe_count, region.dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = 0.9 * margin * rng.uniform(0.1, 1.0, size=probe_count)
    degrees = []
    for d, r in zip(dirs, radii):
        degrees.append(_degree_any(m, region, y + r * d, schedule))
    return {
        "pass": all(d == base for d in degrees),
        "base_degree": base,
        "probe_degrees": degrees,
        "margin": margin,
    }


def check_homotopy_invariance(h: LinearHomotopy, region, y_path, steps=20,
                              schedule: NuSchedule = NuSchedule(),
                              boundary_samples=128) -> dict:
    """deg(H(., t), region, y(t)) constant over a step grid in t."""
    rng = np.random.default_rng([schedule.seed, 139])
    bnd = region.sample_boundary(rng, boundary_samples)
    degrees = []
    for t in np.linspace(0.0, 1.0, steps):
        mt = h.at(t)
        yt = np.asarray(y_path(t), dtype=float)
        d = np.linalg.norm(dsl.eval_map(mt, bnd, strict=False) - yt, axis=1)
        if np.min(d) <= BOUNDARY_MARGIN_TOL:
            raise PreconditionViolated(
                f"y(t) meets H(boundary, t) at t={t:g}",
                witness=bnd[int(np.argmin(d))],
            )
        if region.dim == 2:
            degrees.append(winding_degree_2d(mt, region, yt))
        else:
            degrees.append(_degree_any(mt, region, yt, schedule))
    return {
        "pass": len(set(degrees)) == 1,
        "degrees": degrees,
        "steps": steps,
    }


def axiom_suite(m, m2, region, subregions, y, y_path=None, steps=20,
                schedule: NuSchedule = NuSchedule()) -> AxiomReport:
    """Run the three degree axioms on one fixture set."""
    dec = None
    if subregions:
        dec = check_domain_decomposition(m, region, subregions, y, schedule)
    loc = check_local_constancy(m, region, y, schedule)
    hom = None
    if m2 is not None:
        path = y_path if y_path is not None else (lambda t: y)
        hom = check_homotopy_invariance(LinearHomotopy(m, m2), region, path,
                                        steps, schedule)
    return AxiomReport(dec, loc, hom)
