"""Grid-seeded root finding for f(x) = y with batched damped Newton."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import dsl
from .conorm import conorm_many, hull_conorm_inf
from .errors import AllSamplesOnGuard, PossiblyInfinitePreimage
from .region import Region, sample_ball

NEWTON_MAX_ITER = 60
NEWTON_TOL = 1e-10
FD_STEP = 1e-7
EPS_REGULAR = 1e-2
_LINE_SEARCH_HALVINGS = 18
_STALL_LIMIT = 3


@dataclass(frozen=True)
class NewtonParams:
    max_iter: int = NEWTON_MAX_ITER
    tol: float = NEWTON_TOL


def fd_jacobian(m: dsl.MapDef, X, step=FD_STEP):
    """Central finite-difference Jacobians, batched; X has shape (s, n)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    s, n = X.shape
    out = np.empty((s, m.n_out, n))
    for j in range(n):
        h = step * (1.0 + np.abs(X[:, j]))
        Xp = X.copy()
        Xm = X.copy()
        Xp[:, j] += h
        Xm[:, j] -= h
        fp = dsl.eval_map(m, Xp, strict=False)
        fm = dsl.eval_map(m, Xm, strict=False)
        out[:, :, j] = (fp - fm) / (2.0 * h)[:, None]
    return out


def newton_batch(m: dsl.MapDef, jd: dsl.JacobianDef, X0, y, params=NewtonParams(),
                 guard_tol=dsl.GUARD_TOL_DEFAULT):
    """Damped (backtracking) Newton from every seed at once.

    Uses the symbolic Jacobian off guards and a finite-difference fallback
    on them; singular Jacobians fall back to the pseudo-inverse step.
    Returns (X, residuals).
    """
    X = np.atleast_2d(np.asarray(X0, dtype=float)).copy()
    y = np.asarray(y, dtype=float)
    res = np.linalg.norm(dsl.eval_map(m, X, strict=False) - y, axis=1)
    res = np.where(np.isfinite(res), res, np.inf)
    stalls = np.zeros(len(X), dtype=int)
    for _ in range(params.max_iter):
        active = (res > params.tol) & (stalls < _STALL_LIMIT)
        if not np.any(active):
            break
        Xa = X[active]
        F = dsl.eval_map(m, Xa, strict=False) - y
        J, ok = dsl.eval_jacobian_batch(jd, Xa, guard_tol=guard_tol)
        if not np.all(ok):
            J[~ok] = fd_jacobian(m, Xa[~ok])
        bad = ~np.all(np.isfinite(J), axis=(1, 2))
        if np.any(bad):
            J[bad] = np.eye(m.arity)
        dx = -np.einsum("sij,sj->si", np.linalg.pinv(J), F)
        dx = np.where(np.isfinite(dx), dx, 0.0)
        lam = np.ones(len(Xa))
        accepted = np.zeros(len(Xa), dtype=bool)
        Xnew = Xa.copy()
        res_a = res[active].copy()
        for _ in range(_LINE_SEARCH_HALVINGS):
            trial = Xa + lam[:, None] * dx
            rt = np.linalg.norm(dsl.eval_map(m, trial, strict=False) - y, axis=1)
            rt = np.where(np.isfinite(rt), rt, np.inf)
            better = ~accepted & (rt < res_a)
            Xnew[better] = trial[better]
            res_a = np.where(better, rt, res_a)
            accepted |= better
            if np.all(accepted):
                break
            lam = np.where(accepted, lam, lam * 0.5)
        st = stalls[active]
        st = np.where(accepted, 0, st + 1)
        stalls[active] = st
        X[active] = Xnew
        res[active] = res_a
    return X, res


def _dedup(points, radii):
    """Greedy merge of points closer than the pairwise max of their radii."""
    order = np.lexsort(points.T[::-1])
    kept, kept_r = [], []
    for idx in order:
        p, r = points[idx], radii[idx]
        merged = False
        for q, rq in zip(kept, kept_r):
            if np.linalg.norm(p - q) < max(r, rq):
                merged = True
                break
        if not merged:
            kept.append(p)
            kept_r.append(r)
    return np.asarray(kept) if kept else np.empty((0, points.shape[1]))


def _quick_isolation_estimate(jd, root, rng, guard_tol):
    """Cheap hull co-norm estimate on a tiny ball, skipping guard points."""
    r = 1e-4 * (1.0 + np.linalg.norm(root))
    pts = sample_ball(rng, root, r, 48)
    mats, ok = dsl.eval_jacobian_batch(jd, pts, guard_tol=guard_tol * r)
    if not np.any(ok):
        return 0.0
    return hull_conorm_inf(mats[ok][:24], samples=24, seed=7)


def _search_roots(m, jd, region: Region, y, grid_resolution, params, dedup_radius,
                  guard_tol, seed):
    pts = region.grid(grid_resolution)
    vals = np.linalg.norm(dsl.eval_map(m, pts, strict=False) - y, axis=1)
    vals = np.where(np.isfinite(vals), vals, np.inf)
    shape = (grid_resolution,) * region.dim
    grid_vals = vals.reshape(shape)
    local_min = grid_vals <= ndimage.minimum_filter(grid_vals, size=3, mode="nearest")
    seeds = pts[local_min.ravel()]
    if region.kind == "ball":
        inside = np.linalg.norm(seeds - np.asarray(region.center), axis=1) <= region.radius
        seeds = seeds[inside]
    if len(seeds) == 0:
        return np.empty((0, region.dim))
    X, res = newton_batch(m, jd, seeds, y, params=params, guard_tol=guard_tol)
    good = (res <= params.tol) & np.array([region.contains(x, slack=1e-9) for x in X])
    roots = X[good]
    if len(roots) == 0:
        return roots
    lo, hi = region.bounding_box()
    diam = float(np.linalg.norm(hi - lo))
    if dedup_radius is None:
        sig = conorm_many(fd_jacobian(m, roots))
        radii = np.clip(2.0 * params.tol / np.maximum(sig, 1e-6), 1e-9, 0.05 * diam)
        radii = np.maximum(radii, 1e-7 * diam)
    else:
        radii = np.full(len(roots), float(dedup_radius))
    return _dedup(roots, radii)


@dataclass
class PreimageSet:
    points: np.ndarray
    isolated: list
    grid_resolution: int
    fine_count: int


def find_preimages(m: dsl.MapDef, region: Region, y, grid_resolution=9,
                   newton=NewtonParams(), dedup_radius=None,
                   guard_tol=dsl.GUARD_TOL_DEFAULT, seed=0,
                   check_growth=True) -> PreimageSet:
    """All solutions of f(x) = y in the region found by grid-seeded Newton.

    Seeds are grid cells where ||f - y|| is a local minimum. When
    check_growth is set, the search is repeated at roughly doubled
    resolution; a still-growing merged root count signals a non-finite
    fiber and raises PossiblyInfinitePreimage.
    """
    y = np.asarray(y, dtype=float)
    jd = dsl.differentiate(m)
    coarse = _search_roots(m, jd, region, y, grid_resolution, newton,
                           dedup_radius, guard_tol, seed)
    fine_count = len(coarse)
    if check_growth:
        fine_res = 2 * grid_resolution - 1
        fine = _search_roots(m, jd, region, y, fine_res, newton,
                             dedup_radius, guard_tol, seed)
        fine_count = len(fine)
        if fine_count > max(1.5 * len(coarse), len(coarse) + 2):
            raise PossiblyInfinitePreimage(len(coarse), fine_count)
        if fine_count > len(coarse):
            coarse = fine
    rng = np.random.default_rng([seed, 1])
    isolated = [
        bool(_quick_isolation_estimate(jd, root, rng, guard_tol) >= EPS_REGULAR)
        for root in coarse
    ]
    return PreimageSet(coarse, isolated, grid_resolution, fine_count)
