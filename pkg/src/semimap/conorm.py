"""Small dense matrix kernels: co-norm, determinant sign, hull infimum.

The co-norm of a square matrix is its smallest singular value: the infimum
of ||Ax|| over unit vectors x. It is positive exactly when A is invertible,
1-Lipschitz in the operator norm, and absolutely homogeneous.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch

HULL_SAMPLES_DEFAULT = 48
_MIDPOINT_ROUNDS = 12
_ALTMIN_ROUNDS = 6
_BISECT_STEPS = 80


def conorm(A) -> float:
    """Smallest singular value of a square matrix."""
    A = np.asarray(A, dtype=float)
    return float(np.linalg.svd(A, compute_uv=False)[-1])


def conorm_many(mats) -> np.ndarray:
    """Batched smallest singular values; mats has shape (..., n, n)."""
    mats = np.asarray(mats, dtype=float)
    return np.linalg.svd(mats, compute_uv=False)[..., -1]


def opnorm(A) -> float:
    """Largest singular value (operator norm)."""
    A = np.asarray(A, dtype=float)
    return float(np.linalg.svd(A, compute_uv=False)[0])


def sign_det(A, tol=0.0) -> int:
    """Sign of det A; 0 when |det| <= tol * (product of row max-norms)."""
    if tol < 0:
        raise ValueError("tol must be >= 0")
    A = np.asarray(A, dtype=float)
    d = float(np.linalg.det(A))
    scale = float(np.prod(np.max(np.abs(A), axis=1)))
    if abs(d) <= tol * scale:
        return 0
    return 1 if d > 0 else -1


@dataclass(frozen=True)
class HullSample:
    """Sampling plan for the infimum of the co-norm over co{vertices}."""

    vertices: tuple
    weights_seed: int = 0
    samples: int = HULL_SAMPLES_DEFAULT


@dataclass
class HullResult:
    value: float
    weights: np.ndarray = field(repr=False)  # every evaluated combination
    argmin_weights: np.ndarray = field(repr=False)
    samples: int = 0
    seed: int = 0


def _as_vertex_array(vertices):
    mats = np.asarray(vertices, dtype=float)
    if mats.ndim == 2:
        mats = mats[None]
    if mats.ndim != 3 or mats.shape[1] != mats.shape[2]:
        raise DimensionMismatch("vertices must be square matrices of equal size")
    return mats


def hull_conorm_details(vertices, samples=HULL_SAMPLES_DEFAULT, seed=0,
                        extra_weights=None) -> HullResult:
    """Estimate inf sigma over co{vertices} with full evaluation record.

    Candidates: the vertices themselves, `samples` uniform-simplex
    (Dirichlet(1,...,1)) combinations, midpoints of the running lowest
    pair, and - when evaluated determinants change sign - the bisection
    limit of a det sign change, which pins a singular combination.
    The returned value is an upper bound of the true infimum.
    """
    mats = _as_vertex_array(vertices)
    V = len(mats)
    weights = [np.eye(V)]
    if samples > 0 and V > 1:
        rng = np.random.default_rng([seed, V])
        weights.append(rng.dirichlet(np.ones(V), size=samples))
    if extra_weights is not None:
        ew = np.asarray(extra_weights, dtype=float)
        if ew.ndim == 1:
            ew = ew[None]
        if ew.shape[1] < V:
            ew = np.hstack([ew, np.zeros((ew.shape[0], V - ew.shape[1]))])
        weights.append(ew)
    W = np.vstack(weights)

    def combos(w):
        return np.einsum("sv,vij->sij", np.atleast_2d(w), mats)

    sig = conorm_many(combos(W))

    # midpoint refinement of the running lowest pair
    for _ in range(_MIDPOINT_ROUNDS):
        if len(W) < 2:
            break
        order = np.argsort(sig)
        wm = 0.5 * (W[order[0]] + W[order[1]])
        sm = conorm_many(combos(wm))[0]
        W = np.vstack([W, wm])
        sig = np.append(sig, sm)
        if sm > sig[order[0]] - 1e-15:
            break

    # det-sign bisection: a sign change inside the hull forces a singular
    # combination on the connecting segment
    with np.errstate(divide="ignore", invalid="ignore"):
        dets = np.linalg.det(combos(W))
    pos = np.where(dets > 0)[0]
    negs = np.where(dets < 0)[0]
    if len(pos) and len(negs):
        wp = W[pos[np.argmin(dets[pos])]]
        wn = W[negs[np.argmax(dets[negs])]]
        for _ in range(_BISECT_STEPS):
            wm = 0.5 * (wp + wn)
            dm = float(np.linalg.det(combos(wm)[0]))
            if dm > 0:
                wp = wm
            elif dm < 0:
                wn = wm
            else:
                wp = wm
                break
        wm = 0.5 * (wp + wn)
        W = np.vstack([W, wm])
        sig = np.append(sig, conorm_many(combos(wm))[0])

    # alternating refinement: with the singular direction u of the current
    # best combination fixed, min_w ||sum_v w_v A_v u|| over the simplex is
    # a min-norm-point problem, solved as nonnegative least squares on the
    # system (A_1 u ... A_V u; 1 ... 1) w = (0; 1) with the simplex row
    # weighted heavily
    from scipy.optimize import nnls

    for _ in range(_ALTMIN_ROUNDS):
        best = int(np.argmin(sig))
        A = combos(W[best])[0]
        _, _, vt = np.linalg.svd(A)
        u = vt[-1]
        B = mats @ u  # (V, n)
        big = 1e6 * max(1.0, float(np.max(np.abs(B))))
        lhs = np.vstack([B.T, np.full(V, big)])
        rhs = np.concatenate([np.zeros(B.shape[1]), [big]])
        try:
            w, _ = nnls(lhs, rhs)
        except RuntimeError:
            break
        total = w.sum()
        if total <= 0:
            break
        w = w / total
        s_new = conorm_many(combos(w))[0]
        W = np.vstack([W, w])
        sig = np.append(sig, s_new)
        if s_new > sig[best] - 1e-15:
            break

    best = int(np.argmin(sig))
    return HullResult(float(sig[best]), W, W[best], samples, seed)


def hull_conorm_inf(vertices, samples=HULL_SAMPLES_DEFAULT, seed=0,
                    extra_weights=None) -> float:
    """Sampled upper-bound estimate of inf sigma over co{vertices}."""
    return hull_conorm_details(vertices, samples, seed, extra_weights).value


def hull_conorm_from_sample(h: HullSample) -> float:
    return hull_conorm_inf(h.vertices, h.samples, h.weights_seed)
