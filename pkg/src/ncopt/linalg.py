"""Dense symmetric eigenvalue kernels, truncated CG, and the spectral shift.

The leftmost eigenpair is computed natively (Householder tridiagonalization,
Sturm-sequence bisection, inverse iteration) so that tests can check it
against an independent dense eigendecomposition.  All kernels are pure
functions and safe for concurrent use.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class KernelError(RuntimeError):
    """A numerical kernel failed to meet its accuracy contract."""


@dataclass
class EigenResult:
    """Leftmost eigenpair of a symmetric matrix.

    leftmost_vector has unit 2-norm; residual is ||H v - lambda v||_2.
    """

    leftmost_value: float
    leftmost_vector: np.ndarray
    residual: float


class CgStatus(enum.Enum):
    CONVERGED = "converged"
    MAX_ITERATIONS = "max_iterations"
    NONPOSITIVE_CURVATURE = "nonpositive_curvature"
    NONPOSITIVE_CURVATURE_FIRST_ITERATION = "nonpositive_curvature_first_iteration"


@dataclass
class CgOutcome:
    """Result of truncated CG on H s = -g.

    curvature_direction is present exactly when status is
    NONPOSITIVE_CURVATURE, and then d'Hd <= 0 for the supplied H.
    """

    solution: np.ndarray
    curvature_direction: np.ndarray | None
    status: CgStatus
    iterations_used: int


def _check_symmetric(H, tol=1e-10):
    H = np.asarray(H, dtype=float)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError("expected a square matrix, got shape %s" % (H.shape,))
    if not np.all(np.isfinite(H)):
        raise ValueError("matrix has non-finite entries")
    asym = np.max(np.abs(H - H.T)) if H.size else 0.0
    if asym > tol:
        raise ValueError("matrix is not symmetric (asymmetry %.3e)" % asym)
    return 0.5 * (H + H.T)


def _tridiagonalize(H):
    """Householder reduction of symmetric H to tridiagonal form.

    Returns (d, e, Q) with Q' H Q tridiagonal; d is the diagonal and e the
    off-diagonal.  Q is accumulated so tridiagonal eigenvectors map back via
    Q @ u.
    """
    A = H.copy()
    n = A.shape[0]
    Q = np.eye(n)
    for k in range(n - 2):
        x = A[k + 1:, k].copy()
        xnorm = np.linalg.norm(x)
        if xnorm == 0.0:
            continue
        alpha = -np.copysign(xnorm, x[0]) if x[0] != 0.0 else -xnorm
        v = x
        v[0] -= alpha
        vnorm = np.linalg.norm(v)
        if vnorm == 0.0:
            continue
        v /= vnorm
        # two-sided application of P = I - 2 v v'
        A[k + 1:, k:] -= 2.0 * np.outer(v, v @ A[k + 1:, k:])
        A[:, k + 1:] -= 2.0 * np.outer(A[:, k + 1:] @ v, v)
        Q[:, k + 1:] -= 2.0 * np.outer(Q[:, k + 1:] @ v, v)
    d = np.diag(A).copy()
    e = np.diag(A, 1).copy()
    return d, e, Q


def _count_eigs_below(d, e, x):
    """Number of eigenvalues of tridiag(d, e) strictly below x (Sturm count)."""
    n = d.shape[0]
    pivmin = np.finfo(float).tiny * max(1.0, float(np.max(e * e)) if e.size else 1.0)
    q = d[0] - x
    count = 1 if q < 0.0 else 0
    for i in range(1, n):
        if abs(q) < pivmin:
            q = -pivmin
        q = (d[i] - x) - e[i - 1] * e[i - 1] / q
        if q < 0.0:
            count += 1
    return count


def _bisect_eigenvalue(d, e, k):
    """k-th smallest eigenvalue of tridiag(d, e) by bisection, 0-indexed."""
    n = d.shape[0]
    radius = np.zeros(n)
    if n > 1:
        radius[:-1] += np.abs(e)
        radius[1:] += np.abs(e)
    lo = float(np.min(d - radius))
    hi = float(np.max(d + radius))
    scale = max(abs(lo), abs(hi), 1.0)
    for _ in range(128):
        mid = 0.5 * (lo + hi)
        if _count_eigs_below(d, e, mid) >= k + 1:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 2.0 * np.finfo(float).eps * scale:
            break
    return 0.5 * (lo + hi)


def _eigenpair_2x2(H):
    a, b, c = H[0, 0], H[0, 1], H[1, 1]
    disc = np.hypot(a - c, 2.0 * b)
    lam = 0.5 * ((a + c) - disc)
    # eigenvector from the better-conditioned of the two defining rows
    v1 = np.array([b, lam - a])
    v2 = np.array([lam - c, b])
    v = v1 if np.linalg.norm(v1) >= np.linalg.norm(v2) else v2
    if np.linalg.norm(v) == 0.0:
        v = np.array([1.0, 0.0]) if a <= c else np.array([0.0, 1.0])
    return lam, v / np.linalg.norm(v)


def _inverse_iteration(H, lam):
    """Eigenvector of H for the eigenvalue estimate lam via inverse iteration."""
    n = H.shape[0]
    scale = max(1.0, float(np.max(np.abs(H))))
    shift = lam + 10.0 * np.finfo(float).eps * scale
    v = np.ones(n) + 1e-3 * np.arange(n)
    v /= np.linalg.norm(v)
    best_v, best_res = v, np.inf
    for attempt in range(3):
        M = H - shift * np.eye(n)
        try:
            for _ in range(4):
                w = np.linalg.solve(M, v)
                nw = np.linalg.norm(w)
                if not np.isfinite(nw) or nw == 0.0:
                    break
                v = w / nw
                res = np.linalg.norm(H @ v - (v @ H @ v) * v)
                if res < best_res:
                    best_res, best_v = res, v.copy()
                if res <= 4.0 * np.finfo(float).eps * scale * n:
                    return best_v
        except np.linalg.LinAlgError:
            pass
        shift += (10.0 ** attempt) * 1e-12 * scale
    return best_v


def symmetric_extreme_eigenvalues(H):
    """(smallest, largest) eigenvalues of a symmetric matrix."""
    H = _check_symmetric(H)
    n = H.shape[0]
    if n == 1:
        return float(H[0, 0]), float(H[0, 0])
    if n == 2:
        a, b, c = H[0, 0], H[0, 1], H[1, 1]
        disc = np.hypot(a - c, 2.0 * b)
        return float(0.5 * ((a + c) - disc)), float(0.5 * ((a + c) + disc))
    d, e, _ = _tridiagonalize(H)
    return float(_bisect_eigenvalue(d, e, 0)), float(_bisect_eigenvalue(d, e, n - 1))


def leftmost_eigenvalue(H):
    """Minimum eigenvalue of a symmetric matrix (no eigenvector)."""
    return symmetric_extreme_eigenvalues(H)[0]


def leftmost_eigenpair(H, tolerance=1e-10):
    """Leftmost (minimum) eigenvalue and a unit eigenvector of symmetric H.

    The residual ||H v - lambda v|| must come out below
    tolerance * max(1, ||H||_F) or a KernelError is raised.  Non-symmetric
    input (asymmetry above 1e-10) is rejected.
    """
    H = _check_symmetric(H)
    n = H.shape[0]
    if n == 1:
        lam = float(H[0, 0])
        v = np.array([1.0])
    elif n == 2:
        lam, v = _eigenpair_2x2(H)
        lam = float(lam)
    else:
        d, e, Q = _tridiagonalize(H)
        lam = float(_bisect_eigenvalue(d, e, 0))
        T = np.diag(d)
        if n > 1:
            T += np.diag(e, 1) + np.diag(e, -1)
        u = _inverse_iteration(T, lam)
        v = Q @ u
        v /= np.linalg.norm(v)
        # the Rayleigh quotient of the converged vector is the sharper estimate
        lam = min(lam, float(v @ H @ v))
    residual = float(np.linalg.norm(H @ v - lam * v))
    bound = tolerance * max(1.0, float(np.linalg.norm(H)))
    if residual > bound:
        raise KernelError(
            "leftmost eigenpair residual %.3e exceeds bound %.3e" % (residual, bound)
        )
    return EigenResult(leftmost_value=lam, leftmost_vector=v, residual=residual)


def truncated_cg(H, g, max_iterations, tolerance=None):
    """Run CG on H s = -g from s = 0, stopping on nonpositive curvature.

    Returns the last iterate computed before termination as the solution.
    When a direction p with p'Hp <= 0 is met it is returned as
    curvature_direction, except on the very first iteration where the
    solution falls back to -g and no direction is reported.  The curvature
    test is exact (<= 0), with no tolerance band.
    """
    H = _check_symmetric(H)
    g = np.asarray(g, dtype=float)
    if max_iterations < 1:
        raise ValueError("max_iterations must be >= 1")
    gnorm = np.linalg.norm(g)
    if gnorm == 0.0:
        return CgOutcome(np.zeros_like(g), None, CgStatus.CONVERGED, 0)
    if tolerance is None:
        tolerance = min(1e-10, 1e-6 * gnorm)
    s = np.zeros_like(g)
    r = g.copy()
    p = -g
    rr = r @ r
    for j in range(max_iterations):
        Hp = H @ p
        curv = p @ Hp
        if curv <= 0.0:
            if j == 0:
                return CgOutcome(-g, None, CgStatus.NONPOSITIVE_CURVATURE_FIRST_ITERATION, 0)
            return CgOutcome(s, p, CgStatus.NONPOSITIVE_CURVATURE, j)
        step = rr / curv
        s = s + step * p
        r = r + step * Hp
        rr_new = r @ r
        if np.sqrt(rr_new) <= tolerance:
            return CgOutcome(s, None, CgStatus.CONVERGED, j + 1)
        p = -r + (rr_new / rr) * p
        rr = rr_new
    return CgOutcome(s, None, CgStatus.MAX_ITERATIONS, max_iterations)


def modified_newton_shift(H, condition_cap=1e8, pd_floor=1e-8):
    """Smallest shift delta >= 0 making H + delta*I positive definite with
    condition number at most condition_cap.

    Solved in closed form from the extreme eigenvalues:
    delta = max(0, (lmax - cap*lmin)/(cap - 1)), with the degenerate case
    lmax = lmin <= 0 clamped to -lmin + pd_floor (any positive shift then has
    condition number 1).  Returns (delta, solve) where solve(rhs) solves
    (H + delta*I) x = rhs.
    """
    if condition_cap <= 1.0:
        raise ValueError("condition_cap must exceed 1")
    H = _check_symmetric(H)
    lmin, lmax = symmetric_extreme_eigenvalues(H)
    # aim slightly inside the cap so the condition number verified in floating
    # point (relative error ~ eps * kappa) still lands at or below it
    cap = condition_cap * (1.0 - 1e-6)
    if lmin > 0.0 and lmax <= cap * lmin:
        delta = 0.0
    else:
        delta = max(0.0, (lmax - cap * lmin) / (cap - 1.0))
        if lmin + delta <= 0.0:
            delta = -lmin + pd_floor
    B = H + delta * np.eye(H.shape[0])

    def solve(rhs):
        return np.linalg.solve(B, np.asarray(rhs, dtype=float))

    return delta, solve
