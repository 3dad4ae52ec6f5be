"""Dense primal-dual interior-point method for small real symmetric SDPs.

Solves the standard pair

    (P)  min <C, X>   s.t.  tr(A_k X) = b_k,  X PSD
    (D)  max b.y      s.t.  sum_k y_k A_k + S = C,  S PSD

with a single dense PSD block, Nesterov-Todd scaling, and an adaptive
centering parameter chosen from an affine predictor step.  Problems here
are tiny (n <= 32, m <= 100), so every factorization is recomputed from
scratch each iteration and robustness is preferred over flop counts.

The Schur-complement assembly is the hot kernel and is delegated to
``kernels.SparseConstraints.schur``.
"""

from dataclasses import dataclass

import numpy as np

from .kernels import SparseConstraints

_STEP_FRACTION = 0.98
_TINY = 1e-14


@dataclass
class IpmInfo:
    status: str  # "optimal" | "numerical_failure"
    iterations: int
    gap: float
    primal_residual: float
    dual_residual: float
    primal_objective: float
    dual_objective: float


def _sym(m):
    return 0.5 * (m + m.T)


def _max_step(m, dm):
    """Largest alpha with m + alpha*dm PSD, for m positive definite."""
    ell = np.linalg.cholesky(m)
    z = np.linalg.solve(ell, dm)
    z = np.linalg.solve(ell, z.T).T
    lam = np.linalg.eigvalsh(_sym(z)).min()
    if lam >= -_TINY:
        return np.inf
    return -1.0 / lam


def _nt_scaling(x, s):
    """W with W S W = X, from Cholesky factors and one SVD."""
    lx = np.linalg.cholesky(x)
    ls = np.linalg.cholesky(s)
    _, sv, vt = np.linalg.svd(ls.T @ lx)
    g = (lx @ vt.T) * (sv ** -0.5)
    return g @ g.T


def _feasible_start(constraints, b, n):
    """Strictly feasible interior point via a least-norm projection, if any.

    Solves the Gram system for the min-norm X with A(X) = b shifted toward a
    multiple of the identity, and keeps it only when safely positive
    definite.  Starting primal-feasible pins the primal residual at roundoff
    for the whole run, which sidesteps the stall of infeasible-start
    iterations on degenerate optimal faces.
    """
    try:
        gram = constraints.schur(np.eye(n))
        chol = np.linalg.cholesky(gram + 1e-13 * np.eye(gram.shape[0]))
    except np.linalg.LinAlgError:
        return None
    a_of_eye = constraints.dot(np.eye(n))
    best = None
    for center in (1.0, 0.5, 0.1, 2.0):
        lam = np.linalg.solve(chol.T, np.linalg.solve(chol, b - center * a_of_eye))
        cand = center * np.eye(n) + _sym(constraints.combine(lam))
        if np.max(np.abs(constraints.dot(cand) - b)) > 1e-10 * max(1.0, np.max(np.abs(b))):
            continue
        margin = np.linalg.eigvalsh(cand).min()
        if margin > 1e-8 and (best is None or margin > best[0]):
            best = (margin, cand)
    return None if best is None else best[1]


def solve_real_sdp(constraints, b, c, gap_tol=1e-8, feas_tol=1e-9, max_iter=200):
    """Run the interior-point iteration.

    Parameters
    ----------
    constraints : SparseConstraints
        The m constraint matrices A_k (symmetric, linearly independent).
    b : (m,) array
        Constraint targets.
    c : (n, n) array
        Symmetric objective matrix of the minimization.

    Returns
    -------
    (X, y, S, info)
    """
    if not isinstance(constraints, SparseConstraints):
        constraints = SparseConstraints(list(constraints))
    m, n = constraints.m, constraints.n
    b = np.asarray(b, dtype=float)
    c = _sym(np.asarray(c, dtype=float))

    if m == 0:
        raise ValueError("interior-point solver requires at least one constraint")
    scale_b = max(1.0, float(np.max(np.abs(b))))
    scale_c = max(1.0, float(np.max(np.abs(c))) if c.size else 1.0)
    x = _feasible_start(constraints, b, n)
    if x is None:
        x = np.eye(n) * scale_b
    s = np.eye(n) * scale_c
    y = np.zeros(m)

    best_gap = np.inf
    stall = 0
    info = None

    for it in range(1, max_iter + 1):
        rp = b - constraints.dot(x)
        rd = c - s - constraints.combine(y)
        gap = float(np.sum(x * s))
        pobj = float(np.sum(c * x))
        dobj = float(b @ y)

        prim_res = float(np.max(np.abs(rp))) / scale_b
        dual_res = float(np.max(np.abs(rd))) / (1.0 + scale_c)
        rel_gap = gap / (1.0 + abs(pobj) + abs(dobj))
        info = IpmInfo("running", it, rel_gap, prim_res, dual_res, pobj, dobj)

        if rel_gap <= gap_tol and prim_res <= feas_tol and dual_res <= feas_tol:
            info.status = "optimal"
            return x, y, s, info

        if gap < best_gap * (1.0 - 1e-4):
            best_gap = gap
            stall = 0
        else:
            stall += 1
        if stall > 25:
            info.status = "numerical_failure"
            return x, y, s, info

        try:
            w = _nt_scaling(x, s)
            mat = constraints.schur(w)
            # Jitter guards against dependence sneaking past the presolve.
            chol = None
            jitter = 0.0
            for _ in range(3):
                try:
                    chol = np.linalg.cholesky(mat + jitter * np.eye(m))
                    break
                except np.linalg.LinAlgError:
                    jitter = max(10.0 * jitter, 1e-13 * (1.0 + np.trace(mat) / max(m, 1)))
            if chol is None:
                info.status = "numerical_failure"
                return x, y, s, info

            def _solve_dir(rc):
                rhs = rp - constraints.dot(rc) + constraints.dot(w @ rd @ w)
                dy = np.linalg.solve(chol.T, np.linalg.solve(chol, rhs))
                ds = rd - constraints.combine(dy)
                dx = _sym(rc - w @ ds @ w)
                return dx, dy, ds

            mu = gap / n

            # Affine predictor fixes the centering parameter.
            dx_a, _, ds_a = _solve_dir(-x)
            ap = min(1.0, _STEP_FRACTION * _max_step(x, dx_a))
            ad = min(1.0, _STEP_FRACTION * _max_step(s, ds_a))
            mu_aff = float(np.sum((x + ap * dx_a) * (s + ad * ds_a))) / n
            sigma = min(0.99, max(1e-10, (max(mu_aff, 0.0) / mu) ** 3))
            # keep centering up while infeasibility dominates the gap
            if max(prim_res, dual_res) > rel_gap:
                sigma = max(sigma, 0.5)

            sinv = np.linalg.inv(s)
            dx, dy, ds = _solve_dir(sigma * mu * _sym(sinv) - x)
            ap = min(1.0, _STEP_FRACTION * _max_step(x, dx))
            ad = min(1.0, _STEP_FRACTION * _max_step(s, ds))
        except np.linalg.LinAlgError:
            info.status = "numerical_failure"
            return x, y, s, info

        if ap < 1e-10 and ad < 1e-10:
            info.status = "numerical_failure"
            return x, y, s, info

        x = _sym(x + ap * dx)
        y = y + ad * dy
        s = _sym(s + ad * ds)

    info.status = "numerical_failure"
    return x, y, s, info
