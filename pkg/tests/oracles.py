"""Slow, independent reference implementations used only by the tests."""

import numba
import numpy as np


def naive_objective(A, y, lam1, lam2, x):
    total = 0.0
    r = y - A @ x
    for v in r:
        total += 0.5 * v * v
    for v in x:
        total += lam1 * abs(v)
    for i in range(len(x) - 1):
        total += lam2 * abs(x[i + 1] - x[i])
    return total


def prox_objective(z, x, lam1, lam2):
    return (0.5 * np.sum((z - x) ** 2) + lam1 * np.sum(np.abs(z))
            + lam2 * np.sum(np.abs(np.diff(z))))


@numba.njit(cache=True)
def prox_subgradient(x, lam1, lam2, iters):
    """Best objective of the subgradient method on the (1-strongly convex)
    prox objective with steps 1/(k+1), started at ``x``."""
    n = x.size
    z = x.copy()
    best = 1e300
    bz = z.copy()
    g = np.empty(n)
    for k in range(iters):
        f = 0.0
        for i in range(n):
            f += 0.5 * (z[i] - x[i]) ** 2 + lam1 * abs(z[i])
        for i in range(n - 1):
            f += lam2 * abs(z[i + 1] - z[i])
        if f < best:
            best = f
            bz[:] = z
        for i in range(n):
            g[i] = z[i] - x[i] + lam1 * np.sign(z[i])
        for i in range(n - 1):
            s = lam2 * np.sign(z[i + 1] - z[i])
            g[i] -= s
            g[i + 1] += s
        step = 1.0 / (k + 1.0)
        for i in range(n):
            z[i] -= step * g[i]
    return best, bz


@numba.njit(cache=True)
def regularized_subgradient(A, y, lam1, lam2, c, iters):
    """Best objective of the subgradient method with steps c/sqrt(k+1) on
    0.5||y - Ax||^2 + lam1||x||_1 + lam2||Dx||_1."""
    m, n = A.shape
    x = np.zeros(n)
    best = 1e300
    bx = x.copy()
    for k in range(iters):
        r = A @ x - y
        f = 0.5 * (r @ r)
        for i in range(n):
            f += lam1 * abs(x[i])
        for i in range(n - 1):
            f += lam2 * abs(x[i + 1] - x[i])
        if f < best:
            best = f
            bx[:] = x
        g = A.T @ r
        for i in range(n):
            g[i] += lam1 * np.sign(x[i])
        for i in range(n - 1):
            s = lam2 * np.sign(x[i + 1] - x[i])
            g[i] -= s
            g[i + 1] += s
        x -= (c / np.sqrt(k + 1.0)) * g
    return best, bx


def grid_minimize(f, center, half_width, points):
    """Exhaustive search over a cubic grid around ``center``.

    ``f`` maps a ``(k, d)`` array of candidate points to ``k`` values.
    """
    axes = [np.linspace(c - half_width, c + half_width, points) for c in center]
    cand = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(center))
    vals = f(cand)
    i = int(np.argmin(vals))
    return float(vals[i]), cand[i]


def prox_objective_rows(Z, x, lam1, lam2):
    return (0.5 * np.sum((Z - x) ** 2, axis=1) + lam1 * np.sum(np.abs(Z), axis=1)
            + lam2 * np.sum(np.abs(np.diff(Z, axis=1)), axis=1))


def dense_tv_jacobians(z, anchor_sign=0.0, rtol=1e-10):
    """Dense ``J_x`` and ``J_mu`` from the lower-triangular ones matrix ``L``
    restricted to the columns in the support of ``[z_1, Dz]``."""
    n = z.size
    L = np.tril(np.ones((n, n)))
    dz = np.diff(z)
    jumps = np.abs(dz) > rtol * (1.0 + np.max(np.abs(z)))
    support = np.concatenate(([True], jumps))
    signs = np.concatenate(([anchor_sign], np.sign(dz)))
    Ls = L[:, support]
    G = np.linalg.inv(Ls.T @ Ls)
    Jx = Ls @ G @ Ls.T
    Jmu = -Ls @ G @ signs[support]
    return Jx, Jmu


def ista(A, y, lam1, iters):
    """Plain ISTA for 0.5||y - Ax||^2 + lam1||x||_1 with step 1/||A||^2."""
    step = 1.0 / np.linalg.norm(A, 2) ** 2
    x = np.zeros(A.shape[1])
    for _ in range(iters):
        v = x - step * (A.T @ (A @ x - y))
        x = np.sign(v) * np.maximum(np.abs(v) - step * lam1, 0.0)
    return x


def cvxpy_regularized(A, y, lam1, lam2):
    import cvxpy as cp

    x = cp.Variable(A.shape[1])
    obj = 0.5 * cp.sum_squares(y - A @ x) + lam1 * cp.norm1(x) + lam2 * cp.norm1(cp.diff(x))
    cp.Problem(cp.Minimize(obj)).solve(solver=cp.CLARABEL, tol_gap_abs=1e-12,
                                       tol_gap_rel=1e-12, tol_feas=1e-12)
    return np.asarray(x.value)
