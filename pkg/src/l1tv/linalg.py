"""Dense linear-algebra primitives: seeded Gaussian matrices, spectral norm
estimation and the forward-difference operator.

Random draws use numpy's ``Generator`` backed by the PCG64 bit generator
(``numpy.random.default_rng``), so a given seed reproduces the same matrix on
any platform running numpy >= 1.17.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

__all__ = [
    "gaussian_matrix",
    "make_rng",
    "spectral_norm",
    "power_iteration",
    "PowerIterationResult",
    "diff_apply",
    "diff_adjoint",
]


def make_rng(seed) -> np.random.Generator:
    """Return a PCG64-backed generator for ``seed`` (int or sequence of ints)."""
    return np.random.Generator(np.random.PCG64(seed))


def gaussian_matrix(m: int, n: int, seed: int) -> np.ndarray:
    """Return an ``m x n`` matrix with i.i.d. standard normal entries.

    The same ``(m, n, seed)`` always gives a bit-identical matrix.
    """
    if m < 1 or n < 1:
        raise ValueError(f"matrix dimensions must be positive, got ({m}, {n})")
    return make_rng(seed).standard_normal((m, n))


class PowerIterationResult(NamedTuple):
    sigma: float
    converged: bool
    iterations: int


def power_iteration(A, tol: float = 1e-6, max_iter: int = 10_000,
                    seed: int = 0) -> PowerIterationResult:
    """Largest singular value of ``A`` by power iteration on ``A^T A``.

    Stops once the relative change of the estimate drops below ``tol / 10``;
    the Rayleigh-quotient estimate then sits well inside ``tol`` relative
    accuracy for any matrix with a non-degenerate gap. If ``max_iter`` is hit
    the best estimate so far is returned with ``converged=False``.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise ValueError("A must be a 2-D array")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not np.any(A):
        raise ValueError("spectral norm of the zero matrix is not estimated")

    v = make_rng(seed).standard_normal(A.shape[1])
    v /= np.linalg.norm(v)
    sigma_sq = 0.0
    for it in range(1, max_iter + 1):
        w = A.T @ (A @ v)
        new_sigma_sq = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            # start vector in the null space; restart from a fresh direction
            v = make_rng((seed, it)).standard_normal(A.shape[1])
            v /= np.linalg.norm(v)
            continue
        v = w / nw
        if abs(new_sigma_sq - sigma_sq) <= 0.1 * tol * new_sigma_sq:
            return PowerIterationResult(float(np.sqrt(new_sigma_sq)), True, it)
        sigma_sq = new_sigma_sq
    return PowerIterationResult(float(np.sqrt(sigma_sq)), False, max_iter)


def spectral_norm(A, tol: float = 1e-6, max_iter: int = 10_000, seed: int = 0,
                  full_output: bool = False):
    """Estimate ``||A||_2``.

    Returns the estimate, or the full :class:`PowerIterationResult` (with the
    convergence flag) when ``full_output`` is set.
    """
    res = power_iteration(A, tol=tol, max_iter=max_iter, seed=seed)
    return res if full_output else res.sigma


def diff_apply(x) -> np.ndarray:
    """Forward differences ``(Dx)_i = x_{i+1} - x_i`` (length ``n - 1``)."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise ValueError(f"diff_apply needs a vector of length >= 2, got shape {x.shape}")
    return x[1:] - x[:-1]


def diff_adjoint(v, n: int | None = None) -> np.ndarray:
    """Adjoint of :func:`diff_apply`: maps a length ``n - 1`` vector to length ``n``."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise ValueError("diff_adjoint expects a vector")
    if n is not None and v.size != n - 1:
        raise ValueError(f"expected length {n - 1}, got {v.size}")
    out = np.zeros(v.size + 1)
    out[:-1] -= v
    out[1:] += v
    return out
