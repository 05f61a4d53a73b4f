"""Proximal operators for the l1 and total-variation penalties.

Includes the exact 1-D TV prox (direct taut-string scheme), its composition
with soft thresholding, the gradient mapping used by PGM-ISTA, and the weak
Jacobians of the TV prox used for backpropagation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

__all__ = [
    "TautStringResult",
    "soft_threshold",
    "tv_prox",
    "tv_denoise",
    "tv_prox_kkt_check",
    "tv_prox_kkt_residual",
    "combined_prox",
    "gradient_mapping",
    "tv_prox_jacobian_vjp",
    "segment_bounds",
    "tv_denoise_batch",
    "tv_vjp_batch",
    "jump_signs_batch",
]

JUMP_RTOL = 1e-10


def soft_threshold(x, tau: float) -> np.ndarray:
    """Elementwise ``sign(x) * max(|x| - tau, 0)``."""
    if tau < 0:
        raise ValueError(f"threshold must be nonnegative, got {tau}")
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - tau, 0.0)


@numba.njit(cache=True)
def _fill(out, k0, stop, value):
    # do-while fill: writes at least one entry, returns the next free index
    out[k0] = value
    k0 += 1
    while k0 <= stop:
        out[k0] = value
        k0 += 1
    return k0


@numba.njit(cache=True)
def _taut_string(y, lam, out):
    # Condat's direct algorithm for min_z lam*||Dz||_1 + 0.5*||z - y||^2.
    n = y.shape[0]
    # constant input is its own prox; the sweep below would leave O(eps*lam) residue
    constant = True
    for i in range(1, n):
        if y[i] != y[0]:
            constant = False
            break
    if constant:
        out[:] = y
        return
    k = 0
    k0 = 0
    kplus = 0
    kminus = 0
    umin = lam
    umax = -lam
    vmin = y[0] - lam
    vmax = y[0] + lam
    twolam = 2.0 * lam
    minlam = -lam
    done = False
    while not done:
        if k == n - 1:
            if umin < 0.0:
                k0 = _fill(out, k0, kminus, vmin)
                k = k0
                kminus = k0
                vmin = y[k0]
                umin = lam
                umax = vmin + umin - vmax
            elif umax > 0.0:
                k0 = _fill(out, k0, kplus, vmax)
                k = k0
                kplus = k0
                vmax = y[k0]
                umax = minlam
                umin = vmax + umax - vmin
            else:
                vmin += umin / (k - k0 + 1)
                k0 = _fill(out, k0, k, vmin)
                done = True
            continue
        umin += y[k + 1] - vmin
        if umin < minlam:
            k0 = _fill(out, k0, kminus, vmin)
            k = k0
            kminus = k0
            kplus = k0
            vmin = y[k0]
            vmax = vmin + twolam
            umin = lam
            umax = minlam
            continue
        umax += y[k + 1] - vmax
        if umax > lam:
            k0 = _fill(out, k0, kplus, vmax)
            k = k0
            kminus = k0
            kplus = k0
            vmax = y[k0]
            vmin = vmax - twolam
            umin = lam
            umax = minlam
            continue
        k += 1
        if umin >= lam:
            kminus = k
            vmin += (umin - lam) / (kminus - k0 + 1)
            umin = lam
        if umax <= minlam:
            kplus = k
            vmax += (umax + lam) / (kplus - k0 + 1)
            umax = minlam


def tv_denoise(x, mu: float) -> np.ndarray:
    """Exact solution of ``argmin_z mu*||Dz||_1 + 0.5*||z - x||^2``."""
    if mu < 0:
        raise ValueError(f"TV weight must be nonnegative, got {mu}")
    x = np.ascontiguousarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("tv_denoise expects a 1-D vector")
    if not np.all(np.isfinite(x)):
        raise ValueError("input contains non-finite values")
    if mu == 0 or x.size < 2:
        return x.copy()
    out = np.empty_like(x)
    _taut_string(x, float(mu), out)
    return out


@dataclass(frozen=True)
class TautStringResult:
    """Output of :func:`tv_prox` with the data its weak Jacobian needs.

    ``segment_support[0]`` is always ``True`` (it anchors the first segment);
    ``segment_support[i]`` for ``i >= 1`` marks a jump between ``z[i-1]`` and
    ``z[i]``. ``jump_signs`` holds ``sign(z[i] - z[i-1])`` for those jumps, in
    order.
    """

    z: np.ndarray
    mu: float
    segment_support: np.ndarray
    jump_signs: np.ndarray

    @property
    def n_segments(self) -> int:
        return int(np.count_nonzero(self.segment_support))


def _jump_mask(z: np.ndarray) -> np.ndarray:
    dz = np.diff(z)
    thresh = JUMP_RTOL * (1.0 + (np.max(np.abs(z)) if z.size else 0.0))
    return np.abs(dz) > thresh


def tv_prox(x, mu: float) -> TautStringResult:
    """TV proximal operator with segment bookkeeping.

    Parameters
    ----------
    x : array_like
        Input vector of length ``n >= 1``.
    mu : float
        Nonnegative TV weight.
    """
    z = tv_denoise(x, mu)
    jumps = _jump_mask(z)
    support = np.concatenate(([True], jumps))
    signs = np.sign(np.diff(z)[jumps]).astype(np.int8)
    return TautStringResult(z=z, mu=float(mu), segment_support=support, jump_signs=signs)


def tv_prox_kkt_residual(x, mu: float, z) -> float:
    """Largest violation of the optimality conditions of ``z = prox_{mu TV}(x)``.

    The dual vector ``w = -cumsum(x - z) / mu`` must satisfy ``|w| <= 1``,
    vanish at the right end (``sum(x - z) = 0``), and equal ``sign(Dz)`` on
    the jumps of ``z``. For ``mu = 0`` the residual is ``max |x - z|``.
    """
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    if x.shape != z.shape:
        raise ValueError("x and z must have the same shape")
    if mu == 0:
        return float(np.max(np.abs(x - z), initial=0.0))
    w = -np.cumsum(x - z) / mu
    worst = abs(float(w[-1]))
    w = w[:-1]
    if w.size == 0:
        return worst
    worst = max(worst, float(np.max(np.abs(w))) - 1.0)
    jumps = _jump_mask(z)
    if np.any(jumps):
        dz = np.diff(z)
        worst = max(worst, float(np.max(np.abs(w[jumps] - np.sign(dz[jumps])))))
    return max(worst, 0.0)


def tv_prox_kkt_check(x, mu: float, z, tol: float = 1e-8) -> bool:
    """True when :func:`tv_prox_kkt_residual` is at most ``tol``."""
    return tv_prox_kkt_residual(x, mu, z) <= tol


def combined_prox(x, lam1: float, lam2: float) -> np.ndarray:
    """Prox of ``lam1*||.||_1 + lam2*||D.||_1``: soft threshold after TV prox."""
    if lam1 < 0 or lam2 < 0:
        raise ValueError("penalty weights must be nonnegative")
    return soft_threshold(tv_denoise(x, lam2), lam1)


def gradient_mapping(problem, lam1: float, x, u: float) -> np.ndarray:
    """Gradient mapping of ``f + lam1*||.||_1`` with step ``u``.

    ``(x - S_{lam1 u}(x - u * A^T (A x - y))) / u``; equals the least-squares
    gradient when ``lam1 = 0`` and vanishes exactly at minimizers.
    """
    if u <= 0:
        raise ValueError("u must be positive")
    x = np.asarray(x, dtype=float)
    grad = problem.A.T @ (problem.A @ x - problem.y)
    return (x - soft_threshold(x - u * grad, lam1 * u)) / u


def segment_bounds(support) -> np.ndarray:
    """Start indices of the constant segments plus a final ``n`` sentinel."""
    support = np.asarray(support, dtype=bool)
    starts = np.flatnonzero(support)
    if starts.size == 0 or starts[0] != 0:
        # an empty mask means one global segment
        starts = np.concatenate(([0], starts))
    return np.concatenate((starts, [support.size]))


def tv_prox_jacobian_vjp(result: TautStringResult, upstream, _sign_flip: float = 1.0):
    """Vector-Jacobian products of the TV prox.

    ``J_x`` is the orthogonal projector onto vectors that are constant on the
    segments of ``z``, so ``J_x^T g`` replaces ``g`` by its per-segment means.
    ``J_mu`` is constant on each segment with value
    ``(s_right - s_left) / len`` where ``s_left`` and ``s_right`` are the signs
    of the jumps bounding the segment (zero at the ends of the signal).

    Returns ``(grad_x, grad_mu)``.
    """
    g = np.asarray(upstream, dtype=float)
    n = result.z.size
    if g.shape != (n,):
        raise ValueError(f"upstream must have shape ({n},), got {g.shape}")
    bounds = segment_bounds(result.segment_support)
    starts = bounds[:-1]
    lengths = np.diff(bounds)
    seg_sums = np.add.reduceat(g, starts)
    grad_x = np.repeat(seg_sums / lengths, lengths)

    # boundary signs: s[k] is the sign of the jump entering segment k
    s = np.zeros(starts.size + 1)
    if starts.size > 1:
        s[1:-1] = np.sign(result.z[starts[1:]] - result.z[starts[1:] - 1])
    dz_dmu = _sign_flip * (s[1:] - s[:-1]) / lengths
    grad_mu = float(np.sum(seg_sums * dz_dmu))
    return grad_x, grad_mu


@numba.njit(cache=True)
def _tv_denoise_rows(X, lam, out):
    for i in range(X.shape[0]):
        _taut_string(X[i], lam, out[i])


def tv_denoise_batch(X, mu: float) -> np.ndarray:
    """Row-wise :func:`tv_denoise` of a 2-D array."""
    if mu < 0:
        raise ValueError(f"TV weight must be nonnegative, got {mu}")
    X = np.ascontiguousarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("expected a 2-D array")
    if mu == 0 or X.shape[1] < 2:
        return X.copy()
    out = np.empty_like(X)
    _tv_denoise_rows(X, float(mu), out)
    return out


def jump_signs_batch(Z) -> np.ndarray:
    """Row-wise jump signs of prox outputs ``Z``.

    Entry ``[i, j]`` (``j >= 1``) is ``sign(Z[i, j] - Z[i, j-1])`` where that
    difference counts as a jump under the :func:`tv_prox` threshold, else 0.
    Column 0 is always 0.
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    dz = np.diff(Z, axis=1)
    thresh = JUMP_RTOL * (1.0 + np.max(np.abs(Z), axis=1, keepdims=True))
    signs = np.zeros(Z.shape, dtype=np.int8)
    signs[:, 1:] = np.where(np.abs(dz) > thresh, np.sign(dz), 0).astype(np.int8)
    return signs


@numba.njit(cache=True)
def _tv_vjp_rows(S, G, GX, GMU):
    N, n = S.shape
    for i in range(N):
        g = G[i]
        start = 0
        s_left = 0.0
        gmu = 0.0
        for j in range(1, n + 1):
            if j < n:
                if S[i, j] == 0:
                    continue
                s_right = float(S[i, j])
            else:
                s_right = 0.0
            length = j - start
            acc = 0.0
            for k in range(start, j):
                acc += g[k]
            mean = acc / length
            for k in range(start, j):
                GX[i, k] = mean
            gmu += acc * (s_right - s_left) / length
            start = j
            s_left = s_right
        GMU[i] = gmu


def tv_vjp_batch(jump_signs, G):
    """Row-wise :func:`tv_prox_jacobian_vjp` from stored jump signs.

    ``jump_signs`` is as returned by :func:`jump_signs_batch`; a nonzero entry
    opens a new segment. Returns ``(GX, gmu)`` with ``gmu`` one entry per row.
    """
    S = np.ascontiguousarray(jump_signs, dtype=np.int8)
    G = np.ascontiguousarray(G, dtype=float)
    if S.shape != G.shape or S.ndim != 2:
        raise ValueError("jump_signs and G must be 2-D arrays of equal shape")
    GX = np.empty_like(G)
    GMU = np.empty(G.shape[0])
    _tv_vjp_rows(S, G, GX, GMU)
    return GX, GMU
