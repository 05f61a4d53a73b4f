"""Solvers for the l1-TV recovery models.

* :func:`pgm_ista` -- proximal gradient-mapping iteration for the regularized
  problem ``0.5*||y - Ax||^2 + lam1*||x||_1 + lam2*||Dx||_1``.
* :func:`admm_constrained` -- ADMM for the equality-constrained problem
  ``min lam1*||x||_1 + lam2*||Dx||_1  s.t.  Ax = y``.
* :func:`fista_reference` -- accelerated proximal gradient with the exact
  prox of the combined penalty, used to obtain reference minimizers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np
import scipy.linalg

from .linalg import spectral_norm
from .prox import _taut_string, combined_prox, gradient_mapping, soft_threshold, tv_denoise

__all__ = [
    "SensingProblem",
    "RegParams",
    "StepParams",
    "SolveResult",
    "AdmmConfig",
    "objective",
    "default_step_params",
    "validate_step_params",
    "pgm_ista",
    "pgm_ista_step",
    "fixed_point_residual",
    "admm_constrained",
    "fista_reference",
]


@dataclass(frozen=True)
class SensingProblem:
    """Dense sensing matrix ``A`` (m x n), measurements ``y`` and cached ``||A||_2^2``."""

    A: np.ndarray
    y: np.ndarray
    spectral_norm_sq: float = field(default=None)
    noise_level: float | None = None

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if A.ndim != 2:
            raise ValueError("A must be a matrix")
        m, n = A.shape
        if m < 1 or n < 2:
            raise ValueError(f"need m >= 1 and n >= 2, got A of shape {A.shape}")
        if y.shape != (m,):
            raise ValueError(f"y must have shape ({m},), got {y.shape}")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(y))):
            raise ValueError("A and y must be finite")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "y", y)
        if self.spectral_norm_sq is None:
            object.__setattr__(self, "spectral_norm_sq", spectral_norm(A) ** 2)

    @property
    def shape(self) -> tuple[int, int]:
        return self.A.shape

    def with_measurements(self, y) -> "SensingProblem":
        """Same matrix (and cached norm), different measurement vector."""
        return SensingProblem(self.A, y, self.spectral_norm_sq, self.noise_level)


@dataclass(frozen=True)
class RegParams:
    lam1: float
    lam2: float

    def __post_init__(self):
        if self.lam1 < 0 or self.lam2 < 0:
            raise ValueError("regularization weights must be nonnegative")


@dataclass(frozen=True)
class StepParams:
    """Inner step ``u`` (soft threshold) and outer step ``t`` (TV prox)."""

    u: float
    t: float


@dataclass(frozen=True)
class SolveResult:
    x: np.ndarray
    objective_history: list
    residual_history: list
    iterations: int
    converged: bool


@dataclass(frozen=True)
class AdmmConfig:
    tol: float = 1e-8
    mu0: float = 1e-3
    rho: float = 1.1
    mu_max: float = 1e8
    max_iter: int = 5000
    feas_tol: float = 1e-6
    record: bool = True


def objective(p: SensingProblem, r: RegParams, x) -> float:
    """``0.5*||y - Ax||^2 + lam1*||x||_1 + lam2*||Dx||_1``."""
    x = np.asarray(x, dtype=float)
    res = p.y - p.A @ x
    return float(0.5 * res @ res + r.lam1 * np.sum(np.abs(x))
                 + r.lam2 * np.sum(np.abs(np.diff(x))))


def default_step_params(p: SensingProblem, safety: float = 0.5) -> StepParams:
    """``u = safety * 2 / ||A||^2`` (so ``1/||A||^2`` by default) and ``t = 0.9 u``."""
    if not 0 < safety < 1:
        raise ValueError("safety must lie in (0, 1)")
    if p.spectral_norm_sq <= 0:
        raise ValueError("sensing matrix has zero norm")
    u = safety * 2.0 / p.spectral_norm_sq
    return StepParams(u=u, t=0.9 * u)


def validate_step_params(p: SensingProblem, s: StepParams) -> None:
    """Raise ``ValueError`` unless ``0 < u < 2/||A||^2`` and ``0 < t <= u``."""
    if not 0 < s.u < 2.0 / p.spectral_norm_sq:
        raise ValueError(
            f"u = {s.u:g} outside (0, 2/||A||^2) = (0, {2.0 / p.spectral_norm_sq:g})")
    if not 0 < s.t <= s.u:
        raise ValueError(f"t = {s.t:g} outside (0, u] with u = {s.u:g}")


def pgm_ista_step(p: SensingProblem, r: RegParams, s: StepParams, x) -> np.ndarray:
    """One PGM-ISTA update.

    ``T_{lam2 t}((1 - t/u) x + (t/u) S_{lam1 u}(x - u A^T (A x - y)))``
    """
    grad = p.A.T @ (p.A @ x - p.y)
    inner = soft_threshold(x - s.u * grad, r.lam1 * s.u)
    ratio = s.t / s.u
    return tv_denoise((1.0 - ratio) * x + ratio * inner, r.lam2 * s.t)


@numba.njit(cache=True)
def _pgm_ista_loop(A, y, lam1, lam2, u, t, x, max_iter, tol):
    # compiled PGM-ISTA for runs without history or callback
    n = x.size
    ratio = t / u
    tau = lam1 * u
    mu = lam2 * t
    w = np.empty(n)
    z = np.empty(n)
    k = 0
    while k < max_iter:
        grad = A.T @ (A @ x - y)
        for i in range(n):
            v = x[i] - u * grad[i]
            a = abs(v) - tau
            s = np.sign(v) * a if a > 0.0 else 0.0
            w[i] = (1.0 - ratio) * x[i] + ratio * s
        if mu > 0.0 and n > 1:
            _taut_string(w, mu, z)
        else:
            z[:] = w
        step = 0.0
        xn = 0.0
        for i in range(n):
            step += (z[i] - x[i]) ** 2
            xn += x[i] * x[i]
        x[:] = z
        k += 1
        if np.sqrt(step) / max(np.sqrt(xn), 1.0) < tol:
            return k, True
    return k, False


def pgm_ista(p: SensingProblem, r: RegParams, s: StepParams, x0=None,
             max_iter: int = 1000, tol: float = 1e-8, record: bool = True,
             callback=None) -> SolveResult:
    """Run PGM-ISTA from ``x0`` (zeros by default).

    Stops when ``||x^{k+1} - x^k|| / max(||x^k||, 1) < tol`` or after
    ``max_iter`` updates. ``callback(k, x)`` is called after every update.
    Without ``record`` and ``callback`` the loop runs compiled.
    """
    validate_step_params(p, s)
    n = p.A.shape[1]
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    if x.shape != (n,):
        raise ValueError(f"x0 must have shape ({n},)")
    if not record and callback is None:
        if not np.all(np.isfinite(x)):
            raise ValueError("x0 contains non-finite values")
        A = np.ascontiguousarray(p.A, dtype=float)
        y = np.ascontiguousarray(p.y, dtype=float)
        k, converged = _pgm_ista_loop(A, y, float(r.lam1), float(r.lam2), float(s.u),
                                      float(s.t), x, int(max_iter), float(tol))
        return SolveResult(x, [objective(p, r, x)], [], k, converged)
    obj_hist = [objective(p, r, x)] if record else []
    res_hist = []
    converged = False
    k = 0
    while k < max_iter:
        x_new = pgm_ista_step(p, r, s, x)
        step = float(np.linalg.norm(x_new - x))
        scale = max(float(np.linalg.norm(x)), 1.0)
        x = x_new
        k += 1
        if record:
            obj_hist.append(objective(p, r, x))
            res_hist.append(step)
        if callback is not None:
            callback(k, x)
        if step / scale < tol:
            converged = True
            break
    if not record:
        obj_hist = [objective(p, r, x)]
    return SolveResult(x, obj_hist, res_hist, k, converged)


def fixed_point_residual(p: SensingProblem, r: RegParams, s: StepParams, x) -> float:
    """``||x - prox_{t g2}(x - t * G_{1/u}(x))||`` where ``G`` is the gradient mapping of ``f + g1``."""
    validate_step_params(p, s)
    x = np.asarray(x, dtype=float)
    g = gradient_mapping(p, r.lam1, x, s.u)
    return float(np.linalg.norm(x - tv_denoise(x - s.t * g, r.lam2 * s.t)))


def fista_reference(p: SensingProblem, r: RegParams, x0=None, max_iter: int = 20_000,
                    tol: float = 1e-13) -> SolveResult:
    """Accelerated proximal gradient (FISTA) with the exact combined prox.

    Uses step ``1/||A||^2`` and adaptive restart on objective increase.
    Only the final objective is recorded.
    """
    n = p.A.shape[1]
    step = 1.0 / (p.spectral_norm_sq * (1.0 + 1e-6))
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    yk = x.copy()
    theta = 1.0
    f_old = objective(p, r, x)
    converged = False
    k = 0
    res_hist = []
    while k < max_iter:
        grad = p.A.T @ (p.A @ yk - p.y)
        x_new = combined_prox(yk - step * grad, r.lam1 * step, r.lam2 * step)
        f_new = objective(p, r, x_new)
        if f_new > f_old:
            # restart momentum
            theta = 1.0
            yk = x.copy()
            k += 1
            continue
        theta_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * theta * theta))
        yk = x_new + ((theta - 1.0) / theta_new) * (x_new - x)
        change = float(np.linalg.norm(x_new - x))
        res_hist.append(change)
        x, theta, f_old = x_new, theta_new, f_new
        k += 1
        if change <= tol * max(float(np.linalg.norm(x)), 1.0):
            converged = True
            break
    return SolveResult(x, [f_old], res_hist, k, converged)


def admm_constrained(A, y, r: RegParams, cfg: AdmmConfig | None = None) -> SolveResult:
    """ADMM for ``min lam1*||x||_1 + lam2*||Dx||_1`` subject to ``Ax = y``.

    Splits ``x = z``; the x-update solves with a cached Cholesky factor of
    ``A^T A + I``, the z-update applies the combined prox with thresholds
    ``lam1/mu, lam2/mu``, and the penalty grows as ``mu <- min(rho*mu, mu_max)``.
    Stops once the relative change of ``x`` drops below ``tol`` while the
    split residual ``||x - z|| / max(||x||, 1)`` is below ``feas_tol``; the
    second test keeps the loop from stopping during the early iterations
    where a large threshold pins ``z`` at zero and ``x`` stalls. The
    objective history records ``g(x^k)``.
    """
    cfg = cfg or AdmmConfig()
    A = np.asarray(A, dtype=float)
    y = np.asarray(y, dtype=float)
    m, n = A.shape
    if y.shape != (m,):
        raise ValueError(f"y must have shape ({m},)")
    try:
        chol = scipy.linalg.cho_factor(A.T @ A + np.eye(n))
    except np.linalg.LinAlgError as exc:
        raise RuntimeError("factorization of A^T A + I failed") from exc
    Aty = A.T @ y

    def g(v):
        return float(r.lam1 * np.sum(np.abs(v)) + r.lam2 * np.sum(np.abs(np.diff(v))))

    x = np.zeros(n)
    z = np.zeros(n)
    u = np.zeros(m)
    v = np.zeros(n)
    mu = cfg.mu0
    obj_hist = [g(x)] if cfg.record else []
    res_hist = []
    converged = False
    k = 0
    while k < cfg.max_iter:
        rhs = Aty + z - (A.T @ u) / mu - v / mu
        x_new = scipy.linalg.cho_solve(chol, rhs)
        z = combined_prox(x_new + v / mu, r.lam1 / mu, r.lam2 / mu)
        u = u + mu * (A @ x_new - y)
        v = v + mu * (x_new - z)
        mu = min(cfg.rho * mu, cfg.mu_max)
        change = float(np.linalg.norm(x_new - x)) / max(float(np.linalg.norm(x)), 1.0)
        x = x_new
        k += 1
        if cfg.record:
            obj_hist.append(g(x))
            res_hist.append(change)
        split_gap = float(np.linalg.norm(x - z)) / max(float(np.linalg.norm(x)), 1.0)
        if change < cfg.tol and split_gap < cfg.feas_tol:
            converged = True
            break
    if not cfg.record:
        obj_hist = [g(x)]
    return SolveResult(x, obj_hist, res_hist, k, converged)
