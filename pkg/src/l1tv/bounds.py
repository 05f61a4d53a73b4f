"""Sample-complexity bounds for l1-TV recovery.

Closed-form upper bounds on the statistical dimension of the descent cone of
``g(x) = lam1*||x||_1 + lam2*||Dx||_1``, the resulting Gaussian measurement
count, the zero-solution threshold ``lambda_max`` and a Monte-Carlo estimate of
the width bound built from explicit subgradients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .linalg import make_rng

__all__ = [
    "BoundQuery",
    "InfeasibleBoundError",
    "phi",
    "phi_l1",
    "phi_l1_sharp",
    "phi_tv",
    "sample_bound",
    "recovery_error_bound",
    "lambda_max",
    "lambda_ratio_coeffs",
    "mc_width_upper",
    "WidthEstimate",
    "construction_bound",
]


class InfeasibleBoundError(ValueError):
    """The error bound's denominator is not positive for the given ``m``."""


@dataclass(frozen=True)
class BoundQuery:
    n: int
    s_r: int
    s_g: int
    lam1: float = 1.0
    lam2: float = 1.0
    t: float = 1.0

    def __post_init__(self):
        if not 0 <= self.s_r <= self.n:
            raise ValueError(f"s_r = {self.s_r} outside [0, n = {self.n}]")
        if not 0 <= self.s_g <= max(self.n - 1, 0):
            raise ValueError(f"s_g = {self.s_g} outside [0, n - 1 = {self.n - 1}]")
        if self.s_g > 2 * self.s_r:
            raise ValueError(f"s_g = {self.s_g} exceeds 2 * s_r = {2 * self.s_r}")
        if self.lam1 < 0 or self.lam2 < 0:
            raise ValueError("penalty weights must be nonnegative")
        if self.lam1 == 0 and self.lam2 == 0:
            raise ValueError("lam1 and lam2 cannot both be zero")
        if self.t <= 0:
            raise ValueError("t must be positive")


def phi(q: BoundQuery, cross_term: str = "theorem") -> float:
    """Upper bound on the statistical dimension of the l1-TV descent cone.

    ``n - (6/pi) [lam1 (n - s_r) + sqrt(2) lam2 (n - 1 - s_g)]^2 / den`` with
    ``den = 3 n lam1^2 + 4 (2n + s_g - 4) lam2^2 + 12 lam1 lam2 min(s_r, s_g)``.

    Only the ratio ``lam1 / lam2`` matters. ``cross_term="tabulated"`` replaces
    the last denominator term by ``12 lam2^2 min(s_r, s_g)``, which is what the
    published comparison table's ``lam1/lam2 = 0.1`` block evaluates; it is
    kept only to regenerate that table and is not a valid bound in general.
    """
    n, s_r, s_g, l1, l2 = q.n, q.s_r, q.s_g, q.lam1, q.lam2
    if cross_term == "theorem":
        cross = 12.0 * l1 * l2 * min(s_r, s_g)
    elif cross_term == "tabulated":
        cross = 12.0 * l2 * l2 * min(s_r, s_g)
    else:
        raise ValueError(f"unknown cross_term {cross_term!r}")
    num = (l1 * (n - s_r) + math.sqrt(2.0) * l2 * (n - 1 - s_g)) ** 2
    den = 3.0 * n * l1 ** 2 + 4.0 * (2 * n + s_g - 4) * l2 ** 2 + cross
    if den <= 0:
        raise ValueError("bound denominator is not positive for these inputs")
    return n - (6.0 / math.pi) * num / den


def phi_l1(n: int, s_r: int) -> float:
    """``n - (2/pi) (n - s_r)^2 / n``: the bound with ``lam2 = 0``."""
    if not 0 <= s_r <= n or n < 1:
        raise ValueError("need 0 <= s_r <= n")
    return n - (2.0 / math.pi) * (n - s_r) ** 2 / n


def phi_l1_sharp(n: int, s_r: int) -> float:
    """Order-sharp l1 bound ``2 s_r ln(n/s_r) + 2 s_r``."""
    if not 0 < s_r < n:
        raise ValueError("need 0 < s_r < n")
    return 2.0 * s_r * math.log(n / s_r) + 2.0 * s_r


def phi_tv(n: int, s_g: int) -> float:
    """``n - (3/pi) (n - s_g - 1)^2 / (2n + s_g - 4)``: the bound with ``lam1 = 0``."""
    if n < 3 or not 0 <= s_g < n - 1:
        raise ValueError("need n >= 3 and 0 <= s_g < n - 1")
    return n - (3.0 / math.pi) * (n - s_g - 1) ** 2 / (2 * n + s_g - 4)


def sample_bound(phi_value: float, t: float) -> int:
    """Smallest integer ``m`` with ``m > (sqrt(phi) + t)^2 + 1``."""
    if phi_value < 0:
        raise ValueError("phi must be nonnegative")
    if t <= 0:
        raise ValueError("t must be positive")
    return math.floor((math.sqrt(phi_value) + t) ** 2 + 1.0) + 1


def recovery_error_bound(m: int, phi_value: float, t: float, eps: float,
                         printed: bool = False) -> float:
    """Recovery error bound ``2 eps / (sqrt(m - 1) - sqrt(phi) - t)``.

    Holds with probability at least ``1 - exp(-t^2/2)``. ``printed=True``
    uses ``phi`` itself in place of ``sqrt(phi)`` in the denominator.
    """
    width = phi_value if printed else math.sqrt(phi_value)
    den = math.sqrt(m - 1) - width - t
    if den <= 0:
        raise InfeasibleBoundError(
            f"m = {m} too small: denominator {den:.4g} <= 0")
    return 2.0 * eps / den


def lambda_max(A, y) -> float:
    """``||A^T y||_inf``."""
    A = np.asarray(A, dtype=float)
    y = np.asarray(y, dtype=float)
    if A.shape[0] != y.shape[0]:
        raise ValueError("A and y have incompatible shapes")
    return float(np.max(np.abs(A.T @ y)))


def lambda_ratio_coeffs(n: int, s_r: int, s_g: int, n0: float,
                        form: str = "printed") -> tuple[float, float, float]:
    """Coefficients ``(a, b, c)`` of a quadratic in ``rho = lam1/lam2``.

    ``form="printed"`` gives the published coefficients
    ``a = 2 (n - s_r)^2``,
    ``b = 4 sqrt(2) (n - s_r)(n - 1 - s_g) + (3n + 12 min(s_r, s_g)) n0``,
    ``c = 4 (n - 1 - s_g)^2 + 4 (2n + s_g - 4) n0``.

    ``form="exact"`` gives coefficients for which
    ``a rho^2 + b rho + c >= 0`` holds exactly when ``phi <= n0``
    (the bound rearranged after multiplying through by its denominator).
    """
    if not 0 <= s_r <= n or not 0 <= s_g <= n - 1:
        raise ValueError("sparsity levels out of range")
    mn = min(s_r, s_g)
    if form == "printed":
        a = 2.0 * (n - s_r) ** 2
        b = 4.0 * math.sqrt(2.0) * (n - s_r) * (n - 1 - s_g) + (3.0 * n + 12.0 * mn) * n0
        c = 4.0 * (n - 1 - s_g) ** 2 + 4.0 * (2 * n + s_g - 4) * n0
    elif form == "exact":
        k = 6.0 / math.pi
        gap = n - n0
        a = k * (n - s_r) ** 2 - 3.0 * n * gap
        b = k * 2.0 * math.sqrt(2.0) * (n - s_r) * (n - 1 - s_g) - 12.0 * mn * gap
        c = k * 2.0 * (n - 1 - s_g) ** 2 - 4.0 * (2 * n + s_g - 4) * gap
    else:
        raise ValueError(f"unknown form {form!r}")
    return a, b, c


class WidthEstimate(NamedTuple):
    mean: float
    stderr: float


def _width_draw(g, sx, sdx, lam1, lam2):
    # proof's subgradient choice: signs of x on its support, signs of g off it
    z1 = np.where(sx != 0, sx, np.sign(g))
    dg = np.diff(g)
    z2 = np.where(sdx != 0, sdx, np.sign(dg))
    v = lam1 * z1
    if lam2:
        v = v.copy()
        v[:-1] -= lam2 * z2
        v[1:] += lam2 * z2
    gg = float(g @ g)
    vv = float(v @ v)
    if vv == 0.0:
        return gg
    tstar = max(0.0, float(g @ v) / vv)
    r = g - tstar * v
    return float(r @ r)


def mc_width_upper(x, lam1: float, lam2: float, trials: int, seed: int,
                   tol: float = 0.0) -> WidthEstimate:
    """Monte-Carlo estimate of ``E min_{t>=0} ||g - t v(g)||^2``.

    For each standard Gaussian ``g``, ``v = lam1 z1 + lam2 D^T z2`` uses the
    maximizing subgradients ``z1 = sign(x) on supp(x), sign(g) elsewhere`` and
    ``z2 = sign(Dx) on supp(Dx), sign(Dg) elsewhere``. Draw ``i`` uses the
    generator seeded with ``(seed, i)``, so results do not depend on how the
    trials are batched. Returns the sample mean and its standard error.
    """
    if trials < 2:
        raise ValueError("need at least two trials")
    if lam1 < 0 or lam2 < 0:
        raise ValueError("penalty weights must be nonnegative")
    x = np.asarray(x, dtype=float)
    sx = np.where(np.abs(x) > tol, np.sign(x), 0.0)
    dx = np.diff(x)
    sdx = np.where(np.abs(dx) > tol, np.sign(dx), 0.0)
    vals = np.empty(trials)
    for i in range(trials):
        g = make_rng((seed, i)).standard_normal(x.size)
        vals[i] = _width_draw(g, sx, sdx, lam1, lam2)
    return WidthEstimate(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(trials)))


def construction_bound(x, lam1: float, lam2: float, tol: float = 0.0) -> float:
    """Closed-form ceiling on :func:`mc_width_upper`'s expectation for ``x``.

    Minimizes over ``t`` the same quadratic upper bound that yields
    :func:`phi`, but keeps the term
    ``E[(sign g_{i+1} - sign g_i) sign(g_{i+1} - g_i)] = 1`` for each pair
    ``x_i = x_{i+1} = 0``; this adds ``2 lam1 lam2 N00`` to the ``t^2``
    coefficient, ``N00`` being the number of such pairs.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    nz = np.abs(x) > tol
    s_r = int(np.count_nonzero(nz))
    s_g = int(np.count_nonzero(np.abs(np.diff(x)) > tol))
    n00 = int(np.count_nonzero(~nz[:-1] & ~nz[1:]))
    quad = (lam1 ** 2 * n + lam2 ** 2 * (4.0 * s_g + 8.0 * n - 16.0) / 3.0
            + 4.0 * lam1 * lam2 * min(s_r, s_g) + 2.0 * lam1 * lam2 * n00)
    lin = math.sqrt(2.0 / math.pi) * (lam1 * (n - s_r) + math.sqrt(2.0) * lam2 * (n - 1 - s_g))
    if quad <= 0:
        raise ValueError("degenerate bound: lam1 and lam2 both zero")
    return n - lin * lin / quad
