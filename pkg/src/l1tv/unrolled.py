"""LPGM-ISTA: PGM-ISTA unrolled into an L-layer network with tied weights.

Each layer computes::

    v = W_x x + W_y y
    s = S_{lam1 u}(v)
    w = (1 - t/u) x + (t/u) s
    x = T_{lam2 t}(w)

starting from ``x = 0``. The learnable parameters are ``W_x, W_y, u, t``;
``lam1, lam2`` stay fixed. Gradients are computed by a hand-written reverse
sweep: soft thresholding contributes its active-set mask, the TV prox its
segment-averaging weak Jacobian.
"""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .linalg import make_rng
from .prox import JUMP_RTOL, jump_signs_batch, tv_denoise_batch, tv_vjp_batch
from .solvers import RegParams, SensingProblem

__all__ = [
    "NetParams",
    "LayerTape",
    "ParamGrads",
    "TrainConfig",
    "TrainResult",
    "TrainingDiverged",
    "ScreeningError",
    "init_params",
    "forward",
    "forward_batch",
    "backward",
    "backward_batch",
    "loss",
    "loss_and_grads",
    "train",
    "grad_check",
    "save_checkpoint",
    "load_checkpoint",
]

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "lpgm-ista-checkpoint"
CHECKPOINT_VERSION = 1
MIN_STEP = 1e-8


class TrainingDiverged(RuntimeError):
    pass


class ScreeningError(RuntimeError):
    """No probe point with stable masks was found for a finite-difference check."""


@dataclass(frozen=True)
class NetParams:
    W_x: np.ndarray
    W_y: np.ndarray
    u: float
    t: float
    lam1: float
    lam2: float
    L: int

    def __post_init__(self):
        n = self.W_x.shape[0]
        if self.W_x.shape != (n, n) or self.W_y.ndim != 2 or self.W_y.shape[0] != n:
            raise ValueError("W_x must be n x n and W_y n x m")
        if self.u <= 0 or self.t <= 0:
            raise ValueError("u and t must be positive")
        if self.L < 1:
            raise ValueError("depth L must be at least 1")

    @property
    def n(self) -> int:
        return self.W_x.shape[0]

    @property
    def m(self) -> int:
        return self.W_y.shape[1]


@dataclass
class LayerTape:
    """Per-layer record for the reverse sweep (one row per sample).

    ``active`` is the soft-threshold mask ``|v| > lam1 u``; ``segment_support``
    and ``jump_signs`` describe the constant pieces of the TV prox output
    ``z``: ``segment_support[:, j]`` flags a segment starting at ``j`` and
    ``jump_signs[:, j]`` is the sign of ``z_j - z_{j-1}`` there. ``y`` is the
    measurement batch (shared by all layers), kept for the ``W_y`` gradient.
    No Jacobian matrix is stored.
    """

    y: np.ndarray
    x_in: np.ndarray
    v: np.ndarray
    active: np.ndarray
    w: np.ndarray
    z: np.ndarray
    segment_support: np.ndarray
    jump_signs: np.ndarray


@dataclass
class ParamGrads:
    W_x: np.ndarray
    W_y: np.ndarray
    u: float
    t: float

    def max_abs(self) -> float:
        return max(float(np.max(np.abs(self.W_x))), float(np.max(np.abs(self.W_y))),
                   abs(self.u), abs(self.t))


def init_params(p: SensingProblem, r: RegParams, L: int) -> NetParams:
    """PGM-ISTA initialization: ``u = 1/||A||^2``, ``t = 0.9 u``,
    ``W_y = u A^T``, ``W_x = I - u A^T A``."""
    if L < 1:
        raise ValueError("depth L must be at least 1")
    u = 1.0 / p.spectral_norm_sq
    A = p.A
    n = A.shape[1]
    return NetParams(W_x=np.eye(n) - u * (A.T @ A), W_y=u * A.T.copy(), u=u, t=0.9 * u,
                     lam1=r.lam1, lam2=r.lam2, L=L)


def forward_batch(theta: NetParams, Y, record: bool = False):
    """Run the network on the rows of ``Y`` (shape ``N x m``).

    Returns ``(X_hat, tapes)``; ``tapes`` is empty unless ``record``.
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if Y.shape[1] != theta.m:
        raise ValueError(f"measurements must have {theta.m} entries, got {Y.shape[1]}")
    N = Y.shape[0]
    u, t = theta.u, theta.t
    ratio = t / u
    tau = theta.lam1 * u
    by = Y @ theta.W_y.T
    x = np.zeros((N, theta.n))
    tapes = []
    for _ in range(theta.L):
        v = x @ theta.W_x.T + by
        s = np.sign(v) * np.maximum(np.abs(v) - tau, 0.0)
        w = (1.0 - ratio) * x + ratio * s
        z = tv_denoise_batch(w, theta.lam2 * t)
        if record:
            signs = jump_signs_batch(z)
            support = signs != 0
            support[:, 0] = True
            tapes.append(LayerTape(y=Y, x_in=x, v=v, active=np.abs(v) > tau, w=w, z=z,
                                   segment_support=support, jump_signs=signs))
        x = z
    return x, tapes


def forward(theta: NetParams, y, record: bool = False):
    """Single-sample forward pass: ``(x_hat, tapes)``."""
    X, tapes = forward_batch(theta, np.asarray(y, dtype=float)[None, :], record)
    return X[0], tapes


def backward_batch(theta: NetParams, tapes, G_out, _tv_sign: float = 1.0) -> ParamGrads:
    """Reverse sweep; returns gradients summed over the rows of ``G_out``.

    ``G_out`` holds ``dLoss/dx_hat`` per sample. ``_tv_sign`` flips the sign
    of the TV threshold Jacobian and exists only for fault-injection tests.
    """
    if not tapes:
        raise ValueError("backward needs the tape from forward(..., record=True)")
    if len(tapes) != theta.L:
        raise ValueError(f"tape has {len(tapes)} layers, network has {theta.L}")
    Y = tapes[0].y
    G = np.atleast_2d(np.asarray(G_out, dtype=float)).copy()
    u, t = theta.u, theta.t
    ratio = t / u
    gWx = np.zeros_like(theta.W_x)
    gWy = np.zeros_like(theta.W_y)
    gu = 0.0
    gt = 0.0
    for tape in reversed(tapes):
        if theta.lam2 > 0:
            gw, gmu = tv_vjp_batch(tape.jump_signs, G)
            gt += _tv_sign * theta.lam2 * float(np.sum(gmu))
        else:
            gw = G
        s = np.where(tape.active, tape.v - np.sign(tape.v) * theta.lam1 * u, 0.0)
        diff = s - tape.x_in
        proj = float(np.sum(gw * diff))
        gt += proj / u
        gu -= t * proj / (u * u)
        gs = ratio * gw
        gv = np.where(tape.active, gs, 0.0)
        gu -= theta.lam1 * float(np.sum(gs * np.where(tape.active, np.sign(tape.v), 0.0)))
        gWx += gv.T @ tape.x_in
        gWy += gv.T @ Y
        G = (1.0 - ratio) * gw + gv @ theta.W_x
    return ParamGrads(W_x=gWx, W_y=gWy, u=gu, t=gt)


def backward(theta: NetParams, tapes, grad_out) -> ParamGrads:
    """Single-sample reverse sweep from ``grad_out = dLoss/dx_hat``."""
    return backward_batch(theta, tapes, np.asarray(grad_out, dtype=float)[None, :])


def _as_arrays(batch):
    ys, xs = zip(*batch)
    return np.array(ys, dtype=float), np.array(xs, dtype=float)


def loss(theta: NetParams, batch) -> float:
    """Mean squared error ``(1/N) sum ||x_i - net(y_i)||^2`` over ``(y_i, x_i)`` pairs."""
    batch = list(batch)
    if not batch:
        raise ValueError("empty batch")
    Y, X = _as_arrays(batch)
    if X.shape[1] != theta.n:
        raise ValueError(f"labels must have {theta.n} entries, got {X.shape[1]}")
    X_hat, _ = forward_batch(theta, Y)
    return float(np.mean(np.sum((X_hat - X) ** 2, axis=1)))


def loss_and_grads(theta: NetParams, Y, X, _tv_sign: float = 1.0):
    """Batch loss and its parameter gradients."""
    N = Y.shape[0]
    X_hat, tapes = forward_batch(theta, Y, record=True)
    R = X_hat - X
    value = float(np.sum(R * R) / N)
    grads = backward_batch(theta, tapes, (2.0 / N) * R, _tv_sign=_tv_sign)
    return value, grads


@dataclass(frozen=True)
class TrainConfig:
    L: int = 2
    lr: float = 1e-3
    scalar_lr: float | None = None
    batch_size: int = 32
    epochs: int = 200
    val_fraction: float = 0.2
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8


@dataclass
class TrainResult:
    theta: NetParams
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    init_val_loss: float = math.nan
    best_epoch: int = -1
    seconds: float = 0.0


class _Adam:
    def __init__(self, shapes, lrs, beta1, beta2, eps):
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]
        self.lrs = lrs
        self.b1, self.b2, self.eps = beta1, beta2, eps
        self.k = 0

    def step(self, params, grads):
        self.k += 1
        c1 = 1.0 - self.b1 ** self.k
        c2 = 1.0 - self.b2 ** self.k
        out = []
        for i, (p, g) in enumerate(zip(params, grads)):
            self.m[i] = self.b1 * self.m[i] + (1.0 - self.b1) * g
            self.v[i] = self.b2 * self.v[i] + (1.0 - self.b2) * g * g
            out.append(p - self.lrs[i] * (self.m[i] / c1) / (np.sqrt(self.v[i] / c2) + self.eps))
        return out


def train(p: SensingProblem, r: RegParams, data, cfg: TrainConfig | None = None,
          theta0: NetParams | None = None) -> TrainResult:
    """Fit ``W_x, W_y, u, t`` with mini-batch Adam from the PGM-ISTA initialization.

    ``data`` is a pair of arrays ``(Y, X)`` (rows are samples) or a list of
    ``(y, x)`` pairs. A seeded permutation holds out ``val_fraction`` of the
    samples for validation; the parameters with the lowest validation loss
    are returned. ``u`` and ``t`` are clipped to at least ``1e-8`` after each
    step. ``scalar_lr`` (default ``lr * u0``) is the step for ``u`` and ``t``,
    which live on the scale of ``1/||A||^2`` rather than order one.
    """
    cfg = cfg or TrainConfig()
    if isinstance(data, tuple) and len(data) == 2 and np.ndim(data[0]) == 2:
        Y, X = np.asarray(data[0], dtype=float), np.asarray(data[1], dtype=float)
    else:
        Y, X = _as_arrays(list(data))
    N = Y.shape[0]
    rng = make_rng(cfg.seed)
    perm = rng.permutation(N)
    n_val = int(round(cfg.val_fraction * N))
    if N - n_val < 1:
        raise ValueError("no training samples left after the validation split")
    val_idx, tr_idx = perm[:n_val], perm[n_val:]
    Yv, Xv = Y[val_idx], X[val_idx]
    Yt, Xt = Y[tr_idx], X[tr_idx]

    theta = theta0 or init_params(p, r, cfg.L)

    def val_loss(th):
        if n_val == 0:
            return float("nan")
        Xh, _ = forward_batch(th, Yv)
        return float(np.mean(np.sum((Xh - Xv) ** 2, axis=1)))

    scalar_lr = cfg.scalar_lr if cfg.scalar_lr is not None else cfg.lr * theta.u
    opt = _Adam([theta.W_x.shape, theta.W_y.shape, (), ()],
                [cfg.lr, cfg.lr, scalar_lr, scalar_lr], cfg.beta1, cfg.beta2, cfg.adam_eps)
    result = TrainResult(theta=theta)
    result.init_val_loss = best = val_loss(theta)
    tic = time.perf_counter()
    for epoch in range(cfg.epochs):
        order = rng.permutation(tr_idx.size)
        total = 0.0
        for start in range(0, order.size, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            value, g = loss_and_grads(theta, Yt[idx], Xt[idx])
            if not math.isfinite(value) or not math.isfinite(g.max_abs()):
                raise TrainingDiverged(
                    f"non-finite loss or gradient at epoch {epoch}, u={theta.u:g}, t={theta.t:g}")
            total += value * idx.size
            if cfg.lr == 0:
                continue
            Wx, Wy, u, t = opt.step([theta.W_x, theta.W_y, np.float64(theta.u),
                                     np.float64(theta.t)], [g.W_x, g.W_y, g.u, g.t])
            theta = replace(theta, W_x=Wx, W_y=Wy, u=max(float(u), MIN_STEP),
                            t=max(float(t), MIN_STEP))
        result.train_loss.append(total / tr_idx.size)
        vl = val_loss(theta)
        result.val_loss.append(vl)
        if not math.isfinite(result.train_loss[-1]):
            raise TrainingDiverged(f"non-finite training loss at epoch {epoch}")
        if n_val == 0 or vl < best:
            best = vl
            result.theta = theta
            result.best_epoch = epoch
        log.debug("epoch %d train %.6g val %.6g", epoch, result.train_loss[-1], vl)
    result.seconds = time.perf_counter() - tic
    return result


def _flatten(theta: NetParams):
    return np.concatenate((theta.W_x.ravel(), theta.W_y.ravel(), [theta.u, theta.t]))


def _unflatten(theta: NetParams, vec):
    n, m = theta.n, theta.m
    Wx = vec[:n * n].reshape(n, n)
    Wy = vec[n * n:n * n + n * m].reshape(n, m)
    return replace(theta, W_x=Wx, W_y=Wy, u=float(vec[-2]), t=float(vec[-1]))


def _pattern(theta: NetParams, y):
    _, tapes = forward(theta, y, record=True)
    return [(tp.active.copy(), tp.segment_support.copy()) for tp in tapes]


def _margin(theta: NetParams, y) -> float:
    # smallest distance of any layer quantity to a kink of the weak Jacobians
    _, tapes = forward(theta, y, record=True)
    tau = theta.lam1 * theta.u
    worst = math.inf
    for tp in tapes:
        if theta.lam1 > 0:
            worst = min(worst, float(np.min(np.abs(np.abs(tp.v) - tau))))
        if theta.lam2 > 0:
            jumps = np.abs(np.diff(tp.z[0]))
            big = jumps[jumps > JUMP_RTOL * (1.0 + np.max(np.abs(tp.z[0])))]
            if big.size:
                worst = min(worst, float(np.min(big)))
            # dual slack on merged pairs: |w_i| must stay away from 1
            mu = theta.lam2 * theta.t
            dual = -np.cumsum(tp.w[0] - tp.z[0])[:-1] / mu
            inner = ~tp.segment_support[0, 1:]
            if np.any(inner):
                worst = min(worst, float(np.min(1.0 - np.abs(dual[inner]))) * mu)
    return worst


def _unscreened(theta: NetParams, y, fd_step: float, margin: float):
    """Reason the point ``y`` is unsuitable for a finite-difference check, or None."""
    if _margin(theta, y) < margin:
        return "a layer quantity lies within the margin of a mask or segment change"
    base = _flatten(theta)
    ref = _pattern(theta, y)
    for i in range(base.size):
        h = _fd_step(base, i, fd_step)
        for sign in (1.0, -1.0):
            probe = base.copy()
            probe[i] += sign * h
            for (a1, s1), (a2, s2) in zip(_pattern(_unflatten(theta, probe), y), ref):
                if not (np.array_equal(a1, a2) and np.array_equal(s1, s2)):
                    return f"a probe of parameter {i} changes a mask"
    return None


def _fd_step(base, i, fd_step):
    # u and t are O(1/||A||^2); step them relative to their size
    return fd_step * (abs(base[i]) if i >= base.size - 2 else 1.0)


def grad_check(theta: NetParams, y, x_label, fd_step: float = 1e-6, margin: float = 1e-4,
               max_retries: int = 5, seed: int = 0, _tv_sign: float = 1.0) -> float:
    """Largest relative error between analytic and central-difference gradients.

    The loss is ``||x_label - net(y)||^2`` and every parameter entry is probed.
    The error per entry is ``|analytic - fd| / (|fd| + 1e-12)``.

    Weak Jacobians are not derivatives at kinks, so the probe point is
    screened first: every layer quantity must stay ``margin`` away from a
    soft-threshold or segment change and no ``+-fd_step`` probe may alter a
    mask. A rejected ``y`` is jittered by a seeded relative perturbation of
    size ``1e-3`` and screened again, at most ``max_retries`` times, before
    :class:`ScreeningError` is raised.
    """
    y = np.asarray(y, dtype=float)
    x_label = np.asarray(x_label, dtype=float)
    rng = make_rng(seed)
    scale = 1e-3 * np.linalg.norm(y) / math.sqrt(y.size) if np.any(y) else 1e-3
    probe_y = y
    for _ in range(max_retries + 1):
        reason = _unscreened(theta, probe_y, fd_step, margin)
        if reason is None:
            break
        probe_y = y + scale * rng.standard_normal(y.size)
    else:
        raise ScreeningError(f"no screened point after {max_retries} retries: {reason}")

    _, g = loss_and_grads(theta, probe_y[None, :], x_label[None, :], _tv_sign=_tv_sign)
    analytic = np.concatenate((g.W_x.ravel(), g.W_y.ravel(), [g.u, g.t]))
    base = _flatten(theta)
    worst = 0.0
    for i in range(base.size):
        h = _fd_step(base, i, fd_step)
        plus = base.copy()
        plus[i] += h
        minus = base.copy()
        minus[i] -= h
        xp = forward(_unflatten(theta, plus), probe_y)[0]
        xm = forward(_unflatten(theta, minus), probe_y)[0]
        # ||a||^2 - ||b||^2 = <a - b, a + b> avoids cancelling two O(1) sums
        fd = float(np.dot(xp - xm, xp + xm - 2.0 * x_label)) / (2.0 * h)
        worst = max(worst, abs(analytic[i] - fd) / (abs(fd) + 1e-12))
    return worst


def save_checkpoint(path, theta: NetParams, seed: int | None = None, extra: dict | None = None):
    """Write ``theta`` to a ``.npz`` archive.

    The archive holds arrays ``W_x``, ``W_y`` and a JSON string ``meta`` with
    keys ``format``, ``version``, ``n``, ``m``, ``L``, ``u``, ``t``, ``lam1``,
    ``lam2``, ``seed`` (plus anything in ``extra``). Floats in ``meta`` are
    stored with ``repr`` precision so loading is exact.
    """
    meta = {"format": CHECKPOINT_FORMAT, "version": CHECKPOINT_VERSION, "n": theta.n,
            "m": theta.m, "L": theta.L, "u": theta.u, "t": theta.t, "lam1": theta.lam1,
            "lam2": theta.lam2, "seed": seed}
    if extra:
        meta.update(extra)
    path = Path(path)
    with path.open("wb") as fh:
        np.savez(fh, W_x=theta.W_x, W_y=theta.W_y, meta=np.array(json.dumps(meta)))


def load_checkpoint(path):
    """Inverse of :func:`save_checkpoint`; returns ``(theta, meta)``."""
    with np.load(Path(path), allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        if meta.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"{path}: not an LPGM-ISTA checkpoint")
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {meta.get('version')}")
        theta = NetParams(W_x=data["W_x"].copy(), W_y=data["W_y"].copy(), u=float(meta["u"]),
                          t=float(meta["t"]), lam1=float(meta["lam1"]),
                          lam2=float(meta["lam2"]), L=int(meta["L"]))
    return theta, meta
