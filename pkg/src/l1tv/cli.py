"""Command-line front end: bound tables, recovery experiments, training and checks.

Every command writes a header before its data. For CSV output the header is
a single ``# `` line holding JSON with the command name, the fully resolved
configuration and the names of columns that are not reproducible (wall-clock
timings). JSON output carries the same information under ``"header"``.
Re-running a command with the configuration from a header reproduces the
output byte for byte, apart from the listed timing columns.

Exit status: 0 on success, 1 when an embedded check fails, 2 on a
configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import (BoundQuery, construction_bound, mc_width_upper, phi, phi_l1,
                     phi_l1_sharp, phi_tv, sample_bound)
from .linalg import gaussian_matrix, make_rng
from .prox import tv_denoise, tv_prox_kkt_residual
from .signals import (Signal, add_noise, read_csv, rel_err, sparsity_levels, synth_signal,
                      write_csv)
from .solvers import (AdmmConfig, RegParams, SensingProblem, StepParams, admm_constrained,
                      fista_reference, pgm_ista)
from .unrolled import (ScreeningError, TrainConfig, forward_batch, grad_check, init_params,
                       load_checkpoint, save_checkpoint, train)

log = logging.getLogger(__name__)

TABLE1_N = 1000
TABLE1_PAIRS = ((50, 25), (50, 50), (100, 50), (100, 100), (150, 75), (150, 150))
TABLE1_RATIOS = (1.0, 0.1)


class ConfigError(ValueError):
    """Invalid command configuration (exit status 2)."""


# ----------------------------------------------------------------- output


def _header(args, nondeterministic=()):
    cfg = {k: v for k, v in sorted(vars(args).items())
           if k not in ("func", "config", "log_level")}
    return {"command": args.command, "version": __version__, "config": cfg,
            "nondeterministic": list(nondeterministic)}


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _open_out(path):
    if path in (None, "-"):
        return sys.stdout, False
    return open(path, "w", newline=""), True


def emit_table(args, columns, rows, nondeterministic=()):
    """Write ``rows`` (sequences matching ``columns``) as CSV or JSON."""
    head = _header(args, nondeterministic)
    fh, close = _open_out(args.out)
    try:
        if args.format == "json":
            records = [{c: (v.item() if isinstance(v, np.generic) else v)
                        for c, v in zip(columns, row)} for row in rows]
            json.dump({"header": head, "rows": records}, fh, indent=2)
            fh.write("\n")
        else:
            fh.write("# " + json.dumps(head) + "\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(columns)
            for row in rows:
                writer.writerow([_fmt(v) for v in row])
    finally:
        if close:
            fh.close()


def emit_report(args, checks):
    """Write a JSON verification report; returns the exit status."""
    ok = all(c["passed"] for c in checks)
    report = {"header": _header(args, ("seconds",)), "passed": ok, "checks": checks}
    fh, close = _open_out(args.out)
    try:
        json.dump(report, fh, indent=2, default=_json_default)
        fh.write("\n")
    finally:
        if close:
            fh.close()
    return 0 if ok else 1


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"cannot serialize {type(o).__name__}")


# ---------------------------------------------------------------- helpers


def _floats(text):
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text):
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _positive(name, value):
    if value is None or value <= 0:
        raise ConfigError(f"{name} must be positive, got {value}")


def _signal_seed(seed, i):
    return (seed, 0, i)


def _matrix_seed(seed, i, m):
    return (seed, 1, i, m)


# --------------------------------------------------------------- commands


def cmd_bounds_table(args):
    rows = []
    if args.table1:
        cols = ["lam1_over_lam2", "n", "s_r", "s_g", "phi_l1", "phi_l1_sharp", "phi_tv",
                "phi", "phi_lam2sq_cross"]
        for ratio in TABLE1_RATIOS:
            for s_r, s_g in TABLE1_PAIRS:
                q = BoundQuery(TABLE1_N, s_r, s_g, lam1=ratio, lam2=1.0)
                rows.append([ratio, TABLE1_N, s_r, s_g, phi_l1(TABLE1_N, s_r),
                             phi_l1_sharp(TABLE1_N, s_r), phi_tv(TABLE1_N, s_g), phi(q),
                             phi(q, cross_term="tabulated")])
        emit_table(args, cols, rows)
        return 0
    cols = ["lam1_over_lam2", "n", "s_r", "s_g", "phi_l1", "phi_l1_sharp", "phi_tv", "phi",
            "m_bound"]
    for ratio in args.ratio:
        for s_r in args.sr:
            for s_g in args.sg:
                try:
                    q = BoundQuery(args.n, s_r, s_g, lam1=ratio, lam2=1.0, t=args.t)
                    value = phi(q)
                except ValueError as exc:
                    raise ConfigError(f"invalid grid point (n={args.n}, s_r={s_r}, "
                                      f"s_g={s_g}, ratio={ratio}): {exc}") from None
                sharp = phi_l1_sharp(args.n, s_r) if 0 < s_r < args.n else math.nan
                tv = phi_tv(args.n, s_g) if s_g < args.n - 1 else math.nan
                rows.append([ratio, args.n, s_r, s_g, phi_l1(args.n, s_r), sharp, tv, value,
                             sample_bound(max(value, 0.0), args.t)])
    emit_table(args, cols, rows)
    return 0


def cmd_phase(args):
    _positive("trials", args.trials)
    _positive("n", args.n)
    if any(not 0 < r <= 1 for r in args.ratios):
        raise ConfigError("sampling ratios must lie in (0, 1]")
    reg = RegParams(args.lam1, args.lam2)
    try:
        signals = [synth_signal(args.n, args.sr, args.b, _signal_seed(args.seed, i),
                                block_size=args.block_size).values
                   for i in range(args.trials)]
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    bound_m = 0
    for x in signals:
        s_r, s_g = sparsity_levels(x)
        q = BoundQuery(args.n, s_r, s_g, lam1=args.lam1, lam2=args.lam2, t=args.t)
        bound_m = max(bound_m, sample_bound(max(phi(q), 0.0), args.t))
    cfg = AdmmConfig(record=False)
    rows = []
    for ratio in args.ratios:
        m = max(1, int(round(ratio * args.n)))
        wins = 0
        errs = []
        secs = 0.0
        for i, x in enumerate(signals):
            A = gaussian_matrix(m, args.n, _matrix_seed(args.seed, i, m))
            tic = time.perf_counter()
            res = admm_constrained(A, A @ x, reg, cfg)
            secs += time.perf_counter() - tic
            err = rel_err(res.x, x) if args.metric == "rel" else float(np.linalg.norm(res.x - x))
            errs.append(err)
            wins += err < args.success_tol
        rows.append([ratio, m, wins, args.trials, wins / args.trials, float(np.mean(errs)),
                     bound_m, secs])
    emit_table(args, ["ratio", "m", "successes", "trials", "success_fraction", "mean_error",
                      "sample_bound_m", "seconds"], rows, ("seconds",))
    return 0


def cmd_ut_sweep(args):
    _positive("iters", args.iters)
    if any(not 0 < f < 1 for f in args.u_fracs):
        raise ConfigError("u fractions must lie in (0, 1): u = frac * 2/||A||^2")
    if any(not 0 < f <= 1 for f in args.t_fracs):
        raise ConfigError("t fractions must lie in (0, 1]: t = frac * u")
    try:
        x = synth_signal(args.n, args.sr, args.b, _signal_seed(args.seed, 0),
                         block_size=args.block_size).values
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    A = gaussian_matrix(args.m, args.n, _matrix_seed(args.seed, 0, args.m))
    p = SensingProblem(A, A @ x)
    reg = RegParams(args.lam1, args.lam2)
    f_star = fista_reference(p, reg).objective_history[-1]
    runs = []
    for uf in args.u_fracs:
        for tf in args.t_fracs:
            u = uf * 2.0 / p.spectral_norm_sq
            s = StepParams(u, tf * u)
            tic = time.perf_counter()
            res = pgm_ista(p, reg, s, max_iter=args.iters, tol=0.0)
            runs.append((uf, tf, s, np.array(res.objective_history),
                         time.perf_counter() - tic))
    # the reference is only near-optimal; the best value seen anywhere keeps gaps >= 0
    f_star = min(f_star, min(float(h.min()) for *_, h, _ in runs))
    rows = []
    for uf, tf, s, hist, secs in runs:
        gaps = hist - f_star
        below = np.flatnonzero(gaps < args.threshold)
        rows.append([uf, tf, s.u, s.t, float(gaps[-1]), int(below[0]) if below.size else -1,
                     secs])
    emit_table(args, ["u_frac", "t_frac", "u", "t", "final_gap", "first_iter_below",
                      "seconds"], rows, ("seconds",))
    return 0


def make_dataset(n, m, sr, b, block_size, count, seed):
    """Seeded ``(A, Y, X)``; rows of ``X`` are signals and ``Y = X A^T``."""
    A = gaussian_matrix(m, n, _matrix_seed(seed, 0, m))
    X = np.array([synth_signal(n, sr, b, _signal_seed(seed, i), block_size=block_size).values
                  for i in range(count)])
    return A, X @ A.T, X


def _dataset_meta(args):
    return {"n": args.n, "m": args.m, "sr": args.sr, "b": args.b,
            "block_size": args.block_size, "n_train": args.n_train, "n_test": args.n_test,
            "data_seed": args.seed}


def _mean_rel_err(X_hat, X):
    return float(np.mean(np.linalg.norm(X_hat - X, axis=1) / np.linalg.norm(X, axis=1)))


def _eval_rows(theta_by_L, A, Y_test, X_test, reg):
    p = SensingProblem(A, Y_test[0])
    forward_batch(theta_by_L[0][1], Y_test[:1])  # keep JIT loading out of the timings
    rows = []
    for L, theta in theta_by_L:
        tic = time.perf_counter()
        X_hat, _ = forward_batch(theta, Y_test)
        secs = time.perf_counter() - tic
        rows.append(["LPGM-ISTA", L, _mean_rel_err(X_hat, X_test), secs])
        base = init_params(p, reg, L)
        tic = time.perf_counter()
        X_hat, _ = forward_batch(base, Y_test)
        secs = time.perf_counter() - tic
        rows.append(["PGM-ISTA", L, _mean_rel_err(X_hat, X_test), secs])
    return rows


def cmd_train(args):
    for name in ("n_train", "n_test", "epochs", "batch_size"):
        _positive(name, getattr(args, name))
    if any(L < 1 for L in args.layers):
        raise ConfigError("layer counts must be at least 1")
    try:
        A, Y, X = make_dataset(args.n, args.m, args.sr, args.b, args.block_size,
                               args.n_train + args.n_test, args.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    reg = RegParams(args.lam1, args.lam2)
    p = SensingProblem(A, Y[0])
    ckpt_dir = Path(args.checkpoint_dir)
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    trained = []
    for L in args.layers:
        cfg = TrainConfig(L=L, lr=args.lr, batch_size=args.batch_size, epochs=args.epochs,
                          val_fraction=args.val_fraction, seed=args.seed)
        res = train(p, reg, (Y[:args.n_train], X[:args.n_train]), cfg)
        log.info("L=%d: best epoch %d, val loss %.4g -> %.4g", L, res.best_epoch,
                 res.init_val_loss, min(res.val_loss))
        save_checkpoint(ckpt_dir / f"lpgm_L{L}.npz", res.theta, seed=args.seed,
                        extra={"dataset": _dataset_meta(args)})
        trained.append((L, res.theta))
    rows = _eval_rows(trained, A, Y[args.n_train:], X[args.n_train:], reg)
    emit_table(args, ["method", "L", "mean_rel_err", "seconds"], rows, ("seconds",))
    return 0


def cmd_eval(args):
    if not args.checkpoints:
        raise ConfigError("no checkpoints given")
    loaded = []
    dataset = None
    for path in args.checkpoints:
        try:
            theta, meta = load_checkpoint(path)
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError(f"cannot load checkpoint {path}: {exc}") from None
        ds = meta.get("dataset")
        if ds is None:
            raise ConfigError(f"{path}: checkpoint has no dataset description")
        if dataset is not None and ds != dataset:
            raise ConfigError("checkpoints were trained on different datasets")
        dataset = ds
        loaded.append((theta.L, theta))
    A, Y, X = make_dataset(dataset["n"], dataset["m"], dataset["sr"], dataset["b"],
                           dataset["block_size"], dataset["n_train"] + dataset["n_test"],
                           dataset["data_seed"])
    first = loaded[0][1]
    reg = RegParams(first.lam1, first.lam2)
    nt = dataset["n_train"]
    rows = _eval_rows(loaded, A, Y[nt:], X[nt:], reg)
    emit_table(args, ["method", "L", "mean_rel_err", "seconds"], rows, ("seconds",))
    return 0


def cmd_verify(args):
    _positive("trials", args.trials)
    _positive("grad_instances", args.grad_instances)
    checks = []
    rng = make_rng((args.seed, 2))

    tic = time.perf_counter()
    worst = 0.0
    for _ in range(args.trials):
        n = int(rng.integers(1, args.max_n + 1))
        x = rng.standard_normal(n) * rng.uniform(0.1, 10.0)
        mu = float(rng.uniform(0.0, 3.0))
        worst = max(worst, tv_prox_kkt_residual(x, mu, tv_denoise(x, mu)))
    checks.append({"name": "tv_prox_kkt", "trials": args.trials, "max_residual": worst,
                   "tolerance": args.kkt_tol, "passed": worst <= args.kkt_tol,
                   "seconds": time.perf_counter() - tic})

    tic = time.perf_counter()
    n, m = args.grad_n, args.grad_m
    worst = 0.0
    done = 0
    skipped = 0
    sign = -1.0 if args.inject_fault == "jacobian-sign" else 1.0
    layers = (1, 2, 4)
    i = 0
    while done < args.grad_instances and i < 10 * args.grad_instances:
        L = layers[i % len(layers)]
        x = synth_signal(n, max(1, n // 3), 0, (args.seed, 3, i)).values
        A = gaussian_matrix(m, n, (args.seed, 4, i))
        p = SensingProblem(A, A @ x)
        theta = init_params(p, RegParams(args.lam1, args.lam2), L)
        label = x + 0.1 * make_rng((args.seed, 5, i)).standard_normal(n)
        i += 1
        try:
            err = grad_check(theta, p.y, label, fd_step=args.fd_step, seed=i,
                             _tv_sign=sign)
        except ScreeningError:
            skipped += 1
            continue
        worst = max(worst, err)
        done += 1
    checks.append({"name": "grad_check", "instances": done, "unscreened": skipped,
                   "max_rel_err": worst, "tolerance": args.grad_tol,
                   "passed": done == args.grad_instances and worst < args.grad_tol,
                   "seconds": time.perf_counter() - tic})
    return emit_report(args, checks)


def cmd_width_mc(args):
    _positive("trials", args.trials)
    if args.trials < 2:
        raise ConfigError("trials must be at least 2 for a standard error")
    checks = []
    for j, (l1, l2) in enumerate(args.lam_pairs):
        try:
            x = synth_signal(args.n, args.sr, args.b, _signal_seed(args.seed, j),
                             block_size=args.block_size).values
            s_r, s_g = sparsity_levels(x)
            bound = phi(BoundQuery(args.n, s_r, s_g, lam1=l1, lam2=l2))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        tic = time.perf_counter()
        est = mc_width_upper(x, l1, l2, args.trials, (args.seed, 7, j))
        checks.append({"name": "mc_width", "lam1": l1, "lam2": l2, "n": args.n, "s_r": s_r,
                       "s_g": s_g, "trials": args.trials, "mean": est.mean,
                       "stderr": est.stderr, "phi": bound,
                       "construction_bound": construction_bound(x, l1, l2),
                       "passed": est.mean <= bound + 3.0 * est.stderr,
                       "seconds": time.perf_counter() - tic})
    return emit_report(args, checks)


def cmd_solve(args):
    try:
        signals = read_csv(args.input)
    except (OSError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    if not signals:
        raise ConfigError(f"{args.input}: no signals")
    if args.column is None:
        sig = signals[0]
    else:
        matches = [s for s in signals if s.name == args.column]
        if not matches:
            raise ConfigError(f"{args.input}: no column named {args.column!r}")
        sig = matches[0]
    x = sig.values
    n = x.size
    m = args.m if args.m is not None else max(1, int(round(args.ratio * n)))
    A = gaussian_matrix(m, n, _matrix_seed(args.seed, 0, m))
    y = add_noise(A @ x, args.sigma, (args.seed, 6))
    reg = RegParams(args.lam1, args.lam2)
    tic = time.perf_counter()
    if args.method == "admm":
        res = admm_constrained(A, y, reg, AdmmConfig(record=False))
    elif args.method == "fista":
        res = fista_reference(SensingProblem(A, y), reg, tol=args.tol)
    else:
        p = SensingProblem(A, y)
        u = args.u_frac * 2.0 / p.spectral_norm_sq
        res = pgm_ista(p, reg, StepParams(u, args.t_frac * u), max_iter=args.iters,
                       tol=args.tol, record=False)
    secs = time.perf_counter() - tic
    err = rel_err(res.x, x) if np.any(x) else float(np.linalg.norm(res.x))
    log.info("rel_err %.3g after %d iterations (%.3f s)", err, res.iterations, secs)
    head = _header(args)
    head["result"] = {"m": m, "rel_err": err, "iterations": res.iterations,
                      "converged": res.converged}
    fh, close = _open_out(args.out)
    try:
        fh.write("# " + json.dumps(head) + "\n")
        write_csv(fh, [Signal(x, name=sig.name), Signal(res.x, name="x_hat")])
    finally:
        if close:
            fh.close()
    return 0


def cmd_gen(args):
    _positive("count", args.count)
    try:
        signals = [synth_signal(args.n, args.sr, args.b, _signal_seed(args.seed, i),
                                block_size=args.block_size)
                   for i in range(args.count)]
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    signals = [Signal(s.values, name=f"x{i}", meta=s.meta) for i, s in enumerate(signals)]
    if args.format == "json":
        emit_table(args, ["name", "values"], [[s.name, s.values.tolist()] for s in signals])
        return 0
    fh, close = _open_out(args.out)
    try:
        fh.write("# " + json.dumps(_header(args)) + "\n")
        write_csv(fh, signals)
    finally:
        if close:
            fh.close()
    return 0


# ----------------------------------------------------------------- parser


def _common(sp, default_format="csv"):
    sp.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    sp.add_argument("--out", default="-", help="output file, '-' for stdout")
    sp.add_argument("--format", choices=("csv", "json"), default=default_format)
    sp.add_argument("--config", help="JSON file of option defaults (keys as option names)")
    sp.add_argument("--log-level", default="WARNING")


def _signal_opts(sp, n, sr, b):
    sp.add_argument("--n", type=int, default=n, help="signal length")
    sp.add_argument("--sr", type=int, default=sr, help="number of nonzeros")
    sp.add_argument("--b", type=int, default=b, help="number of constant blocks")
    sp.add_argument("--block-size", type=int, default=10)


def build_parser():
    parser = argparse.ArgumentParser(prog="l1tv", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("bounds-table", help="statistical-dimension bounds over a grid")
    _common(sp)
    sp.add_argument("--table1", action="store_true",
                    help="n = 1000 comparison layout: 6 (s_r, s_g) pairs x ratios 1, 0.1")
    sp.add_argument("--n", type=int, default=1000)
    sp.add_argument("--sr", type=_ints, default=[50])
    sp.add_argument("--sg", type=_ints, default=[25])
    sp.add_argument("--ratio", type=_floats, default=[1.0], help="lam1/lam2 values")
    sp.add_argument("--t", type=float, default=1.0, help="confidence parameter of m_bound")
    sp.set_defaults(func=cmd_bounds_table)

    sp = sub.add_parser("phase", help="ADMM exact-recovery success rate vs sampling ratio")
    _common(sp)
    _signal_opts(sp, 200, 40, 3)
    sp.add_argument("--ratios", type=_floats, default=[0.1, 0.2, 0.3, 0.4, 0.5, 0.6])
    sp.add_argument("--trials", type=int, default=20)
    sp.add_argument("--lam1", type=float, default=1e-3)
    sp.add_argument("--lam2", type=float, default=1.0)
    sp.add_argument("--success-tol", type=float, default=1e-3)
    sp.add_argument("--metric", choices=("rel", "abs"), default="rel")
    sp.add_argument("--t", type=float, default=1.0)
    sp.set_defaults(func=cmd_phase)

    sp = sub.add_parser("ut-sweep", help="PGM-ISTA objective gap over a (u, t) grid")
    _common(sp)
    _signal_opts(sp, 64, 16, 1)
    sp.add_argument("--m", type=int, default=32)
    sp.add_argument("--lam1", type=float, default=0.01)
    sp.add_argument("--lam2", type=float, default=0.01)
    sp.add_argument("--u-fracs", type=_floats, default=[0.1, 0.3, 0.5, 0.7, 0.9],
                    help="u as fractions of 2/||A||^2")
    sp.add_argument("--t-fracs", type=_floats, default=[0.25, 0.5, 0.75, 1.0],
                    help="t as fractions of u")
    sp.add_argument("--iters", type=int, default=1000)
    sp.add_argument("--threshold", type=float, default=0.01)
    sp.set_defaults(func=cmd_ut_sweep)

    sp = sub.add_parser("train", help="train LPGM-ISTA for each depth and evaluate")
    _common(sp)
    _signal_opts(sp, 64, 20, 2)
    sp.add_argument("--m", type=int, default=32)
    sp.add_argument("--n-train", type=int, default=500)
    sp.add_argument("--n-test", type=int, default=100)
    sp.add_argument("--layers", type=_ints, default=[2, 4, 6])
    sp.add_argument("--lam1", type=float, default=0.01)
    sp.add_argument("--lam2", type=float, default=0.01)
    sp.add_argument("--epochs", type=int, default=200)
    sp.add_argument("--lr", type=float, default=1e-3)
    sp.add_argument("--batch-size", type=int, default=32)
    sp.add_argument("--val-fraction", type=float, default=0.2)
    sp.add_argument("--checkpoint-dir", default="checkpoints")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("eval", help="evaluate saved LPGM-ISTA checkpoints on their test split")
    _common(sp)
    sp.add_argument("checkpoints", nargs="*")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("verify", help="JSON report of prox KKT and gradient checks")
    _common(sp, "json")
    sp.add_argument("--trials", type=int, default=1000)
    sp.add_argument("--max-n", type=int, default=512)
    sp.add_argument("--kkt-tol", type=float, default=1e-8)
    sp.add_argument("--grad-instances", type=int, default=20)
    sp.add_argument("--grad-n", type=int, default=12)
    sp.add_argument("--grad-m", type=int, default=8)
    sp.add_argument("--lam1", type=float, default=0.05)
    sp.add_argument("--lam2", type=float, default=0.05)
    sp.add_argument("--fd-step", type=float, default=1e-6)
    sp.add_argument("--grad-tol", type=float, default=1e-5)
    sp.add_argument("--inject-fault", choices=("none", "jacobian-sign"), default="none",
                    help=argparse.SUPPRESS)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("width-mc", help="Monte-Carlo width estimate against the closed-form bound")
    _common(sp, "json")
    _signal_opts(sp, 100, 20, 4)
    sp.set_defaults(block_size=5)
    sp.add_argument("--trials", type=int, default=2000)
    sp.add_argument("--lam-pairs", type=_lam_pairs,
                    default=[(1.0, 1.0), (0.1, 1.0), (0.01, 1.0), (1.0, 0.1), (0.5, 1.0)],
                    help="semicolon-separated lam1,lam2 pairs, e.g. '1,1;0.1,1'")
    sp.set_defaults(func=cmd_width_mc)

    sp = sub.add_parser("solve", help="recover a CSV signal from seeded Gaussian measurements")
    _common(sp)
    sp.add_argument("--input", required=True)
    sp.add_argument("--column")
    sp.add_argument("--m", type=int)
    sp.add_argument("--ratio", type=float, default=0.5)
    sp.add_argument("--sigma", type=float, default=0.0)
    sp.add_argument("--lam1", type=float, default=0.01)
    sp.add_argument("--lam2", type=float, default=0.05)
    sp.add_argument("--method", choices=("admm", "pgm", "fista"), default="fista")
    sp.add_argument("--u-frac", type=float, default=0.5)
    sp.add_argument("--t-frac", type=float, default=0.9)
    sp.add_argument("--iters", type=int, default=5000)
    sp.add_argument("--tol", type=float, default=1e-10,
                    help="relative-change stopping tolerance for pgm and fista")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("gen", help="dump seeded synthetic signals")
    _common(sp)
    _signal_opts(sp, 200, 40, 3)
    sp.add_argument("--count", type=int, default=1)
    sp.set_defaults(func=cmd_gen)
    return parser


def _lam_pairs(text):
    pairs = []
    for chunk in str(text).split(";"):
        if not chunk.strip():
            continue
        vals = _floats(chunk)
        if len(vals) != 2:
            raise argparse.ArgumentTypeError(f"expected 'lam1,lam2', got {chunk!r}")
        pairs.append(tuple(vals))
    return pairs


def _apply_config(parser, argv):
    """Reparse with defaults taken from ``--config`` (command-line flags still win)."""
    args = parser.parse_args(argv)
    if not getattr(args, "config", None):
        return args
    try:
        with open(args.config) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {args.config}: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config file must hold a JSON object")
    cfg = cfg.get("config", cfg)  # accept a saved output header as well
    known = set(vars(args))
    unknown = [k for k in cfg if k.replace("-", "_") not in known]
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    sub = parser._subparsers._group_actions[0].choices[args.command]
    list_opts = {a.dest for a in sub._actions if isinstance(a.default, list)}
    defaults = {}
    for key, value in cfg.items():
        key = key.replace("-", "_")
        if key in list_opts and not isinstance(value, list):
            value = [value]
        if key == "lam_pairs":
            value = [tuple(v) for v in value]
        defaults[key] = value
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except ConfigError as exc:
        print(f"l1tv: config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
