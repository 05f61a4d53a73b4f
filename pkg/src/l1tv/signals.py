"""Synthetic sparse / gradient-sparse signals, error metrics and CSV I/O."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .linalg import make_rng

__all__ = [
    "Signal",
    "PlacementError",
    "synth_signal",
    "sparsity_levels",
    "rel_err",
    "add_noise",
    "read_csv",
    "write_csv",
]

BLOCK_SIZE = 10


class PlacementError(ValueError):
    """Blocks and spikes cannot be placed disjointly in the signal."""


@dataclass(frozen=True)
class Signal:
    values: np.ndarray
    name: str = "x"
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return self.values.size


def synth_signal(n: int, s_r: int, b: int, seed: int, min_gap: int = 1,
                 block_size: int = BLOCK_SIZE) -> Signal:
    """Piecewise-constant test signal with exactly ``s_r`` nonzeros.

    ``b`` constant blocks of length ``block_size`` and ``s_r - block_size*b``
    single spikes get one standard-normal amplitude each. Pieces are laid out
    in random order with at least ``min_gap`` zeros between neighbours (gap
    sizes drawn uniformly over all admissible layouts), and the result is
    scaled so that ``max|x| = 1``.
    """
    if n < 1 or b < 0 or s_r < 0:
        raise ValueError("n must be positive and s_r, b nonnegative")
    n_spikes = s_r - block_size * b
    if n_spikes < 0 or s_r > n:
        raise ValueError(f"need {block_size}*b <= s_r <= n, got n={n}, s_r={s_r}, b={b}")
    rng = make_rng(seed)
    pieces = np.array([block_size] * b + [1] * n_spikes, dtype=int)
    k = pieces.size
    free = n - s_r - min_gap * max(k - 1, 0)
    if free < 0:
        raise PlacementError(
            f"{b} blocks and {n_spikes} spikes need at least {n - free} samples, n = {n}")
    x = np.zeros(n)
    if k:
        rng.shuffle(pieces)
        # uniform composition of the free zeros into k + 1 slots
        cuts = np.sort(rng.choice(free + k, size=k, replace=False))
        extra = np.diff(np.concatenate(([-1], cuts))) - 1
        amps = rng.standard_normal(k)
        pos = 0
        for i in range(k):
            pos += extra[i] + (min_gap if i > 0 else 0)
            x[pos:pos + pieces[i]] = amps[i]
            pos += pieces[i]
        peak = np.max(np.abs(x))
        if peak > 0:
            x /= peak
    meta = {"seed": seed, "s_r": s_r, "b": b, "min_gap": min_gap}
    return Signal(values=x, name=f"synth_{seed}", meta=meta)


def sparsity_levels(x, tol: float = 1e-12) -> tuple[int, int]:
    """``(s_r, s_g)``: entries with ``|x_i| > tol`` and jumps with ``|x_{i+1} - x_i| > tol``."""
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    v = x.values if isinstance(x, Signal) else np.asarray(x, dtype=float)
    s_r = int(np.count_nonzero(np.abs(v) > tol))
    s_g = int(np.count_nonzero(np.abs(np.diff(v)) > tol)) if v.size > 1 else 0
    return s_r, s_g


def rel_err(x_hat, x_true) -> float:
    """``||x_hat - x_true|| / ||x_true||``."""
    x_hat = np.asarray(x_hat, dtype=float)
    x_true = np.asarray(x_true, dtype=float)
    ref = np.linalg.norm(x_true)
    if ref == 0:
        raise ValueError("relative error undefined for a zero reference")
    return float(np.linalg.norm(x_hat - x_true) / ref)


def add_noise(y, sigma: float, seed: int) -> np.ndarray:
    """``y + sigma * g`` with seeded standard-normal ``g``."""
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    y = np.asarray(y, dtype=float)
    if sigma == 0:
        return y.copy()
    return y + sigma * make_rng(seed).standard_normal(y.shape)


def write_csv(path, signals) -> None:
    """Write signals column-wise with a header row of names.

    ``path`` is a file path or an open text stream. Values use 17 significant
    digits so doubles round-trip exactly. Shorter signals leave trailing
    cells empty. No signals gives an empty file.
    """
    signals = list(signals)
    if hasattr(path, "write"):
        _write_rows(path, signals)
        return
    with Path(path).open("w", newline="") as fh:
        _write_rows(fh, signals)


def _write_rows(fh, signals):
    if not signals:
        return
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow([s.name for s in signals])
    length = max(len(s) for s in signals)
    for i in range(length):
        writer.writerow([format(s.values[i], ".17g") if i < len(s) else ""
                         for s in signals])


def read_csv(path) -> list[Signal]:
    """Inverse of :func:`write_csv`.

    Lines starting with ``#`` are skipped. Raises ``ValueError`` naming the
    line number of ragged or non-numeric rows.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [(i, row) for i, row in enumerate(csv.reader(fh), start=1)
                if row and not row[0].startswith("#")]
    if not rows:
        return []
    _, header = rows[0]
    cols: list[list[float]] = [[] for _ in header]
    ended = [False] * len(header)
    for lineno, row in rows[1:]:
        if len(row) != len(header):
            raise ValueError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        for j, cell in enumerate(row):
            cell = cell.strip()
            if cell == "":
                ended[j] = True
                continue
            if ended[j]:
                raise ValueError(f"{path}:{lineno}: value after end of column {header[j]!r}")
            try:
                cols[j].append(float(cell))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: cannot parse {cell!r}") from None
    return [Signal(values=np.array(c), name=h) for h, c in zip(header, cols)]
