"""Fast-vs-naive timing sweep with built-in agreement checks.

For each package width in the sweep, times the four operations that have a
closed-form octahedral route against their general-constellation versions,
verifies the two routes agree on every trial, and reports the smallest width
where the fast route's median time wins.  Whether that crossover exists at
small widths is host-dependent: generic matrix products are heavily
optimized, so the structured route tends to win only past a few hundred
inputs.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .constellation import build_octahedral
from .kernel import KernelParams
from .package import Package

AGREEMENT_TOL = 1e-8
OPS = ("squared_distances", "coeffs_from_values", "cardinal_basis", "backward")


@dataclass
class BenchRow:
    op: str
    n: int
    r: int
    fast_seconds: float
    naive_seconds: float
    max_rel_err: float


def _median_time(fn, repeats: int) -> float:
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def _rel_err(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(float(np.abs(b).max()), 1e-30)
    return float(np.abs(a - b).max()) / scale


def run_bench(widths=(16, 32, 64, 128, 256, 512, 1024, 2048), batch_rows=(64, 256),
              n_out: int = 8, repeats: int = 5, seed: int = 0,
              max_elements: int = 200_000_000) -> list[BenchRow]:
    """Time fast vs naive for every (op, n, r); verify agreement on each trial."""
    kp = KernelParams()
    rng = np.random.default_rng(seed)
    rows: list[BenchRow] = []
    for n in widths:
        k = 2 * n + 1
        constellation = build_octahedral(n)
        values = rng.uniform(-1, 1, (k, n_out))
        pkg = Package(constellation, kp, values)
        pkg.u_matrix()  # warm the naive route's cached Gram inverse
        for r in batch_rows:
            if r * k > max_elements:
                continue
            x = rng.uniform(-1, 1, (r, n))
            out, state = pkg.forward(x)
            g_next = rng.standard_normal((r, n_out))

            pairs = {
                "squared_distances": (lambda: pkg.squared_distances(x, path="fast"),
                                      lambda: pkg.squared_distances(x, path="naive")),
                "coeffs_from_values": (lambda: pkg.coeffs_from_values(values, path="fast"),
                                       lambda: pkg.coeffs_from_values(values, path="naive")),
                "cardinal_basis": (lambda: pkg.cardinal_basis(_fresh(state), path="fast"),
                                   lambda: pkg.cardinal_basis(_fresh(state), path="naive")),
                "backward": (lambda: pkg.backward(g_next, state, path="fast"),
                             lambda: pkg.backward(g_next, state, path="naive")),
            }
            for op, (fast_fn, naive_fn) in pairs.items():
                err = _rel_err(fast_fn(), naive_fn())
                if err > AGREEMENT_TOL:
                    raise AssertionError(f"{op} n={n} r={r}: routes disagree, rel err {err:.3e}")
                rows.append(BenchRow(op, n, r, _median_time(fast_fn, repeats),
                                     _median_time(naive_fn, repeats), err))
    return rows


def _fresh(state):
    state.basis = None  # force recomputation instead of returning the cache
    return state


def crossover_widths(rows: list[BenchRow]) -> dict[str, int | None]:
    """Per op: smallest width where the fast route's median beats the naive one."""
    out: dict[str, int | None] = {}
    for op in OPS:
        wins = sorted(row.n for row in rows
                      if row.op == op and row.fast_seconds < row.naive_seconds)
        out[op] = wins[0] if wins else None
    return out


def write_csv(rows: list[BenchRow], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["op", "n", "r", "fast_seconds", "naive_seconds", "max_rel_err"])
        for row in rows:
            w.writerow([row.op, row.n, row.r, f"{row.fast_seconds:.6e}",
                        f"{row.naive_seconds:.6e}", f"{row.max_rel_err:.3e}"])
