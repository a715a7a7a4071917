"""Wall-clock comparison of Poisson backends over a sweep of grid sizes."""

from __future__ import annotations

import math
import statistics
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .analytic import two_gaussians
from .backends import CGBackend, JacobiBackend, NetworkBackend, PoissonBackend
from .field import GridSpec

BENCH_COLUMNS = ("backend", "nx", "ny", "nodes", "repetitions", "mean_seconds", "std_seconds",
                 "iterations", "residual")


@dataclass
class BenchRow:
    backend: str
    nx: int
    ny: int
    repetitions: int
    mean_seconds: float
    std_seconds: float
    iterations: float
    residual: float

    @property
    def nodes(self) -> int:
        return self.nx * self.ny

    def csv_row(self) -> str:
        return (f"{self.backend},{self.nx},{self.ny},{self.nodes},{self.repetitions},"
                f"{self.mean_seconds:.6e},{self.std_seconds:.6e},{self.iterations:g},{self.residual:.3e}")


def make_bench_backend(name: str, rtol: float, model=None) -> PoissonBackend:
    if name == "jacobi":
        return JacobiBackend(rtol, max_iter=10_000_000)
    if name == "cg":
        # a cold start each time so every repetition does the same work
        return CGBackend(rtol, warm_start=False)
    if name == "network":
        if model is None:
            raise ValueError("the network backend needs a trained model")
        return NetworkBackend(model, adaptive_scaling=True)
    raise ValueError(f"unknown benchmark backend {name!r}")


def bench_backend(backend: PoissonBackend, name: str, grid: GridSpec, repetitions: int = 20) -> BenchRow:
    """Time ``repetitions`` solves of the two-Gaussian problem on ``grid``."""
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    R = two_gaussians(grid)
    backend(R)  # warm-up: caches, lazy imports, first-touch allocation
    times, iters, resid = [], [], []
    for _ in range(repetitions):
        t0 = time.perf_counter()
        backend(R)
        times.append(time.perf_counter() - t0)
        report = getattr(backend, "last_report", None)
        iters.append(report.iterations if report else 0)
        resid.append(report.residual if report else math.nan)
    std = statistics.stdev(times) if len(times) > 1 else 0.0
    return BenchRow(name, grid.nx, grid.ny, repetitions, statistics.fmean(times), std,
                    statistics.fmean(iters), statistics.fmean(resid))


def run_bench(sizes: Sequence[int], backends: Sequence[str], repetitions: int = 20, rtol: float = 1e-6,
              model=None, L: float = 0.01, log=None) -> list[BenchRow]:
    rows = []
    for name in backends:
        backend = make_bench_backend(name, rtol, model)
        for n in sizes:
            row = bench_backend(backend, name, GridSpec.square(n, L), repetitions)
            rows.append(row)
            if log:
                log(row.csv_row())
    return rows


def write_bench_table(path, rows: Sequence[BenchRow]):
    Path(path).write_text(",".join(BENCH_COLUMNS) + "\n" + "".join(r.csv_row() + "\n" for r in rows))


def monotone_in_nodes(rows: Sequence[BenchRow], backend: str) -> bool:
    sel = sorted((r for r in rows if r.backend == backend), key=lambda r: r.nodes)
    return all(a.mean_seconds < b.mean_seconds for a, b in zip(sel, sel[1:]))
