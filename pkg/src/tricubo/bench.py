"""Timing harness for the pipeline steps and the graph baselines."""
from __future__ import annotations

import csv
import gc
import time
import tracemalloc
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .components import bfs_oracle_2d, build_full_graph, label_2d
from .cubulation import compute_cubulation
from .fields import Field2D, threshold_field, to_cubic
from .grid import generate_hex_patch

STEPS = (
    "cubulate",
    "prepare",
    "label-vertex",
    "label-edge",
    "oracle-vertex",
    "oracle-edge",
    "full-graph-build",
)
CSV_HEADER = ("cells", "step", "seconds", "peak_bytes", "reps")
# uniform values in [0, 100) thresholded here give 30% active cells
BENCH_THRESHOLD = 70.0


@dataclass
class BenchRow:
    cells: int
    step: str
    seconds: float
    peak_bytes: int
    reps: int


@dataclass
class BenchReport:
    rows: list[BenchRow] = field(default_factory=list)

    def write_csv(self, sink) -> None:
        writer = csv.writer(sink, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in self.rows:
            writer.writerow([r.cells, r.step, f"{r.seconds:.6g}", r.peak_bytes, r.reps])


def _measure(fn: Callable[[], object], reps: int) -> tuple[float, int]:
    gc.collect()
    t0 = time.perf_counter()
    for _ in range(reps):
        fn()
    seconds = (time.perf_counter() - t0) / reps
    # separate traced run so tracing overhead stays out of the timing
    tracemalloc.start()
    try:
        fn()
        _, peak = tracemalloc.get_traced_memory()
    finally:
        tracemalloc.stop()
    return seconds, peak


def _warm_up() -> None:
    grid = generate_hex_patch(2)
    cub = compute_cubulation(grid, 0)
    cubic = to_cubic(threshold_field(Field2D(np.ones(grid.n_cells)), 0.5), cub)
    for conn in ("vertex", "edge"):
        label_2d(cubic, conn)
        label_2d(cubic, conn, engine="dense")


def run_bench(radii, steps=STEPS, reps: int = 3, seed: int = 0,
              log: Callable[[str], None] | None = None) -> BenchReport:
    """Time every requested step on hex patches of the given radii.

    Times are per-call averages over ``reps`` calls; ``peak_bytes`` is the
    peak traced Python/numpy allocation of one extra call.
    """
    unknown = [s for s in steps if s not in STEPS]
    if unknown:
        raise ValueError(f"unknown bench steps: {', '.join(unknown)}")
    if reps < 1:
        raise ValueError("reps must be >= 1")
    _warm_up()
    report = BenchReport()
    rng = np.random.default_rng(seed)
    for r in radii:
        grid = generate_hex_patch(int(r))
        cub = compute_cubulation(grid, 0)
        values = Field2D(rng.uniform(0.0, 100.0, grid.n_cells))
        binary = threshold_field(values, BENCH_THRESHOLD)
        cubic = to_cubic(binary, cub)
        work = {
            "cubulate": lambda: compute_cubulation(grid, 0),
            "prepare": lambda: to_cubic(threshold_field(values, BENCH_THRESHOLD), cub),
            "label-vertex": lambda: label_2d(cubic, "vertex"),
            "label-edge": lambda: label_2d(cubic, "edge"),
            "oracle-vertex": lambda: bfs_oracle_2d(grid, binary, "vertex"),
            "oracle-edge": lambda: bfs_oracle_2d(grid, binary, "edge"),
            "full-graph-build": lambda: build_full_graph(grid, "vertex"),
        }
        for step in steps:
            seconds, peak = _measure(work[step], reps)
            report.rows.append(BenchRow(grid.n_cells, step, seconds, peak, reps))
            if log:
                log(f"cells={grid.n_cells} step={step} seconds={seconds:.4g}")
    return report
