"""Throughput benchmark: generated kernels on the simulated distributed runtime.

Throughput is reported in GPts/s: core grid points updated per second,
``points * timesteps / seconds / 1e9``. Wall time covers the simulated run
only (not lowering or initialization).
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass

from ..ir.passes import run_pipeline
from .fields import init_fields
from .kernels import KernelPreset, generate_kernel
from .serial import entry_function
from .simulator import LEVELS, lower_to, simulate_distributed

CSV_FIELDS = ("kernel", "shape", "sdo", "topology", "level", "timesteps", "points", "seconds", "gpts_per_s", "flag")


@dataclass(frozen=True)
class BenchConfig:
    preset: KernelPreset
    topology: str = "1"
    level: str = "dmp"

    def __post_init__(self):
        if self.level not in LEVELS:
            raise ValueError(f"unknown level {self.level!r}")


@dataclass(frozen=True)
class RunStats:
    kernel: str
    shape: tuple[int, ...]
    sdo: int
    topology: str
    level: str
    timesteps: int
    points: int  # core points of the global domain
    seconds: float


def run_benchmark(cfg: BenchConfig, seed: int = 0) -> RunStats:
    p = cfg.preset
    m = lower_to(run_pipeline(generate_kernel(p), "propagate-bounds"), cfg.level, cfg.topology)
    init = init_fields(entry_function(m, reference=True), seed)
    t0 = time.perf_counter()
    simulate_distributed(m, init, p.timesteps, seed=seed)
    seconds = time.perf_counter() - t0
    return RunStats(p.kind, p.shape, p.sdo, cfg.topology, cfg.level, p.timesteps, p.points, seconds)


def gpts_per_second(points: int, timesteps: int, seconds: float) -> float:
    if timesteps == 0 or points == 0:
        return 0.0
    if seconds <= 0:
        return float("inf")
    return points * timesteps / seconds / 1e9


def report_throughput(stats: list[RunStats]) -> list[dict]:
    """One CSV row per run; degenerate runs are kept but flagged."""
    rows = []
    for s in stats:
        flag = ""
        if s.timesteps == 0:
            flag = "zero-timesteps"
        elif s.seconds <= 0:
            flag = "zero-time"
        rows.append(
            {
                "kernel": s.kernel,
                "shape": "x".join(map(str, s.shape)),
                "sdo": s.sdo,
                "topology": s.topology,
                "level": s.level,
                "timesteps": s.timesteps,
                "points": s.points,
                "seconds": repr(float(s.seconds)),
                "gpts_per_s": repr(gpts_per_second(s.points, s.timesteps, s.seconds)),
                "flag": flag,
            }
        )
    return rows


def to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()
