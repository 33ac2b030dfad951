#!/usr/bin/env python3
"""Throughput of the simulated distributed runtime for the heat and wave kernel presets.

Writes CSV (kernel, shape, sdo, topology, level, timesteps, points, seconds,
gpts_per_s, flag) to stdout or ``--out``. The numbers measure this Python
simulator, not compiled code; they are useful for relative comparisons
between levels and topologies only.

    python scripts/run_bench.py --out bench.csv
"""

from __future__ import annotations

import argparse
import sys

import xstencil.dialects  # noqa: F401
import xstencil.transforms  # noqa: F401
from xstencil.execution.bench import BenchConfig, report_throughput, run_benchmark, to_csv
from xstencil.execution.kernels import KernelPreset


def configs(quick: bool):
    shape2, shape3 = ((64, 64), (16, 16, 16)) if quick else ((256, 256), (64, 64, 64))
    steps = 4 if quick else 16
    for kind in ("heat", "wave"):
        for sdo in (2, 4, 8):
            for dims, shape, grids in ((2, shape2, ("1", "2x2", "2x4")), (3, shape3, ("1", "2x2x2"))):
                for grid in grids:
                    for level in ("dmp", "func"):
                        yield BenchConfig(KernelPreset(kind, dims, sdo, shape, steps), grid, level)


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="-", help="CSV path (default: stdout)")
    ap.add_argument("--quick", action="store_true", help="small shapes and few timesteps")
    ap.add_argument("--repeat", type=int, default=1)
    args = ap.parse_args()
    stats = []
    for cfg in configs(args.quick):
        for _ in range(args.repeat):
            s = run_benchmark(cfg)
            stats.append(s)
            print(f"{cfg.preset.name} {cfg.topology} {cfg.level}: {s.seconds:.3f}s", file=sys.stderr)
    text = to_csv(report_throughput(stats))
    if args.out == "-":
        sys.stdout.write(text)
    else:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
