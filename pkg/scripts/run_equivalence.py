#!/usr/bin/env python3
"""Distributed-vs-serial equivalence sweep over kernels, topologies and lowering levels.

Prints one line per run and exits nonzero if any run differs bitwise from
the serial interpreter.

    python scripts/run_equivalence.py --seeds 3
"""

from __future__ import annotations

import argparse
import sys
import time

import xstencil.dialects  # noqa: F401
import xstencil.transforms  # noqa: F401
from xstencil.execution.fields import init_fields
from xstencil.execution.kernels import KernelPreset, generate_kernel
from xstencil.execution.serial import entry_function, run_serial_stencil
from xstencil.execution.simulator import LEVELS, compare_fields, lower_to, simulate_distributed
from xstencil.ir import run_pipeline

SWEEP = [(KernelPreset("heat", 2, sdo, (64, 64), 16), grid) for sdo in (2, 4, 8)
         for grid in ("1x1", "2x2", "1x4", "4x1", "2x4")]
SWEEP += [(KernelPreset("wave", 3, 4, (32, 32, 32), 8), "2x2x2"),
          (KernelPreset("heat", 3, 2, (32, 32, 32), 8, "f32"), "2x2x2"),
          (KernelPreset("wave", 2, 8, (64, 64), 16), "2x2")]


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=1, help="rank-interleaving seeds per run")
    args = ap.parse_args()
    failures = 0
    t_all = time.perf_counter()
    print(f"{'kernel':<16} {'elem':<4} {'grid':<6} {'level':<5} {'seed':>4} {'steps':>8} {'time[s]':>8}  result")
    for preset, grid in SWEEP:
        base = run_pipeline(generate_kernel(preset), "propagate-bounds")
        init = init_fields(entry_function(base), 0)
        want = run_serial_stencil(base, init, preset.timesteps)
        for level in LEVELS:
            m = lower_to(base, level, grid)
            for seed in range(args.seeds):
                t0 = time.perf_counter()
                sim = simulate_distributed(m, init, preset.timesteps, seed=seed)
                dt = time.perf_counter() - t0
                rep = compare_fields(sim.fields, want)
                failures += not rep.equal
                verdict = "bitwise equal" if rep.equal else f"DIFFERENT ({rep.details[0]})"
                print(f"{preset.name:<16} {preset.element:<4} {grid:<6} {level:<5} {seed:>4} {sim.steps:>8} {dt:>8.3f}  {verdict}")
    print(f"total {time.perf_counter() - t_all:.1f}s, {failures} mismatching run(s)")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
