#!/usr/bin/env python3
"""Print one kernel at every stage of the lowering chain, with op counts.

    python scripts/show_lowering.py --kind heat --dims 2 --sdo 2 --shape 16x16 --grid 2x2
"""

from __future__ import annotations

import argparse
from collections import Counter

import xstencil.dialects  # noqa: F401
import xstencil.transforms  # noqa: F401
from xstencil.execution.kernels import KernelPreset, generate_kernel
from xstencil.ir import print_module, run_pipeline

STAGES = [
    ("stencil", "propagate-bounds"),
    ("dmp", "decompose grid={grid},eliminate-redundant-swaps"),
    ("mpi", "lower-dmp-to-mpi"),
    ("func", "lower-mpi-to-func,lower-stencil-to-loops"),
]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--kind", default="heat")
    ap.add_argument("--dims", type=int, default=2)
    ap.add_argument("--sdo", type=int, default=2)
    ap.add_argument("--shape", default="16x16")
    ap.add_argument("--grid", default="2x2")
    ap.add_argument("--quiet", action="store_true", help="only print op counts")
    args = ap.parse_args()
    shape = tuple(int(x) for x in args.shape.split("x"))
    m = generate_kernel(KernelPreset(args.kind, args.dims, args.sdo, shape, 1))
    for name, passes in STAGES:
        m = run_pipeline(m, passes.format(grid=args.grid))
        counts = Counter(op.name.split(".")[0] for op in m.walk())
        print(f"== {name}: " + ", ".join(f"{d} {n}" for d, n in sorted(counts.items())))
        if not args.quiet:
            print(print_module(m))


if __name__ == "__main__":
    main()
