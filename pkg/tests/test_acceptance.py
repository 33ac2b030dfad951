"""End-to-end acceptance checks; each records a PASS/FAIL summary line."""

import random
import time

import pytest

from conftest import ACCEPTANCE, FIXTURES, load
from xstencil.cli import main
from xstencil.dmp.checks import check_exchanges
from xstencil.dmp.dialect import GridAttr
from xstencil.dmp.strategy import SlicingStrategy
from xstencil.execution.bench import RunStats, BenchConfig, report_throughput, run_benchmark, to_csv
from xstencil.execution.fields import init_fields
from xstencil.execution.kernels import KernelPreset, footprint_points, generate_kernel
from xstencil.execution.serial import entry_function, run_serial_stencil
from xstencil.execution.simulator import LEVELS, compare_fields, lower_to, simulate_distributed
from xstencil.ir import parse_module, print_module, run_pipeline, structurally_equal
from xstencil.stencil.analysis import infer_access_extent
from xstencil.stencil.dialect import Bounds


def record(key: str, ok: bool, detail: str) -> None:
    ACCEPTANCE[key] = (ok, detail)
    assert ok, detail


def test_1_reference_fixtures_round_trip():
    t0 = time.perf_counter()
    names = ["jacobi_1d.xir", "halo_swap_2x2.xir", "mpi_send.xir"]
    ok = True
    for name in names:
        m = load(name)
        text = print_module(m)
        ok &= structurally_equal(parse_module(text), m) and print_module(parse_module(text)) == text
    dt = time.perf_counter() - t0
    record("1 round-trip", ok and dt < 1.0, f"{len(names)} reference fixtures round-trip in {dt:.3f}s (< 1s)")


EXPECTED_POINTS = {(2, 2): 5, (2, 4): 9, (2, 8): 13, (3, 2): 7, (3, 4): 13, (3, 8): 19}


def test_2_discretization_orders():
    extents_ok, got = True, {}
    for (dims, sdo), _ in EXPECTED_POINTS.items():
        preset = KernelPreset("heat", dims, sdo, (16,) * dims, 1)
        apply = next(op for op in generate_kernel(preset).walk() if op.name == "stencil.apply")
        extents_ok &= infer_access_extent(apply)[0] == ((-(sdo // 2), sdo // 2),) * dims
        got[(dims, sdo)] = footprint_points(preset)
    counts_ok = got == EXPECTED_POINTS
    detail = (
        f"extents ±1/±2/±4 {'ok' if extents_ok else 'WRONG'}; "
        f"point counts 2D {got[2, 2]}/{got[2, 4]}/{got[2, 8]}, 3D {got[3, 2]}/{got[3, 4]}/{got[3, 8]} "
        f"(expected 5/9/13, 7/13/19)"
    )
    record("2 sdo", extents_ok and counts_ok, detail)


REFERENCE_SWAPS = [
    "#dmp.exchange<at [4, 0] size [100, 4] source offset [0, 4] to [0, -1]>",
    "#dmp.exchange<at [4, 104] size [100, 4] source offset [0, -4] to [0, 1]>",
]


def test_3_exchange_attributes_regenerated():
    # 200x200 over 2x2 gives a 100x100 core; SDO 8 needs a halo of 4
    m = lower_to(run_pipeline(generate_kernel(KernelPreset("heat", 2, 8, (200, 200), 1)), "propagate-bounds"), "dmp", "2x2")
    swap = next(op for op in m.walk() if op.name == "dmp.swap")
    text = print_module(m)
    in_ir = all(s in text for s in REFERENCE_SWAPS) and "grid = #dmp.grid<2x2>" in text
    shape_ok = swap.operands[0].type.as_memref().shape == (108, 108)
    coord = SlicingStrategy().exchanges(((-4, 4), (-4, 4)), Bounds((0, 0), (100, 100)), GridAttr((2, 2)), (0, 1))
    per_rank = str(coord[1]) == REFERENCE_SWAPS[0]
    record(
        "3 exchange attrs",
        in_ir and shape_ok and per_rank,
        "swap on a 108x108 buffer over #dmp.grid<2x2> carries both listed exchanges verbatim",
    )


def test_4_random_coverage_and_reciprocity():
    rng = random.Random(2024)
    t0 = time.perf_counter()
    failures = 0
    for _ in range(1000):
        dims = rng.randint(1, 3)
        topo = tuple(rng.randint(1, 3) for _ in range(rng.randint(1, dims)))
        extent = tuple((-rng.randint(0, 3), rng.randint(0, 3)) for _ in range(dims))
        widths = [max(-lo, hi, 1) for lo, hi in extent]
        shape = [
            rng.randint(topo[k] * widths[k], max(12, topo[k] * widths[k])) if k < len(topo) else rng.randint(1, 12)
            for k in range(dims)
        ]
        lb = tuple(rng.randint(-4, 4) for _ in range(dims))
        domain = Bounds(lb, tuple(l + s for l, s in zip(lb, shape)))
        failures += bool(check_exchanges(domain, GridAttr(topo), extent))
    dt = time.perf_counter() - t0
    record("4 coverage", failures == 0 and dt < 10.0, f"1000 random cases, {failures} violations, {dt:.2f}s (< 10s)")


EQUIVALENCE = [(KernelPreset("heat", 2, sdo, (64, 64), 16), grid) for sdo in (2, 4, 8)
               for grid in ("1x1", "2x2", "1x4", "4x1", "2x4")]
EQUIVALENCE.append((KernelPreset("wave", 3, 4, (32, 32, 32), 8), "2x2x2"))


def test_5_bitwise_equivalence():
    t0 = time.perf_counter()
    bad = []
    for preset, grid in EQUIVALENCE:
        base = run_pipeline(generate_kernel(preset), "propagate-bounds")
        init = init_fields(entry_function(base), 0)
        want = run_serial_stencil(base, init, preset.timesteps)
        for level in LEVELS:
            m = lower_to(base, level, grid)
            got = simulate_distributed(m, init, preset.timesteps).fields
            if not compare_fields(got, want).equal:
                bad.append(f"{preset.name} {grid} {level}")
    dt = time.perf_counter() - t0
    runs = len(EQUIVALENCE) * len(LEVELS)
    record("5 equivalence", not bad and dt < 60.0, f"{runs - len(bad)}/{runs} runs bitwise equal to serial in {dt:.1f}s (< 60s)")


def test_6_swap_elimination():
    ok = True
    for name, before, after in (("two_apply.xir", 2, 1), ("load_store_load.xir", 2, 2)):
        m = run_pipeline(load(name), "propagate-bounds,decompose grid=2x2")
        e = run_pipeline(m, "eliminate-redundant-swaps")
        count = lambda mod: sum(op.name == "dmp.swap" for op in mod.walk())  # noqa: E731
        ok &= (count(m), count(e)) == (before, after)
        init = init_fields(entry_function(m, reference=True), 1)
        want = run_serial_stencil(m, init, 2, func=entry_function(m, reference=True))
        for mod in (m, e):
            ok &= compare_fields(simulate_distributed(mod, init, 2).fields, want).equal
    record("6 elimination", ok, "two-apply fixture 2 -> 1 swaps, load-store-load keeps 2, results bitwise equal")


def test_7_hoisting():
    counts = {}
    for steps in (1, 16):
        m = lower_to(run_pipeline(generate_kernel(KernelPreset("heat", 2, 2, (32, 32), steps)), "propagate-bounds"),
                     "func", "2x2")
        counts[steps] = simulate_distributed(m, init_fields(entry_function(m, reference=True), 0), steps).total_counts
    fixed = ("call@MPI_Comm_rank", "call@MPI_Comm_size", "arith.cmpi", "arith.select")
    scaled = ("call@MPI_Isend", "call@MPI_Irecv")
    ok = all(counts[1][k] == counts[16][k] > 0 for k in fixed)
    ok &= all(counts[16][k] == 16 * counts[1][k] > 0 for k in scaled)
    detail = ", ".join(f"{k.split('@')[-1]} {counts[1][k]}->{counts[16][k]}" for k in fixed + scaled)
    record("7 hoisting", ok, f"T=1 -> T=16 dynamic counts over 4 ranks: {detail}")


def test_8_malformed_inputs(capsys):
    files = sorted((FIXTURES / "malformed").glob("*.xir"))
    good = 0
    for f in files:
        code = main(["verify", str(f)])
        err = capsys.readouterr().err
        good += code != 0 and err.startswith(f"{f}:") and "error:" in err
    record("8 malformed", len(files) >= 10 and good == len(files), f"{good}/{len(files)} malformed fixtures diagnosed with nonzero exit")


def test_9_bench_throughput():
    stats = [run_benchmark(BenchConfig(KernelPreset("heat", 2, s, (32, 32), 4), g, "mpi")) for s in (2, 4) for g in ("1", "2x2")]
    stats.append(RunStats("heat", (128, 128, 128), 4, "1", "dmp", 8, 128**3, 2.0))
    import csv
    import io

    rows = list(csv.DictReader(io.StringIO(to_csv(report_throughput(stats)))))
    worst = 0.0
    for r in rows:
        want = int(r["points"]) * int(r["timesteps"]) / float(r["seconds"]) / 1e9
        worst = max(worst, abs(float(r["gpts_per_s"]) - want) / want)
    example = float(rows[-1]["gpts_per_s"])
    record(
        "9 bench",
        worst <= 1e-9 and round(example, 5) == 0.00839,
        f"{len(rows)} CSV rows, max relative error {worst:.1e}; 128^3 x 8 steps in 2.0s -> {example:.5f} GPts/s",
    )
