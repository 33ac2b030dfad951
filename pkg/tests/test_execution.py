import numpy as np
import pytest

from conftest import load
from xstencil.execution.bench import (
    CSV_FIELDS,
    BenchConfig,
    RunStats,
    gpts_per_second,
    report_throughput,
    run_benchmark,
    to_csv,
)
from xstencil.execution.fields import init_fields
from xstencil.execution.kernels import KernelPreset, generate_kernel
from xstencil.execution.serial import InterpreterError, entry_function, run_serial_stencil
from xstencil.execution.simulator import (
    LEVELS,
    check_against_serial,
    compare_fields,
    lower_to,
    run_loops,
    simulate_distributed,
)
from xstencil.ir import parse_module, run_pipeline


def lowered(preset, level, grid, eliminate=True):
    return lower_to(run_pipeline(generate_kernel(preset), "propagate-bounds"), level, grid, eliminate)


def start(m, seed=0):
    return init_fields(entry_function(m, reference=True), seed)


@pytest.mark.parametrize("level", LEVELS)
@pytest.mark.parametrize("grid", ["1x1", "2x2", "1x4", "4x1"])
def test_heat_matches_serial(level, grid):
    m = lowered(KernelPreset("heat", 2, 2, (32, 32), 6), level, grid)
    report, _ = check_against_serial(m, start(m), 6)
    assert report.equal, report.details


@pytest.mark.parametrize("level", LEVELS)
def test_wave_matches_serial(level):
    m = lowered(KernelPreset("wave", 3, 2, (8, 8, 8), 3), level, "2x2x2")
    report, _ = check_against_serial(m, start(m), 3)
    assert report.equal, report.details


def test_single_precision_matches_serial():
    m = lowered(KernelPreset("heat", 2, 4, (16, 16), 4, "f32"), "func", "2x2")
    assert check_against_serial(m, start(m), 4)[0].equal


def test_one_dimensional_grid_on_a_two_dimensional_domain():
    m = lowered(KernelPreset("heat", 2, 2, (16, 12), 3), "mpi", "4")
    assert check_against_serial(m, start(m), 3)[0].equal


@pytest.mark.parametrize("name", ["jacobi_1d.xir", "two_apply.xir", "load_store_load.xir"])
@pytest.mark.parametrize("level", LEVELS)
def test_fixtures_on_one_rank_match_serial(name, level):
    m = lower_to(run_pipeline(load(name), "propagate-bounds"), level, "1")
    assert check_against_serial(m, start(m, 4), 2)[0].equal


def test_scheduling_independence():
    m = lowered(KernelPreset("heat", 2, 4, (16, 16), 4), "func", "2x2")
    init = start(m)
    runs = [simulate_distributed(m, init, 4, seed=s) for s in range(6)]
    for r in runs[1:]:
        assert all(a.bitwise_equal(b) for a, b in zip(r.fields, runs[0].fields))
        assert r.counts == runs[0].counts


def test_levels_agree():
    preset = KernelPreset("heat", 2, 8, (32, 32), 3)
    results = {}
    for level in LEVELS:
        m = lowered(preset, level, "2x4")
        results[level] = simulate_distributed(m, start(m), 3, seed=3).fields
    for level in ("mpi", "func"):
        assert all(a.bitwise_equal(b) for a, b in zip(results[level], results["dmp"]))


def test_zero_timesteps_gather_the_scattered_input():
    m = lowered(KernelPreset("heat", 2, 2, (16, 16), 0), "dmp", "2x2")
    init = start(m, 9)
    out = simulate_distributed(m, init, 0).fields
    assert all(a.bitwise_equal(b) for a, b in zip(out, init))


def test_missing_swaps_are_detected():
    m = lowered(KernelPreset("heat", 2, 2, (16, 16), 2), "dmp", "2x2")
    for op in list(m.walk()):
        if op.name == "dmp.swap":
            op.parent.ops.remove(op)
    report, _ = check_against_serial(m, start(m), 2)
    assert not report.equal and "first mismatch" in report.details[0]


def test_tolerance_mode():
    m = lowered(KernelPreset("heat", 2, 2, (16, 16), 2), "dmp", "2x2")
    init = start(m)
    out = [f.copy() for f in simulate_distributed(m, init, 2).fields]
    out[0].data[3, 3] += 1e-12
    want = run_serial_stencil(m, init, 2, func=entry_function(m, reference=True))
    assert not compare_fields(out, want).equal
    assert compare_fields(out, want, tol=1e-9).equal
    assert not compare_fields(out, want, tol=1e-15).equal


def test_hoisted_setup_does_not_scale_with_time():
    counts = {}
    for steps in (1, 16):
        m = lowered(KernelPreset("heat", 2, 2, (16, 16), steps), "func", "2x2")
        counts[steps] = simulate_distributed(m, start(m), steps).counts[0]
    for key in ("call@MPI_Comm_rank", "call@MPI_Comm_size", "arith.cmpi"):
        assert counts[1][key] == counts[16][key] > 0
    for key in ("call@MPI_Isend", "call@MPI_Irecv", "call@MPI_Waitall"):
        assert counts[16][key] == 16 * counts[1][key] > 0


# -- single-rank loop interpreter ---------------------------------------------------------
def test_run_loops_on_lowered_jacobi(jacobi):
    m = run_pipeline(jacobi, "propagate-bounds")
    init = init_fields(entry_function(m), seed=0)
    got = run_loops(run_pipeline(m, "lower-stencil-to-loops"), init)
    want = run_serial_stencil(m, init, 1)
    assert all(g.data.tobytes() == w.data.tobytes() for g, w in zip(got, want))


def test_run_loops_on_an_empty_function():
    assert run_loops(parse_module("func.func @f() {\n  func.return\n}"), []) == []


def test_run_loops_traps_out_of_bounds():
    m = parse_module("""func.func @f(%b : memref<4xf64>) {
  %i = arith.constant 4 : index
  %v = memref.load %b[%i] : memref<4xf64>
  func.return
}""")
    from xstencil.execution.fields import FieldData
    from xstencil.stencil.dialect import Bounds

    with pytest.raises(InterpreterError, match=r"^@f/memref.load: index 4 out of bounds"):
        run_loops(m, [FieldData("b", Bounds((0,), (4,)), np.zeros(4))])


# -- benchmark ---------------------------------------------------------------------------------
def test_throughput_formula():
    assert gpts_per_second(128**3, 8, 2.0) == pytest.approx(0.00839, abs=5e-6)
    assert gpts_per_second(128**3, 8, 2.0) == 128**3 * 8 / 2.0 / 1e9


def test_zero_timesteps_row_is_flagged():
    (row,) = report_throughput([RunStats("heat", (8, 8), 2, "1", "dmp", 0, 64, 0.0)])
    assert float(row["gpts_per_s"]) == 0.0 and row["flag"] == "zero-timesteps"


def test_bench_csv_rows_are_consistent():
    stats = [run_benchmark(BenchConfig(KernelPreset("heat", 2, s, (16, 16), 2), "2x2", "mpi")) for s in (2, 4)]
    text = to_csv(report_throughput(stats))
    header, *rows = text.strip().split("\n")
    assert header.split(",") == list(CSV_FIELDS) and len(rows) == 2
    for line in rows:
        rec = dict(zip(CSV_FIELDS, line.split(",")))
        want = int(rec["points"]) * int(rec["timesteps"]) / float(rec["seconds"]) / 1e9
        assert abs(float(rec["gpts_per_s"]) - want) <= 1e-9 * want
