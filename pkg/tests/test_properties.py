"""Property tests over randomly generated domains, grids and stencils."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from xstencil.dmp.checks import check_exchanges
from xstencil.dmp.dialect import GridAttr
from xstencil.dmp.strategy import SlicingStrategy
from xstencil.execution.fields import init_fields
from xstencil.execution.kernels import KernelPreset, generate_kernel
from xstencil.execution.serial import entry_function, run_serial_stencil
from xstencil.execution.simulator import lower_to, simulate_distributed
from xstencil.ir import parse_module, print_module, run_pipeline, structurally_equal, verify_module
from xstencil.stencil.dialect import Bounds


@st.composite
def decompositions(draw):
    dims = draw(st.integers(1, 3))
    topo = tuple(draw(st.integers(1, 3)) for _ in range(draw(st.integers(1, dims))))
    extent = tuple((-draw(st.integers(0, 3)), draw(st.integers(0, 3))) for _ in range(dims))
    widths = [max(-lo, hi, 1) for lo, hi in extent]
    # every decomposed dimension must give each rank at least a halo's width
    shape = [
        draw(st.integers(topo[k] * widths[k], max(14, topo[k] * widths[k]))) if k < len(topo) else draw(st.integers(1, 14))
        for k in range(dims)
    ]
    lb = tuple(draw(st.integers(-3, 3)) for _ in range(dims))
    return Bounds(lb, tuple(l + s for l, s in zip(lb, shape))), GridAttr(topo), extent


@settings(max_examples=300, deadline=None)
@given(decompositions())
def test_exchange_coverage_and_reciprocity(case):
    domain, topo, extent = case
    assert check_exchanges(domain, topo, extent) == []


@settings(max_examples=200, deadline=None)
@given(decompositions())
def test_local_domains_partition_the_global_domain(case):
    domain, topo, _ = case
    hits = np.zeros(domain.shape, dtype=int)
    for coord in topo.coords():
        hits[SlicingStrategy().local_bounds(domain, topo, coord).slices(domain.lb)] += 1
    assert (hits == 1).all()


GRIDS = {1: ["1", "2", "4"], 2: ["1x1", "2x1", "1x2", "2x2", "4"], 3: ["2x1x1", "1x2x2", "2x2x2", "2"]}


@st.composite
def small_runs(draw):
    dims = draw(st.integers(1, 3))
    kind = draw(st.sampled_from(["heat", "wave", "copy"]))
    sdo = draw(st.sampled_from([2, 4])) if dims < 3 else 2
    grid = draw(st.sampled_from(GRIDS[dims]))
    ranks = [int(x) for x in grid.split("x")]
    r = sdo // 2
    unit = [k * 2 * r if k > 1 else 2 for k in ranks] + [2] * (dims - len(ranks))
    shape = tuple(u * draw(st.integers(1, 3 if dims < 3 else 2)) for u in unit)
    preset = KernelPreset(kind, dims, sdo, shape, draw(st.integers(0, 3)), draw(st.sampled_from(["f32", "f64"])))
    return preset, grid, draw(st.sampled_from(["dmp", "mpi", "func"])), draw(st.integers(0, 2**16))


@settings(max_examples=25, deadline=None)
@given(small_runs())
def test_distributed_runs_match_serial(case):
    preset, grid, level, seed = case
    m = lower_to(run_pipeline(generate_kernel(preset), "propagate-bounds"), level, grid)
    init = init_fields(entry_function(m, reference=True), seed)
    want = run_serial_stencil(m, init, preset.timesteps, func=entry_function(m, reference=True))
    got = simulate_distributed(m, init, preset.timesteps, seed=seed).fields
    assert all(a.bitwise_equal(b) for a, b in zip(got, want))


@settings(max_examples=15, deadline=None)
@given(small_runs())
def test_scatter_then_gather_is_identity(case):
    preset, grid, level, seed = case
    m = lower_to(run_pipeline(generate_kernel(preset), "propagate-bounds"), level, grid)
    init = init_fields(entry_function(m, reference=True), seed)
    got = simulate_distributed(m, init, 0, seed=seed).fields
    assert all(a.bitwise_equal(b) for a, b in zip(got, init))


@settings(max_examples=10, deadline=None)
@given(small_runs(), st.lists(st.integers(0, 2**16), min_size=5, max_size=5, unique=True))
def test_results_do_not_depend_on_rank_interleaving(case, seeds):
    preset, grid, level, _ = case
    m = lower_to(run_pipeline(generate_kernel(preset), "propagate-bounds"), level, grid)
    init = init_fields(entry_function(m, reference=True), 1)
    runs = [simulate_distributed(m, init, preset.timesteps, seed=s) for s in seeds]
    for r in runs[1:]:
        assert all(a.bitwise_equal(b) for a, b in zip(r.fields, runs[0].fields))


@st.composite
def random_stencils(draw):
    dims = draw(st.integers(1, 2))
    offsets = draw(
        st.lists(st.tuples(*[st.integers(-3, 3)] * dims), min_size=1, max_size=5, unique=True)
    )
    n = 6
    lo = [min(0, *(o[k] for o in offsets)) for k in range(dims)]
    hi = [max(0, *(o[k] for o in offsets)) for k in range(dims)]
    fb = "x".join(f"[{-3},{n + 3}]" for _ in range(dims))
    ob = "x".join(f"[0,{n}]" for _ in range(dims))
    temp = "!temp<" + "x".join("?" * dims) + "xf64>"
    body = []
    for i, o in enumerate(offsets):
        body.append(f"    %v{i} = stencil.access %a[{', '.join(map(str, o))}] : {temp}")
    acc = "%v0"
    for i in range(1, len(offsets)):
        body.append(f"    %s{i} = arith.addf {acc}, %v{i} : f64")
        acc = f"%s{i}"
    zeros, ends = ", ".join("0" * dims), ", ".join([str(n)] * dims)
    text = f"""func.func @r(%in : !field<{fb}xf64>, %out : !field<{ob}xf64>) {{
  %0 = stencil.load %in : !field<{fb}xf64> -> {temp}
  %1 = stencil.apply(%a = %0 : {temp}) -> {temp} {{
{chr(10).join(body)}
    stencil.return {acc} : f64
  }}
  stencil.store %1 to %out (<[{zeros}], [{ends}]>) : {temp} to !field<{ob}xf64>
  func.return
}}"""
    return parse_module(text), lo, hi, n


@settings(max_examples=60, deadline=None)
@given(random_stencils())
def test_extent_is_exactly_the_read_set(case):
    m, lo, hi, n = case
    m = run_pipeline(m, "propagate-bounds")
    load = next(op for op in m.walk() if op.name == "stencil.load")
    need = Bounds(tuple(lo), tuple(n + h for h in hi))
    assert load.result.type.bounds == need
    # poisoning everything outside the read set must not reach the output
    init = init_fields(entry_function(m), 0)
    inside = init[0].region(need).copy()
    init[0].data[...] = np.nan
    init[0].region(need)[...] = inside
    out = run_serial_stencil(m, init, 1)[1]
    assert not np.isnan(out.data).any()


@settings(max_examples=40, deadline=None)
@given(random_stencils())
def test_random_modules_round_trip(case):
    m = case[0]
    assert verify_module(m) == []
    text = print_module(m)
    assert structurally_equal(parse_module(text), m) and print_module(parse_module(text)) == text


@settings(max_examples=30, deadline=None)
@given(small_runs())
def test_every_pass_keeps_modules_valid(case):
    preset, grid, level, _ = case
    m = run_pipeline(generate_kernel(preset), "propagate-bounds")
    for p in ["decompose grid=" + grid, "eliminate-redundant-swaps", "lower-dmp-to-mpi", "lower-mpi-to-func",
              "lower-stencil-to-loops"]:
        m = run_pipeline(m, p)
        assert verify_module(m) == []
        assert structurally_equal(parse_module(print_module(m)), m)
