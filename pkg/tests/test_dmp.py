import pytest

from conftest import load
from xstencil.dmp.checks import check_exchanges
from xstencil.dmp.dialect import ExchangeAttr, GridAttr
from xstencil.dmp.strategy import DecompositionError, SlicingStrategy, generate_exchanges, local_bounds
from xstencil.execution.fields import init_fields
from xstencil.execution.kernels import KernelPreset, generate_kernel
from xstencil.execution.serial import entry_function
from xstencil.execution.simulator import check_against_serial, lower_to, simulate_distributed
from xstencil.ir import PassError, parse_attribute, run_pipeline

SLICING = SlicingStrategy()
HALO4 = ((-4, 4), (-4, 4))


def swaps(m):
    return [op for op in m.walk() if op.name == "dmp.swap"]


def test_grid_is_row_major():
    g = GridAttr((2, 3))
    assert [g.coord_of(r) for r in range(6)] == [(0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (1, 2)]
    assert all(g.rank_of(g.coord_of(r)) == r for r in range(6))


def test_attribute_syntax_round_trips():
    text = "#dmp.exchange<at [4, 0] size [100, 4] source offset [0, 4] to [0, -1]>"
    attr = parse_attribute(text)
    assert attr == ExchangeAttr((4, 0), (100, 4), (0, 4), (0, -1))
    assert str(attr) == text
    assert str(parse_attribute("#dmp.grid<2x2>")) == "#dmp.grid<2x2>"


@pytest.mark.parametrize(
    "n,ranks,coord,want",
    [(128, 1, 0, (0, 128)), (128, 4, 1, (32, 64)), (130, 4, 2, (66, 98)), (130, 4, 0, (0, 33)), (130, 4, 3, (98, 130))],
)
def test_local_bounds_remainder_rule(n, ranks, coord, want):
    from xstencil.stencil.dialect import Bounds

    b = local_bounds(SLICING, Bounds((0,), (n,)), GridAttr((ranks,)), (coord,))
    assert (b.lb[0], b.ub[0]) == want


def test_more_ranks_than_points():
    from xstencil.stencil.dialect import Bounds

    with pytest.raises(DecompositionError):
        local_bounds(SLICING, Bounds((0,), (3,)), GridAttr((4,)), (0,))


def core(shape):
    from xstencil.stencil.dialect import Bounds

    return Bounds((0,) * len(shape), tuple(shape))


def test_template_reproduces_the_reference_halo_swap():
    got = [str(e) for e in generate_exchanges(SLICING, HALO4, core((100, 100)), GridAttr((2, 2)))]
    assert got[2:] == [
        "#dmp.exchange<at [4, 0] size [100, 4] source offset [0, 4] to [0, -1]>",
        "#dmp.exchange<at [4, 104] size [100, 4] source offset [0, -4] to [0, 1]>",
    ]


def test_exchanges_skip_the_global_boundary():
    got = generate_exchanges(SLICING, HALO4, core((100, 100)), GridAttr((2, 2)), (0, 1))
    assert [e.to for e in got] == [(1, 0), (0, -1)]
    assert str(got[1]) == "#dmp.exchange<at [4, 0] size [100, 4] source offset [0, 4] to [0, -1]>"


def test_single_rank_has_no_exchanges():
    assert generate_exchanges(SLICING, HALO4, core((100, 100)), GridAttr((1, 1)), (0, 0)) == []


def test_jacobi_pair():
    got = generate_exchanges(SLICING, ((-1, 1),), core((64,)), GridAttr((2,)), (0,))
    assert got == [ExchangeAttr((65,), (1,), (-1,), (1,))]


def test_asymmetric_extent_uses_the_wider_side():
    got = generate_exchanges(SLICING, ((-1, 3),), core((16,)), GridAttr((2,)))
    assert [e.size for e in got] == [(3,), (3,)]


def test_consistency_of_the_100x100_decomposition():
    from xstencil.stencil.dialect import Bounds

    assert check_exchanges(Bounds((0, 0), (200, 200)), GridAttr((2, 2)), HALO4) == []


def test_jacobi_on_two_ranks(jacobi):
    m = run_pipeline(jacobi, "propagate-bounds,decompose grid=2")
    func = entry_function(m)
    assert [str(a.type) for a in func.body.args] == ["!stencil.field<[-1,65]xf64>", "!stencil.field<[0,64]xf64>"]
    (swap,) = swaps(m)
    body = func.body.ops
    assert body[body.index(swap) + 1].name == "stencil.load"
    init = init_fields(entry_function(m, reference=True), seed=0)
    assert check_against_serial(m, init, 1)[0].equal


def test_single_rank_grid_inserts_an_empty_swap(jacobi):
    m = run_pipeline(jacobi, "propagate-bounds,decompose grid=1")
    (swap,) = swaps(m)
    assert list(swap.attributes["swaps"]) == []
    init = init_fields(entry_function(m, reference=True), seed=2)
    assert check_against_serial(m, init, 3)[0].equal


def test_three_dimensional_template_has_six_faces():
    m = run_pipeline(generate_kernel(KernelPreset("heat", 3, 4, (8, 8, 8), 1)), "propagate-bounds,decompose grid=2x2x2")
    for swap in swaps(m):
        assert sorted(e.to for e in swap.attributes["swaps"]) == sorted(
            [(-1, 0, 0), (1, 0, 0), (0, -1, 0), (0, 1, 0), (0, 0, -1), (0, 0, 1)]
        )


def test_corner_accesses_are_rejected():
    from xstencil.ir import parse_module

    m = parse_module("""func.func @f(%u : !field<[-1,9]x[-1,9]xf64>, %o : !field<[0,8]x[0,8]xf64>) {
  %0 = stencil.load %u : !field<[-1,9]x[-1,9]xf64> -> !temp<?x?xf64>
  %1 = stencil.apply(%a = %0 : !temp<?x?xf64>) -> !temp<?x?xf64> {
    %l = stencil.access %a[-1, 1] : !temp<?x?xf64>
    stencil.return %l : f64
  }
  stencil.store %1 to %o (<[0, 0], [8, 8]>) : !temp<?x?xf64> to !field<[0,8]x[0,8]xf64>
  func.return
}""")
    with pytest.raises(PassError) as info:
        run_pipeline(m, "propagate-bounds,decompose grid=2x2")
    assert "corner" in str(info.value)


def test_infeasible_grid_is_reported(jacobi):
    with pytest.raises(PassError, match="decomposition"):
        run_pipeline(jacobi, "propagate-bounds,decompose grid=256")


# -- redundant-swap elimination ------------------------------------------------------------
def decomposed(name, grid):
    return run_pipeline(load(name), f"propagate-bounds,decompose grid={grid}")


@pytest.mark.parametrize("grid", ["2x2", "1x4", "4x1"])
def test_second_swap_of_an_unchanged_field_is_removed(grid):
    m = decomposed("two_apply.xir", grid)
    after = run_pipeline(m, "eliminate-redundant-swaps")
    assert (len(swaps(m)), len(swaps(after))) == (2, 1)
    init = init_fields(entry_function(m, reference=True), seed=5)
    before_run = simulate_distributed(m, init, 1).fields
    after_run = simulate_distributed(after, init, 1).fields
    assert all(a.bitwise_equal(b) for a, b in zip(before_run, after_run))
    assert check_against_serial(after, init, 1)[0].equal


@pytest.mark.parametrize("grid", ["2x2", "1x4", "4x1"])
def test_swap_after_a_store_is_kept(grid):
    m = decomposed("load_store_load.xir", grid)
    after = run_pipeline(m, "eliminate-redundant-swaps")
    assert len(swaps(after)) == 2
    init = init_fields(entry_function(m, reference=True), seed=5)
    assert check_against_serial(after, init, 2)[0].equal


def test_removing_the_kept_swap_breaks_equivalence():
    m = decomposed("load_store_load.xir", "2x2")
    second = swaps(m)[1]
    second.parent.ops.remove(second)
    init = init_fields(entry_function(m, reference=True), seed=5)
    assert not check_against_serial(m, init, 1)[0].equal


def test_single_swap_module_is_unchanged(jacobi):
    m = run_pipeline(jacobi, "propagate-bounds,decompose grid=2")
    from xstencil.ir import structurally_equal

    assert structurally_equal(run_pipeline(m, "eliminate-redundant-swaps"), m)


def test_time_loop_swaps_survive_elimination():
    m = lower_to(run_pipeline(generate_kernel(KernelPreset("heat", 2, 2, (16, 16), 4)), "propagate-bounds"), "dmp", "2x2")
    assert len(swaps(m)) == 1
