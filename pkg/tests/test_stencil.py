import numpy as np
import pytest

from conftest import load
from xstencil.execution.fields import FieldData, init_fields
from xstencil.execution.kernels import KernelPreset, footprint_points, generate_kernel, second_derivative_weights
from xstencil.execution.serial import entry_function, run_serial_stencil
from xstencil.execution.simulator import run_loops
from xstencil.ir import PassError, parse_module, print_module, run_pipeline, structurally_equal
from xstencil.stencil.analysis import infer_access_extent
from xstencil.stencil.dialect import Bounds, FieldType, TempType

COPY = """func.func @copy(%in : !field<[0,8]xf64>, %out : !field<[0,8]xf64>) {
  %0 = stencil.load %in : !field<[0,8]xf64> -> !temp<?xf64>
  %1 = stencil.apply(%a = %0 : !temp<?xf64>) -> !temp<?xf64> {
    %2 = stencil.access %a[0] : !temp<?xf64>
    stencil.return %2 : f64
  }
  stencil.store %1 to %out (<[0], [8]>) : !temp<?xf64> to !field<[0,8]xf64>
  func.return
}"""


def first_apply(m):
    return next(op for op in m.walk() if op.name == "stencil.apply")


def test_jacobi_extent(jacobi):
    assert infer_access_extent(first_apply(jacobi))[0] == ((-1, 1),)


@pytest.mark.parametrize("dims,sdo,radius", [(2, 2, 1), (2, 4, 2), (2, 8, 4), (3, 2, 1), (3, 4, 2), (3, 8, 4)])
def test_kernel_extent_is_half_the_order(dims, sdo, radius):
    m = generate_kernel(KernelPreset("heat", dims, sdo, (16,) * dims, 1))
    assert infer_access_extent(first_apply(m))[0] == ((-radius, radius),) * dims


def test_unaccessed_operand_has_zero_extent():
    m = parse_module("""func.func @f(%x : !field<[0,8]xf64>, %y : !field<[0,8]xf64>, %o : !field<[0,8]xf64>) {
  %0 = stencil.load %x : !field<[0,8]xf64> -> !temp<?xf64>
  %1 = stencil.load %y : !field<[0,8]xf64> -> !temp<?xf64>
  %2 = stencil.apply(%a = %0 : !temp<?xf64>, %b = %1 : !temp<?xf64>) -> !temp<?xf64> {
    %3 = stencil.access %a[0] : !temp<?xf64>
    stencil.return %3 : f64
  }
  stencil.store %2 to %o (<[0], [8]>) : !temp<?xf64> to !field<[0,8]xf64>
  func.return
}""")
    assert infer_access_extent(first_apply(m))[1] == ((0, 0),)


def load_temp_bounds(m):
    op = next(op for op in m.walk() if op.name == "stencil.load")
    assert isinstance(op.result.type, TempType)
    return op.result.type.bounds


def test_propagation_widens_store_range(jacobi):
    m = run_pipeline(jacobi, "propagate-bounds")
    assert load_temp_bounds(m) == Bounds((-1,), (129,))


def test_copy_stencil_needs_no_halo():
    assert load_temp_bounds(run_pipeline(parse_module(COPY), "propagate-bounds")) == Bounds((0,), (8,))


def test_field_too_small(jacobi):
    text = print_module(jacobi).replace("[-1,129]", "[0,128]")
    with pytest.raises(PassError, match="too small"):
        run_pipeline(parse_module(text), "propagate-bounds")


def test_propagation_is_idempotent(jacobi):
    once = run_pipeline(jacobi, "propagate-bounds")
    assert structurally_equal(run_pipeline(once, "propagate-bounds"), once)


def linear_init(m):
    func = entry_function(m)
    b_in, b_out = (a.type.bounds for a in func.body.args)
    return [
        FieldData("in", b_in, np.arange(b_in.lb[0], b_in.ub[0], dtype=np.float64)),
        FieldData("out", b_out, np.zeros(b_out.shape)),
    ]


def test_jacobi_closed_form(jacobi):
    m = run_pipeline(jacobi, "propagate-bounds")
    out = run_serial_stencil(m, linear_init(m), 1)[1]
    assert out.data.tolist() == [3.0 * i for i in range(128)]


def test_zero_timesteps_return_init(jacobi):
    m = run_pipeline(jacobi, "propagate-bounds")
    init = linear_init(m)
    out = run_serial_stencil(m, init, 0)
    assert all(a.bitwise_equal(b) for a, b in zip(out, init))


def test_copy_stencil_is_a_fixpoint():
    m = run_pipeline(parse_module(COPY), "propagate-bounds")
    init = init_fields(entry_function(m), seed=3)
    init[1].data[:] = init[0].data
    out = run_serial_stencil(m, init, 5)
    assert out[1].data.tobytes() == init[0].data.tobytes()


def test_apply_never_observes_its_output():
    """In-place update: reading and writing the same field still uses the old values."""
    m = parse_module("""func.func @f(%u : !field<[-1,9]xf64>) {
  %0 = stencil.load %u : !field<[-1,9]xf64> -> !temp<?xf64>
  %1 = stencil.apply(%a = %0 : !temp<?xf64>) -> !temp<?xf64> {
    %l = stencil.access %a[-1] : !temp<?xf64>
    %r = stencil.access %a[1] : !temp<?xf64>
    %s = arith.addf %l, %r : f64
    stencil.return %s : f64
  }
  stencil.store %1 to %u (<[0], [8]>) : !temp<?xf64> to !field<[-1,9]xf64>
  func.return
}""")
    m = run_pipeline(m, "propagate-bounds")
    u = np.arange(-1, 9, dtype=np.float64)
    (out,) = run_serial_stencil(m, [FieldData("u", Bounds((-1,), (9,)), u.copy())], 1)
    assert out.data[1:-1].tolist() == [u[i] + u[i + 2] for i in range(8)]
    (lowered,) = run_loops(run_pipeline(m, "lower-stencil-to-loops"), [FieldData("u", Bounds((-1,), (9,)), u.copy())])
    assert lowered.data.tobytes() == out.data.tobytes()


def test_lowered_jacobi_shape(jacobi):
    m = run_pipeline(jacobi, "propagate-bounds,lower-stencil-to-loops")
    func = m.functions()[0]
    assert [str(a.type) for a in func.body.args] == ["memref<130xf64>", "memref<128xf64>"]
    assert not any(op.dialect == "stencil" for op in m.walk())
    loops = [op for op in m.walk() if op.name == "loop.for"]
    assert len(loops) == 1


def test_lowered_jacobi_matches_serial(jacobi):
    m = run_pipeline(jacobi, "propagate-bounds")
    init = init_fields(entry_function(m), seed=1)
    want = run_serial_stencil(m, init, 1)
    got = run_loops(run_pipeline(m, "lower-stencil-to-loops"), init)
    assert all(g.data.tobytes() == w.data.tobytes() for g, w in zip(got, want))


@pytest.mark.parametrize("name", ["jacobi_1d.xir", "two_apply.xir", "load_store_load.xir"])
@pytest.mark.parametrize("steps", [0, 1, 3])
def test_lowering_soundness_on_fixtures(name, steps):
    m = run_pipeline(load(name), "propagate-bounds")
    init = init_fields(entry_function(m), seed=7)
    want = run_serial_stencil(m, init, steps)
    got = run_loops(run_pipeline(m, "lower-stencil-to-loops"), init, steps)
    assert all(g.data.tobytes() == w.data.tobytes() for g, w in zip(got, want))


@pytest.mark.parametrize(
    "preset",
    [
        KernelPreset("heat", 1, 8, (40,), 16),
        KernelPreset("heat", 2, 4, (24, 20), 16, "f32"),
        KernelPreset("wave", 2, 2, (20, 20), 9),
        KernelPreset("wave", 3, 4, (10, 10, 10), 4),
        KernelPreset("copy", 2, 2, (8, 8), 3),
    ],
    ids=lambda p: f"{p.name}_{p.element}",
)
def test_lowering_soundness_on_kernels(preset):
    m = run_pipeline(generate_kernel(preset), "propagate-bounds")
    init = init_fields(entry_function(m), seed=11)
    want = run_serial_stencil(m, init, preset.timesteps)
    got = run_loops(run_pipeline(m, "lower-stencil-to-loops"), init, preset.timesteps)
    assert all(g.data.tobytes() == w.data.tobytes() for g, w in zip(got, want))


def test_wave_rotates_three_buffers():
    p = KernelPreset("wave", 2, 2, (8, 8), 2)
    func = generate_kernel(p).functions()[0]
    assert sum(isinstance(a.type, FieldType) for a in func.body.args) == 3
    loop = next(op for op in func.walk() if op.name == "loop.for")
    assert len(loop.results) == 3


def test_second_derivative_weights():
    from fractions import Fraction as F

    assert second_derivative_weights(1) == [F(-2), F(1)]
    assert second_derivative_weights(2) == [F(-5, 2), F(4, 3), F(-1, 12)]
    assert sum(second_derivative_weights(4)[1:]) * 2 + second_derivative_weights(4)[0] == 0


@pytest.mark.parametrize("dims,sdo,points", [(2, 2, 5), (2, 4, 9), (3, 2, 7), (3, 4, 13)])
def test_star_point_counts(dims, sdo, points):
    assert footprint_points(KernelPreset("heat", dims, sdo, (16,) * dims, 1)) == points
