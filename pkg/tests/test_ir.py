import pytest

from conftest import FIXTURES, load
from xstencil.ir import (
    ParseError,
    PassError,
    parse_module,
    print_module,
    run_pipeline,
    structurally_equal,
    verify_module,
)
from xstencil.ir.core import Builder, ModuleIR, Region
from xstencil.std.dialects import constant, make_func
from xstencil.ir.types import f64

WELL_FORMED = sorted(p.name for p in FIXTURES.glob("*.xir"))


def test_jacobi_structure(jacobi):
    names = [op.name for op in jacobi.walk()]
    assert names.count("stencil.load") == 1
    assert names.count("stencil.apply") == 1
    assert names.count("stencil.access") == 3
    assert names.count("arith.addf") == 2
    assert names.count("stencil.return") == 1
    assert names.count("stencil.store") == 1
    assert verify_module(jacobi) == []


def test_empty_module():
    m = parse_module("")
    assert m.functions() == []
    assert print_module(m) == "builtin.module {\n}\n"
    assert structurally_equal(parse_module(print_module(m)), m)


@pytest.mark.parametrize("name", WELL_FORMED)
def test_fixture_round_trip(name):
    m = load(name)
    text = print_module(m)
    again = parse_module(text)
    assert structurally_equal(again, m)
    assert print_module(again) == text


def test_double_definition_is_rejected():
    with pytest.raises(ParseError, match="redefinition"):
        parse_module("func.func @f(%a : f64) {\n  %x = arith.addf %a, %a : f64\n  %x = arith.addf %a, %a : f64\n  func.return\n}")


def test_parse_error_has_position():
    with pytest.raises(ParseError) as info:
        parse_module("func.func @f() {\n  %0 = arith.constant 1 : i32\n  func.return %nope : i32\n}")
    assert (info.value.loc.line, info.value.loc.col) == (3, 15)


def test_unknown_dialect_op_is_a_parse_error():
    with pytest.raises(ParseError, match="unknown dialect 'frob'"):
        parse_module("func.func @f() {\n  frob.nicate() : () -> ()\n  func.return\n}")


def test_generic_form_is_accepted():
    pretty = parse_module("func.func @f(%a : f64) {\n  %0 = arith.addf %a, %a : f64\n  func.return\n}")
    generic = parse_module(
        'func.func @f(%a : f64) {\n  %0 = "arith.addf"(%a, %a) : (f64, f64) -> f64\n  func.return\n}'
    )
    assert structurally_equal(pretty, generic)


def test_use_before_definition_is_diagnosed():
    func = make_func("f", [f64])
    b = Builder(func.body)
    late = constant(b, 1.0, f64)
    add = b.create("arith.addf", [func.body.args[0], late], [f64])
    func.body.ops.remove(add)
    func.body.ops.insert(0, add)
    b.create("func.return", [])
    diags = verify_module(ModuleIR(Region([], [func])))
    assert diags and "before" in diags[0].message


def test_access_rank_mutation_is_diagnosed(jacobi):
    from xstencil.stencil.dialect import IndexAttr

    access = next(op for op in jacobi.walk() if op.name == "stencil.access")
    access.attributes["offset"] = IndexAttr((0, 0))
    diags = verify_module(jacobi)
    assert diags and "rank" in diags[0].message
    assert "stencil.access" in diags[0].path


def test_printing_is_deterministic(jacobi):
    assert print_module(jacobi) == print_module(jacobi)


def test_empty_pipeline_is_identity(jacobi):
    assert structurally_equal(run_pipeline(jacobi, ""), jacobi)


def test_unknown_pass_leaves_input_unchanged(jacobi):
    before = print_module(jacobi)
    with pytest.raises(PassError, match="frobnicate"):
        run_pipeline(jacobi, "propagate-bounds,frobnicate")
    assert print_module(jacobi) == before


def test_decompose_then_lower_produces_point_to_point(jacobi):
    from xstencil.execution.kernels import KernelPreset, generate_kernel

    m = run_pipeline(generate_kernel(KernelPreset("heat", 2, 2, (16, 16), 2)),
                     "propagate-bounds,decompose-stencil grid=2x2,lower-dmp-to-mpi")
    names = {op.name for op in m.walk()}
    assert {"mpi.isend", "mpi.irecv", "mpi.waitall"} <= names
    assert "dmp.swap" not in names


def test_decomposed_text_round_trips(jacobi):
    m = run_pipeline(jacobi, "propagate-bounds,decompose grid=2")
    text = print_module(m)
    assert "dmp.swap" in text and "#dmp.grid<2>" in text
    assert structurally_equal(parse_module(text), m)


def test_structural_equality_ignores_names():
    a = parse_module("func.func @f(%x : f64) {\n  %y = arith.mulf %x, %x : f64\n  func.return\n}")
    b = parse_module("func.func @f(%p : f64) {\n  %q = arith.mulf %p, %p : f64\n  func.return\n}")
    c = parse_module("func.func @f(%p : f64) {\n  %q = arith.addf %p, %p : f64\n  func.return\n}")
    assert structurally_equal(a, b)
    assert not structurally_equal(a, c)
