import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xstencil.execution.machine import Machine, run_to_completion
from xstencil.execution.runtime import Memory
from xstencil.execution.serial import InterpreterError
from xstencil.ir import parse_module, verify_module


def call(text: str, *args, name=None):
    m = parse_module(text)
    assert verify_module(m) == []
    func = m.lookup(name) if name else m.functions()[0]
    mach = Machine(m, memory=Memory())
    return run_to_completion(mach.call(func, list(args))), mach


def test_integer_add():
    (r,), _ = call("func.func @f() -> i32 {\n  %a = arith.constant 42 : i32\n  %b = arith.addi %a, %a : i32\n  func.return %b : i32\n}")
    assert r == 84


def test_float_add():
    (r,), _ = call("func.func @f(%a : f64, %b : f64) -> f64 {\n  %c = arith.addf %a, %b : f64\n  func.return %c : f64\n}",
                   np.float64(1.5), np.float64(2.5))
    assert r == 4.0


def test_integer_wraps():
    (r,), _ = call("func.func @f() -> i32 {\n  %a = arith.constant 2147483647 : i32\n  %o = arith.constant 1 : i32\n"
                   "  %b = arith.addi %a, %o : i32\n  func.return %b : i32\n}")
    assert r == -2147483648


def test_f32_arithmetic_rounds_in_single_precision():
    (r,), _ = call("func.func @f(%a : f32, %b : f32) -> f32 {\n  %c = arith.addf %a, %b : f32\n  func.return %c : f32\n}",
                   np.float32(1.0), np.float32(1e-8))
    assert r == np.float32(1.0) and np.asarray(r).dtype == np.float32


def test_mixed_operand_types_rejected():
    m = parse_module("func.func @f(%a : f32, %b : f32) {\n  %c = arith.addf %a, %b : f32\n  func.return\n}")
    m.functions()[0].body.args[1].type = parse_module(
        "func.func @g(%x : f64) {\n  func.return\n}").functions()[0].body.args[0].type
    assert verify_module(m)


LOOP_FILL = """func.func @f(%buf : memref<8xindex>, %lo : index, %hi : index) {
  %c1 = arith.constant 1 : index
  loop.for %i = %lo to %hi step %c1 {
    memref.store %i, %buf[%i] : memref<8xindex>
  }
  func.return
}"""


def test_loop_visits_half_open_range():
    buf = np.full(8, -1, dtype=np.int64)
    call(LOOP_FILL, buf, 0, 4)
    assert buf.tolist() == [0, 1, 2, 3, -1, -1, -1, -1]


def test_empty_loop_never_runs():
    buf = np.full(8, -1, dtype=np.int64)
    call(LOOP_FILL, buf, 0, 0)
    assert (buf == -1).all()


def test_nested_loops_are_row_major():
    text = """func.func @f(%buf : memref<6xindex>) {
  %c0 = arith.constant 0 : index
  %c1 = arith.constant 1 : index
  %c2 = arith.constant 2 : index
  %c3 = arith.constant 3 : index
  %n = loop.for %i = %c0 to %c3 step %c1 iter_args(%k = %c0) -> (index) {
    %m = loop.for %j = %c0 to %c2 step %c1 iter_args(%q = %k) -> (index) {
      %row = arith.muli %i, %c2 : index
      %flat = arith.addi %row, %j : index
      memref.store %flat, %buf[%q] : memref<6xindex>
      %next = arith.addi %q, %c1 : index
      loop.yield %next : index
    }
    loop.yield %m : index
  }
  func.return
}"""
    buf = np.full(6, -1, dtype=np.int64)
    call(text, buf)
    assert buf.tolist() == [0, 1, 2, 3, 4, 5]


TRIP = """func.func @f(%lo : index, %hi : index, %step : index) -> index {
  %c0 = arith.constant 0 : index
  %c1 = arith.constant 1 : index
  %n = loop.for %i = %lo to %hi step %step iter_args(%k = %c0) -> (index) {
    %next = arith.addi %k, %c1 : index
    loop.yield %next : index
  }
  func.return %n : index
}"""


@settings(max_examples=60, deadline=None)
@given(st.integers(-20, 20), st.integers(-20, 20), st.integers(1, 7))
def test_trip_count_closed_form(lo, hi, step):
    (n,), _ = call(TRIP, lo, hi, step)
    assert n == max(0, math.ceil((hi - lo) / step))


def test_store_then_load_and_zero_init():
    text = """func.func @f() -> (f64, f64) {
  %b = memref.alloc() : memref<4x4xf64>
  %i = arith.constant 1 : index
  %j = arith.constant 2 : index
  %v = arith.constant 7.0 : f64
  %fresh = memref.load %b[%j, %j] : memref<4x4xf64>
  memref.store %v, %b[%i, %j] : memref<4x4xf64>
  %r = memref.load %b[%i, %j] : memref<4x4xf64>
  memref.dealloc %b : memref<4x4xf64>
  func.return %r, %fresh : f64, f64
}"""
    (r, fresh), _ = call(text)
    assert r == 7.0 and fresh == 0.0


@settings(max_examples=50, deadline=None)
@given(st.floats(allow_nan=False, width=64))
def test_store_load_is_bitwise(x):
    text = """func.func @f(%b : memref<3xf64>, %x : f64) -> f64 {
  %i = arith.constant 2 : index
  memref.store %x, %b[%i] : memref<3xf64>
  %r = memref.load %b[%i] : memref<3xf64>
  func.return %r : f64
}"""
    (r,), _ = call(text, np.zeros(3), np.float64(x))
    assert np.float64(r).tobytes() == np.float64(x).tobytes()


def test_out_of_bounds_load_traps_with_path():
    text = """func.func @f(%b : memref<108x108xf32>) -> f32 {
  %i = arith.constant 108 : index
  %j = arith.constant 0 : index
  %r = memref.load %b[%i, %j] : memref<108x108xf32>
  func.return %r : f32
}"""
    with pytest.raises(InterpreterError, match=r"@f/memref.load: index 108 out of bounds in dimension 0"):
        call(text, np.zeros((108, 108), np.float32))


def test_call_to_defined_function():
    text = """func.func @id(%x : f64) -> f64 {
  func.return %x : f64
}
func.func @main(%x : f64) -> f64 {
  %r = func.call @id(%x) : (f64) -> f64
  func.return %r : f64
}"""
    (r,), _ = call(text, np.float64(3.25), name="main")
    assert r == 3.25


def test_call_arity_mismatch_is_diagnosed():
    m = parse_module("""func.func @id(%x : f64) -> f64 {
  func.return %x : f64
}
func.func @main(%x : f64) {
  %r = func.call @id(%x, %x) : (f64, f64) -> f64
  func.return
}""")
    diags = verify_module(m)
    assert diags and "func.call" in diags[0].path


def test_step_must_be_positive():
    with pytest.raises(InterpreterError, match="step must be positive"):
        call(TRIP, 0, 4, 0)
