"""Scalar semantics shared by the interpreters: two's-complement wrapping,
C-style signed division, comparison predicates and typed float constants."""

from __future__ import annotations

import operator

import numpy as np

from ..ir.attributes import FloatAttr, IntegerAttr
from ..ir.types import FloatType, IndexType, IntegerType, TypeDesc


def width_of(t: TypeDesc) -> int:
    if isinstance(t, IndexType):
        return 64
    if isinstance(t, IntegerType):
        return t.width
    raise TypeError(f"not an integer type: {t}")


def wrap(value: int, width: int) -> int:
    if width == 1:
        return value & 1
    half = 1 << (width - 1)
    return ((value + half) & ((1 << width) - 1)) - half


def divsi(a: int, b: int, width: int) -> int:
    if b == 0:
        raise ZeroDivisionError("integer division by zero")
    q = abs(a) // abs(b)
    return wrap(q if (a < 0) == (b < 0) else -q, width)


def remsi(a: int, b: int, width: int) -> int:
    if b == 0:
        raise ZeroDivisionError("integer remainder by zero")
    r = abs(a) % abs(b)
    return wrap(r if a >= 0 else -r, width)


CMP = {
    "eq": operator.eq,
    "ne": operator.ne,
    "slt": operator.lt,
    "sle": operator.le,
    "sgt": operator.gt,
    "sge": operator.ge,
}

FLOAT_OPS = {
    "arith.addf": operator.add,
    "arith.subf": operator.sub,
    "arith.mulf": operator.mul,
    "arith.divf": operator.truediv,
}


def constant_value(attr):
    """Python/numpy value of an arith.constant attribute."""
    if isinstance(attr, FloatAttr):
        return attr.type.dtype.type(attr.value)
    if isinstance(attr, IntegerAttr):
        return attr.value
    raise TypeError(f"unsupported constant {attr}")


def int_binary(name: str, a: int, b: int, width: int) -> int:
    if name == "arith.addi":
        return wrap(a + b, width)
    if name == "arith.subi":
        return wrap(a - b, width)
    if name == "arith.muli":
        return wrap(a * b, width)
    if name == "arith.divsi":
        return divsi(a, b, width)
    if name == "arith.remsi":
        return remsi(a, b, width)
    if name == "arith.andi":
        return wrap(a & b, width)
    if name == "arith.ori":
        return wrap(a | b, width)
    if name == "arith.xori":
        return wrap(a ^ b, width)
    raise KeyError(name)


def is_float(t: TypeDesc) -> bool:
    return isinstance(t, FloatType)
