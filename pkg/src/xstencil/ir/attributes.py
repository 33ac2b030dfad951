"""Builtin attributes."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .types import FloatType, IndexType, IntegerType, TypeDesc, i64


class Attribute:
    """Base class for attributes. Subclasses are frozen dataclasses."""

    def __str__(self) -> str:  # pragma: no cover
        raise NotImplementedError


@dataclass(frozen=True)
class IntegerAttr(Attribute):
    value: int
    type: TypeDesc = i64

    def __post_init__(self):
        if isinstance(self.type, IndexType):
            lo, hi = -(2**63), 2**63 - 1
        elif isinstance(self.type, IntegerType):
            w = self.type.width
            lo, hi = (0, 1) if w == 1 else (-(2 ** (w - 1)), 2 ** (w - 1) - 1)
        else:
            raise ValueError(f"integer attribute cannot have type {self.type}")
        if not lo <= self.value <= hi:
            raise ValueError(f"integer {self.value} does not fit {self.type}")

    def __str__(self) -> str:
        return f"{self.value} : {self.type}"


def format_float(value: float) -> str:
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    text = repr(float(value))
    if "e" in text and "." not in text.split("e")[0]:
        mant, exp = text.split("e")
        text = f"{mant}.0e{exp}"
    return text


@dataclass(frozen=True)
class FloatAttr(Attribute):
    value: float
    type: FloatType

    def __post_init__(self):
        if not isinstance(self.type, FloatType):
            raise ValueError(f"float attribute cannot have type {self.type}")
        if self.type.width == 32:
            # store the value exactly as the f32 it denotes
            import numpy as np

            object.__setattr__(self, "value", float(np.float32(self.value)))

    def __eq__(self, other):
        if not isinstance(other, FloatAttr):
            return NotImplemented
        same = self.value == other.value or (math.isnan(self.value) and math.isnan(other.value))
        return same and self.type == other.type and math.copysign(1, self.value) == math.copysign(1, other.value)

    def __hash__(self):
        return hash((format_float(self.value), self.type))

    def __str__(self) -> str:
        return f"{format_float(self.value)} : {self.type}"


@dataclass(frozen=True)
class StringAttr(Attribute):
    value: str

    def __str__(self) -> str:
        return json.dumps(self.value)


@dataclass(frozen=True)
class ArrayAttr(Attribute):
    elements: tuple[Attribute, ...]

    def __str__(self) -> str:
        return "[" + ", ".join(str(e) for e in self.elements) + "]"

    def __iter__(self):
        return iter(self.elements)

    def __len__(self):
        return len(self.elements)


@dataclass(frozen=True)
class SymbolRefAttr(Attribute):
    name: str

    def __str__(self) -> str:
        return "@" + self.name


@dataclass(frozen=True)
class TypeAttr(Attribute):
    type: TypeDesc

    def __str__(self) -> str:
        return str(self.type)


@dataclass(frozen=True)
class UnitAttr(Attribute):
    def __str__(self) -> str:
        return "unit"


def int_array(values) -> ArrayAttr:
    return ArrayAttr(tuple(IntegerAttr(int(v)) for v in values))


def ints_of(attr: Attribute) -> tuple[int, ...]:
    if not isinstance(attr, ArrayAttr) or not all(isinstance(e, IntegerAttr) for e in attr.elements):
        raise ValueError(f"expected an array of integers, got {attr}")
    return tuple(e.value for e in attr.elements)
