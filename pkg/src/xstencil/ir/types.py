"""Builtin types shared by every dialect.

Dialect types (``!stencil.field``, ``!mpi.request`` ...) live next to their
dialect and register a body parser with :mod:`xstencil.ir.registry`.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import prod

import numpy as np


class TypeDesc:
    """Base class for all IR types. Subclasses are frozen dataclasses."""

    def __str__(self) -> str:  # pragma: no cover - every subclass overrides
        raise NotImplementedError


@dataclass(frozen=True)
class IntegerType(TypeDesc):
    width: int

    def __str__(self) -> str:
        return f"i{self.width}"

    @property
    def dtype(self) -> np.dtype:
        return np.dtype({1: np.bool_, 8: np.int8, 32: np.int32, 64: np.int64}[self.width])


@dataclass(frozen=True)
class FloatType(TypeDesc):
    width: int

    def __post_init__(self):
        if self.width not in (32, 64):
            raise ValueError(f"unsupported float width {self.width}")

    def __str__(self) -> str:
        return f"f{self.width}"

    @property
    def dtype(self) -> np.dtype:
        return np.dtype(np.float32 if self.width == 32 else np.float64)


@dataclass(frozen=True)
class IndexType(TypeDesc):
    width = 64

    def __str__(self) -> str:
        return "index"

    @property
    def dtype(self) -> np.dtype:
        return np.dtype(np.int64)


@dataclass(frozen=True)
class MemRefType(TypeDesc):
    """Statically shaped buffer, row-major."""

    shape: tuple[int, ...]
    element: TypeDesc

    def __post_init__(self):
        if not self.shape or any(d <= 0 for d in self.shape):
            raise ValueError(f"memref shape must be positive extents, got {self.shape}")
        if prod(self.shape) >= 2**63:
            raise ValueError("memref too large for a 64-bit index")

    def __str__(self) -> str:
        return "memref<" + "x".join(str(d) for d in self.shape) + f"x{self.element}>"

    @property
    def num_elements(self) -> int:
        return prod(self.shape)


@dataclass(frozen=True)
class FunctionType(TypeDesc):
    inputs: tuple[TypeDesc, ...]
    outputs: tuple[TypeDesc, ...]

    def __str__(self) -> str:
        ins = ", ".join(str(t) for t in self.inputs)
        if len(self.outputs) == 1 and not isinstance(self.outputs[0], FunctionType):
            outs = str(self.outputs[0])
        else:
            outs = "(" + ", ".join(str(t) for t in self.outputs) + ")"
        return f"({ins}) -> {outs}"


i1 = IntegerType(1)
i32 = IntegerType(32)
i64 = IntegerType(64)
f32 = FloatType(32)
f64 = FloatType(64)
index = IndexType()

SCALARS: dict[str, TypeDesc] = {
    "i1": i1,
    "i8": IntegerType(8),
    "i32": i32,
    "i64": i64,
    "f32": f32,
    "f64": f64,
    "index": index,
}


def is_int_like(t: TypeDesc) -> bool:
    return isinstance(t, (IntegerType, IndexType))


def is_scalar(t: TypeDesc) -> bool:
    return isinstance(t, (IntegerType, FloatType, IndexType))
