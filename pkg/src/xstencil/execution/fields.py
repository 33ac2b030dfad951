"""Field data containers and deterministic initial states."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..ir.core import Operation
from ..ir.types import MemRefType
from ..stencil.dialect import Bounds, FieldType


@dataclass
class FieldData:
    """A field buffer: allocation bounds (halo included) plus row-major values."""

    name: str
    bounds: Bounds
    data: np.ndarray

    def __post_init__(self):
        if tuple(self.data.shape) != self.bounds.shape:
            raise ValueError(f"field {self.name}: data shape {self.data.shape} != bounds shape {self.bounds.shape}")

    @property
    def element(self) -> np.dtype:
        return self.data.dtype

    def region(self, b: Bounds) -> np.ndarray:
        return self.data[b.slices(self.bounds.lb)]

    def copy(self) -> FieldData:
        return FieldData(self.name, self.bounds, self.data.copy())

    def bitwise_equal(self, other: FieldData) -> bool:
        return (
            self.bounds == other.bounds
            and self.data.dtype == other.data.dtype
            and self.data.tobytes() == other.data.tobytes()
        )


def arg_bounds(t) -> Bounds:
    if isinstance(t, FieldType):
        return t.bounds
    if isinstance(t, MemRefType):
        return Bounds((0,) * len(t.shape), t.shape)
    raise TypeError(f"not a buffer type: {t}")


def buffer_args(func: Operation) -> list[int]:
    """Indices of the entry arguments that are field or memref buffers."""
    return [i for i, a in enumerate(func.body.args) if isinstance(a.type, (FieldType, MemRefType))]


def init_fields(func: Operation, seed: int = 0) -> list[FieldData]:
    """Deterministic initial state for every buffer argument of ``func``.

    The first argument of each distinct type is drawn from a seeded
    generator (uniform in [0, 1)); later arguments of the same type copy
    it, so time-slot buffers of one field start out identical (including
    their halos, which act as fixed boundary values).
    """
    out: list[FieldData] = []
    first: dict[object, np.ndarray] = {}
    for k in buffer_args(func):
        t = func.body.args[k].type
        b = arg_bounds(t)
        if t not in first:
            rng = np.random.default_rng([seed, k])
            first[t] = rng.random(b.shape).astype(t.element.dtype)
        out.append(FieldData(f"arg{k}", b, first[t].copy()))
    return out
