"""The dmp dialect: declarative halo swaps over a cartesian rank grid."""

from __future__ import annotations

from dataclasses import dataclass

from ..ir.attributes import ArrayAttr, Attribute
from ..ir.core import Operation
from ..ir.lexer import ParseError
from ..ir.registry import register_attr, register_op
from ..ir.types import MemRefType
from ..ir.verifier import VerifyError, expect_attr, expect_counts
from ..stencil.dialect import FieldType


@dataclass(frozen=True)
class GridAttr(Attribute):
    """Cartesian rank topology; ranks are numbered row-major (last dim fastest)."""

    dims: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if not self.dims or any(d < 1 for d in self.dims):
            raise ValueError(f"grid dimensions must be positive, got {self.dims}")

    @classmethod
    def parse(cls, text: str) -> GridAttr:
        try:
            return cls(tuple(int(x) for x in text.lower().split("x")))
        except ValueError:
            raise ValueError(f"malformed grid {text!r} (expected e.g. 2x2)") from None

    @property
    def rank(self) -> int:
        return len(self.dims)

    @property
    def size(self) -> int:
        n = 1
        for d in self.dims:
            n *= d
        return n

    @property
    def strides(self) -> tuple[int, ...]:
        out, s = [], 1
        for d in reversed(self.dims):
            out.append(s)
            s *= d
        return tuple(reversed(out))

    def rank_of(self, coord) -> int:
        if len(coord) != self.rank or any(not 0 <= c < d for c, d in zip(coord, self.dims)):
            raise ValueError(f"coordinate {tuple(coord)} outside grid {self.dims}")
        return sum(c * s for c, s in zip(coord, self.strides))

    def coord_of(self, rank: int) -> tuple[int, ...]:
        if not 0 <= rank < self.size:
            raise ValueError(f"rank {rank} outside grid of {self.size}")
        return tuple((rank // s) % d for s, d in zip(self.strides, self.dims))

    def coords(self):
        return [self.coord_of(r) for r in range(self.size)]

    def neighbor(self, coord, offset) -> int | None:
        """Row-major rank of ``coord + offset``; None outside the grid (no wrap)."""
        if len(offset) != self.rank or any(abs(o) > 1 for o in offset):
            raise ValueError(f"neighbor offset {tuple(offset)} must have {self.rank} entries in -1..1")
        target = tuple(c + o for c, o in zip(coord, offset))
        if any(not 0 <= t < d for t, d in zip(target, self.dims)):
            return None
        return self.rank_of(target)

    def __str__(self) -> str:
        return "#dmp.grid<" + "x".join(map(str, self.dims)) + ">"


def _fmt(xs) -> str:
    return "[" + ", ".join(map(str, xs)) + "]"


@dataclass(frozen=True)
class ExchangeAttr(Attribute):
    """One halo exchange in buffer-index coordinates.

    Receive ``size`` elements at ``at`` from the neighbor at relative grid
    position ``to``; in return send the equally sized region at
    ``at + source_offset``.
    """

    at: tuple[int, ...]
    size: tuple[int, ...]
    source_offset: tuple[int, ...]
    to: tuple[int, ...]

    def __post_init__(self):
        for f in ("at", "size", "source_offset", "to"):
            object.__setattr__(self, f, tuple(int(x) for x in getattr(self, f)))
        n = len(self.at)
        if not (len(self.size) == len(self.source_offset) == len(self.to) == n) or n == 0:
            raise ValueError("exchange fields must all have the same, non-zero rank")
        if any(s < 1 for s in self.size):
            raise ValueError(f"exchange size entries must be >= 1, got {self.size}")
        if any(t not in (-1, 0, 1) for t in self.to) or not any(self.to):
            raise ValueError(f"exchange neighbor offset must be a non-zero vector over -1..1, got {self.to}")

    @property
    def rank(self) -> int:
        return len(self.at)

    @property
    def source(self) -> tuple[int, ...]:
        return tuple(a + o for a, o in zip(self.at, self.source_offset))

    @property
    def elements(self) -> int:
        n = 1
        for s in self.size:
            n *= s
        return n

    def recv_slices(self) -> tuple[slice, ...]:
        return tuple(slice(a, a + s) for a, s in zip(self.at, self.size))

    def send_slices(self) -> tuple[slice, ...]:
        return tuple(slice(a, a + s) for a, s in zip(self.source, self.size))

    def __str__(self) -> str:
        return (
            f"#dmp.exchange<at {_fmt(self.at)} size {_fmt(self.size)} "
            f"source offset {_fmt(self.source_offset)} to {_fmt(self.to)}>"
        )


def _parse_grid(p, body, loc):
    if not body:
        raise ParseError("#dmp.grid needs dimensions, e.g. #dmp.grid<2x2>", loc)
    try:
        return GridAttr.parse(body.replace(" ", ""))
    except ValueError as exc:
        raise ParseError(str(exc), loc) from None


def _parse_exchange(p, body, loc):
    sub = p.sub_parser(body or "", loc)
    sub.parse_keyword("at")
    at = sub.parse_int_list()
    sub.parse_keyword("size")
    size = sub.parse_int_list()
    sub.parse_keyword("source")
    sub.parse_keyword("offset")
    off = sub.parse_int_list()
    sub.parse_keyword("to")
    to = sub.parse_int_list()
    sub.expect_kind("EOF", "end of exchange")
    try:
        return ExchangeAttr(at, size, off, to)
    except ValueError as exc:
        raise ParseError(str(exc), loc) from None


register_attr("dmp.grid", _parse_grid)
register_attr("dmp.exchange", _parse_exchange)


def buffer_shape(t) -> tuple[int, ...]:
    if isinstance(t, FieldType):
        return t.bounds.shape
    if isinstance(t, MemRefType):
        return t.shape
    raise VerifyError(f"dmp.swap operand must be a field or memref, got {t}")


def swap_exchanges(op: Operation) -> list[ExchangeAttr]:
    swaps = expect_attr(op, "swaps", ArrayAttr)
    out = []
    for e in swaps.elements:
        if not isinstance(e, ExchangeAttr):
            raise VerifyError(f"dmp.swap 'swaps' must hold #dmp.exchange attributes, got {e}")
        out.append(e)
    return out


def swap_grid(op: Operation) -> GridAttr:
    return expect_attr(op, "grid", GridAttr)


def _verify_swap(op, ctx):
    expect_counts(op, 1, 0)
    shape = buffer_shape(op.operands[0].type)
    grid = swap_grid(op)
    if grid.rank > len(shape):
        raise VerifyError(f"grid {grid} has more dimensions than the swapped buffer")
    for e in swap_exchanges(op):
        if e.rank != len(shape):
            raise VerifyError(f"exchange {e} has rank {e.rank}, buffer has rank {len(shape)}")
        if any(t != 0 for t in e.to[grid.rank :]):
            raise VerifyError(f"exchange {e} points along a dimension the grid does not decompose")
        for name, corner in (("receive", e.at), ("send", e.source)):
            if any(c < 0 or c + s > n for c, s, n in zip(corner, e.size, shape)):
                raise VerifyError(f"exchange {e}: {name} region lies outside the buffer of shape {shape}")


register_op("dmp.swap", verify=_verify_swap)
