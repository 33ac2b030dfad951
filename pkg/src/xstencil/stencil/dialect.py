"""The stencil dialect: bounded field/temp types and the core operations.

Bounds are half-open per dimension. The textual form keeps the
``[lb,ub]`` bracket spelling, so ``!stencil.field<[0,128]xf64>`` holds the
128 points 0..127.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..ir.attributes import Attribute
from ..ir.core import Operation, Region
from ..ir.lexer import ParseError
from ..ir.registry import register_attr, register_op, register_type
from ..ir.types import FloatType, MemRefType, TypeDesc
from ..ir.verifier import VerifyError, expect_attr, expect_counts


@dataclass(frozen=True)
class Bounds:
    lb: tuple[int, ...]
    ub: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "lb", tuple(int(x) for x in self.lb))
        object.__setattr__(self, "ub", tuple(int(x) for x in self.ub))
        if not self.lb or len(self.lb) != len(self.ub):
            raise ValueError("bounds need matching, non-empty lower and upper corners")
        if any(l >= u for l, u in zip(self.lb, self.ub)):
            raise ValueError(f"empty bounds {self}")

    @property
    def rank(self) -> int:
        return len(self.lb)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(u - l for l, u in zip(self.lb, self.ub))

    @property
    def size(self) -> int:
        n = 1
        for s in self.shape:
            n *= s
        return n

    def widen(self, extent) -> Bounds:
        """Grow by per-dimension ``(min_offset, max_offset)`` pairs."""
        return Bounds(
            tuple(l + lo for l, (lo, _) in zip(self.lb, extent)),
            tuple(u + hi for u, (_, hi) in zip(self.ub, extent)),
        )

    def shift(self, offset) -> Bounds:
        return Bounds(tuple(l + o for l, o in zip(self.lb, offset)), tuple(u + o for u, o in zip(self.ub, offset)))

    def contains(self, other: Bounds) -> bool:
        return other.rank == self.rank and all(
            a <= c and d <= b for a, b, c, d in zip(self.lb, self.ub, other.lb, other.ub)
        )

    def union(self, other: Bounds) -> Bounds:
        return Bounds(
            tuple(map(min, self.lb, other.lb)),
            tuple(map(max, self.ub, other.ub)),
        )

    def slices(self, origin) -> tuple[slice, ...]:
        """Array slices selecting these bounds inside an allocation whose
        first element sits at logical coordinate ``origin``."""
        return tuple(slice(l - o, u - o) for l, u, o in zip(self.lb, self.ub, origin))

    def __str__(self) -> str:
        return "x".join(f"[{l},{u}]" for l, u in zip(self.lb, self.ub))


def _split_dims(body: str) -> list[str]:
    parts, depth, cur = [], 0, []
    for ch in body:
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
        if ch == "x" and depth == 0:
            parts.append("".join(cur).strip())
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur).strip())
    return parts


_DIM = re.compile(r"^\[\s*(-?\d+)\s*,\s*(-?\d+)\s*\]$")


def _parse_shape(p, body, loc, allow_unknown: bool):
    if not body:
        raise ParseError("stencil types need a <bounds x element> body", loc)
    parts = _split_dims(body)
    if len(parts) < 2:
        raise ParseError("stencil type needs at least one dimension", loc)
    elem = p.sub_parser(parts[-1], loc).parse_type_only()
    if not isinstance(elem, FloatType):
        raise ParseError(f"stencil element type must be f32 or f64, got {elem}", loc)
    dims = parts[:-1]
    if all(d == "?" for d in dims):
        if not allow_unknown:
            raise ParseError("stencil.field bounds must be statically known", loc)
        return None, len(dims), elem
    lb, ub = [], []
    for d in dims:
        m = _DIM.match(d)
        if not m:
            raise ParseError(f"malformed dimension '{d}'", loc)
        lb.append(int(m.group(1)))
        ub.append(int(m.group(2)))
    try:
        return Bounds(tuple(lb), tuple(ub)), len(dims), elem
    except ValueError as exc:
        raise ParseError(str(exc), loc) from None


@dataclass(frozen=True)
class FieldType(TypeDesc):
    bounds: Bounds
    element: FloatType

    @property
    def rank(self) -> int:
        return self.bounds.rank

    def __str__(self) -> str:
        return f"!stencil.field<{self.bounds}x{self.element}>"

    def as_memref(self) -> MemRefType:
        return MemRefType(self.bounds.shape, self.element)


@dataclass(frozen=True)
class TempType(TypeDesc):
    bounds: Bounds | None
    rank: int
    element: FloatType

    def __post_init__(self):
        if self.bounds is not None and self.bounds.rank != self.rank:
            raise ValueError("temp rank does not match its bounds")

    def __str__(self) -> str:
        dims = str(self.bounds) if self.bounds is not None else "x".join("?" * self.rank)
        return f"!stencil.temp<{dims}x{self.element}>"

    def with_bounds(self, bounds: Bounds | None) -> TempType:
        return TempType(bounds, self.rank, self.element)


def _parse_field(p, body, loc):
    b, _, elem = _parse_shape(p, body, loc, allow_unknown=False)
    return FieldType(b, elem)


def _parse_temp(p, body, loc):
    b, rank, elem = _parse_shape(p, body, loc, allow_unknown=True)
    return TempType(b, rank, elem)


register_type("stencil.field", _parse_field)
register_type("stencil.temp", _parse_temp)


@dataclass(frozen=True)
class IndexAttr(Attribute):
    """Relative offset of a stencil.access."""

    offset: tuple[int, ...]

    def __str__(self) -> str:
        return "#stencil.index<[" + ", ".join(str(o) for o in self.offset) + "]>"


@dataclass(frozen=True)
class BoundsAttr(Attribute):
    """Store range."""

    bounds: Bounds

    def __str__(self) -> str:
        b = self.bounds
        return f"#stencil.bounds<[{', '.join(map(str, b.lb))}], [{', '.join(map(str, b.ub))}]>"


def _parse_index_attr(p, body, loc):
    sub = p.sub_parser(body or "", loc)
    off = sub.parse_int_list()
    sub.expect_kind("EOF", "end of index")
    return IndexAttr(off)


def _parse_bounds_body(p, body, loc) -> Bounds:
    sub = p.sub_parser(body or "", loc)
    lb = sub.parse_int_list()
    sub.expect(",")
    ub = sub.parse_int_list()
    sub.expect_kind("EOF", "end of bounds")
    try:
        return Bounds(lb, ub)
    except ValueError as exc:
        raise ParseError(str(exc), loc) from None


register_attr("stencil.index", _parse_index_attr)
register_attr("stencil.bounds", lambda p, body, loc: BoundsAttr(_parse_bounds_body(p, body, loc)))


# -- operations -----------------------------------------------------------
def _verify_load(op, ctx):
    expect_counts(op, 1, 1)
    ft, tt = op.operands[0].type, op.result.type
    if not isinstance(ft, FieldType) or not isinstance(tt, TempType):
        raise VerifyError("stencil.load maps a !stencil.field to a !stencil.temp")
    if ft.element != tt.element or ft.rank != tt.rank:
        raise VerifyError("stencil.load field and temp must agree on rank and element type")
    if tt.bounds is not None and not ft.bounds.contains(tt.bounds):
        raise VerifyError(f"field too small: load needs {tt.bounds}, field has {ft.bounds}")


def _parse_load(p):
    f = p.parse_operand()
    tok = p.expect(":")
    ft = p.parse_type()
    p.check_operand_types([f], [ft], tok)
    p.expect("->")
    return Operation("stencil.load", [f], [p.parse_type()])


register_op(
    "stencil.load",
    verify=_verify_load,
    parse=_parse_load,
    print=lambda pr, op: pr.write(f"stencil.load {pr.value(op.operands[0])} : {op.operands[0].type} -> {op.result.type}"),
)


def _verify_apply(op, ctx):
    if len(op.regions) != 1:
        raise VerifyError("stencil.apply has exactly one region")
    if not op.results:
        raise VerifyError("stencil.apply produces at least one temp")
    body = op.body
    if [a.type for a in body.args] != [v.type for v in op.operands]:
        raise VerifyError("stencil.apply region arguments must match its operands")
    ranks = {r.type.rank for r in op.results if isinstance(r.type, TempType)}
    if len(ranks) != 1 or not all(isinstance(r.type, TempType) for r in op.results):
        raise VerifyError("stencil.apply results must be temps of one rank")
    bnds = {r.type.bounds for r in op.results}
    if len(bnds) != 1:
        raise VerifyError("stencil.apply results must share one bounds")
    for v in op.operands:
        if isinstance(v.type, TempType) and v.type.rank != next(iter(ranks)):
            raise VerifyError("stencil.apply operands must have the rank of its results")
    if not body.ops or body.ops[-1].name != "stencil.return":
        raise VerifyError("stencil.apply region must end with stencil.return")
    ret = body.ops[-1]
    if [v.type for v in ret.operands] != [r.type.element for r in op.results]:
        raise VerifyError("stencil.return values must match the element types of the apply results")


def _parse_apply(p):
    p.expect("(")
    args, operands = [], []
    if not p.accept(")"):
        while True:
            name = p.expect_kind("VALUE", "region argument")
            p.expect("=")
            v = p.parse_operand()
            tok = p.expect(":")
            t = p.parse_type()
            p.check_operand_types([v], [t], tok)
            args.append((name, t))
            operands.append(v)
            if p.accept(")"):
                break
            p.expect(",")
    p.expect("->")
    results = p.parse_type_list()
    body = p.parse_region(args)
    return Operation("stencil.apply", operands, results, {}, [body])


def _print_apply(pr, op):
    pairs = ", ".join(f"{pr.name(a)} = {pr.value(v)} : {v.type}" for a, v in zip(op.body.args, op.operands))
    pr.write(f"stencil.apply({pairs}) -> ({pr.types(r.type for r in op.results)}) ")
    pr.region(op.body)


register_op("stencil.apply", verify=_verify_apply, parse=_parse_apply, print=_print_apply)


def enclosing_apply(op: Operation) -> Operation | None:
    for anc in op.ancestors():
        if anc.name == "stencil.apply":
            return anc
    return None


def _verify_access(op, ctx):
    expect_counts(op, 1, 1)
    off = expect_attr(op, "offset", IndexAttr).offset
    v = op.operands[0]
    if not isinstance(v.type, TempType):
        raise VerifyError(f"stencil.access reads a !stencil.temp, got {v.type}")
    apply = enclosing_apply(op)
    if apply is None or v.owner is not apply.body:
        raise VerifyError("stencil.access operand must be an argument of the enclosing stencil.apply")
    if len(off) != v.type.rank:
        raise VerifyError(f"stencil.access offset has rank {len(off)} but the temp has rank {v.type.rank}")
    if op.result.type != v.type.element:
        raise VerifyError("stencil.access result must be the temp element type")


def _parse_access(p):
    v = p.parse_operand()
    off = p.parse_int_list()
    t = v.type
    if p.at(":"):
        tok = p.next()
        t = p.parse_type()
        if isinstance(t, TempType):
            p.check_operand_types([v], [t], tok)
        elif isinstance(v.type, TempType) and t == v.type.element:
            t = v.type  # ": f64" names the result type
        else:
            raise ParseError(f"stencil.access type {t} does not match operand {v.type}", tok.loc)
    if not isinstance(t, TempType):
        raise ParseError("stencil.access operand must be a temp", p.peek().loc)
    return Operation("stencil.access", [v], [t.element], {"offset": IndexAttr(off)})


def _print_access(pr, op):
    off = ", ".join(str(o) for o in op.attributes["offset"].offset)
    pr.write(f"stencil.access {pr.value(op.operands[0])}[{off}] : {op.operands[0].type}")


register_op("stencil.access", verify=_verify_access, parse=_parse_access, print=_print_access)


def _verify_return(op, ctx):
    expect_counts(op, results=0)
    parent = op.parent_op()
    if parent is None or parent.name != "stencil.apply":
        raise VerifyError("stencil.return must be directly inside stencil.apply")
    if len(op.operands) != len(parent.results):
        raise VerifyError(f"stencil.return returns {len(op.operands)} value(s), apply has {len(parent.results)} result(s)")


def _parse_return(p):
    vals = p.parse_optional_operands()
    if vals:
        tok = p.expect(":")
        p.check_operand_types(vals, p.parse_comma_types(), tok)
    return Operation("stencil.return", vals)


def _print_return(pr, op):
    pr.write("stencil.return")
    if op.operands:
        pr.write(f" {pr.values(op.operands)} : {pr.types(v.type for v in op.operands)}")


register_op("stencil.return", verify=_verify_return, parse=_parse_return, print=_print_return, terminator=True)


def store_bounds(op: Operation) -> Bounds:
    return expect_attr(op, "bounds", BoundsAttr).bounds


def _verify_store(op, ctx):
    expect_counts(op, 2, 0)
    t, f = (v.type for v in op.operands)
    if not isinstance(t, TempType) or not isinstance(f, FieldType):
        raise VerifyError("stencil.store writes a !stencil.temp into a !stencil.field")
    b = store_bounds(op)
    if b.rank != f.rank or t.rank != f.rank:
        raise VerifyError(f"stencil.store range has rank {b.rank}, field rank {f.rank}, temp rank {t.rank}")
    if t.element != f.element:
        raise VerifyError("stencil.store element types differ")
    if not f.bounds.contains(b):
        raise VerifyError(f"stencil.store range {b} exceeds field bounds {f.bounds}")
    if t.bounds is not None and not t.bounds.contains(b):
        raise VerifyError(f"stencil.store range {b} exceeds temp bounds {t.bounds}")


def _parse_store(p):
    t = p.parse_operand()
    p.parse_keyword("to")
    f = p.parse_operand()
    p.expect("(")
    p.expect("<")
    lb = p.parse_int_list()
    p.expect(",")
    ub = p.parse_int_list()
    p.expect(">")
    p.expect(")")
    tok = p.expect(":")
    tt = p.parse_type()
    p.parse_keyword("to")
    ft = p.parse_type()
    p.check_operand_types([t, f], [tt, ft], tok)
    try:
        b = Bounds(lb, ub)
    except ValueError as exc:
        raise ParseError(str(exc), tok.loc) from None
    return Operation("stencil.store", [t, f], [], {"bounds": BoundsAttr(b)})


def _print_store(pr, op):
    t, f = op.operands
    b = store_bounds(op)
    rng = f"<[{', '.join(map(str, b.lb))}], [{', '.join(map(str, b.ub))}]>"
    pr.write(f"stencil.store {pr.value(t)} to {pr.value(f)} ({rng}) : {t.type} to {f.type}")


register_op("stencil.store", verify=_verify_store, parse=_parse_store, print=_print_store)


def _verify_as_memref(op, ctx):
    expect_counts(op, 1, 1)
    ft = op.operands[0].type
    if not isinstance(ft, FieldType) or op.result.type != ft.as_memref():
        raise VerifyError("stencil.as_memref views a field as a memref of the same shape")


def _parse_as_memref(p):
    f = p.parse_operand()
    tok = p.expect(":")
    p.check_operand_types([f], [p.parse_type()], tok)
    p.expect("->")
    return Operation("stencil.as_memref", [f], [p.parse_type()])


register_op(
    "stencil.as_memref",
    verify=_verify_as_memref,
    parse=_parse_as_memref,
    print=lambda pr, op: pr.write(
        f"stencil.as_memref {pr.value(op.operands[0])} : {op.operands[0].type} -> {op.result.type}"
    ),
)


def make_apply(b, operands, result_types) -> Operation:
    return b.create("stencil.apply", operands, result_types, {}, [Region([v.type for v in operands])])
