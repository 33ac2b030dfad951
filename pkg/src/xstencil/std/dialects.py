"""Lowering-target dialects: builtin types, func, arith, loop, memref, llvm.

These mirror the MLIR dialects of the same names closely enough that the
stencil, dmp and mpi lowerings have something concrete to target. ``loop``
plays the role of ``scf`` (sequential ``for`` with loop-carried values).
"""

from __future__ import annotations

from dataclasses import dataclass

from ..ir.attributes import (
    FloatAttr,
    IntegerAttr,
    StringAttr,
    SymbolRefAttr,
    TypeAttr,
    UnitAttr,
)
from ..ir.core import Operation, Region
from ..ir.lexer import ParseError
from ..ir.registry import register_op, register_type
from ..ir.types import (
    FloatType,
    FunctionType,
    IndexType,
    IntegerType,
    MemRefType,
    TypeDesc,
    i1,
    index,
    is_int_like,
)
from ..ir.verifier import VerifyError, expect_attr, expect_counts


@dataclass(frozen=True)
class PointerType(TypeDesc):
    """Opaque pointer (``!llvm.ptr``)."""

    def __str__(self) -> str:
        return "!llvm.ptr"


ptr = PointerType()


def _parse_ptr(p, body, loc):
    if body is not None:
        raise ParseError("!llvm.ptr takes no parameters", loc)
    return ptr


register_type("llvm.ptr", _parse_ptr)


# -- func ----------------------------------------------------------------
def func_type(op: Operation) -> FunctionType:
    return expect_attr(op, "function_type", TypeAttr).type


def func_name(op: Operation) -> str:
    return expect_attr(op, "sym_name", StringAttr).value


def is_declaration(op: Operation) -> bool:
    return op.name == "func.func" and not op.regions


def _verify_func(op, ctx):
    name = func_name(op)
    ft = func_type(op)
    if not isinstance(ft, FunctionType):
        raise VerifyError("function_type must be a function type")
    if op.operands or op.results:
        raise VerifyError("func.func takes no operands and has no results")
    if op.parent is not None and op.parent_op() is not None:
        raise VerifyError("func.func must be at module level")
    if len(op.regions) > 1:
        raise VerifyError("func.func has at most one region")
    if op.regions:
        body = op.body
        if [a.type for a in body.args] != list(ft.inputs):
            raise VerifyError(f"entry arguments of @{name} do not match its signature")
        if not body.ops or body.ops[-1].name != "func.return":
            raise VerifyError(f"@{name} must end with func.return")
    dupes = [o for o in ctx.module.ops if o.name == "func.func" and o.attributes.get("sym_name") == StringAttr(name)]
    if len(dupes) > 1:
        raise VerifyError(f"symbol @{name} defined more than once")


_FUNC_KEYS = ("sym_name", "function_type", "sym_visibility")


def _parse_func(p):
    private = False
    if p.at("private"):
        p.next()
        private = True
    name = p.parse_symbol()
    p.expect("(")
    args = []
    inputs: list[TypeDesc] = []
    is_def = p.peek().kind == "VALUE"
    if not p.accept(")"):
        while True:
            if is_def:
                tok = p.expect_kind("VALUE", "argument name")
                p.expect(":")
                t = p.parse_type()
                args.append((tok, t))
            else:
                t = p.parse_type()
            inputs.append(t)
            if p.accept(")"):
                break
            p.expect(",")
    outputs: list[TypeDesc] = []
    if p.accept("->"):
        outputs = p.parse_type_list()
    attrs = {}
    if p.at("attributes"):
        p.next()
        attrs = p.parse_attr_dict()
    attrs["sym_name"] = StringAttr(name)
    attrs["function_type"] = TypeAttr(FunctionType(tuple(inputs), tuple(outputs)))
    if private:
        attrs["sym_visibility"] = StringAttr("private")
    regions = []
    if p.at("{"):
        regions.append(p.parse_region(args, isolated=True))
    elif is_def:
        raise p.error("function with named arguments needs a body")
    return Operation("func.func", [], [], attrs, regions)


def _print_func(pr, op):
    ft = func_type(op)
    vis = op.attributes.get("sym_visibility")
    head = "func.func " + ("private " if vis == StringAttr("private") else "") + f"@{func_name(op)}("
    if op.regions:
        head += ", ".join(f"{pr.name(a)}: {a.type}" for a in op.body.args)
    else:
        head += pr.types(ft.inputs)
    head += ")"
    if ft.outputs:
        outs = ft.outputs
        head += " -> " + (str(outs[0]) if len(outs) == 1 else f"({pr.types(outs)})")
    extra = pr.attr_dict(op.attributes, skip=_FUNC_KEYS)
    if extra:
        head += " attributes " + extra
    pr.write(head)
    if op.regions:
        pr.write(" ")
        pr.region(op.body)


register_op("func.func", verify=_verify_func, parse=_parse_func, print=_print_func, isolated=True)


def _verify_return(op, ctx):
    expect_counts(op, results=0)
    parent = op.parent_op()
    if parent is None or parent.name != "func.func":
        raise VerifyError("func.return must be directly inside func.func")
    want = list(func_type(parent).outputs)
    if [v.type for v in op.operands] != want:
        raise VerifyError(f"returned types do not match function results {want}")


def _parse_return(p):
    vals = p.parse_optional_operands()
    if vals:
        tok = p.expect(":")
        p.check_operand_types(vals, p.parse_comma_types(), tok)
    return Operation("func.return", vals)


def _print_return(pr, op):
    pr.write("func.return")
    if op.operands:
        pr.write(f" {pr.values(op.operands)} : {pr.types(v.type for v in op.operands)}")


register_op("func.return", verify=_verify_return, parse=_parse_return, print=_print_return, terminator=True)


def _verify_call(op, ctx):
    callee = expect_attr(op, "callee", SymbolRefAttr).name
    target = ctx.lookup(callee)
    if target is None or target.name != "func.func":
        raise VerifyError(f"call to unknown function @{callee}")
    ft = func_type(target)
    if len(op.operands) != len(ft.inputs):
        raise VerifyError(f"call to @{callee} passes {len(op.operands)} argument(s), expected {len(ft.inputs)}")
    if [v.type for v in op.operands] != list(ft.inputs) or [r.type for r in op.results] != list(ft.outputs):
        raise VerifyError(f"call to @{callee} does not match its signature {ft}")


def _parse_call(p):
    callee = p.parse_symbol()
    args = p.parse_operand_list()
    tok = p.expect(":")
    ft = p.parse_function_type()
    p.check_operand_types(args, ft.inputs, tok)
    return Operation("func.call", args, ft.outputs, {"callee": SymbolRefAttr(callee)})


def _print_call(pr, op):
    ft = FunctionType(tuple(v.type for v in op.operands), tuple(r.type for r in op.results))
    pr.write(f"func.call {op.attributes['callee']}({pr.values(op.operands)}) : {ft}")


register_op("func.call", verify=_verify_call, parse=_parse_call, print=_print_call)


# -- arith ---------------------------------------------------------------
def _verify_constant(op, ctx):
    expect_counts(op, 0, 1)
    val = op.attributes.get("value")
    if not isinstance(val, (IntegerAttr, FloatAttr)):
        raise VerifyError("arith.constant needs an integer or float 'value'")
    if val.type != op.result.type:
        raise VerifyError(f"constant type {val.type} does not match result type {op.result.type}")


def _parse_constant(p):
    tok = p.peek()
    if tok.kind == "INT" and p.at(":", 1):
        # "arith.constant 2 : f64" spells a float with an integer literal
        save = p.i
        value = p.parse_int()
        p.next()
        t = p.parse_type()
        if isinstance(t, FloatType):
            return Operation("arith.constant", [], [t], {"value": FloatAttr(float(value), t)})
        p.i = save
    val = p.parse_attr()
    if not isinstance(val, (IntegerAttr, FloatAttr)):
        raise ParseError("expected numeric constant", tok.loc)
    return Operation("arith.constant", [], [val.type], {"value": val})


def _print_constant(pr, op):
    pr.write(f"arith.constant {op.attributes['value']}")


register_op("arith.constant", verify=_verify_constant, parse=_parse_constant, print=_print_constant)


FLOAT_BINARY = ("addf", "subf", "mulf", "divf")
INT_BINARY = ("addi", "subi", "muli", "divsi", "remsi", "andi", "ori", "xori")


def _binary(name: str, want_float: bool):
    full = f"arith.{name}"

    def verify(op, ctx):
        expect_counts(op, 2, 1)
        a, b = (v.type for v in op.operands)
        if a != b or op.result.type != a:
            raise VerifyError(f"{full} operands and result must have one type, got {a}, {b} -> {op.result.type}")
        if want_float and not isinstance(a, FloatType):
            raise VerifyError(f"{full} expects float operands, got {a}")
        if not want_float and not is_int_like(a):
            raise VerifyError(f"{full} expects integer or index operands, got {a}")

    def parse(p):
        lhs = p.parse_operand()
        p.expect(",")
        rhs = p.parse_operand()
        tok = p.expect(":")
        t = p.parse_type()
        p.check_operand_types([lhs, rhs], [t, t], tok)
        return Operation(full, [lhs, rhs], [t])

    def print_(pr, op):
        pr.write(f"{full} {pr.values(op.operands)} : {op.result.type}")

    register_op(full, verify=verify, parse=parse, print=print_)


for _n in FLOAT_BINARY:
    _binary(_n, True)
for _n in INT_BINARY:
    _binary(_n, False)

CMPI_PREDICATES = ("eq", "ne", "slt", "sle", "sgt", "sge")


def _verify_cmpi(op, ctx):
    expect_counts(op, 2, 1)
    pred = expect_attr(op, "predicate", StringAttr).value
    if pred not in CMPI_PREDICATES:
        raise VerifyError(f"unknown cmpi predicate '{pred}'")
    a, b = (v.type for v in op.operands)
    if a != b or not is_int_like(a):
        raise VerifyError("arith.cmpi compares two integers of one type")
    if op.result.type != i1:
        raise VerifyError("arith.cmpi produces i1")


def _parse_cmpi(p):
    pred = p.expect_kind("BARE", "predicate").text
    p.expect(",")
    lhs = p.parse_operand()
    p.expect(",")
    rhs = p.parse_operand()
    tok = p.expect(":")
    t = p.parse_type()
    p.check_operand_types([lhs, rhs], [t, t], tok)
    return Operation("arith.cmpi", [lhs, rhs], [i1], {"predicate": StringAttr(pred)})


def _print_cmpi(pr, op):
    pred = op.attributes["predicate"].value
    pr.write(f"arith.cmpi {pred}, {pr.values(op.operands)} : {op.operands[0].type}")


register_op("arith.cmpi", verify=_verify_cmpi, parse=_parse_cmpi, print=_print_cmpi)


def _verify_select(op, ctx):
    expect_counts(op, 3, 1)
    c, a, b = (v.type for v in op.operands)
    if c != i1:
        raise VerifyError("arith.select condition must be i1")
    if a != b or op.result.type != a:
        raise VerifyError("arith.select branches and result must share one type")


def _parse_select(p):
    c = p.parse_operand()
    p.expect(",")
    a = p.parse_operand()
    p.expect(",")
    b = p.parse_operand()
    tok = p.expect(":")
    t = p.parse_type()
    p.check_operand_types([c, a, b], [i1, t, t], tok)
    return Operation("arith.select", [c, a, b], [t])


def _print_select(pr, op):
    pr.write(f"arith.select {pr.values(op.operands)} : {op.result.type}")


register_op("arith.select", verify=_verify_select, parse=_parse_select, print=_print_select)


def _verify_index_cast(op, ctx):
    expect_counts(op, 1, 1)
    a, r = op.operands[0].type, op.result.type
    if not (is_int_like(a) and is_int_like(r)) or (isinstance(a, IndexType) == isinstance(r, IndexType)):
        raise VerifyError("arith.index_cast converts between index and an integer type")


def _parse_index_cast(p):
    v = p.parse_operand()
    tok = p.expect(":")
    src = p.parse_type()
    p.check_operand_types([v], [src], tok)
    p.parse_keyword("to")
    return Operation("arith.index_cast", [v], [p.parse_type()])


def _print_index_cast(pr, op):
    pr.write(f"arith.index_cast {pr.value(op.operands[0])} : {op.operands[0].type} to {op.result.type}")


register_op("arith.index_cast", verify=_verify_index_cast, parse=_parse_index_cast, print=_print_index_cast)


# -- loop (scf analog) -----------------------------------------------------
def _verify_for(op, ctx):
    if len(op.operands) < 3:
        raise VerifyError("loop.for needs lower bound, upper bound and step")
    if len(op.regions) != 1:
        raise VerifyError("loop.for has exactly one region")
    for v in op.operands[:3]:
        if not isinstance(v.type, IndexType):
            raise VerifyError(f"loop.for bounds and step must be index, got {v.type}")
    inits = [v.type for v in op.operands[3:]]
    if [r.type for r in op.results] != inits:
        raise VerifyError("loop.for results must match iter_args types")
    body = op.body
    if "parallel" in op.attributes and inits:
        raise VerifyError("a parallel loop.for cannot carry iter_args")
    if [a.type for a in body.args] != [index] + inits:
        raise VerifyError("loop.for region arguments must be (index, iter_args...)")
    last = body.ops[-1] if body.ops else None
    if inits or (last is not None and last.name == "loop.yield"):
        if last is None or last.name != "loop.yield":
            raise VerifyError("loop.for with iter_args must end with loop.yield")
        if [v.type for v in last.operands] != inits:
            raise VerifyError("loop.yield types must match iter_args types")


def _parse_for(p):
    iv = p.expect_kind("VALUE", "induction variable")
    p.expect("=")
    lo = p.parse_operand()
    p.parse_keyword("to")
    hi = p.parse_operand()
    p.parse_keyword("step")
    st = p.parse_operand()
    names, inits = [], []
    if p.at("iter_args"):
        p.next()
        p.expect("(")
        while True:
            names.append(p.expect_kind("VALUE", "iteration argument"))
            p.expect("=")
            inits.append(p.parse_operand())
            if p.accept(")"):
                break
            p.expect(",")
        tok = p.expect("->")
        types = p.parse_type_list()
        p.check_operand_types(inits, types, tok)
    attrs = {}
    if p.at("parallel"):
        p.next()
        attrs["parallel"] = UnitAttr()
    body = p.parse_region([(iv, index)] + [(n, v.type) for n, v in zip(names, inits)])
    return Operation("loop.for", [lo, hi, st] + inits, [v.type for v in inits], attrs, [body])


def _print_for(pr, op):
    lo, hi, st = op.operands[:3]
    body = op.body
    text = f"loop.for {pr.name(body.args[0])} = {pr.value(lo)} to {pr.value(hi)} step {pr.value(st)}"
    inits = op.operands[3:]
    if inits:
        pairs = ", ".join(f"{pr.name(a)} = {pr.value(v)}" for a, v in zip(body.args[1:], inits))
        text += f" iter_args({pairs}) -> ({pr.types(v.type for v in inits)})"
    if "parallel" in op.attributes:
        text += " parallel"
    pr.write(text + " ")
    pr.region(body)


register_op("loop.for", verify=_verify_for, parse=_parse_for, print=_print_for)


def _verify_yield(op, ctx):
    expect_counts(op, results=0)
    parent = op.parent_op()
    if parent is None or parent.name != "loop.for":
        raise VerifyError("loop.yield must be directly inside loop.for")


register_op("loop.yield", verify=_verify_yield, parse=lambda p: _parse_terminator(p, "loop.yield"),
            print=lambda pr, op: _print_terminator(pr, op), terminator=True)


def _parse_terminator(p, name):
    vals = p.parse_optional_operands()
    if vals:
        tok = p.expect(":")
        p.check_operand_types(vals, p.parse_comma_types(), tok)
    return Operation(name, vals)


def _print_terminator(pr, op):
    pr.write(op.name)
    if op.operands:
        pr.write(f" {pr.values(op.operands)} : {pr.types(v.type for v in op.operands)}")


# -- memref ----------------------------------------------------------------
def _memref_operand(op, i=0) -> MemRefType:
    t = op.operands[i].type
    if not isinstance(t, MemRefType):
        raise VerifyError(f"{op.name} expects a memref operand, got {t}")
    return t


def _verify_alloc(op, ctx):
    expect_counts(op, 0, 1)
    if not isinstance(op.result.type, MemRefType):
        raise VerifyError("memref.alloc must produce a memref")


def _parse_alloc(p):
    p.expect("(")
    p.expect(")")
    p.expect(":")
    return Operation("memref.alloc", [], [p.parse_type()])


register_op("memref.alloc", verify=_verify_alloc, parse=_parse_alloc,
            print=lambda pr, op: pr.write(f"memref.alloc() : {op.result.type}"))


def _verify_dealloc(op, ctx):
    expect_counts(op, 1, 0)
    _memref_operand(op)


def _parse_single_memref(p, name):
    v = p.parse_operand()
    tok = p.expect(":")
    p.check_operand_types([v], [p.parse_type()], tok)
    return Operation(name, [v])


register_op("memref.dealloc", verify=_verify_dealloc, parse=lambda p: _parse_single_memref(p, "memref.dealloc"),
            print=lambda pr, op: pr.write(f"memref.dealloc {pr.value(op.operands[0])} : {op.operands[0].type}"))


def _check_indices(op, mt: MemRefType, idx):
    if len(idx) != len(mt.shape):
        raise VerifyError(f"{op.name} needs {len(mt.shape)} indices, got {len(idx)}")
    for v in idx:
        if not isinstance(v.type, IndexType):
            raise VerifyError(f"{op.name} indices must be index, got {v.type}")


def _verify_load(op, ctx):
    if len(op.results) != 1 or op.regions:
        raise VerifyError("memref.load has one result")
    mt = _memref_operand(op)
    _check_indices(op, mt, op.operands[1:])
    if op.result.type != mt.element:
        raise VerifyError(f"memref.load result must be {mt.element}")


def _parse_indices(p):
    p.expect("[")
    if p.accept("]"):
        return []
    idx = p.parse_operand_list(None)
    p.expect("]")
    return idx


def _parse_load(p):
    m = p.parse_operand()
    idx = _parse_indices(p)
    tok = p.expect(":")
    t = p.parse_type()
    p.check_operand_types([m], [t], tok)
    if not isinstance(t, MemRefType):
        raise ParseError("memref.load expects a memref type", tok.loc)
    return Operation("memref.load", [m] + idx, [t.element])


def _print_load(pr, op):
    m, *idx = op.operands
    pr.write(f"memref.load {pr.value(m)}[{pr.values(idx)}] : {m.type}")


register_op("memref.load", verify=_verify_load, parse=_parse_load, print=_print_load)


def _verify_store(op, ctx):
    if op.results or op.regions or len(op.operands) < 2:
        raise VerifyError("memref.store takes a value, a memref and indices")
    mt = _memref_operand(op, 1)
    _check_indices(op, mt, op.operands[2:])
    if op.operands[0].type != mt.element:
        raise VerifyError(f"memref.store value must be {mt.element}, got {op.operands[0].type}")


def _parse_store(p):
    v = p.parse_operand()
    p.expect(",")
    m = p.parse_operand()
    idx = _parse_indices(p)
    tok = p.expect(":")
    t = p.parse_type()
    p.check_operand_types([m], [t], tok)
    return Operation("memref.store", [v, m] + idx)


def _print_store(pr, op):
    v, m, *idx = op.operands
    pr.write(f"memref.store {pr.value(v)}, {pr.value(m)}[{pr.values(idx)}] : {m.type}")


register_op("memref.store", verify=_verify_store, parse=_parse_store, print=_print_store)


def _verify_extract_ptr(op, ctx):
    expect_counts(op, 1, 1)
    _memref_operand(op)
    if not isinstance(op.result.type, IndexType):
        raise VerifyError("extract_aligned_pointer_as_index produces index")


def _parse_extract_ptr(p):
    v = p.parse_operand()
    tok = p.expect(":")
    ft_in = p.parse_type_list()
    p.check_operand_types([v], ft_in, tok)
    p.expect("->")
    return Operation("memref.extract_aligned_pointer_as_index", [v], [p.parse_type()])


register_op(
    "memref.extract_aligned_pointer_as_index",
    verify=_verify_extract_ptr,
    parse=_parse_extract_ptr,
    print=lambda pr, op: pr.write(
        f"memref.extract_aligned_pointer_as_index {pr.value(op.operands[0])} : ({op.operands[0].type}) -> index"
    ),
)


# -- llvm ----------------------------------------------------------------
def _verify_inttoptr(op, ctx):
    expect_counts(op, 1, 1)
    if not is_int_like(op.operands[0].type) or op.result.type != ptr:
        raise VerifyError("llvm.inttoptr converts an integer to !llvm.ptr")


def _parse_inttoptr(p):
    v = p.parse_operand()
    tok = p.expect(":")
    p.check_operand_types([v], [p.parse_type()], tok)
    p.parse_keyword("to")
    return Operation("llvm.inttoptr", [v], [p.parse_type()])


register_op(
    "llvm.inttoptr",
    verify=_verify_inttoptr,
    parse=_parse_inttoptr,
    print=lambda pr, op: pr.write(f"llvm.inttoptr {pr.value(op.operands[0])} : {op.operands[0].type} to !llvm.ptr"),
)


# -- construction helpers ------------------------------------------------
def constant(b, value, type: TypeDesc):
    attr = FloatAttr(float(value), type) if isinstance(type, FloatType) else IntegerAttr(int(value), type)
    return b.create("arith.constant", [], [type], {"value": attr}).result


def make_func(name: str, inputs, outputs=(), attrs=None, body: bool = True) -> Operation:
    a = {"sym_name": StringAttr(name), "function_type": TypeAttr(FunctionType(tuple(inputs), tuple(outputs)))}
    a.update(attrs or {})
    regions = [Region(list(inputs))] if body else []
    return Operation("func.func", [], [], a, regions)


def make_for(b, lo, hi, step, inits=(), parallel: bool = False) -> Operation:
    """``parallel`` asserts that iterations are independent (no iteration reads
    what another one writes), which lets executors run them as one vector step."""
    body = Region([index] + [v.type for v in inits])
    attrs = {"parallel": UnitAttr()} if parallel else {}
    return b.create("loop.for", [lo, hi, step, *inits], [v.type for v in inits], attrs, [body])

