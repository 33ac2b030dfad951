"""Lower stencil ops to explicit loop nests over memrefs.

A field of bounds ``G`` becomes a ``memref`` of ``G.shape``; logical index
``i`` lives at buffer index ``i - G.lb``. Every temp is represented by a
buffer plus the logical coordinate of its first element:

* ``stencil.load`` aliases the field, unless the same field is stored to
  later in the region, in which case the temp is copied out first;
* ``stencil.apply`` writes straight into the field when its only use is a
  store over exactly its bounds and nothing in between reads that field;
  otherwise it fills a scratch buffer allocated once at function entry;
* ``stencil.store`` of a scratch temp is a copy loop nest.

All generated nests are ``parallel``: their iterations are independent.
"""

from __future__ import annotations

from ..ir.core import Builder, InsertBefore, ModuleIR, Operation, Region, Value
from ..ir.passes import PassError, register_pass
from ..ir.types import FunctionType, MemRefType, index
from ..ir.attributes import TypeAttr
from ..std.dialects import constant, func_type, is_declaration, make_for
from .dialect import Bounds, FieldType, TempType, store_bounds


def _stores_after(region: Region, pos: int, field: Value) -> list[Operation]:
    return [
        op
        for later in region.ops[pos + 1 :]
        for op in later.walk()
        if op.name == "stencil.store" and op.operands[1] is field
    ]


class _FuncLowering:
    def __init__(self, func: Operation):
        self.func = func
        self.entry = Builder(func.body, pos=0)
        self.consts: dict[int, Value] = {}
        self.origin: dict[Value, tuple[int, ...]] = {}
        self.temps: dict[Value, tuple[Value, tuple[int, ...]]] = {}
        self.direct: dict[Operation, Operation] = {}  # store -> apply writing into its field
        self.allocs: list[Value] = []
        self.map: dict[Value, Value] = {}

    def const(self, v: int) -> Value:
        if v not in self.consts:
            self.consts[v] = constant(self.entry, v, index)
        return self.consts[v]

    def scratch(self, bounds: Bounds, element) -> Value:
        m = self.entry.create("memref.alloc", [], [MemRefType(bounds.shape, element)]).result
        self.allocs.append(m)
        return m

    # -- loop nests ----------------------------------------------------------------
    def nest(self, b: Builder, bounds: Bounds) -> tuple[Builder, list[Value]]:
        ivs, cur = [], b
        for lb, ub in zip(bounds.lb, bounds.ub):
            loop = make_for(cur, self.const(lb), self.const(ub), self.const(1), parallel=True)
            ivs.append(loop.body.args[0])
            cur = Builder(loop.body)
        return cur, ivs

    def at(self, b: Builder, ivs, shift) -> list[Value]:
        return [iv if s == 0 else b.create("arith.addi", [iv, self.const(s)], [index]).result for iv, s in zip(ivs, shift)]

    def copy(self, b: Builder, bounds: Bounds, src, dst) -> None:
        (sm, so), (dm, do) = src, dst
        inner, ivs = self.nest(b, bounds)
        v = inner.create("memref.load", [sm, *self.at(inner, ivs, [-o for o in so])], [sm.type.element]).result
        inner.create("memref.store", [v, dm, *self.at(inner, ivs, [-o for o in do])])

    # -- per-op -----------------------------------------------------------------------
    def plan_region(self, region: Region) -> None:
        """Decide which applies can write directly into their target field."""
        for i, op in enumerate(region.ops):
            if op.name != "stencil.apply" or len(op.results) != 1:
                continue
            r = op.result
            uses = [o for o in region.walk() if r in o.operands]
            if len(uses) != 1 or uses[0].name != "stencil.store" or uses[0].parent is not region:
                continue
            store = uses[0]
            field = store.operands[1]
            if store_bounds(store) != r.type.bounds:
                continue
            j = region.ops.index(store)
            between = [o for mid in region.ops[i : j + 1] for o in mid.walk()]
            if any(o.name == "stencil.load" and o.operands[0] is field for o in between):
                continue
            if any(o.name == "stencil.store" and o is not store and o.operands[1] is field for o in between):
                continue
            self.direct[store] = op

    def lower_region(self, region: Region) -> None:
        self.plan_region(region)
        i = 0
        while i < len(region.ops):
            op = region.ops[i]
            for sub in op.regions:
                if op.name != "stencil.apply":
                    self.lower_region(sub)
            if op.dialect != "stencil":
                i += 1
                continue
            self.lower_op(op, region, i, InsertBefore(op))
            i = region.ops.index(op)
            region.ops.remove(op)

    def field(self, v: Value) -> tuple[Value, tuple[int, ...]]:
        return v, self.origin[v]

    def lower_op(self, op: Operation, region: Region, pos: int, b: Builder) -> None:
        n = op.name
        if n == "stencil.load":
            f = op.operands[0]
            tb = op.result.type.bounds
            if tb is None:
                raise PassError("unresolved temp bounds; run propagate-bounds first")
            if _stores_after(region, pos, f):
                buf = self.scratch(tb, op.result.type.element)
                self.copy(b, tb, self.field(f), (buf, tb.lb))
                self.temps[op.result] = (buf, tb.lb)
            else:
                self.temps[op.result] = self.field(f)
        elif n == "stencil.apply":
            self.lower_apply(op, region, b)
        elif n == "stencil.store":
            if op in self.direct:
                return
            self.copy(b, store_bounds(op), self.temps[op.operands[0]], self.field(op.operands[1]))
        elif n == "stencil.as_memref":
            self.map[op.result] = op.operands[0]
        else:
            raise PassError(f"no loop lowering for {n}")

    def lower_apply(self, op: Operation, region: Region, b: Builder) -> None:
        out_b = op.results[0].type.bounds
        if out_b is None:
            raise PassError("unresolved apply bounds; run propagate-bounds first")
        store = next((s for s, a in self.direct.items() if a is op), None)
        if store is not None:
            dests = [self.field(store.operands[1])]
        else:
            dests = []
            for r in op.results:
                buf = self.scratch(r.type.bounds, r.type.element)
                dests.append((buf, r.type.bounds.lb))
                self.temps[r] = dests[-1]
        if store is not None:
            self.temps[op.result] = dests[0]
        inner, ivs = self.nest(b, out_b)
        srcs = {arg: self.temps[v] for arg, v in zip(op.body.args, op.operands)}
        mapping: dict[Value, Value] = {}
        for o in op.body.ops:
            if o.name == "stencil.access":
                mem, org = srcs[o.operands[0]]
                off = o.attributes["offset"].offset
                idx = self.at(inner, ivs, [d - g for d, g in zip(off, org)])
                mapping[o.result] = inner.create("memref.load", [mem, *idx], [o.result.type]).result
            elif o.name == "stencil.return":
                for v, (mem, org) in zip(o.operands, dests):
                    inner.create("memref.store", [mapping.get(v, v), mem, *self.at(inner, ivs, [-g for g in org])])
            else:
                inner.insert(o.clone(mapping))

    def run(self) -> None:
        for op in [self.func] + list(self.func.walk()):
            for r in (op.results if op is not self.func else []):
                if isinstance(r.type, FieldType):
                    self.origin[r] = r.type.bounds.lb
            for reg in op.regions:
                for a in reg.args:
                    if isinstance(a.type, FieldType):
                        self.origin[a] = a.type.bounds.lb
        self.lower_region(self.func.body)
        for op in self.func.walk():
            op.operands = [self.map.get(v, v) for v in op.operands]
            for reg in op.regions:
                for a in reg.args:
                    if isinstance(a.type, FieldType):
                        a.type = a.type.as_memref()
            for r in op.results:
                if isinstance(r.type, FieldType):
                    r.type = r.type.as_memref()
                if isinstance(r.type, TempType):
                    raise PassError("a stencil temp escapes into a non-stencil op")
        ft = func_type(self.func)
        self.func.attributes["function_type"] = TypeAttr(
            FunctionType(tuple(a.type for a in self.func.body.args), ft.outputs)
        )
        for op in list(self.func.body.ops):
            if op.name == "func.return":
                rb = Builder(self.func.body, pos=self.func.body.ops.index(op))
                for m in self.allocs:
                    rb.create("memref.dealloc", [m])


@register_pass("lower-stencil-to-loops", "convert-stencil-to-loops")
def lower_stencil_to_loops(m: ModuleIR) -> ModuleIR:
    """Lower every (non-reference) function's stencil ops to parallel loop nests."""
    for f in m.functions():
        if is_declaration(f) or "dmp.global" in f.attributes:
            continue
        if any(op.dialect == "stencil" for op in f.walk()):
            _FuncLowering(f).run()
    return m
