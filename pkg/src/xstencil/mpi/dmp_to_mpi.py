"""Lower dmp.swap to mpi point-to-point communication.

Everything that does not change between swaps is emitted once at function
entry: rank and size queries, the cartesian coordinate and neighbor-rank
arithmetic, send/receive buffer allocations (freed before returning), their
unwrapped pointers and the message tags. Each swap itself becomes

    pack loops -> irecv + isend per exchange -> one waitall -> unpack loops

Exchanges towards a missing neighbor talk to ``MPI_PROC_NULL``: their
requests complete immediately and their pack/unpack loops run zero times.
"""

from __future__ import annotations

from ..ir.attributes import StringAttr
from ..dmp.dialect import ExchangeAttr, GridAttr, swap_exchanges, swap_grid
from ..ir.core import Builder, InsertBefore, ModuleIR, Operation, Value
from ..ir.passes import PassError, register_pass
from ..ir.types import MemRefType, i1, i32, index
from ..ir.verifier import Diagnostic
from ..std.dialects import constant, func_name, is_declaration, make_for, ptr
from ..stencil.dialect import FieldType
from .dialect import datatype, request
from .topology import direction_index

TAG_STRIDE = 64


class _Entry:
    """Hoisted per-function state, built lazily at the top of the function body."""

    def __init__(self, func: Operation, grid: GridAttr):
        self.func = func
        self.grid = grid
        self.b = Builder(func.body, pos=0)
        self.consts: dict[tuple, Value] = {}
        self.neighbors: dict[tuple, tuple[Value, Value]] = {}
        self.buffers: list[Value] = []
        self.rank = self.b.create("mpi.comm_rank", [], [i32]).result
        self.size = self.b.create("mpi.comm_size", [], [i32]).result
        self.null = self.b.create("mpi.proc_null", [], [i32]).result
        self.coords: dict[int, Value] = {}

    def const(self, value: int, t=index) -> Value:
        key = (value, str(t))
        if key not in self.consts:
            self.consts[key] = constant(self.b, value, t)
        return self.consts[key]

    def coord(self, k: int) -> Value:
        if k not in self.coords:
            b = self.b
            q = b.create("arith.divsi", [self.rank, self.const(self.grid.strides[k], i32)], [i32]).result
            self.coords[k] = b.create("arith.remsi", [q, self.const(self.grid.dims[k], i32)], [i32]).result
        return self.coords[k]

    def neighbor(self, to) -> tuple[Value, Value]:
        """(rank of the neighbor or MPI_PROC_NULL, neighbor-exists flag)."""
        key = tuple(to)
        if key not in self.neighbors:
            b = self.b
            k = next(j for j, t in enumerate(to) if t)
            sign = to[k]
            stride = self.const(self.grid.strides[k], i32)
            if sign < 0:
                exists = b.create("arith.cmpi", [self.coord(k), self.const(0, i32)], [i1],
                                  {"predicate": _pred("sgt")}).result
                target = b.create("arith.subi", [self.rank, stride], [i32]).result
            else:
                target = b.create("arith.addi", [self.rank, stride], [i32]).result
                if k == 0:
                    # the slowest dimension: a neighbor exists iff its rank is in range
                    exists = b.create("arith.cmpi", [target, self.size], [i1], {"predicate": _pred("slt")}).result
                else:
                    exists = b.create("arith.cmpi", [self.coord(k), self.const(self.grid.dims[k] - 1, i32)], [i1],
                                      {"predicate": _pred("slt")}).result
            nbr = b.create("arith.select", [exists, target, self.null], [i32]).result
            self.neighbors[key] = (nbr, exists)
        return self.neighbors[key]

    def bound(self, exists: Value, n: int) -> Value:
        """Trip count ``n`` if the neighbor exists, else 0."""
        key = ("bound", exists, n)
        if key not in self.consts:
            self.consts[key] = self.b.create("arith.select", [exists, self.const(n), self.const(0)], [index]).result
        return self.consts[key]

    def buffer(self, t: MemRefType) -> tuple[Value, Value, Value, Value]:
        m = self.b.create("memref.alloc", [], [t]).result
        self.buffers.append(m)
        p, c, d = self.b.create("mpi.unwrap_memref", [m], [ptr, i32, datatype]).results
        return m, p, c, d


def _pred(name: str) -> StringAttr:
    return StringAttr(name)


def _copy_nest(b: Builder, entry: _Entry, size, exists: Value, src: Value, src_at, dst: Value, dst_at) -> None:
    """dst[dst_at + i] = src[src_at + i] for i in [0, size), skipped when ``exists`` is false."""
    c0, c1 = entry.const(0), entry.const(1)
    bound0 = entry.bound(exists, size[0])
    ivs = []
    cur = b
    for k, n in enumerate(size):
        loop = make_for(cur, c0, bound0 if k == 0 else entry.const(n), c1, parallel=True)
        ivs.append(loop.body.args[0])
        cur = Builder(loop.body)

    def shifted(offsets):
        out = []
        for iv, o in zip(ivs, offsets):
            out.append(iv if o == 0 else cur.create("arith.addi", [iv, entry.const(o)], [index]).result)
        return out

    si = shifted(src_at)
    di = shifted(dst_at)
    v = cur.create("memref.load", [src, *si], [src.type.element]).result
    cur.create("memref.store", [v, dst, *di])


def _lower_swap(swap: Operation, entry: _Entry, ordinal: int) -> None:
    region = swap.parent
    b = InsertBefore(swap)
    buf = swap.operands[0]
    if isinstance(buf.type, FieldType):
        mem = b.create("stencil.as_memref", [buf], [buf.type.as_memref()]).result
    else:
        mem = buf
    elem = mem.type.element
    exchanges: list[ExchangeAttr] = swap_exchanges(swap)
    plans = []
    for e in exchanges:
        t = MemRefType(e.size, elem)
        sbuf = entry.buffer(t)
        rbuf = entry.buffer(t)
        nbr, exists = entry.neighbor(e.to)
        send_tag = entry.const(ordinal * TAG_STRIDE + direction_index(e.to), i32)
        recv_tag = entry.const(ordinal * TAG_STRIDE + direction_index([-t for t in e.to]), i32)
        plans.append((e, sbuf, rbuf, nbr, exists, send_tag, recv_tag))
    zero = (0,) * len(mem.type.shape)
    for e, sbuf, _, _, exists, _, _ in plans:
        _copy_nest(b, entry, e.size, exists, mem, e.source, sbuf[0], zero)
    reqs = []
    for e, sbuf, rbuf, nbr, _, send_tag, recv_tag in plans:
        reqs.append(b.create("mpi.irecv", [rbuf[1], rbuf[2], rbuf[3], nbr, recv_tag], [request]).result)
        reqs.append(b.create("mpi.isend", [sbuf[1], sbuf[2], sbuf[3], nbr, send_tag], [request]).result)
    if reqs:
        b.create("mpi.waitall", reqs)
    for e, _, rbuf, _, exists, _, _ in plans:
        _copy_nest(b, entry, e.size, exists, rbuf[0], zero, mem, e.at)
    region.ops.remove(swap)


def lower_function(func: Operation) -> int:
    swaps = [op for op in func.walk() if op.name == "dmp.swap"]
    if not swaps:
        return 0
    grids = {swap_grid(s) for s in swaps}
    if len(grids) != 1:
        raise PassError(
            "swaps in one function must share a grid",
            [Diagnostic(f"grids {sorted(map(str, grids))}", f"func.func@{func_name(func)}", func.loc)],
        )
    for s in swaps:
        if not isinstance(s.operands[0].type, (FieldType, MemRefType)):
            raise PassError("dmp.swap operand is not a buffer")
    # swaps without exchanges (single-rank grids) vanish without any setup
    for s in [s for s in swaps if not swap_exchanges(s)]:
        s.parent.ops.remove(s)
    if all(not swap_exchanges(s) for s in swaps):
        return len(swaps)
    entry = _Entry(func, grids.pop())
    for ordinal, s in enumerate(swaps):
        if swap_exchanges(s):
            _lower_swap(s, entry, ordinal)
    for op in list(func.body.ops):
        if op.name == "func.return":
            rb = Builder(func.body, pos=func.body.ops.index(op))
            for m in entry.buffers:
                rb.create("memref.dealloc", [m])
    return len(swaps)


@register_pass("lower-dmp-to-mpi")
def lower_dmp_to_mpi(m: ModuleIR) -> ModuleIR:
    for f in m.functions():
        if not is_declaration(f):
            lower_function(f)
    return m
