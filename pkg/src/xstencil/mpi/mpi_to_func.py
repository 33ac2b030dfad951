"""Lower the mpi dialect to calls of external C functions.

MPI handles become plain ``i32`` constants taken from an ABI table, buffers
become raw pointers (``memref.extract_aligned_pointer_as_index`` +
``llvm.inttoptr``), and every ``!mpi.request`` becomes a pointer into one
``memref<Nxi32>`` request array allocated at function entry. Requests that
are completed together by one ``mpi.waitall`` get consecutive slots, so the
waitall turns into a single ``MPI_Waitall`` over a contiguous array.
"""

from __future__ import annotations

from ..ir.attributes import StringAttr, SymbolRefAttr
from ..ir.core import Builder, InsertBefore, ModuleIR, Operation, Region, Value
from ..ir.passes import PassError, register_pass
from ..ir.types import MemRefType, i32, index
from ..ir.verifier import Diagnostic
from ..std.dialects import constant, func_name, is_declaration, make_func, ptr
from .abi import EXTERNALS, AbiError, AbiTable
from .dialect import mpi_datatype_name, reduction_kind

REQUEST_BYTES = 4


def _request_root(v: Value) -> Value:
    """Follow ``mpi.test`` result requests back to the isend/irecv that made them."""
    while isinstance(v.owner, Operation) and v.owner.name == "mpi.test":
        v = v.owner.operands[0]
    return v


class _FuncLowering:
    def __init__(self, func: Operation, abi: AbiTable, used: set[str]):
        self.func = func
        self.abi = abi
        self.used = used
        self.map: dict[Value, Value] = {}
        self.entry = Builder(func.body, pos=0)
        self.consts: dict[tuple, Value] = {}
        self.slots: dict[Value, Value] = {}
        self.allocs: list[Value] = []

    # -- helpers -----------------------------------------------------------
    def v(self, x: Value) -> Value:
        while x in self.map:
            x = self.map[x]
        return x

    def const(self, value: int, t=i32) -> Value:
        key = (value, str(t))
        if key not in self.consts:
            self.consts[key] = constant(self.entry, value, t)
        return self.consts[key]

    def handle(self, name: str) -> Value:
        return self.const(self.abi[name])

    def const_ptr(self, name: str) -> Value:
        key = ("ptr", name)
        if key not in self.consts:
            self.consts[key] = self.entry.create("llvm.inttoptr", [self.const(self.abi[name], index)], [ptr]).result
        return self.consts[key]

    def pointer(self, b: Builder, mem: Value, offset: int = 0) -> Value:
        addr = b.create("memref.extract_aligned_pointer_as_index", [mem], [index]).result
        if offset:
            addr = b.create("arith.addi", [addr, self.const(offset, index)], [index]).result
        return b.create("llvm.inttoptr", [addr], [ptr]).result

    def scratch(self) -> tuple[Value, Value]:
        """A hoisted one-element i32 buffer and its pointer (for out-parameters)."""
        m = self.entry.create("memref.alloc", [], [MemRefType((1,), i32)]).result
        self.allocs.append(m)
        return m, self.pointer(self.entry, m)

    def call(self, b: Builder, op_name: str, args: list[Value]) -> Value:
        symbol, sig = self.abi.externals[op_name]
        if len(sig) != len(args):
            raise PassError(f"ABI signature of {symbol} takes {len(sig)} arguments, lowering passes {len(args)}")
        self.used.add(op_name)
        return b.create("func.call", args, [i32], {"callee": SymbolRefAttr(symbol)}).result

    # -- request slots -------------------------------------------------------
    def assign_slots(self) -> None:
        producers = [op for op in self.func.walk() if op.name in ("mpi.isend", "mpi.irecv")]
        if not producers:
            return
        order: list[Value] = []
        seen: set[Value] = set()
        for op in self.func.walk():
            if op.name == "mpi.waitall":
                for r in op.operands:
                    root = _request_root(r)
                    if root not in seen:
                        seen.add(root)
                        order.append(root)
        for op in producers:
            if op.result not in seen:
                seen.add(op.result)
                order.append(op.result)
        arr = self.entry.create("memref.alloc", [], [MemRefType((len(order),), i32)]).result
        self.allocs.append(arr)
        base = self.entry.create("memref.extract_aligned_pointer_as_index", [arr], [index]).result
        for k, root in enumerate(order):
            addr = base if k == 0 else self.entry.create("arith.addi", [base, self.const(REQUEST_BYTES * k, index)], [index]).result
            self.slots[root] = self.entry.create("llvm.inttoptr", [addr], [ptr]).result
        self.slot_index = {root: k for k, root in enumerate(order)}

    def slot(self, request: Value) -> Value:
        return self.slots[_request_root(request)]

    # -- ops -------------------------------------------------------------------
    def lower(self, op: Operation) -> None:
        b = InsertBefore(op)
        n = op.name
        args = [self.v(x) for x in op.operands]
        comm = self.handle("MPI_COMM_WORLD")
        if n == "mpi.unwrap_memref":
            mem = args[0]
            p = self.pointer(b, mem)
            count = self.const(mem.type.num_elements)
            dtype = self.handle(mpi_datatype_name(mem.type.element))
            self.map.update(zip(op.results, (p, count, dtype)))
        elif n == "mpi.proc_null":
            self.map[op.result] = self.handle("MPI_PROC_NULL")
        elif n in ("mpi.comm_rank", "mpi.comm_size"):
            slot, sp = self.scratch()
            self.call(b, n, [comm, sp])
            self.map[op.result] = b.create("memref.load", [slot, self.const(0, index)], [i32]).result
        elif n == "mpi.init":
            null = self.entry.create("llvm.inttoptr", [self.const(0, index)], [ptr]).result
            self.call(b, n, [null, null])
        elif n == "mpi.finalize":
            self.call(b, n, [])
        elif n == "mpi.send":
            self.call(b, n, args + [comm])
        elif n == "mpi.recv":
            self.call(b, n, args + [comm, self.const_ptr("MPI_STATUS_IGNORE")])
        elif n in ("mpi.isend", "mpi.irecv"):
            r = self.slot(op.result)
            self.call(b, n, args + [comm, r])
            self.map[op.result] = r
        elif n == "mpi.wait":
            self.call(b, n, [self.slot(op.operands[0]), self.const_ptr("MPI_STATUS_IGNORE")])
        elif n == "mpi.waitall":
            idx = [self.slot_index[_request_root(r)] for r in op.operands]
            if idx and idx == list(range(idx[0], idx[0] + len(idx))):
                self.call(b, n, [self.const(len(idx)), self.slot(op.operands[0]), self.const_ptr("MPI_STATUSES_IGNORE")])
            else:
                for r in op.operands:
                    self.call(b, "mpi.wait", [self.slot(r), self.const_ptr("MPI_STATUS_IGNORE")])
        elif n == "mpi.test":
            r = self.slot(op.operands[0])
            flag, fp = self.scratch()
            self.call(b, n, [r, fp, self.const_ptr("MPI_STATUS_IGNORE")])
            raw = b.create("memref.load", [flag, self.const(0, index)], [i32]).result
            done = b.create("arith.cmpi", [raw, self.const(0)], [op.results[0].type], {"predicate": StringAttr("ne")}).result
            self.map[op.results[0]] = done
            self.map[op.results[1]] = r
        elif n in ("mpi.reduce", "mpi.allreduce"):
            red = self.handle(f"MPI_{reduction_kind(op).upper()}")
            extra = [red, self.const(0), comm] if n == "mpi.reduce" else [red, comm]
            self.call(b, n, args + extra)
        elif n == "mpi.bcast":
            self.call(b, n, args + [self.const(0), comm])
        elif n == "mpi.gather":
            s, r, c, d = args
            self.call(b, n, [s, c, d, r, c, d, self.const(0), comm])
        else:
            raise PassError(f"no lowering for {n}")
        op.parent.ops.remove(op)

    def run(self) -> None:
        self.assign_slots()
        for op in [o for o in self.func.walk() if o.dialect == "mpi"]:
            self.lower(op)
        for op in self.func.walk():
            op.operands = [self.v(x) for x in op.operands]
        for op in list(self.func.body.ops):
            if op.name == "func.return":
                rb = Builder(self.func.body, pos=self.func.body.ops.index(op))
                for m in self.allocs:
                    rb.create("memref.dealloc", [m])


def _check_no_mpi_types(func: Operation) -> None:
    from .dialect import DatatypeType, RequestType, StatusType

    bad = (DatatypeType, RequestType, StatusType)

    def visit(region: Region):
        for a in region.args:
            if isinstance(a.type, bad):
                raise PassError(
                    "mpi values cross a region boundary",
                    [Diagnostic(f"region argument of type {a.type} cannot be lowered", f"func.func@{func_name(func)}", func.loc)],
                )
        for op in region.ops:
            for r in op.regions:
                visit(r)

    visit(func.body)


@register_pass("lower-mpi-to-func")
def lower_mpi_to_func(m: ModuleIR, abi: str | AbiTable | None = None) -> ModuleIR:
    """Replace mpi ops by ``func.call``s of the MPI C API (handles from ``abi``)."""
    if not isinstance(abi, AbiTable):
        try:
            abi = AbiTable.load(abi)
        except (OSError, AbiError) as exc:
            raise PassError(f"cannot load ABI table: {exc}") from None
    used: set[str] = set()
    for f in m.functions():
        if is_declaration(f) or not any(op.dialect == "mpi" for op in f.walk()):
            continue
        _check_no_mpi_types(f)
        _FuncLowering(f, abi, used).run()
    for op_name in sorted(used, key=list(EXTERNALS).index):
        symbol, sig = abi.externals[op_name]
        if m.lookup(symbol) is None:
            m.body.append(make_func(symbol, sig, (i32,), {"sym_visibility": StringAttr("private")}, body=False))
    return m
