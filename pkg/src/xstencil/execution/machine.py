"""Executor for decomposed programs at every lowering level.

One :class:`Machine` runs the program of one simulated rank. It understands

* stencil ops (evaluated whole-array, as in the serial interpreter),
* ``dmp.swap`` (performed natively through the rank's communicator),
* mpi ops (against the simulated runtime), and
* the fully lowered form: ``memref``/``llvm`` pointer ops and ``func.call``
  of the MPI C API declared in the ABI table.

Execution is a generator: operations that may block (MPI waits, receives,
collectives) ``yield`` to the scheduler. Loops marked ``parallel`` whose
bodies are straight-line arithmetic and memory accesses are executed as a
single numpy vector step; every operation is counted with its number of
dynamic executions in :attr:`Machine.counts`.
"""

from __future__ import annotations

from collections import Counter

import numpy as np

from ..dmp.dialect import swap_exchanges, swap_grid
from ..ir.core import ModuleIR, Operation, Region
from ..ir.types import MemRefType
from ..mpi.abi import AbiTable
from ..mpi.dialect import reduction_kind
from ..mpi.topology import direction_index
from ..std.dialects import func_name, is_declaration
from .runtime import Comm, Memory, MPIError
from .scalars import CMP, FLOAT_OPS, constant_value, int_binary, width_of, wrap
from .serial import InterpreterError, SerialInterpreter

_INT_OPS = {f"arith.{n}" for n in ("addi", "subi", "muli", "divsi", "remsi", "andi", "ori", "xori")}
_VECTOR_OK = _INT_OPS | set(FLOAT_OPS) | {
    "arith.constant",
    "arith.cmpi",
    "arith.select",
    "arith.index_cast",
    "memref.load",
    "memref.store",
    "loop.yield",
}
_NP_INT = {
    "arith.addi": np.add,
    "arith.subi": np.subtract,
    "arith.muli": np.multiply,
    "arith.andi": np.bitwise_and,
    "arith.ori": np.bitwise_or,
    "arith.xori": np.bitwise_xor,
}
_INT_DTYPE = {1: np.int8, 8: np.int8, 32: np.int32, 64: np.int64}


def _vector_int(name: str, a, b, width: int):
    dt = _INT_DTYPE[width]
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    if name in _NP_INT:
        out = _NP_INT[name](a, b)
    else:
        if np.any(b == 0):
            raise ZeroDivisionError("integer division by zero")
        q = np.abs(a) // np.abs(b)
        if name == "arith.divsi":
            out = np.where((a < 0) != (b < 0), -q, q)
        else:
            r = np.abs(a) % np.abs(b)
            out = np.where(a < 0, -r, r)
    if width == 1:
        return (out & 1).astype(np.int8)
    return out.astype(dt)


class _Nest:
    """Static facts about a parallel loop nest (computed once per loop op)."""

    __slots__ = ("vectorizable", "depth")

    def __init__(self, vectorizable: bool, depth: int):
        self.vectorizable = vectorizable
        self.depth = depth


class Machine:
    def __init__(self, module: ModuleIR, comm: Comm | None = None, abi: AbiTable | None = None, memory: Memory | None = None):
        self.module = module
        self.comm = comm
        self.abi = abi or (comm.abi if comm else None)
        self.memory = comm.memory if comm else memory
        self.counts: Counter = Counter()
        self._serial = SerialInterpreter(module)
        self._blocking: dict[int, bool] = {}
        self._nests: dict[int, _Nest] = {}
        self.where = ""  # innermost potentially blocking op being executed
        self._externals = {sym: op for op, (sym, _) in (self.abi.externals.items() if self.abi else ())}

    # -- static analysis ---------------------------------------------------------------
    def blocks(self, op: Operation) -> bool:
        key = id(op)
        b = self._blocking.get(key)
        if b is None:
            if op.name in ("func.call", "dmp.swap") or op.dialect == "mpi":
                b = True
            else:
                b = any(self.blocks(o) for r in op.regions for o in r.ops)
            self._blocking[key] = b
        return b

    def nest(self, loop: Operation) -> _Nest:
        key = id(loop)
        n = self._nests.get(key)
        if n is None:
            inside = set()
            for o in loop.walk():
                inside.update(o.results)
                for r in o.regions:
                    inside.update(r.args)

            def check(op: Operation) -> tuple[bool, int]:
                if op.name == "loop.for":
                    if "parallel" not in op.attributes or len(op.operands) > 3:
                        return False, 0
                    if op is not loop and any(v in inside for v in op.operands[:3]):
                        return False, 0
                    depth = 0
                    for o in op.body.ops:
                        ok, d = check(o)
                        if not ok:
                            return False, 0
                        depth = max(depth, d)
                    return True, depth + 1
                return op.name in _VECTOR_OK and not op.regions, 0

            ok, depth = check(loop)
            n = _Nest(ok and not self.blocks(loop), depth)
            self._nests[key] = n
        return n

    # -- calls --------------------------------------------------------------------------
    def call(self, func: Operation, args: list):
        """Generator running ``func``; returns its results."""
        env = dict(zip(func.body.args, args))
        results = yield from self.run_region(func.body, env, "@" + func_name(func))
        return results or []

    def run_region(self, region: Region, env: dict, path: str):
        for op in region.ops:
            name = op.name
            if name == "func.return" or name == "loop.yield":
                self.counts[name] += 1
                return [env[v] for v in op.operands]
            if self.blocks(op):
                yield from self.run_blocking(op, env, path)
            else:
                self.run_op(op, env, path)
        return None

    # -- non-blocking ops -----------------------------------------------------------------
    def run_op(self, op: Operation, env: dict, path: str, weight: int = 1):
        name = op.name
        self.counts[name] += weight
        get = env.__getitem__
        if name == "arith.constant":
            env[op.result] = constant_value(op.attributes["value"])
        elif name in FLOAT_OPS:
            a, b = map(get, op.operands)
            env[op.result] = FLOAT_OPS[name](a, b)
        elif name in _INT_OPS:
            a, b = map(get, op.operands)
            w = width_of(op.result.type)
            try:
                if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
                    env[op.result] = _vector_int(name, a, b, w)
                else:
                    env[op.result] = int_binary(name, int(a), int(b), w)
            except ZeroDivisionError as exc:
                raise InterpreterError(f"{path}/{name}: {exc}") from None
        elif name == "arith.cmpi":
            a, b = map(get, op.operands)
            r = CMP[op.attributes["predicate"].value](a, b)
            env[op.result] = r.astype(np.int8) if isinstance(r, np.ndarray) else int(r)
        elif name == "arith.select":
            c, a, b = map(get, op.operands)
            env[op.result] = np.where(c != 0, a, b) if isinstance(c, np.ndarray) else (a if c else b)
        elif name == "arith.index_cast":
            v = get(op.operands[0])
            w = width_of(op.result.type)
            env[op.result] = v.astype(_INT_DTYPE[w]) if isinstance(v, np.ndarray) else wrap(int(v), w)
        elif name == "memref.load":
            mem = get(op.operands[0])
            idx = self._indices(op, env, mem, path)
            env[op.result] = mem[idx]
        elif name == "memref.store":
            val = get(op.operands[0])
            mem = get(op.operands[1])
            mem[self._indices(op, env, mem, path, first=2)] = val
        elif name == "memref.alloc":
            t: MemRefType = op.result.type
            env[op.result] = self._mem(path).alloc(t.shape, t.element.dtype)
        elif name == "memref.dealloc":
            try:
                self._mem(path).free(get(op.operands[0]))
            except MPIError as exc:
                raise InterpreterError(f"{path}/{name}: {exc}") from None
        elif name == "memref.extract_aligned_pointer_as_index":
            env[op.result] = self._mem(path).address(get(op.operands[0]))
        elif name == "llvm.inttoptr":
            env[op.result] = int(get(op.operands[0]))
        elif name == "loop.for":
            if "parallel" in op.attributes and self.nest(op).vectorizable:
                self.run_parallel(op, env, path, weight)
            else:
                self.run_for_plain(op, env, path)
        elif op.dialect == "stencil":
            self._serial.run_op(op, env, path)
        else:
            raise InterpreterError(f"{path}/{name}: operation not supported by the executor")

    def _mem(self, path):
        if self.memory is None:
            raise InterpreterError(f"{path}: memory operations need a rank memory")
        return self.memory

    def _indices(self, op, env, mem, path, first=1):
        idx = tuple(env[v] for v in op.operands[first:])
        for k, (i, n) in enumerate(zip(idx, mem.shape)):
            if isinstance(i, np.ndarray):
                if i.size and (i.min() < 0 or i.max() >= n):
                    raise InterpreterError(f"{path}/{op.name}: index out of bounds in dimension {k} (extent {n})")
            elif not 0 <= i < n:
                raise InterpreterError(f"{path}/{op.name}: index {i} out of bounds in dimension {k} (extent {n})")
        return idx

    def _loop_range(self, op, env, path):
        lo, hi, step = (int(env[v]) for v in op.operands[:3])
        if step <= 0:
            raise InterpreterError(f"{path}/loop.for: step must be positive, got {step}")
        return lo, hi, step

    def run_for_plain(self, op, env, path):
        lo, hi, step = self._loop_range(op, env, path)
        body = op.body
        carried = [env[v] for v in op.operands[3:]]
        for i in range(lo, hi, step):
            env[body.args[0]] = i
            env.update(zip(body.args[1:], carried))
            for inner in body.ops:
                if inner.name == "loop.yield":
                    self.counts["loop.yield"] += 1
                    carried = [env[v] for v in inner.operands]
                else:
                    self.run_op(inner, env, path)
        env.update(zip(op.results, carried))

    def run_parallel(self, op, env, path, weight=1, axis=0, depth=None):
        """Run a parallel nest as one vector step: induction variables become
        broadcastable index arrays, one axis per nesting level."""
        if depth is None:
            depth = self.nest(op).depth
        lo, hi, step = self._loop_range(op, env, path)
        trips = len(range(lo, hi, step))
        if trips == 0:
            return
        shape = [1] * depth
        shape[axis] = trips
        env[op.body.args[0]] = np.arange(lo, hi, step, dtype=np.int64).reshape(shape)
        w = weight * trips
        for inner in op.body.ops:
            if inner.name == "loop.for":
                self.counts["loop.for"] += w
                self.run_parallel(inner, env, path, w, axis + 1, depth)
            elif inner.name == "loop.yield":
                self.counts["loop.yield"] += w
            else:
                self.run_op(inner, env, path, w)

    # -- blocking ops ---------------------------------------------------------------------
    def run_blocking(self, op: Operation, env: dict, path: str):
        name = op.name
        self.counts[name] += 1
        self.where = f"{path}/{name}" + (f" at {op.loc}" if op.loc else "")
        get = env.__getitem__
        if name == "loop.for":
            lo, hi, step = self._loop_range(op, env, path)
            body = op.body
            carried = [env[v] for v in op.operands[3:]]
            for i in range(lo, hi, step):
                env[body.args[0]] = i
                env.update(zip(body.args[1:], carried))
                out = yield from self.run_region(body, env, path)
                if out is not None:
                    carried = out
            env.update(zip(op.results, carried))
        elif name == "func.call":
            sym = op.attributes["callee"].name
            callee = self.module.lookup(sym)
            if callee is None:
                raise InterpreterError(f"{path}: call to unknown function @{sym}")
            args = [get(v) for v in op.operands]
            if is_declaration(callee):
                self.counts[f"call@{sym}"] += 1
                res = yield from self.external(sym, args, path)
                results = [res] if op.results else []
            else:
                results = yield from self.call(callee, args)
            env.update(zip(op.results, results))
        elif name == "dmp.swap":
            yield from self.native_swap(op, env, path)
        elif op.dialect == "mpi":
            yield from self.mpi_op(op, env, path)
        else:
            raise InterpreterError(f"{path}/{name}: operation not supported by the executor")

    def _comm(self, path) -> Comm:
        if self.comm is None:
            raise InterpreterError(f"{path}: communication needs a simulated MPI job")
        return self.comm

    def native_swap(self, op, env, path):
        comm = self._comm(path)
        buf = env[op.operands[0]]
        grid = swap_grid(op)
        if grid.size != comm.size:
            raise InterpreterError(f"{path}: swap over grid {grid} in a job of {comm.size} ranks")
        coord = grid.coord_of(comm.rank)
        null = comm.abi["MPI_PROC_NULL"]
        handles = []
        for e in swap_exchanges(op):
            nbr = grid.neighbor(coord, e.to[: grid.rank])
            peer = null if nbr is None else nbr
            handles.append(comm.irecv(buf[e.recv_slices()], peer, direction_index([-t for t in e.to])))
            handles.append(comm.isend(np.ascontiguousarray(buf[e.send_slices()]), peer, direction_index(e.to)))
        yield from comm.wait(handles)

    def mpi_op(self, op, env, path):
        comm = self._comm(path)
        name = op.name
        a = [env[v] for v in op.operands]
        mem = self.memory
        try:
            if name in ("mpi.init", "mpi.finalize"):
                pass
            elif name == "mpi.comm_rank":
                env[op.result] = comm.rank
            elif name == "mpi.comm_size":
                env[op.result] = comm.size
            elif name == "mpi.proc_null":
                env[op.result] = comm.abi["MPI_PROC_NULL"]
            elif name == "mpi.unwrap_memref":
                arr = a[0]
                dname = {"float64": "MPI_DOUBLE", "float32": "MPI_FLOAT", "int32": "MPI_INT", "int64": "MPI_LONG_LONG"}[
                    arr.dtype.name
                ]
                env.update(zip(op.results, (mem.address(arr), arr.size, comm.abi[dname])))
            elif name in ("mpi.send", "mpi.recv", "mpi.isend", "mpi.irecv"):
                p, count, dt, peer, tag = a
                buf = mem.view(p, int(count), comm.dtype(dt))
                if name == "mpi.send":
                    yield from comm.send(buf, peer, tag)
                elif name == "mpi.recv":
                    yield from comm.recv(buf, peer, tag)
                elif name == "mpi.isend":
                    env[op.result] = comm.isend(buf, peer, tag)
                else:
                    env[op.result] = comm.irecv(buf, peer, tag)
            elif name in ("mpi.wait", "mpi.waitall"):
                yield from comm.wait(a)
            elif name == "mpi.test":
                done = comm.test(a[0])
                env[op.results[0]] = int(done)
                env[op.results[1]] = comm.abi["MPI_REQUEST_NULL"] if done else a[0]
            elif name in ("mpi.reduce", "mpi.allreduce"):
                s, r, count, dt = a
                dtype = comm.dtype(dt)
                sb, rb = mem.view(s, int(count), dtype), mem.view(r, int(count), dtype)
                kind = reduction_kind(op)
                if name == "mpi.reduce":
                    yield from comm.reduce(sb, rb, kind)
                else:
                    yield from comm.allreduce(sb, rb, kind)
            elif name == "mpi.bcast":
                p, count, dt = a
                yield from comm.bcast(mem.view(p, int(count), comm.dtype(dt)))
            elif name == "mpi.gather":
                s, r, count, dt = a
                dtype = comm.dtype(dt)
                rb = mem.view(r, int(count) * comm.size, dtype) if comm.rank == 0 else None
                yield from comm.gather(mem.view(s, int(count), dtype), rb)
            else:
                raise InterpreterError(f"{path}/{name}: operation not supported by the executor")
        except MPIError as exc:
            raise InterpreterError(f"{path}/{name}: {exc}") from None

    def external(self, sym: str, a: list, path: str):
        """Generator implementing one MPI C API call; returns the error code."""
        comm = self._comm(path)
        mem = self.memory
        abi = comm.abi
        op = self._externals.get(sym)
        if op is None:
            raise InterpreterError(f"{path}: external function @{sym} is not provided by the simulated MPI library")
        i32 = np.dtype(np.int32)

        def cell(p):
            return mem.view(p, 1, i32)

        try:
            if op in ("mpi.init", "mpi.finalize"):
                pass
            elif op in ("mpi.comm_rank", "mpi.comm_size"):
                comm.check_comm(a[0])
                cell(a[1])[0] = comm.rank if op == "mpi.comm_rank" else comm.size
            elif op in ("mpi.send", "mpi.recv", "mpi.isend", "mpi.irecv"):
                p, count, dt, peer, tag, c = a[:6]
                comm.check_comm(c)
                buf = mem.view(p, int(count), comm.dtype(dt))
                if op == "mpi.send":
                    yield from comm.send(buf, peer, tag)
                elif op == "mpi.recv":
                    yield from comm.recv(buf, peer, tag)
                else:
                    h = comm.isend(buf, peer, tag) if op == "mpi.isend" else comm.irecv(buf, peer, tag)
                    cell(a[6])[0] = h
            elif op == "mpi.wait":
                c = cell(a[0])
                yield from comm.wait([int(c[0])])
                c[0] = abi["MPI_REQUEST_NULL"]
            elif op == "mpi.waitall":
                n = int(a[0])
                cells = mem.view(a[1], n, i32)
                yield from comm.wait([int(h) for h in cells])
                cells[:] = abi["MPI_REQUEST_NULL"]
            elif op == "mpi.test":
                c = cell(a[0])
                done = comm.test(int(c[0]))
                if done:
                    c[0] = abi["MPI_REQUEST_NULL"]
                cell(a[1])[0] = int(done)
            elif op in ("mpi.reduce", "mpi.allreduce"):
                s, r, count, dt, red = a[:5]
                if op == "mpi.reduce":
                    root, c = a[5], a[6]
                    if int(root) != 0:
                        raise MPIError("only root 0 is supported")
                else:
                    c = a[5]
                comm.check_comm(c)
                dtype = comm.dtype(dt)
                sb, rb = mem.view(s, int(count), dtype), mem.view(r, int(count), dtype)
                kind = abi.reduction_name(int(red))
                if op == "mpi.reduce":
                    yield from comm.reduce(sb, rb, kind)
                else:
                    yield from comm.allreduce(sb, rb, kind)
            elif op == "mpi.bcast":
                p, count, dt, root, c = a
                comm.check_comm(c)
                if int(root) != 0:
                    raise MPIError("only root 0 is supported")
                yield from comm.bcast(mem.view(p, int(count), comm.dtype(dt)))
            elif op == "mpi.gather":
                s, sc, sd, r, rc, rd, root, c = a
                comm.check_comm(c)
                if int(root) != 0:
                    raise MPIError("only root 0 is supported")
                rb = mem.view(r, int(rc) * comm.size, comm.dtype(rd)) if comm.rank == 0 else None
                yield from comm.gather(mem.view(s, int(sc), comm.dtype(sd)), rb)
        except MPIError as exc:
            raise InterpreterError(f"{path}/func.call@{sym}: {exc}") from None
        return abi["MPI_SUCCESS"]


def run_to_completion(gen):
    """Drive a generator that must not block (single-rank, communication-free code)."""
    try:
        reason = next(gen)
    except StopIteration as stop:
        return stop.value
    raise InterpreterError(f"program blocked outside a simulated job: {reason}")

