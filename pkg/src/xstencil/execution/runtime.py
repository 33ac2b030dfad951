"""In-process MPI runtime for simulated ranks.

Each rank owns a :class:`Memory` (integer addresses <-> numpy buffers) and a
:class:`Comm` endpoint on a shared :class:`Transport`. Point-to-point
semantics follow MPI: sends are eager (the payload is copied into the
transport immediately, so a send request completes at once), receives are
matched per ``(source, tag)`` in posting order, and messages between one
pair of ranks with one tag never overtake each other.

Blocking operations are generators: they ``yield`` a short description of
what they wait for and are resumed by the scheduler.
"""

from __future__ import annotations

import bisect
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from ..mpi.abi import AbiTable

_DTYPES = {
    "MPI_INT": np.dtype(np.int32),
    "MPI_LONG_LONG": np.dtype(np.int64),
    "MPI_FLOAT": np.dtype(np.float32),
    "MPI_DOUBLE": np.dtype(np.float64),
}
_REDUCE = {"sum": np.add, "prod": np.multiply, "max": np.maximum, "min": np.minimum}
# tags below zero are reserved for collectives (user tags are non-negative)
_COLLECTIVE_TAG = {"reduce": -1, "bcast": -2, "gather": -3}


class MPIError(RuntimeError):
    """Erroneous MPI usage detected by the simulator."""


class Memory:
    """Address space of one rank: every buffer gets a distinct, aligned base."""

    ALIGN = 64

    def __init__(self, base: int = 1 << 20):
        self._next = base
        self._bases: list[int] = []
        self._arrays: dict[int, np.ndarray] = {}
        self._by_id: dict[int, int] = {}

    def address(self, arr: np.ndarray) -> int:
        """Base address of ``arr`` (registered on first use)."""
        key = id(arr)
        addr = self._by_id.get(key)
        if addr is not None and self._arrays.get(addr) is arr:
            return addr
        addr = self._next
        self._next += -(-max(arr.nbytes, 1) // self.ALIGN) * self.ALIGN + self.ALIGN
        bisect.insort(self._bases, addr)
        self._arrays[addr] = arr
        self._by_id[key] = addr
        return addr

    def alloc(self, shape, dtype) -> np.ndarray:
        arr = np.zeros(shape, dtype)
        self.address(arr)
        return arr

    def free(self, arr: np.ndarray) -> None:
        addr = self._by_id.pop(id(arr), None)
        if addr is None or self._arrays.get(addr) is not arr:
            raise MPIError("memref.dealloc of a buffer that is not allocated")
        del self._arrays[addr]
        self._bases.remove(addr)

    def view(self, ptr: int, count: int, dtype: np.dtype) -> np.ndarray:
        """``count`` elements of ``dtype`` starting at address ``ptr`` (a flat view)."""
        i = bisect.bisect_right(self._bases, ptr) - 1
        if i < 0:
            raise MPIError(f"pointer {ptr:#x} does not point into any buffer")
        base = self._bases[i]
        arr = self._arrays[base]
        off = ptr - base
        nbytes = count * dtype.itemsize
        if off + nbytes > arr.nbytes:
            raise MPIError(f"access of {nbytes} bytes at {ptr:#x} overruns a {arr.nbytes}-byte buffer")
        if not arr.flags.c_contiguous:
            raise MPIError("buffer is not contiguous")
        raw = arr.reshape(-1).view(np.uint8)
        return raw[off : off + nbytes].view(dtype)


@dataclass
class Request:
    kind: str  # "send" | "recv"
    peer: int
    tag: int
    buffer: np.ndarray | None = None
    done: bool = False


@dataclass
class Transport:
    """Message queues shared by all ranks of one simulated job."""

    size: int
    queues: dict[tuple[int, int, int], deque] = field(default_factory=dict)
    version: int = 0  # bumped on every send, so schedulers can detect progress

    def post(self, src: int, dst: int, tag: int, payload: bytes) -> None:
        self.queues.setdefault((src, dst, tag), deque()).append(payload)
        self.version += 1

    def take(self, src: int, dst: int, tag: int) -> bytes | None:
        q = self.queues.get((src, dst, tag))
        return q.popleft() if q else None

    def pending(self) -> list[tuple[int, int, int, int]]:
        return [(s, d, t, len(q)) for (s, d, t), q in self.queues.items() if q]


class Comm:
    """MPI_COMM_WORLD as seen from one rank."""

    def __init__(self, rank: int, transport: Transport, abi: AbiTable, memory: Memory):
        self.rank = rank
        self.size = transport.size
        self.transport = transport
        self.abi = abi
        self.memory = memory
        self.requests: dict[int, Request] = {}
        self._posted: list[Request] = []
        self._next_handle = 1
        self.waiting_for = ""
        self.completions = 0  # completed requests, so schedulers can detect progress

    # -- handles -------------------------------------------------------------------
    def dtype(self, handle: int) -> np.dtype:
        return _DTYPES[self.abi.datatype_name(int(handle))]

    def check_comm(self, comm: int) -> None:
        if int(comm) != self.abi["MPI_COMM_WORLD"]:
            raise MPIError(f"unknown communicator handle {comm}")

    def _peer(self, peer: int) -> int | None:
        peer = int(peer)
        if peer == self.abi["MPI_PROC_NULL"]:
            return None
        if not 0 <= peer < self.size:
            raise MPIError(f"rank {self.rank}: peer rank {peer} outside communicator of size {self.size}")
        return peer

    def _register(self, req: Request) -> int:
        h = self._next_handle
        self._next_handle += 1
        self.requests[h] = req
        return h

    # -- point to point --------------------------------------------------------------
    def isend(self, buf: np.ndarray, dest: int, tag: int) -> int:
        peer = self._peer(dest)
        if peer is not None:
            self.transport.post(self.rank, peer, int(tag), buf.tobytes())
        return self._register(Request("send", -1 if peer is None else peer, int(tag), done=True))

    def irecv(self, buf: np.ndarray, source: int, tag: int) -> int:
        peer = self._peer(source)
        req = Request("recv", -1 if peer is None else peer, int(tag), buf, done=peer is None)
        if not req.done:
            self._posted.append(req)
        return self._register(req)

    def progress(self) -> None:
        """Match posted receives (in posting order) against arrived messages."""
        still = []
        for req in self._posted:
            payload = self.transport.take(req.peer, self.rank, req.tag)
            if payload is None:
                still.append(req)
                continue
            if len(payload) != req.buffer.nbytes:
                raise MPIError(
                    f"rank {self.rank}: message from rank {req.peer} (tag {req.tag}) has {len(payload)} bytes, "
                    f"receive buffer has {req.buffer.nbytes}"
                )
            req.buffer[...] = np.frombuffer(payload, req.buffer.dtype).reshape(req.buffer.shape)
            req.done = True
            self.completions += 1
        self._posted = still

    def request(self, handle: int) -> Request:
        try:
            return self.requests[int(handle)]
        except KeyError:
            raise MPIError(f"rank {self.rank}: invalid or already completed request handle {handle}") from None

    def wait(self, handles):
        """Generator: block until every request in ``handles`` is complete, then free them.

        ``MPI_REQUEST_NULL`` entries are ignored."""
        null = self.abi["MPI_REQUEST_NULL"]
        handles = [int(h) for h in handles if int(h) != null]
        reqs = [self.request(h) for h in handles]
        while True:
            self.progress()
            missing = [r for r in reqs if not r.done]
            if not missing:
                break
            self.waiting_for = "wait for " + ", ".join(f"recv from rank {r.peer} tag {r.tag}" for r in missing)
            yield self.waiting_for
        self.waiting_for = ""
        for h in handles:
            del self.requests[int(h)]

    def test(self, handle: int) -> bool:
        """True (and the request is freed) if ``handle`` has completed."""
        if int(handle) == self.abi["MPI_REQUEST_NULL"]:
            return True
        self.progress()
        req = self.request(handle)
        if req.done:
            del self.requests[int(handle)]
        return req.done

    def send(self, buf, dest, tag):
        yield from self.wait([self.isend(buf, dest, tag)])

    def recv(self, buf, source, tag):
        yield from self.wait([self.irecv(buf, source, tag)])

    # -- collectives (root 0, built from point-to-point) -----------------------------
    def reduce(self, send: np.ndarray, recv: np.ndarray | None, op: str, root: int = 0):
        tag = _COLLECTIVE_TAG["reduce"]
        if self.rank != root:
            yield from self.send(send, root, tag)
            return
        acc = send.copy()
        part = np.empty_like(send)
        for r in range(self.size):
            if r == root:
                continue
            yield from self.recv(part, r, tag)
            acc = _REDUCE[op](acc, part)
        recv[...] = acc

    def bcast(self, buf: np.ndarray, root: int = 0):
        tag = _COLLECTIVE_TAG["bcast"]
        if self.rank == root:
            for r in range(self.size):
                if r != root:
                    yield from self.send(buf, r, tag)
        else:
            yield from self.recv(buf, root, tag)

    def allreduce(self, send, recv, op: str):
        yield from self.reduce(send, recv if self.rank == 0 else None, op)
        yield from self.bcast(recv)

    def gather(self, send: np.ndarray, recv: np.ndarray | None, root: int = 0):
        tag = _COLLECTIVE_TAG["gather"]
        if self.rank != root:
            yield from self.send(send, root, tag)
            return
        n = send.size
        flat = recv.reshape(-1)
        for r in range(self.size):
            if r == root:
                flat[r * n : (r + 1) * n] = send.reshape(-1)
            else:
                yield from self.recv(flat[r * n : (r + 1) * n], r, tag)
