"""The mpi dialect: a subset of MPI 1.0 over the world communicator.

Buffers are passed as ``(!llvm.ptr, count: i32, !mpi.datatype)`` triples,
obtained from memrefs with ``mpi.unwrap_memref``. Every op uses the plain
``mpi.op(%a, ...) {attrs} : (types) -> results`` syntax.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..ir.attributes import StringAttr
from ..ir.core import Operation
from ..ir.registry import register_op, register_type
from ..ir.types import FloatType, IntegerType, MemRefType, TypeDesc, i1, i32
from ..ir.verifier import VerifyError, expect_counts
from ..std.dialects import ptr


@dataclass(frozen=True)
class RequestType(TypeDesc):
    def __str__(self) -> str:
        return "!mpi.request"


@dataclass(frozen=True)
class DatatypeType(TypeDesc):
    def __str__(self) -> str:
        return "!mpi.datatype"


@dataclass(frozen=True)
class StatusType(TypeDesc):
    def __str__(self) -> str:
        return "!mpi.status"


request = RequestType()
datatype = DatatypeType()
status = StatusType()


def _simple(instance):
    def parse(p, body, loc):
        if body:
            raise ValueError(f"{instance} takes no parameters")
        return instance

    return parse


register_type("mpi.request", _simple(request))
register_type("mpi.datatype", _simple(datatype))
register_type("mpi.status", _simple(status))

REDUCTIONS = ("sum", "prod", "max", "min")


def mpi_datatype_name(element: TypeDesc) -> str:
    """Symbolic MPI datatype of a memref element type."""
    if isinstance(element, FloatType):
        return "MPI_DOUBLE" if element.width == 64 else "MPI_FLOAT"
    if isinstance(element, IntegerType) and element.width in (32, 64):
        return "MPI_INT" if element.width == 32 else "MPI_LONG_LONG"
    raise VerifyError(f"no MPI datatype for element type {element}")


BUFFER = [ptr, i32, datatype]


def _signature(ins, outs):
    def verify(op, ctx):
        got_in = [v.type for v in op.operands]
        got_out = [r.type for r in op.results]
        if got_in != list(ins):
            raise VerifyError(
                f"{op.name} expects operands ({', '.join(map(str, ins))}), got ({', '.join(map(str, got_in))})"
            )
        if got_out != list(outs):
            raise VerifyError(f"{op.name} must produce ({', '.join(map(str, outs))})")
        expect_counts(op)

    return verify


def _defining_func(op: Operation) -> Operation | None:
    for anc in op.ancestors():
        if anc.name == "func.func":
            return anc
    return None


def request_uses(op: Operation, value) -> list[Operation]:
    scope = _defining_func(op)
    root = scope.walk() if scope is not None else op.parent.walk() if op.parent else iter(())
    return [o for o in root if value in o.operands]


_CONSUMERS = {"mpi.wait", "mpi.waitall", "mpi.test"}


def _check_linear(op: Operation, value) -> None:
    uses = request_uses(op, value)
    if len(uses) != 1:
        raise VerifyError(
            f"request produced by {op.name} must be consumed exactly once by wait/waitall/test, found {len(uses)} use(s)"
        )
    use = uses[0]
    if use.name not in _CONSUMERS:
        raise VerifyError(f"request produced by {op.name} is consumed by {use.name}, not by wait/waitall/test")
    if use.parent is not op.parent:
        raise VerifyError(f"request produced by {op.name} must be completed in the same region")
    if use.name == "mpi.waitall" and use.operands.count(value) != 1:
        raise VerifyError("request passed to mpi.waitall more than once")


def _verify_nonblocking(op, ctx):
    _signature(BUFFER + [i32, i32], [request])(op, ctx)
    _check_linear(op, op.result)


def _verify_test(op, ctx):
    _signature([request], [i1, request])(op, ctx)
    _check_linear(op, op.results[1])


def _verify_waitall(op, ctx):
    expect_counts(op, results=0)
    if any(v.type != request for v in op.operands):
        raise VerifyError("mpi.waitall takes only !mpi.request operands")


def _verify_unwrap(op, ctx):
    expect_counts(op, 1, 3)
    t = op.operands[0].type
    if not isinstance(t, MemRefType):
        raise VerifyError(f"mpi.unwrap_memref expects a memref, got {t}")
    mpi_datatype_name(t.element)
    if [r.type for r in op.results] != BUFFER:
        raise VerifyError("mpi.unwrap_memref produces (!llvm.ptr, i32, !mpi.datatype)")


def reduction_kind(op: Operation) -> str:
    kind = op.attributes.get("op")
    if not isinstance(kind, StringAttr) or kind.value not in REDUCTIONS:
        raise VerifyError(f"{op.name} needs op = one of {', '.join(map(repr, REDUCTIONS))}")
    return kind.value


def _verify_reduce(op, ctx):
    _signature([ptr, ptr, i32, datatype], [])(op, ctx)
    reduction_kind(op)


register_op("mpi.init", verify=_signature([], []))
register_op("mpi.finalize", verify=_signature([], []))
register_op("mpi.comm_rank", verify=_signature([], [i32]))
register_op("mpi.comm_size", verify=_signature([], [i32]))
register_op("mpi.proc_null", verify=_signature([], [i32]))
register_op("mpi.unwrap_memref", verify=_verify_unwrap)
register_op("mpi.send", verify=_signature(BUFFER + [i32, i32], []))
register_op("mpi.recv", verify=_signature(BUFFER + [i32, i32], []))
register_op("mpi.isend", verify=_verify_nonblocking)
register_op("mpi.irecv", verify=_verify_nonblocking)
register_op("mpi.wait", verify=_signature([request], []))
register_op("mpi.waitall", verify=_verify_waitall)
register_op("mpi.test", verify=_verify_test)
register_op("mpi.reduce", verify=_verify_reduce)
register_op("mpi.allreduce", verify=_verify_reduce)
register_op("mpi.bcast", verify=_signature(BUFFER, []))
register_op("mpi.gather", verify=_signature([ptr, ptr, i32, datatype], []))
