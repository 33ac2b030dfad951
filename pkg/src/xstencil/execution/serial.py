"""Serial reference interpreter for stencil-level programs.

This is the ground-truth oracle: a direct tree walk over the IR where every
``stencil.apply`` is evaluated over its whole result domain at once with
numpy (value semantics: operands are snapshots taken by ``stencil.load``).
"""

from __future__ import annotations

import numpy as np

from ..ir.attributes import SymbolRefAttr, UnitAttr
from ..ir.core import ModuleIR, Operation, Region
from ..ir.types import IndexType
from ..std.dialects import func_name, is_declaration
from ..stencil.dialect import Bounds, TempType, store_bounds
from .fields import FieldData, buffer_args
from .scalars import CMP, FLOAT_OPS, constant_value, int_binary, width_of, wrap


class InterpreterError(Exception):
    """Runtime trap, reported with the path of the failing operation."""


class _Return(Exception):
    def __init__(self, values):
        self.values = values


class Temp:
    """A stencil value: an array plus the logical coordinate of its first element."""

    __slots__ = ("data", "bounds")

    def __init__(self, data: np.ndarray, bounds: Bounds):
        self.data = data
        self.bounds = bounds


def entry_function(m: ModuleIR, reference: bool = False) -> Operation:
    """The function a run starts from.

    A decomposed module names its global counterpart in ``dmp.reference``;
    ``reference=True`` selects that one. Otherwise the entry is the unique
    defined function that no other function calls (global reference copies
    are skipped).
    """
    defined = [f for f in m.functions() if not is_declaration(f)]
    for f in defined:
        ref = f.attributes.get("dmp.reference")
        if isinstance(ref, SymbolRefAttr):
            if reference:
                target = m.lookup(ref.name)
                if target is None:
                    raise InterpreterError(f"reference function @{ref.name} not found")
                return target
            return f
    called = {
        op.attributes["callee"].name for f in defined for op in f.walk() if op.name == "func.call"
    }
    roots = [
        f for f in defined if func_name(f) not in called and not isinstance(f.attributes.get("dmp.global"), UnitAttr)
    ]
    if len(roots) != 1:
        names = ", ".join("@" + func_name(f) for f in roots) or "none"
        raise InterpreterError(f"cannot pick an entry function (candidates: {names})")
    return roots[0]


def takes_timesteps(func: Operation) -> bool:
    args = func.body.args
    return bool(args) and isinstance(args[-1].type, IndexType)


class SerialInterpreter:
    def __init__(self, module: ModuleIR):
        self.module = module

    # -- functions -------------------------------------------------------
    def call(self, func: Operation, args: list):
        env = dict(zip(func.body.args, args))
        try:
            self.run_region(func.body, env, "@" + func_name(func))
        except _Return as r:
            return r.values
        return []

    def run_region(self, region: Region, env: dict, path: str):
        for op in region.ops:
            self.run_op(op, env, f"{path}/{op.name}")

    def run_op(self, op: Operation, env: dict, path: str):
        name = op.name
        get = env.__getitem__
        if name == "arith.constant":
            env[op.result] = constant_value(op.attributes["value"])
        elif name in FLOAT_OPS:
            a, b = map(get, op.operands)
            env[op.result] = FLOAT_OPS[name](a, b)
        elif name.startswith("arith.") and name[6:] in ("addi", "subi", "muli", "divsi", "remsi", "andi", "ori", "xori"):
            a, b = map(get, op.operands)
            try:
                env[op.result] = int_binary(name, a, b, width_of(op.result.type))
            except ZeroDivisionError as exc:
                raise InterpreterError(f"{path}: {exc}") from None
        elif name == "arith.cmpi":
            a, b = map(get, op.operands)
            env[op.result] = int(CMP[op.attributes["predicate"].value](a, b))
        elif name == "arith.select":
            c, a, b = map(get, op.operands)
            env[op.result] = a if c else b
        elif name == "arith.index_cast":
            env[op.result] = wrap(get(op.operands[0]), width_of(op.result.type))
        elif name == "loop.for":
            self.run_for(op, env, path)
        elif name == "func.call":
            callee = self.module.lookup(op.attributes["callee"].name)
            if callee is None or is_declaration(callee):
                raise InterpreterError(f"{path}: external call @{op.attributes['callee'].name} is not available serially")
            results = self.call(callee, [get(v) for v in op.operands])
            env.update(zip(op.results, results))
        elif name == "func.return":
            raise _Return([get(v) for v in op.operands])
        elif name == "stencil.load":
            field = get(op.operands[0])
            b = op.result.type.bounds
            if b is None:
                raise InterpreterError(f"{path}: unresolved temp bounds (run propagate-bounds first)")
            fb = op.operands[0].type.bounds
            env[op.result] = Temp(field[b.slices(fb.lb)].copy(), b)
        elif name == "stencil.apply":
            for r, data in zip(op.results, self.run_apply(op, env, path)):
                env[r] = Temp(data, r.type.bounds)
        elif name == "stencil.store":
            temp, field = map(get, op.operands)
            b = store_bounds(op)
            fb = op.operands[1].type.bounds
            field[b.slices(fb.lb)] = temp.data[b.slices(temp.bounds.lb)]
        elif name == "stencil.as_memref":
            env[op.result] = get(op.operands[0])
        else:
            raise InterpreterError(f"{path}: operation {name} is not supported by the serial interpreter")

    def run_for(self, op: Operation, env: dict, path: str):
        lo, hi, step = (env[v] for v in op.operands[:3])
        if step <= 0:
            raise InterpreterError(f"{path}: loop step must be positive, got {step}")
        carried = [env[v] for v in op.operands[3:]]
        body = op.body
        for i in range(lo, hi, step):
            local = dict(env)
            local[body.args[0]] = i
            local.update(zip(body.args[1:], carried))
            self.run_region_yield(body, local, path)
            carried = local.get("__yield__", carried)
        env.update(zip(op.results, carried))

    def run_region_yield(self, region: Region, env: dict, path: str):
        for op in region.ops:
            if op.name == "loop.yield":
                env["__yield__"] = [env[v] for v in op.operands]
            else:
                self.run_op(op, env, f"{path}/{op.name}")

    def run_apply(self, op: Operation, env: dict, path: str) -> list[np.ndarray]:
        out_b = op.results[0].type.bounds
        if out_b is None:
            raise InterpreterError(f"{path}: unresolved apply bounds (run propagate-bounds first)")
        local: dict = {}
        for arg, v in zip(op.body.args, op.operands):
            local[arg] = env[v]
        for inner in op.body.ops:
            n = inner.name
            if n == "stencil.access":
                t: Temp = local[inner.operands[0]]
                off = inner.attributes["offset"].offset
                want = out_b.shift(off)
                if not t.bounds.contains(want):
                    raise InterpreterError(f"{path}/stencil.access: reads {want} outside temp bounds {t.bounds}")
                local[inner.result] = t.data[want.slices(t.bounds.lb)]
            elif n == "arith.constant":
                local[inner.result] = constant_value(inner.attributes["value"])
            elif n in FLOAT_OPS:
                a, b = (local[v] for v in inner.operands)
                local[inner.result] = FLOAT_OPS[n](a, b)
            elif n == "stencil.return":
                return [
                    np.broadcast_to(local[v], out_b.shape).astype(r.type.element.dtype, copy=True)
                    for v, r in zip(inner.operands, op.results)
                ]
            else:
                raise InterpreterError(f"{path}/{n}: not supported inside stencil.apply")
        raise InterpreterError(f"{path}: stencil.apply without stencil.return")


def run_serial_stencil(m: ModuleIR, init: list[FieldData], timesteps: int, func: Operation | None = None) -> list[FieldData]:
    """Interpret the (global) stencil program for ``timesteps`` steps.

    If the entry function takes a trailing ``index`` argument it receives the
    step count and runs its own time loop; otherwise its body is one step
    and is invoked ``timesteps`` times.
    """
    if func is None:
        func = entry_function(m, reference=True)
    for op in func.walk():
        if op.dialect in ("dmp", "mpi"):
            raise InterpreterError(f"serial interpretation needs a stencil-level program, found {op.name}")
        if op.dialect == "stencil" and any(isinstance(r.type, TempType) and r.type.bounds is None for r in op.results):
            raise InterpreterError("unresolved temp bounds (run propagate-bounds first)")
    fields = [f.copy() for f in init]
    slots = buffer_args(func)
    if len(slots) != len(fields):
        raise InterpreterError(f"entry function takes {len(slots)} buffers, {len(fields)} given")
    args: list = [None] * len(func.body.args)
    for k, f in zip(slots, fields):
        args[k] = f.data
    interp = SerialInterpreter(m)
    with np.errstate(all="ignore"):
        if takes_timesteps(func):
            args[-1] = int(timesteps)
            interp.call(func, args)
        else:
            for _ in range(int(timesteps)):
                interp.call(func, args)
    return fields
