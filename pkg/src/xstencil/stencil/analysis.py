"""Access-extent analysis and bounds propagation for the stencil dialect."""

from __future__ import annotations

from dataclasses import dataclass

from ..ir.core import ModuleIR, Operation, Region, Value
from ..ir.passes import PassError, register_pass
from ..ir.verifier import Diagnostic
from .dialect import Bounds, IndexAttr, TempType, store_bounds


@dataclass(frozen=True)
class AccessExtent:
    """Per apply operand, per dimension: (min offset, max offset)."""

    per_operand: tuple[tuple[tuple[int, int], ...], ...]

    def __getitem__(self, i: int) -> tuple[tuple[int, int], ...]:
        return self.per_operand[i]

    def __len__(self) -> int:
        return len(self.per_operand)

    def halo(self) -> tuple[tuple[int, int], ...]:
        """Combined (min, max) over all operands, one pair per dimension."""
        dims = max((len(e) for e in self.per_operand), default=0)
        out = []
        for d in range(dims):
            out.append(
                (
                    min((e[d][0] for e in self.per_operand if len(e) > d), default=0),
                    max((e[d][1] for e in self.per_operand if len(e) > d), default=0),
                )
            )
        return tuple(out)


def accesses(apply: Operation, operand: int | None = None):
    """Yield (operand index, offset) for every stencil.access in the apply."""
    args = apply.body.args
    for op in apply.body.walk():
        if op.name == "stencil.access":
            i = args.index(op.operands[0])
            if operand is None or i == operand:
                yield i, op.attributes["offset"].offset


def footprint(apply: Operation, operand: int = 0) -> set[tuple[int, ...]]:
    """Distinct offsets read from one operand."""
    return {off for _, off in accesses(apply, operand)}


def infer_access_extent(apply: Operation) -> AccessExtent:
    per = []
    for i, arg in enumerate(apply.body.args):
        rank = arg.type.rank if isinstance(arg.type, TempType) else 0
        lo, hi = [0] * rank, [0] * rank
        for _, off in accesses(apply, i):
            for d, o in enumerate(off):
                lo[d] = min(lo[d], o)
                hi[d] = max(hi[d], o)
        per.append(tuple(zip(lo, hi)))
    return AccessExtent(tuple(per))


def _set_temp_bounds(v: Value, b: Bounds) -> None:
    v.type = v.type.with_bounds(b)


def _propagate_region(region: Region, path: str, diags: list[Diagnostic]) -> None:
    required: dict[Value, Bounds] = {}

    def need(v: Value, b: Bounds) -> None:
        if isinstance(v.type, TempType):
            required[v] = required[v].union(b) if v in required else b

    for op in reversed(region.ops):
        for r in op.regions:
            _propagate_region(r, f"{path}/{op.name}", diags)
        if op.name == "stencil.store":
            need(op.operands[0], store_bounds(op))
        elif op.name == "stencil.apply":
            reqs = [required[r] for r in op.results if r in required]
            if not reqs:
                if op.results[0].type.bounds is None:
                    diags.append(Diagnostic("cannot infer bounds of an unused stencil.apply", path, op.loc))
                    continue
                out = op.results[0].type.bounds
            else:
                out = reqs[0]
                for b in reqs[1:]:
                    out = out.union(b)
            for r in op.results:
                _set_temp_bounds(r, out)
            ext = infer_access_extent(op)
            for i, (v, arg) in enumerate(zip(op.operands, op.body.args)):
                if isinstance(v.type, TempType):
                    need(v, out.widen(ext[i]))
        elif op.name == "stencil.load":
            t = op.result
            if t not in required:
                if t.type.bounds is None:
                    diags.append(Diagnostic("cannot infer bounds of an unused stencil.load", path, op.loc))
                continue
            b = required[t]
            field = op.operands[0].type
            if not field.bounds.contains(b):
                diags.append(
                    Diagnostic(
                        f"field too small: stencil.load needs {b} but the field has {field.bounds}",
                        path,
                        op.loc,
                    )
                )
                continue
            _set_temp_bounds(t, b)
    # region arguments of applies mirror their operands' (now resolved) types
    for op in region.ops:
        if op.name == "stencil.apply":
            for v, arg in zip(op.operands, op.body.args):
                arg.type = v.type


@register_pass("propagate-bounds")
def propagate_bounds(m: ModuleIR) -> ModuleIR:
    """Resolve every ``?`` temp bound from store ranges and access extents."""
    diags: list[Diagnostic] = []
    _propagate_region(m.body, "builtin.module", diags)
    if diags:
        raise PassError("bounds propagation failed", diags)
    return m
