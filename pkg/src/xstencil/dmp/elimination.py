"""Redundant-swap elimination.

A swap is redundant when the same buffer was already swapped earlier in the
same straight-line region and nothing could have written to it since. The
analysis is deliberately local: state is reset at every region entry and
after any op that owns regions (except the side-effect-free
``stencil.apply``), so a swap at the top of a loop body is
never removed on the strength of a swap from the previous iteration.
"""

from __future__ import annotations

from ..ir.core import ModuleIR, Region, Value
from ..ir.passes import register_pass
from ..ir.types import MemRefType
from ..stencil.dialect import FieldType

# ops that read a buffer without modifying it
_READ_ONLY = {"stencil.load", "dmp.swap"}


def _may_alias(a: Value, b: Value) -> bool:
    """Distinct arguments of one region are distinct buffers: entry functions
    are called with distinct fields and time loops only permute them.
    Values that are not buffers (temps, scalars) never alias a buffer."""
    buffers = (FieldType, MemRefType)
    if not isinstance(a.type, buffers) or not isinstance(b.type, buffers):
        return False
    if a is b:
        return True
    return not (a.is_region_arg and b.is_region_arg and a.owner is b.owner)


def _eliminate(region: Region) -> int:
    clean: list[Value] = []
    removed = 0
    for op in list(region.ops):
        for sub in op.regions:
            removed += _eliminate(sub)
        if op.regions and op.name != "stencil.apply":
            clean.clear()
            continue
        if op.name == "dmp.swap":
            buf = op.operands[0]
            if buf in clean:
                region.ops.remove(op)
                removed += 1
            else:
                clean.append(buf)
            continue
        if op.name in _READ_ONLY:
            continue
        for v in op.operands:
            if any(_may_alias(v, c) for c in clean):
                clean[:] = [c for c in clean if not _may_alias(v, c)]
    return removed


def eliminate_redundant_swaps(m: ModuleIR) -> ModuleIR:
    _eliminate(m.body)
    return m


register_pass("eliminate-redundant-swaps")(eliminate_redundant_swaps)
