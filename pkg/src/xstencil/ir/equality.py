"""Structural equality: value names are irrelevant, values are matched by
their position in the operation graph."""

from __future__ import annotations

from .core import ModuleIR, Operation, Region, Value


def first_difference(a: ModuleIR, b: ModuleIR) -> str | None:
    """Describe the first structural difference, or None if equal."""
    mapping: dict[Value, Value] = {}

    def regions(ra: Region, rb: Region, path: str) -> str | None:
        if len(ra.args) != len(rb.args):
            return f"{path}: region argument count {len(ra.args)} != {len(rb.args)}"
        for x, y in zip(ra.args, rb.args):
            if x.type != y.type:
                return f"{path}: region argument type {x.type} != {y.type}"
            mapping[x] = y
        if len(ra.ops) != len(rb.ops):
            return f"{path}: {len(ra.ops)} ops != {len(rb.ops)} ops"
        for i, (oa, ob) in enumerate(zip(ra.ops, rb.ops)):
            d = ops(oa, ob, f"{path}/{oa.name}#{i}")
            if d:
                return d
        return None

    def ops(oa: Operation, ob: Operation, path: str) -> str | None:
        if oa.name != ob.name:
            return f"{path}: op name {oa.name} != {ob.name}"
        if len(oa.operands) != len(ob.operands):
            return f"{path}: operand count differs"
        for x, y in zip(oa.operands, ob.operands):
            if mapping.get(x) is not y:
                return f"{path}: operands refer to different values"
        if oa.attributes != ob.attributes:
            return f"{path}: attributes differ: {oa.attributes} != {ob.attributes}"
        if [r.type for r in oa.results] != [r.type for r in ob.results]:
            return f"{path}: result types differ"
        if len(oa.regions) != len(ob.regions):
            return f"{path}: region count differs"
        for k, (ra, rb) in enumerate(zip(oa.regions, ob.regions)):
            d = regions(ra, rb, f"{path}.r{k}")
            if d:
                return d
        for x, y in zip(oa.results, ob.results):
            mapping[x] = y
        return None

    return regions(a.body, b.body, "module")


def structurally_equal(a: ModuleIR, b: ModuleIR) -> bool:
    return first_difference(a, b) is None
