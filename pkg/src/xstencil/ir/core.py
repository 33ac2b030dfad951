"""SSA+Regions data model.

Every region holds exactly one block, so a :class:`Region` is simply a list
of arguments plus an ordered list of operations.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator, Sequence

from .attributes import Attribute
from .types import TypeDesc

_ids = itertools.count()


class Value:
    """An SSA value: either an operation result or a region argument."""

    __slots__ = ("id", "type", "owner", "index")

    def __init__(self, type: TypeDesc, owner=None, index: int = 0):
        self.id = next(_ids)
        self.type = type
        self.owner = owner  # Operation (result) or Region (argument)
        self.index = index

    @property
    def is_region_arg(self) -> bool:
        return isinstance(self.owner, Region)

    def __repr__(self) -> str:
        return f"<Value #{self.id}: {self.type}>"


@dataclass(frozen=True)
class Location:
    line: int
    col: int

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


class Region:
    __slots__ = ("args", "ops", "parent")

    def __init__(self, arg_types: Sequence[TypeDesc] = (), ops: Sequence[Operation] = ()):
        self.args = [Value(t, self, i) for i, t in enumerate(arg_types)]
        self.ops: list[Operation] = []
        self.parent: Operation | None = None
        for op in ops:
            self.append(op)

    def append(self, op: Operation) -> Operation:
        op.parent = self
        self.ops.append(op)
        return op

    def insert(self, pos: int, op: Operation) -> Operation:
        op.parent = self
        self.ops.insert(pos, op)
        return op

    def add_arg(self, type: TypeDesc) -> Value:
        v = Value(type, self, len(self.args))
        self.args.append(v)
        return v

    def walk(self) -> Iterator[Operation]:
        for op in self.ops:
            yield from op.walk()


class Operation:
    __slots__ = ("name", "operands", "results", "attributes", "regions", "parent", "loc")

    def __init__(
        self,
        name: str,
        operands: Sequence[Value] = (),
        result_types: Sequence[TypeDesc] = (),
        attributes: dict[str, Attribute] | None = None,
        regions: Sequence[Region] = (),
        loc: Location | None = None,
    ):
        self.name = name
        self.operands = list(operands)
        self.results = [Value(t, self, i) for i, t in enumerate(result_types)]
        self.attributes = dict(attributes or {})
        self.regions = list(regions)
        for r in self.regions:
            r.parent = self
        self.parent: Region | None = None
        self.loc = loc

    @property
    def result(self) -> Value:
        if len(self.results) != 1:
            raise ValueError(f"{self.name} has {len(self.results)} results")
        return self.results[0]

    @property
    def dialect(self) -> str:
        return self.name.split(".", 1)[0]

    @property
    def body(self) -> Region:
        return self.regions[0]

    def walk(self) -> Iterator[Operation]:
        """Pre-order walk over this op and everything nested in it."""
        yield self
        for r in self.regions:
            yield from r.walk()

    def parent_op(self) -> Operation | None:
        return self.parent.parent if self.parent is not None else None

    def ancestors(self) -> Iterator[Operation]:
        op = self.parent_op()
        while op is not None:
            yield op
            op = op.parent_op()

    def clone(self, mapping: dict[Value, Value] | None = None) -> Operation:
        """Deep copy; operands are remapped through ``mapping`` when present."""
        mapping = {} if mapping is None else mapping
        regions = [clone_region(r, mapping) for r in self.regions]
        new = Operation(
            self.name,
            [mapping.get(v, v) for v in self.operands],
            [v.type for v in self.results],
            dict(self.attributes),
            regions,
            self.loc,
        )
        for old, nv in zip(self.results, new.results):
            mapping[old] = nv
        return new

    def __repr__(self) -> str:
        return f"<Operation {self.name}>"


def clone_region(region: Region, mapping: dict[Value, Value]) -> Region:
    new = Region([a.type for a in region.args])
    for old, nv in zip(region.args, new.args):
        mapping[old] = nv
    for op in region.ops:
        new.append(op.clone(mapping))
    return new


@dataclass
class ModuleIR:
    """Top-level container: a single region of function definitions."""

    body: Region = field(default_factory=Region)

    @property
    def ops(self) -> list[Operation]:
        return self.body.ops

    def walk(self) -> Iterator[Operation]:
        return self.body.walk()

    def clone(self) -> ModuleIR:
        return ModuleIR(clone_region(self.body, {}))

    def functions(self) -> list[Operation]:
        return [op for op in self.body.ops if op.name == "func.func"]

    def lookup(self, symbol: str) -> Operation | None:
        from .attributes import StringAttr

        for op in self.body.ops:
            if op.attributes.get("sym_name") == StringAttr(symbol):
                return op
        return None

    def __str__(self) -> str:
        from .printer import print_module

        return print_module(self)


class Builder:
    """Appends (or inserts) operations into a region."""

    def __init__(self, region: Region, pos: int | None = None, loc: Location | None = None):
        self.region = region
        self.pos = pos
        self.loc = loc

    def insert(self, op: Operation) -> Operation:
        if op.loc is None:
            op.loc = self.loc
        if self.pos is None:
            self.region.append(op)
        else:
            self.region.insert(self.pos, op)
            self.pos += 1
        return op

    def create(
        self,
        name: str,
        operands: Sequence[Value] = (),
        result_types: Sequence[TypeDesc] = (),
        attributes: dict[str, Attribute] | None = None,
        regions: Sequence[Region] = (),
    ) -> Operation:
        return self.insert(Operation(name, operands, result_types, attributes, regions))


class InsertBefore(Builder):
    """Inserts immediately before ``anchor``, even when other builders add
    operations earlier in the same region meanwhile."""

    def __init__(self, anchor: Operation):
        super().__init__(anchor.parent, loc=anchor.loc)
        self.anchor = anchor

    def insert(self, op: Operation) -> Operation:
        if op.loc is None:
            op.loc = self.loc
        return self.region.insert(self.region.ops.index(self.anchor), op)
