"""Deterministic printer. Values are renumbered ``%0, %1, ...`` in print order."""

from __future__ import annotations

import json
import re

from . import registry
from .attributes import Attribute
from .core import ModuleIR, Operation, Region, Value
from .types import TypeDesc

_BARE_KEY = re.compile(r"^[A-Za-z_][\w$.]*$")


class Printer:
    def __init__(self, indent: str = "  "):
        self.lines: list[str] = []
        self.indent_unit = indent
        self.depth = 0
        self.names: dict[Value, str] = {}
        self.counter = 0
        self.cur: list[str] = []

    # -- primitive emitters ---------------------------------------------
    def write(self, text: str) -> None:
        self.cur.append(text)

    def newline(self) -> None:
        self.lines.append(self.indent_unit * self.depth + "".join(self.cur))
        self.cur = []

    def name(self, v: Value) -> str:
        if v not in self.names:
            self.names[v] = f"%{self.counter}"
            self.counter += 1
        return self.names[v]

    def value(self, v: Value) -> str:
        try:
            return self.names[v]
        except KeyError:
            # printing an unverified module; keep going with a visible marker
            return f"%<undef:{v.id}>"

    def values(self, vs) -> str:
        return ", ".join(self.value(v) for v in vs)

    @staticmethod
    def type(t: TypeDesc) -> str:
        return str(t)

    @staticmethod
    def types(ts) -> str:
        return ", ".join(str(t) for t in ts)

    @staticmethod
    def attr(a: Attribute) -> str:
        return str(a)

    @staticmethod
    def attr_dict(attrs: dict[str, Attribute], skip=()) -> str:
        items = [(k, a) for k, a in sorted(attrs.items()) if k not in skip]
        if not items:
            return ""
        parts = []
        for k, a in items:
            key = k if _BARE_KEY.match(k) else json.dumps(k)
            parts.append(f"{key} = {a}")
        return "{" + ", ".join(parts) + "}"

    # -- structure -----------------------------------------------------
    def region(self, region: Region, args_in_header: bool = False) -> None:
        """Print ``{ ... }``. The opening brace goes on the current line."""
        self.write("{")
        self.newline()
        self.depth += 1
        if args_in_header and region.args:
            self.depth -= 1
            args = ", ".join(f"{self.name(a)}: {a.type}" for a in region.args)
            self.write(f"^bb0({args}):")
            self.newline()
            self.depth += 1
        for op in region.ops:
            self.operation(op)
        self.depth -= 1
        self.write("}")

    def operation(self, op: Operation) -> None:
        if op.results:
            self.write(", ".join(self.name(r) for r in op.results) + " = ")
        opdef = registry.op_def(op.name)
        if opdef is not None and opdef.print is not None:
            opdef.print(self, op)
        else:
            self.generic(op, quoted=opdef is None)
        self.newline()

    def generic(self, op: Operation, quoted: bool = True) -> None:
        self.write((json.dumps(op.name) if quoted else op.name) + f"({self.values(op.operands)})")
        if op.regions:
            self.write(" (")
            for i, r in enumerate(op.regions):
                if i:
                    self.write(", ")
                self.region(r, args_in_header=True)
            self.write(")")
        d = self.attr_dict(op.attributes)
        if d:
            self.write(" " + d)
        ins = self.types(v.type for v in op.operands)
        outs = [r.type for r in op.results]
        out_text = str(outs[0]) if len(outs) == 1 else "(" + self.types(outs) + ")"
        self.write(f" : ({ins}) -> {out_text}")


def print_module(m: ModuleIR) -> str:
    p = Printer()
    p.write("builtin.module {")
    p.newline()
    p.depth += 1
    for op in m.body.ops:
        p.operation(op)
    p.depth -= 1
    p.write("}")
    p.newline()
    return "\n".join(p.lines) + "\n"


def print_op(op: Operation) -> str:
    """Print a single operation (values outside it show as undefined)."""
    p = Printer()
    p.operation(op)
    return "\n".join(p.lines)
