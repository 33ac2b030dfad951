"""Module verifier: SSA dominance inside single-block regions plus the
per-op rules each dialect registers."""

from __future__ import annotations

from dataclasses import dataclass

from . import registry
from .attributes import StringAttr
from .core import Location, ModuleIR, Operation, Region, Value


class VerifyError(Exception):
    """Raised by op verifiers; collected into diagnostics by verify_module."""


@dataclass(frozen=True)
class Diagnostic:
    message: str
    path: str
    loc: Location | None = None

    def __str__(self) -> str:
        where = f"{self.loc}: " if self.loc else ""
        return f"{where}{self.path}: {self.message}"


class ModuleVerificationError(Exception):
    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("\n".join(str(d) for d in diagnostics))


class VerifyContext:
    def __init__(self, module: ModuleIR):
        self.module = module

    def lookup(self, symbol: str) -> Operation | None:
        return self.module.lookup(symbol)


def _label(op: Operation, idx: int) -> str:
    sym = op.attributes.get("sym_name")
    if isinstance(sym, StringAttr):
        return f"{op.name}@{sym.value}"
    return f"{op.name}#{idx}"


def verify_module(m: ModuleIR) -> list[Diagnostic]:
    """Return diagnostics; an empty list means the module is valid."""
    from .. import dialects  # noqa: F401

    ctx = VerifyContext(m)
    diags: list[Diagnostic] = []
    seen: set[Value] = set()
    seen_ops: set[int] = set()

    def visit(region: Region, visible: set[Value], path: str) -> None:
        local = set(visible)
        for a in region.args:
            if a in seen:
                diags.append(Diagnostic("value defined twice (region argument)", path))
            seen.add(a)
            local.add(a)
        later = {r for op in region.ops for r in op.results}
        for idx, op in enumerate(region.ops):
            here = f"{path}/{_label(op, idx)}"
            if id(op) in seen_ops:
                diags.append(Diagnostic("operation appears twice in the module", here, op.loc))
                continue
            seen_ops.add(id(op))
            for v in op.operands:
                if v not in local:
                    msg = "use before definition" if v in later else "use of value not defined in scope"
                    diags.append(Diagnostic(f"{msg} (operand of type {v.type})", here, op.loc))
            opdef = registry.op_def(op.name)
            if opdef is None:
                diags.append(Diagnostic(f"unregistered operation '{op.name}'", here, op.loc))
            else:
                if opdef.terminator and idx != len(region.ops) - 1:
                    diags.append(Diagnostic("terminator must be the last operation of its region", here, op.loc))
                if opdef.verify is not None:
                    try:
                        opdef.verify(op, ctx)
                    except VerifyError as exc:
                        diags.append(Diagnostic(str(exc), here, op.loc))
            inner = set() if (opdef is not None and opdef.isolated) else local
            for r in op.regions:
                visit(r, inner, here)
            for res in op.results:
                if res in seen:
                    diags.append(Diagnostic("value defined twice", here, op.loc))
                seen.add(res)
                local.add(res)

    visit(m.body, set(), "builtin.module")
    return diags


def check_module(m: ModuleIR) -> ModuleIR:
    diags = verify_module(m)
    if diags:
        raise ModuleVerificationError(diags)
    return m


# -- helpers shared by dialect verifiers ------------------------------------
def expect_counts(op: Operation, operands: int | None = None, results: int | None = None, regions: int = 0) -> None:
    if operands is not None and len(op.operands) != operands:
        raise VerifyError(f"expected {operands} operand(s), got {len(op.operands)}")
    if results is not None and len(op.results) != results:
        raise VerifyError(f"expected {results} result(s), got {len(op.results)}")
    if len(op.regions) != regions:
        raise VerifyError(f"expected {regions} region(s), got {len(op.regions)}")


def expect_attr(op: Operation, name: str, kind):
    a = op.attributes.get(name)
    if not isinstance(a, kind):
        raise VerifyError(f"missing or malformed attribute '{name}'")
    return a
