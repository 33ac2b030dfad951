"""Pass registry and pipeline runner."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable

from .core import ModuleIR
from .verifier import Diagnostic, verify_module


class PassError(Exception):
    """A pass failed, or left the module invalid."""

    def __init__(self, message: str, diagnostics: list[Diagnostic] | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or []

    def __str__(self) -> str:
        lines = [self.args[0]] + [f"  {d}" for d in self.diagnostics]
        return "\n".join(lines)


@dataclass
class PassSpec:
    name: str
    options: dict[str, str] = field(default_factory=dict)

    def __str__(self) -> str:
        opts = " ".join(f"{k}={v}" for k, v in self.options.items())
        return f"{self.name} {opts}".strip()


PASSES: dict[str, Callable[..., ModuleIR]] = {}


def register_pass(*names: str):
    """Register ``fn(module, **options) -> module`` under one or more names."""

    def deco(fn):
        for n in names:
            PASSES[n] = fn
        return fn

    return deco


_ENTRY = re.compile(r"^\s*([\w\-.]+)\s*(?:\{(.*)\}|(.*))\s*$", re.S)


def parse_pipeline(text: str) -> list[PassSpec]:
    """``"a k=v, b{k=v k2=v2}, c"`` -> pass specs. Commas inside braces are kept."""
    entries, depth, cur = [], 0, []
    for ch in text:
        if ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
        if ch == "," and depth == 0:
            entries.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    entries.append("".join(cur))
    specs = []
    for e in entries:
        if not e.strip():
            continue
        m = _ENTRY.match(e)
        if not m:
            raise PassError(f"malformed pipeline entry {e!r}")
        opts_text = m.group(2) if m.group(2) is not None else m.group(3)
        opts = {}
        for item in re.split(r"[\s,]+", opts_text.strip()):
            if not item:
                continue
            if "=" not in item:
                raise PassError(f"malformed pass option {item!r} (expected key=value)")
            k, v = item.split("=", 1)
            opts[k.replace("-", "_")] = v
        specs.append(PassSpec(m.group(1), opts))
    return specs


def run_pipeline(m: ModuleIR, pipeline) -> ModuleIR:
    """Run passes in order on a copy of ``m``; ``m`` itself is never modified.

    ``pipeline`` is a pipeline string or a list of names / PassSpec /
    ``(name, options)`` pairs. The module must verify after every pass.
    """
    from .. import transforms  # noqa: F401  (registers passes)

    if isinstance(pipeline, str):
        specs = parse_pipeline(pipeline)
    else:
        specs = []
        for item in pipeline:
            if isinstance(item, PassSpec):
                specs.append(item)
            elif isinstance(item, str):
                specs.extend(parse_pipeline(item))
            else:
                name, opts = item
                specs.append(PassSpec(name, {k.replace("-", "_"): v for k, v in dict(opts).items()}))
    for s in specs:
        if s.name not in PASSES:
            raise PassError(f"unknown pass '{s.name}'")
    diags = verify_module(m)
    if diags:
        raise PassError("input module does not verify", diags)
    cur = m.clone()
    for s in specs:
        try:
            cur = PASSES[s.name](cur, **s.options)
        except PassError:
            raise
        except TypeError as exc:
            raise PassError(f"pass '{s.name}': bad options {s.options}: {exc}") from exc
        except ValueError as exc:
            raise PassError(f"pass '{s.name}' failed: {exc}") from exc
        diags = verify_module(cur)
        if diags:
            raise PassError(f"module does not verify after pass '{s.name}'", diags)
    return cur
