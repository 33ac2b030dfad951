"""Dialect registration: operations, dialect types and dialect attributes."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

DIALECTS: set[str] = {"builtin"}


@dataclass
class OpDef:
    name: str
    verify: Callable | None = None
    parse: Callable | None = None
    print: Callable | None = None
    terminator: bool = False
    isolated: bool = False  # regions do not see enclosing values


OPS: dict[str, OpDef] = {}
# "dialect.tag" -> fn(parser, body_text | None, loc) -> TypeDesc
TYPE_PARSERS: dict[str, Callable] = {}
ATTR_PARSERS: dict[str, Callable] = {}
# short spellings accepted by the parser, as used in hand-written IR
TYPE_ALIASES = {"field": "stencil.field", "temp": "stencil.temp"}


def register_op(
    name: str,
    *,
    verify: Callable | None = None,
    parse: Callable | None = None,
    print: Callable | None = None,
    terminator: bool = False,
    isolated: bool = False,
) -> OpDef:
    DIALECTS.add(name.split(".", 1)[0])
    opdef = OpDef(name, verify, parse, print, terminator, isolated)
    OPS[name] = opdef
    return opdef


def register_type(name: str, parser: Callable) -> None:
    DIALECTS.add(name.split(".", 1)[0])
    TYPE_PARSERS[name] = parser


def register_attr(name: str, parser: Callable) -> None:
    DIALECTS.add(name.split(".", 1)[0])
    ATTR_PARSERS[name] = parser


def op_def(name: str) -> OpDef | None:
    return OPS.get(name)
