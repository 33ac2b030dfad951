"""Recursive-descent parser for the MLIR-like textual IR.

Accepts the generic operation form (``"dialect.op"(%a) {attrs} : (T) -> T``)
for every registered op, plus whatever pretty form each dialect registers.
"""

from __future__ import annotations

import json
import re

from . import registry
from .attributes import (
    ArrayAttr,
    Attribute,
    FloatAttr,
    IntegerAttr,
    StringAttr,
    SymbolRefAttr,
    TypeAttr,
    UnitAttr,
)
from .core import Location, ModuleIR, Operation, Region, Value
from .lexer import ParseError, Token, tokenize
from .types import SCALARS, FunctionType, MemRefType, TypeDesc, f64, i1, i64

_MEMREF_BODY = re.compile(r"^\s*((?:\d+\s*x\s*)+)(.+?)\s*$", re.S)


class Parser:
    def __init__(self, text: str, base: Location | None = None):
        self.tokens = tokenize(text, base)
        self.i = 0
        self.scopes: list[dict[str, Value]] = [{}]

    # -- token helpers -------------------------------------------------
    def peek(self, k: int = 0) -> Token:
        return self.tokens[min(self.i + k, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.tokens[self.i]
        if tok.kind != "EOF":
            self.i += 1
        return tok

    def at(self, text: str, k: int = 0) -> bool:
        tok = self.peek(k)
        return tok.text == text and tok.kind in ("PUNCT", "BARE", "ARROW")

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def expect(self, text: str, what: str | None = None) -> Token:
        if not self.at(text):
            tok = self.peek()
            shown = tok.text or "end of input"
            raise ParseError(f"expected {what or repr(text)}, got {shown!r}", tok.loc)
        return self.next()

    def expect_kind(self, kind: str, what: str) -> Token:
        tok = self.peek()
        if tok.kind != kind:
            raise ParseError(f"expected {what}, got {tok.text or 'end of input'!r}", tok.loc)
        return self.next()

    def error(self, message: str, tok: Token | None = None) -> ParseError:
        return ParseError(message, (tok or self.peek()).loc)

    # -- scalars -------------------------------------------------------
    def parse_int(self) -> int:
        tok = self.peek()
        if tok.kind == "INT":
            self.next()
            return int(tok.text)
        if tok.kind == "HEX":
            self.next()
            return int(tok.text, 16)
        raise self.error(f"expected integer, got {tok.text!r}")

    def parse_int_list(self, open_: str = "[", close: str = "]") -> tuple[int, ...]:
        self.expect(open_)
        values: list[int] = []
        if not self.accept(close):
            values.append(self.parse_int())
            while self.accept(","):
                values.append(self.parse_int())
            self.expect(close)
        return tuple(values)

    def parse_symbol(self) -> str:
        tok = self.expect_kind("SYMBOL", "symbol name")
        name = tok.text[1:]
        return json.loads(name) if name.startswith('"') else name

    def parse_keyword(self, word: str) -> None:
        tok = self.peek()
        if tok.kind != "BARE" or tok.text != word:
            raise self.error(f"expected '{word}', got {tok.text!r}")
        self.next()

    # -- values --------------------------------------------------------
    def lookup(self, tok: Token) -> Value:
        for scope in reversed(self.scopes):
            if tok.text in scope:
                return scope[tok.text]
        raise ParseError(f"use of undefined value {tok.text}", tok.loc)

    def define(self, tok: Token, value: Value) -> None:
        for depth, scope in enumerate(reversed(self.scopes)):
            if tok.text in scope:
                what = "redefinition of" if depth == 0 else "region argument shadows"
                raise ParseError(f"{what} value {tok.text}", tok.loc)
        self.scopes[-1][tok.text] = value

    def parse_operand(self) -> Value:
        return self.lookup(self.expect_kind("VALUE", "SSA value"))

    def parse_operand_list(self, open_: str | None = "(", close: str = ")") -> list[Value]:
        if open_ is not None:
            self.expect(open_)
            if self.accept(close):
                return []
        values = [self.parse_operand()]
        while self.accept(","):
            values.append(self.parse_operand())
        if open_ is not None:
            self.expect(close)
        return values

    def parse_optional_operands(self) -> list[Value]:
        """Comma separated operands without delimiters; may be empty."""
        if self.peek().kind != "VALUE":
            return []
        return self.parse_operand_list(None)

    # -- types ---------------------------------------------------------
    def sub_parser(self, text: str, loc: Location | None) -> Parser:
        return Parser(text, loc)

    def parse_type(self) -> TypeDesc:
        tok = self.peek()
        if tok.kind == "BANG":
            self.next()
            name = registry.TYPE_ALIASES.get(tok.text[1:], tok.text[1:])
            dialect = name.split(".", 1)[0]
            if dialect not in registry.DIALECTS:
                raise ParseError(f"unknown dialect '{dialect}' in type {tok.text}", tok.loc)
            fn = registry.TYPE_PARSERS.get(name)
            if fn is None:
                raise ParseError(f"unknown type !{name}", tok.loc)
            try:
                return fn(self, tok.body, tok.body_loc or tok.loc)
            except ParseError:
                raise
            except ValueError as exc:
                raise ParseError(f"invalid type {tok.text}: {exc}", tok.loc) from None
        if tok.kind == "BARE" and tok.text in SCALARS:
            self.next()
            return SCALARS[tok.text]
        if tok.kind == "BARE" and tok.text == "memref":
            self.next()
            m = _MEMREF_BODY.match(tok.body or "")
            if not m:
                raise ParseError("malformed memref type", tok.loc)
            shape = tuple(int(d) for d in re.findall(r"\d+", m.group(1)))
            elem = self.sub_parser(m.group(2), tok.body_loc).parse_type_only()
            try:
                return MemRefType(shape, elem)
            except ValueError as exc:
                raise ParseError(str(exc), tok.loc) from None
        if self.at("("):
            return self.parse_function_type()
        raise self.error(f"expected type, got {tok.text or 'end of input'!r}")

    def parse_type_only(self) -> TypeDesc:
        t = self.parse_type()
        self.expect_kind("EOF", "end of type")
        return t

    def parse_type_list(self) -> list[TypeDesc]:
        """``(T, T)`` or a single bare type."""
        if self.accept("("):
            if self.accept(")"):
                return []
            types = [self.parse_type()]
            while self.accept(","):
                types.append(self.parse_type())
            self.expect(")")
            return types
        return [self.parse_type()]

    def parse_comma_types(self) -> list[TypeDesc]:
        types = [self.parse_type()]
        while self.accept(","):
            types.append(self.parse_type())
        return types

    def parse_function_type(self) -> FunctionType:
        self.expect("(")
        ins: list[TypeDesc] = []
        if not self.accept(")"):
            ins = self.parse_comma_types()
            self.expect(")")
        self.expect("->")
        outs = self.parse_type_list()
        return FunctionType(tuple(ins), tuple(outs))

    # -- attributes ----------------------------------------------------
    def parse_attr(self) -> Attribute:
        tok = self.peek()
        if tok.kind in ("INT", "HEX"):
            value = self.parse_int()
            t = self.parse_type() if self.accept(":") else i64
            try:
                return IntegerAttr(value, t)
            except ValueError as exc:
                raise ParseError(str(exc), tok.loc) from None
        if tok.kind == "FLOAT":
            self.next()
            value = float(tok.text)
            t = self.parse_type() if self.accept(":") else f64
            try:
                return FloatAttr(value, t)
            except ValueError as exc:
                raise ParseError(str(exc), tok.loc) from None
        if tok.kind == "BARE" and tok.text in ("true", "false"):
            self.next()
            return IntegerAttr(int(tok.text == "true"), i1)
        if tok.kind == "BARE" and tok.text == "unit":
            self.next()
            return UnitAttr()
        if tok.kind == "STRING":
            self.next()
            return StringAttr(json.loads(tok.text))
        if tok.kind == "SYMBOL":
            return SymbolRefAttr(self.parse_symbol())
        if self.at("["):
            self.next()
            elems: list[Attribute] = []
            if not self.accept("]"):
                elems.append(self.parse_attr())
                while self.accept(","):
                    elems.append(self.parse_attr())
                self.expect("]")
            return ArrayAttr(tuple(elems))
        if tok.kind == "HASH":
            self.next()
            name = tok.text[1:]
            dialect = name.split(".", 1)[0]
            if dialect not in registry.DIALECTS:
                raise ParseError(f"unknown dialect '{dialect}' in attribute {tok.text}", tok.loc)
            fn = registry.ATTR_PARSERS.get(name)
            if fn is None:
                raise ParseError(f"unknown attribute #{name}", tok.loc)
            try:
                return fn(self, tok.body, tok.body_loc or tok.loc)
            except ParseError:
                raise
            except ValueError as exc:
                raise ParseError(f"invalid attribute {tok.text}: {exc}", tok.loc) from None
        return TypeAttr(self.parse_type())

    def parse_attr_dict(self) -> dict[str, Attribute]:
        attrs: dict[str, Attribute] = {}
        if not self.accept("{"):
            return attrs
        if self.accept("}"):
            return attrs
        while True:
            tok = self.next()
            if tok.kind == "STRING":
                key = json.loads(tok.text)
            elif tok.kind == "BARE":
                key = tok.text
            else:
                raise ParseError(f"expected attribute name, got {tok.text!r}", tok.loc)
            if key in attrs:
                raise ParseError(f"duplicate attribute '{key}'", tok.loc)
            attrs[key] = self.parse_attr() if self.accept("=") else UnitAttr()
            if self.accept("}"):
                return attrs
            self.expect(",", "',' or '}'")

    # -- regions and operations ---------------------------------------
    def parse_region(
        self, args: list[tuple[Token, TypeDesc]] | None = None, isolated: bool = False
    ) -> Region:
        """Parse ``{ ops }``. Named ``args`` come from the op's pretty form;
        otherwise a generic ``^bb0(%a: T):`` header may declare them."""
        self.expect("{")
        saved = self.scopes
        if isolated:
            self.scopes = [{}]
        self.scopes.append({})
        try:
            region = Region()
            if self.peek().kind == "CARET":
                if args:
                    raise self.error("block header not allowed here")
                self.next()
                args = []
                if self.accept("("):
                    while True:
                        name = self.expect_kind("VALUE", "block argument")
                        self.expect(":")
                        args.append((name, self.parse_type()))
                        if self.accept(")"):
                            break
                        self.expect(",")
                self.expect(":")
            for name, t in args or []:
                self.define(name, region.add_arg(t))
            while not self.at("}"):
                if self.peek().kind == "CARET":
                    raise self.error("multi-block regions are not supported")
                if self.peek().kind == "EOF":
                    raise self.error("unterminated region, expected '}'")
                region.append(self.parse_operation())
            self.next()
            return region
        finally:
            self.scopes.pop()
            if isolated:
                self.scopes = saved

    def parse_operation(self) -> Operation:
        start = self.peek()
        names: list[Token] = []
        if start.kind == "VALUE":
            names.append(self.next())
            while self.accept(","):
                names.append(self.expect_kind("VALUE", "result name"))
            self.expect("=")
        tok = self.peek()
        if tok.kind == "STRING":
            self.next()
            name = json.loads(tok.text)
            self._check_op_name(name, tok)
            op = self.parse_generic_body(name)
        elif tok.kind == "BARE":
            self.next()
            opdef = self._check_op_name(tok.text, tok)
            op = opdef.parse(self) if opdef.parse else self.parse_generic_body(tok.text)
        else:
            raise self.error(f"expected operation, got {tok.text or 'end of input'!r}")
        op.loc = start.loc
        if len(names) != len(op.results):
            raise ParseError(
                f"{op.name} defines {len(op.results)} result(s) but {len(names)} name(s) given", start.loc
            )
        for n, v in zip(names, op.results):
            self.define(n, v)
        return op

    def _check_op_name(self, name: str, tok: Token) -> registry.OpDef:
        dialect = name.split(".", 1)[0]
        if dialect not in registry.DIALECTS:
            raise ParseError(f"unknown dialect '{dialect}' in operation '{name}'", tok.loc)
        opdef = registry.op_def(name)
        if opdef is None:
            raise ParseError(f"unknown operation '{name}'", tok.loc)
        return opdef

    def parse_generic_body(self, name: str) -> Operation:
        """``(operands) [({region}, ...)] [{attrs}] : (types) -> types``."""
        operands = self.parse_operand_list("(", ")")
        regions: list[Region] = []
        if self.at("(") and self.at("{", 1):
            self.next()
            regions.append(self.parse_region())
            while self.accept(","):
                regions.append(self.parse_region())
            self.expect(")")
        attrs = self.parse_attr_dict()
        self.expect(":")
        tok = self.peek()
        ftype = self.parse_function_type()
        self.check_operand_types(operands, ftype.inputs, tok)
        return Operation(name, operands, ftype.outputs, attrs, regions)

    def check_operand_types(self, operands, types, tok: Token) -> None:
        if len(operands) != len(types):
            raise ParseError(f"{len(operands)} operand(s) but {len(types)} type(s)", tok.loc)
        for v, t in zip(operands, types):
            if v.type != t:
                raise ParseError(f"operand type mismatch: value has type {v.type}, annotated {t}", tok.loc)


def parse_module(text: str) -> ModuleIR:
    """Parse a whole module. Raises :class:`ParseError` with line/column."""
    from .. import dialects  # noqa: F401  (registers all dialects)

    p = Parser(text)
    body = Region()
    if p.at("builtin.module"):
        p.next()
        if p.accept("attributes"):
            p.parse_attr_dict()
        p.expect("{")
        while not p.at("}"):
            if p.peek().kind == "EOF":
                raise p.error("unterminated module, expected '}'")
            body.append(p.parse_operation())
        p.next()
    else:
        while p.peek().kind != "EOF":
            body.append(p.parse_operation())
    p.expect_kind("EOF", "end of input")
    return ModuleIR(body)


def parse_type(text: str) -> TypeDesc:
    from .. import dialects  # noqa: F401

    return Parser(text).parse_type_only()


def parse_attribute(text: str) -> Attribute:
    from .. import dialects  # noqa: F401

    p = Parser(text)
    a = p.parse_attr()
    p.expect_kind("EOF", "end of attribute")
    return a
