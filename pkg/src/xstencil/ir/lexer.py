"""Tokenizer for the textual IR."""

from __future__ import annotations

import re
from dataclasses import dataclass

from .core import Location


class ParseError(Exception):
    def __init__(self, message: str, loc: Location | None = None):
        super().__init__(message)
        self.message = message
        self.loc = loc

    def __str__(self) -> str:
        return f"{self.loc}: {self.message}" if self.loc else self.message


@dataclass
class Token:
    kind: str
    text: str
    loc: Location
    body: str | None = None  # raw text inside <...> for dialect types/attributes
    body_loc: Location | None = None


_IDENT = r"[A-Za-z_][\w$.]*"
_SPEC = [
    ("WS", r"[ \t\r]+"),
    ("NL", r"\n"),
    ("COMMENT", r"//[^\n]*"),
    ("ARROW", r"->"),
    ("VALUE", r"%[\w$.]+"),
    ("SYMBOL", r'@(?:[A-Za-z_][\w$.\-]*|"[^"\n]*")'),
    ("CARET", r"\^[\w$.\-]*"),
    ("HASH", r"#" + _IDENT),
    ("BANG", r"!" + _IDENT),
    ("FLOAT", r"-?(?:\d+\.\d*(?:[eE][+-]?\d+)?|\d+[eE][+-]?\d+|inf\b|nan\b)"),
    ("HEX", r"-?0x[0-9a-fA-F]+"),
    ("INT", r"-?\d+"),
    ("STRING", r'"(?:[^"\\\n]|\\.)*"'),
    ("BARE", r"[A-Za-z_][\w$.]*"),
    ("PUNCT", r"[()\[\]{}<>,:=?*+|]"),
    ("MISMATCH", r"."),
]
_RE = re.compile("|".join(f"(?P<{name}>{pat})" for name, pat in _SPEC))
# tokens that may carry an angle-bracket body glued to them
_BODY_KINDS = {"HASH", "BANG"}
_BODY_BARES = {"memref"}


def _scan_angle(text: str, start: int) -> int:
    """Return the index just past the '>' matching the '<' at ``start``."""
    depth = 0
    i = start
    while i < len(text):
        c = text[i]
        if c == "<":
            depth += 1
        elif c == ">" and text[i - 1] != "-":
            depth -= 1
            if depth == 0:
                return i + 1
        elif c == "\n" and depth == 0:
            break
        elif c == '"':
            j = text.find('"', i + 1)
            i = j if j >= 0 else len(text)
        i += 1
    raise ValueError("unbalanced '<'")


def tokenize(text: str, base: Location | None = None) -> list[Token]:
    line0, col0 = (base.line, base.col) if base else (1, 1)
    tokens: list[Token] = []
    line, line_start = line0, 0
    pos = 0
    first_line = True
    while pos < len(text):
        m = _RE.match(text, pos)
        assert m is not None
        kind = m.lastgroup
        col = pos - line_start + (col0 if first_line else 1)
        loc = Location(line, col)
        end = m.end()
        if kind == "NL":
            line += 1
            line_start = end
            first_line = False
        elif kind == "MISMATCH":
            raise ParseError(f"unexpected character {m.group()!r}", loc)
        elif kind not in ("WS", "COMMENT"):
            tok = Token(kind, m.group(), loc)
            if (kind in _BODY_KINDS or (kind == "BARE" and tok.text in _BODY_BARES)) and text.startswith("<", end):
                try:
                    close = _scan_angle(text, end)
                except ValueError:
                    raise ParseError("unbalanced '<' in type or attribute", loc) from None
                tok.body = text[end + 1 : close - 1]
                tok.body_loc = Location(line, col + (end + 1 - pos))
                newlines = tok.body.count("\n")
                if newlines:
                    line += newlines
                    line_start = end + 1 + tok.body.rfind("\n") + 1
                    first_line = False
                end = close
            tokens.append(tok)
        pos = end
    tokens.append(Token("EOF", "", Location(line, pos - line_start + 1)))
    return tokens
