"""Tokenizer and source diagnostics shared by all text formats.

Two modes cover every format in the package:

* ``dsl`` — domain models (.cdm), view models (.cvm), schemas (.cvs),
  transformation rules (.cvt) and content documents. Identifiers are plain
  words; ``.`` and ``/`` are operators; ISO dates and integers are typed
  tokens.
* ``project`` — project files (.cpj), whose node ids may embed ``:``, ``.``
  and ``-`` (e.g. ``ouvrage:M1``).

Positions are 1-based (line, column) and survive into every error message.
"""

from __future__ import annotations

import datetime as dt
import json
import re
from dataclasses import dataclass

_DSL_OPS = ("->", ":=", "!=", "<=", ">=", "{", "}", "(", ")", ":", ",", ".", "/", "=", "<", ">")
_PROJECT_OPS = ("->", "{", "}", ":", "=")

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_INT_RE = re.compile(r"[0-9]+")
_DATE_RE = re.compile(r"[0-9]{4}-[0-9]{2}-[0-9]{2}")
_ATOM_RE = re.compile(r"[A-Za-z0-9_.:][A-Za-z0-9_.:-]*")


class ParseError(Exception):
    """Syntax or semantic error at a known source position."""

    def __init__(self, message: str, line: int, col: int, filename: str | None = None):
        self.message = message
        self.line = line
        self.col = col
        self.filename = filename
        super().__init__(self.diagnostic())

    def diagnostic(self) -> str:
        """Editor-friendly one-liner: ``file:line:col: message``."""
        name = self.filename or "<input>"
        return f"{name}:{self.line}:{self.col}: {self.message}"


@dataclass(frozen=True)
class Token:
    kind: str  # ident | atom | int | date | string | op | eof
    text: str
    value: object  # decoded payload (str/int/date); same as text for idents/ops
    line: int
    col: int


def tokenize(text: str, filename: str | None = None, mode: str = "dsl") -> list[Token]:
    if mode not in ("dsl", "project"):
        raise ValueError(f"unknown lexer mode {mode!r}")
    ops = _DSL_OPS if mode == "dsl" else _PROJECT_OPS
    tokens: list[Token] = []
    i = 0
    line = 1
    col = 1
    n = len(text)

    def error(message: str, l: int, c: int) -> ParseError:
        return ParseError(message, l, c, filename)

    while i < n:
        ch = text[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch == '"':
            start_line, start_col = line, col
            j = i + 1
            while j < n:
                if text[j] == "\\":
                    j += 2
                    continue
                if text[j] == '"':
                    break
                if text[j] == "\n":
                    raise error("unterminated string literal", start_line, start_col)
                j += 1
            if j >= n:
                raise error("unterminated string literal", start_line, start_col)
            raw = text[i : j + 1]
            try:
                decoded = json.loads(raw)
            except ValueError:
                raise error("invalid string escape", start_line, start_col) from None
            tokens.append(Token("string", raw, decoded, start_line, start_col))
            col += j + 1 - i
            i = j + 1
            continue

        if mode == "dsl":
            if ch.isdigit():
                m = _DATE_RE.match(text, i)
                if m and not _is_word_char(text, m.end()):
                    try:
                        value: object = dt.date.fromisoformat(m.group())
                    except ValueError:
                        raise error(f"invalid date {m.group()!r}", line, col) from None
                    tokens.append(Token("date", m.group(), value, line, col))
                    col += m.end() - i
                    i = m.end()
                    continue
                m = _INT_RE.match(text, i)
                assert m is not None
                if _is_word_char(text, m.end()):
                    raise error(f"malformed number at {text[i:m.end()+1]!r}", line, col)
                tokens.append(Token("int", m.group(), int(m.group()), line, col))
                col += m.end() - i
                i = m.end()
                continue
            m = _IDENT_RE.match(text, i)
            if m:
                tokens.append(Token("ident", m.group(), m.group(), line, col))
                col += m.end() - i
                i = m.end()
                continue
            op = _match_op(text, i, ops)
            if op:
                tokens.append(Token("op", op, op, line, col))
                col += len(op)
                i += len(op)
                continue
            raise error(f"unexpected character {ch!r}", line, col)

        # project mode: operators first so "->" wins, then greedy atoms.
        op = _match_op(text, i, ops)
        if op and not (op == ":" and _ATOM_RE.match(ch)):
            tokens.append(Token("op", op, op, line, col))
            col += len(op)
            i += len(op)
            continue
        m = _ATOM_RE.match(text, i)
        if m:
            word = m.group()
            # Ids never end in separators; back off so "ouvrage:M1:" or
            # "a->" split into atom + operator.
            while word and word[-1] in ":-":
                word = word[:-1]
            if not word:
                tokens.append(Token("op", ch, ch, line, col))
                col += 1
                i += 1
                continue
            tokens.append(Token("atom", word, word, line, col))
            col += len(word)
            i += len(word)
            continue
        raise error(f"unexpected character {ch!r}", line, col)

    tokens.append(Token("eof", "", "", line, col))
    return tokens


def _is_word_char(text: str, pos: int) -> bool:
    return pos < len(text) and (text[pos].isalnum() or text[pos] in "_-")


def _match_op(text: str, pos: int, ops: tuple[str, ...]) -> str | None:
    for op in ops:
        if text.startswith(op, pos):
            return op
    return None


class TokenStream:
    """Cursor over a token list with the expect/accept helpers parsers need."""

    def __init__(self, tokens: list[Token], filename: str | None = None):
        self._tokens = tokens
        self._pos = 0
        self.filename = filename

    @classmethod
    def from_text(cls, text: str, filename: str | None = None, mode: str = "dsl") -> "TokenStream":
        return cls(tokenize(text, filename, mode), filename)

    @property
    def current(self) -> Token:
        return self._tokens[self._pos]

    def at_end(self) -> bool:
        return self.current.kind == "eof"

    def advance(self) -> Token:
        tok = self.current
        if tok.kind != "eof":
            self._pos += 1
        return tok

    def check(self, kind: str, text: str | None = None) -> bool:
        tok = self.current
        return tok.kind == kind and (text is None or tok.text == text)

    def accept(self, kind: str, text: str | None = None) -> Token | None:
        if self.check(kind, text):
            return self.advance()
        return None

    def expect(self, kind: str, text: str | None = None, what: str | None = None) -> Token:
        if self.check(kind, text):
            return self.advance()
        wanted = what or (text if text is not None else kind)
        return self.fail(f"expected {wanted}, found {self._describe(self.current)}")

    def fail(self, message: str, token: Token | None = None) -> Token:
        tok = token or self.current
        raise ParseError(message, tok.line, tok.col, self.filename)

    @staticmethod
    def _describe(tok: Token) -> str:
        if tok.kind == "eof":
            return "end of input"
        return repr(tok.text)
