"""Tiny text grammar for predicates on the command line.

    predicate := 'true' | clause ('AND' clause)*
    clause    := attr OP literal
               | attr 'IN' '(' literal (',' literal)* ')'
               | attr 'BETWEEN' literal 'AND' literal
    OP        := = | != | < | <= | > | >=

Literals are numbers, quoted strings, or bare words.  Keywords are
case-insensitive.  Errors carry the offending position and a caret line.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import PredicateError
from .relation import Clause, Predicate

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<op><=|>=|!=|=|<|>)
  | (?P<punct>[(),])
  | (?P<quoted>'(?:[^'\\]|\\.)*'|"(?:[^"\\]|\\.)*")
  | (?P<number>[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)(?=$|[\s(),<>=!])
  | (?P<word>[^\s(),<>=!]+)
    """,
    re.VERBOSE,
)

_KEYWORDS = {"AND", "IN", "BETWEEN", "TRUE"}


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    value: object
    position: int


class PredicateParseError(PredicateError):
    """Parse failure; renders the source with a caret under the position."""

    def __init__(self, message: str, source: str, position: int):
        self.position = position
        self.source = source
        caret = " " * position + "^"
        super().__init__(
            f"parse error at position {position}: {message}\n  {source}\n  {caret}"
        )


def _tokenize(source: str) -> list:
    tokens = []
    pos = 0
    while pos < len(source):
        match = _TOKEN_RE.match(source, pos)
        if match is None:
            raise PredicateParseError(
                f"unexpected character {source[pos]!r}", source, pos
            )
        kind = match.lastgroup
        text = match.group()
        if kind != "ws":
            if kind == "quoted":
                value = re.sub(r"\\(.)", r"\1", text[1:-1])
                kind = "literal"
            elif kind == "number":
                value = float(text)
                kind = "literal"
            elif kind == "word" and text.upper() in _KEYWORDS:
                kind = text.upper()
                value = text
            else:
                value = text
            tokens.append(_Token(kind, text, value, pos))
        pos = match.end()
    tokens.append(_Token("eof", "", None, len(source)))
    return tokens


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.tokens = _tokenize(source)
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def fail(self, message: str, token: _Token | None = None):
        token = token or self.peek()
        raise PredicateParseError(message, self.source, token.position)

    def parse(self) -> Predicate:
        if self.peek().kind == "TRUE":
            self.advance()
            if self.peek().kind != "eof":
                self.fail("unexpected input after 'true'")
            return Predicate()
        clauses = [self.clause()]
        while self.peek().kind == "AND":
            self.advance()
            clauses.append(self.clause())
        if self.peek().kind != "eof":
            self.fail("expected AND or end of predicate")
        return Predicate(tuple(clauses))

    def clause(self) -> Clause:
        token = self.peek()
        if token.kind != "word":
            self.fail("expected an attribute name")
        attribute = self.advance().text
        op_token = self.peek()
        if op_token.kind == "op":
            self.advance()
            return Clause(attribute, op_token.text, self.literal())
        if op_token.kind == "IN":
            self.advance()
            return Clause(attribute, "in", self.literal_list())
        if op_token.kind == "BETWEEN":
            self.advance()
            low = self.literal()
            if self.peek().kind != "AND":
                self.fail("expected AND between range bounds")
            self.advance()
            return Clause(attribute, "between", (low, self.literal()))
        self.fail("expected a comparator (=, !=, <, <=, >, >=, IN, BETWEEN)")

    def literal(self):
        token = self.peek()
        if token.kind == "literal":
            return self.advance().value
        if token.kind == "word":
            return self.advance().text
        self.fail("expected a literal value")

    def literal_list(self) -> tuple:
        if self.peek().text != "(":
            self.fail("expected '(' after IN")
        self.advance()
        items = [self.literal()]
        while self.peek().text == ",":
            self.advance()
            items.append(self.literal())
        if self.peek().text != ")":
            self.fail("expected ',' or ')' in IN list")
        self.advance()
        return tuple(items)


def parse_predicate(source: str) -> Predicate:
    """Parse a predicate expression; raises :class:`PredicateParseError`."""
    stripped = source.strip()
    if not stripped:
        raise PredicateParseError("empty predicate", source, 0)
    return _Parser(source).parse()
