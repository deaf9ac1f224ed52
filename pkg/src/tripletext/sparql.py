"""Parser for the SPARQL subset the client plans: SELECT over one BGP.

PREFIX declarations, a projection (variable list or *), and a WHERE
block of dot-separated triple patterns. Terms are <IRIs>, prefixed
names, "literals", and ?variables. FILTER, OPTIONAL, and UNION are
rejected by design with a clear diagnostic.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .kg import Term, TriplePattern


class SparqlSyntaxError(ValueError):
    """Syntax error with 1-based line/column location."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class PrefixResolutionError(SparqlSyntaxError):
    """A prefixed name used an undeclared prefix."""


@dataclass(frozen=True)
class SelectQuery:
    prefixes: dict[str, str]
    projection: tuple[str, ...] | None  # None means SELECT *
    bgp: tuple[TriplePattern, ...]

    def variables(self) -> tuple[str, ...]:
        seen: list[str] = []
        for tp in self.bgp:
            for name in tp.variables():
                if name not in seen:
                    seen.append(name)
        return tuple(seen)

    def projected(self) -> tuple[str, ...]:
        return self.projection if self.projection is not None else self.variables()


_TOKEN_SPEC = [
    ("WS", r"[ \t\r\n]+"),
    ("COMMENT", r"#[^\n]*"),
    ("IRIREF", r"<[^<>\s]*>"),
    ("LITERAL", r'"(?:[^"\\]|\\.)*"'),
    ("VAR", r"\?[A-Za-z][A-Za-z0-9_]*"),
    ("STAR", r"\*"),
    ("DOT", r"\."),
    ("LBRACE", r"\{"),
    ("RBRACE", r"\}"),
    ("PNAME", r"[A-Za-z][A-Za-z0-9_\-]*:[A-Za-z0-9_][A-Za-z0-9_\-.]*"),
    ("PREFIX_NS", r"[A-Za-z][A-Za-z0-9_\-]*:"),
    ("WORD", r"[A-Za-z][A-Za-z0-9_]*"),
]
_TOKEN_RE = re.compile("|".join(f"(?P<{name}>{pattern})" for name, pattern in _TOKEN_SPEC))

_UNSUPPORTED_KEYWORDS = {"FILTER", "OPTIONAL", "UNION", "GRAPH", "ORDER", "LIMIT", "OFFSET"}

_LITERAL_ESCAPES = {"n": "\n", "t": "\t", "r": "\r", '"': '"', "\\": "\\"}


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    line: int
    column: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise SparqlSyntaxError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup or ""
        value = m.group()
        if kind not in ("WS", "COMMENT"):
            tokens.append(_Token(kind, value, line, col))
        newlines = value.count("\n")
        if newlines:
            line += newlines
            col = len(value) - value.rfind("\n")
        else:
            col += len(value)
        pos = m.end()
    tokens.append(_Token("EOF", "", line, col))
    return tokens


def _unescape_literal(raw: str) -> str:
    body = raw[1:-1]
    out = []
    i = 0
    while i < len(body):
        ch = body[i]
        if ch == "\\" and i + 1 < len(body):
            out.append(_LITERAL_ESCAPES.get(body[i + 1], body[i + 1]))
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self._tokens = tokens
        self._pos = 0

    def _peek(self) -> _Token:
        return self._tokens[self._pos]

    def _next(self) -> _Token:
        token = self._tokens[self._pos]
        self._pos += 1
        return token

    def _fail(self, message: str, token: _Token | None = None) -> SparqlSyntaxError:
        token = token or self._peek()
        raise SparqlSyntaxError(message, token.line, token.column)

    def _expect_word(self, word: str) -> _Token:
        token = self._next()
        if token.kind != "WORD" or token.text.upper() != word:
            self._fail(f"expected {word}", token)
        return token

    def parse(self) -> SelectQuery:
        prefixes: dict[str, str] = {}
        while self._peek().kind == "WORD" and self._peek().text.upper() == "PREFIX":
            self._next()
            ns = self._next()
            if ns.kind != "PREFIX_NS":
                self._fail("expected a prefix name ending in ':'", ns)
            iri = self._next()
            if iri.kind != "IRIREF":
                self._fail("expected an <IRI> for the prefix", iri)
            prefixes[ns.text[:-1]] = iri.text[1:-1]

        self._expect_word("SELECT")
        projection: tuple[str, ...] | None
        if self._peek().kind == "STAR":
            self._next()
            projection = None
        else:
            names: list[str] = []
            while self._peek().kind == "VAR":
                names.append(self._next().text[1:])
            if not names:
                self._fail("SELECT needs variables or *")
            projection = tuple(names)

        self._expect_word("WHERE")
        if self._next().kind != "LBRACE":
            self._fail("expected '{' after WHERE", self._tokens[self._pos - 1])

        patterns: list[TriplePattern] = []
        while True:
            token = self._peek()
            if token.kind == "RBRACE":
                self._next()
                break
            if token.kind == "EOF":
                self._fail("unterminated WHERE block")
            if token.kind == "WORD" and token.text.upper() in _UNSUPPORTED_KEYWORDS:
                self._fail(f"{token.text.upper()} is not supported (BGP-only subset)", token)
            patterns.append(self._triple_pattern(prefixes))
            sep = self._peek()
            if sep.kind == "DOT":
                self._next()
            elif sep.kind != "RBRACE":
                self._fail("expected '.' or '}' after a triple pattern", sep)

        if self._peek().kind != "EOF":
            self._fail("trailing content after '}'")
        if not patterns:
            raise SparqlSyntaxError("WHERE block holds no triple patterns", 1, 1)

        query = SelectQuery(prefixes=prefixes, projection=projection, bgp=tuple(patterns))
        in_bgp = set(query.variables())
        for name in query.projected():
            if name not in in_bgp:
                raise SparqlSyntaxError(f"projected variable ?{name} not in the WHERE block", 1, 1)
        return query

    def _triple_pattern(self, prefixes: dict[str, str]) -> TriplePattern:
        s = self._term(prefixes, allow_literal=False)
        p = self._term(prefixes, allow_literal=False)
        o = self._term(prefixes, allow_literal=True)
        try:
            return TriplePattern(s, p, o)
        except ValueError as exc:
            self._fail(str(exc), self._tokens[self._pos - 1])
            raise AssertionError("unreachable")

    def _term(self, prefixes: dict[str, str], allow_literal: bool) -> Term:
        token = self._next()
        if token.kind == "IRIREF":
            return Term.iri(token.text[1:-1])
        if token.kind == "VAR":
            return Term.var(token.text[1:])
        if token.kind == "LITERAL":
            if not allow_literal:
                self._fail("literal only allowed in object position", token)
            return Term.literal(_unescape_literal(token.text))
        if token.kind == "PNAME":
            prefix, local = token.text.split(":", 1)
            if prefix not in prefixes:
                raise PrefixResolutionError(
                    f"undeclared prefix {prefix!r}", token.line, token.column
                )
            return Term.iri(prefixes[prefix] + local)
        if token.kind == "WORD" and token.text.upper() in _UNSUPPORTED_KEYWORDS:
            self._fail(f"{token.text.upper()} is not supported (BGP-only subset)", token)
        self._fail(f"expected an IRI, prefixed name, literal, or ?variable, got {token.text!r}", token)
        raise AssertionError("unreachable")


def parse_select(text: str) -> SelectQuery:
    """Parse the supported SELECT/BGP subset; raise located syntax errors."""
    return _Parser(_tokenize(text)).parse()
