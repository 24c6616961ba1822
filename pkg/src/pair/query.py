"""A small MATCH/WHERE/RETURN path query language.

Grammar (one linear path, conjunctive equality filters, property projections):

    query       := "MATCH" path ["WHERE" condition {"AND" condition}]
                   "RETURN" projection {"," projection}
    path        := node {edge node}
    node        := "(" IDENT [":" IDENT] ")"
    edge        := "-" "[" ":" IDENT "]" "-" ">"
    condition   := IDENT "." IDENT "=" literal
    projection  := IDENT "." IDENT
    literal     := STRING | NUMBER | "true" | "false"

Keywords are uppercase and identifiers are case-sensitive.  Strings are
double-quoted with backslash escapes.  The parser is total: any input either
yields a QueryAst or raises QuerySyntaxError (1-based line/column plus the
acceptable token kinds) or QuerySemanticError (a WHERE/RETURN variable that
the path does not bind).  ``parse_query`` and ``format_query`` are mutually
inverse on well-formed queries.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .chronicle import ChronicleGraph, Literal, match_pattern
from .errors import ContractViolation, QuerySemanticError, QuerySyntaxError

__all__ = [
    "NodePattern",
    "EdgePattern",
    "Condition",
    "Projection",
    "QueryAst",
    "parse_query",
    "format_query",
    "execute",
]


# ── AST ─────────────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class NodePattern:
    var: str
    label: str | None = None


@dataclass(frozen=True)
class EdgePattern:
    rel: str


@dataclass(frozen=True)
class Condition:
    var: str
    prop: str
    value: Literal


@dataclass(frozen=True)
class Projection:
    var: str
    prop: str


@dataclass(frozen=True)
class QueryAst:
    """A validated query: alternating path, filters, projections.

    Invariants enforced on construction: the path alternates (one more node
    than edges), path variables are unique, at least one projection exists,
    and every variable mentioned in WHERE or RETURN is bound by the path.
    """

    nodes: tuple[NodePattern, ...]
    edges: tuple[EdgePattern, ...] = ()
    where: tuple[Condition, ...] = ()
    returns: tuple[Projection, ...] = ()

    def __post_init__(self):
        if len(self.nodes) == 0 or len(self.nodes) != len(self.edges) + 1:
            raise ContractViolation("path must alternate: n nodes need n-1 edges")
        seen = set()
        for node in self.nodes:
            if node.var in seen:
                raise ContractViolation(f"duplicate path variable {node.var!r}")
            seen.add(node.var)
        if not self.returns:
            raise ContractViolation("a query must project at least one property")
        for item in (*self.where, *self.returns):
            if item.var not in seen:
                raise ContractViolation(f"variable {item.var!r} is not bound by the path")


# ── Lexer ───────────────────────────────────────────────────────────────────

_KEYWORDS = {"MATCH", "WHERE", "RETURN", "AND"}
_PUNCT = {"(": "(", ")": ")", ":": ":", ",": ",", ".": ".", "=": "=",
          "-": "-", "[": "[", "]": "]", ">": ">"}


@dataclass(frozen=True)
class _Token:
    kind: str           # keyword, punct char, IDENT, STRING, NUMBER, BOOL, EOF
    value: Literal
    line: int
    column: int


_ESCAPES = {'"': '"', "\\": "\\", "n": "\n", "t": "\t", "r": "\r"}


def _lex(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    line, column = 1, 1
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            column = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            column += 1
            continue
        start_line, start_column = line, column
        if ch == '"':
            i += 1
            column += 1
            chars: list[str] = []
            while True:
                if i >= n or text[i] == "\n":
                    raise QuerySyntaxError("unterminated string", start_line,
                                           start_column, {"STRING"})
                ch = text[i]
                if ch == '"':
                    i += 1
                    column += 1
                    break
                if ch == "\\":
                    if i + 1 >= n or text[i + 1] not in _ESCAPES:
                        raise QuerySyntaxError("bad string escape", line, column + 1,
                                               set(_ESCAPES))
                    chars.append(_ESCAPES[text[i + 1]])
                    i += 2
                    column += 2
                    continue
                chars.append(ch)
                i += 1
                column += 1
            tokens.append(_Token("STRING", "".join(chars), start_line, start_column))
            continue
        if ch.isdigit() or (ch == "-" and i + 1 < n and text[i + 1].isdigit()):
            j = i + 1
            while j < n and (text[j].isdigit() or text[j] in ".eE+-"):
                # stop a trailing '+'/'-' that is not an exponent sign
                if text[j] in "+-" and text[j - 1] not in "eE":
                    break
                j += 1
            raw = text[i:j]
            try:
                value = float(raw)
            except ValueError:
                raise QuerySyntaxError(f"bad number {raw!r}", start_line,
                                       start_column, {"NUMBER"}) from None
            tokens.append(_Token("NUMBER", value, start_line, start_column))
            column += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i + 1
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            if word in _KEYWORDS:
                tokens.append(_Token(word, word, start_line, start_column))
            elif word in ("true", "false"):
                tokens.append(_Token("BOOL", word == "true", start_line, start_column))
            else:
                tokens.append(_Token("IDENT", word, start_line, start_column))
            column += j - i
            i = j
            continue
        if ch in _PUNCT:
            tokens.append(_Token(ch, ch, start_line, start_column))
            i += 1
            column += 1
            continue
        raise QuerySyntaxError(f"unexpected character {ch!r}", start_line,
                               start_column, set(_PUNCT) | _KEYWORDS | {"IDENT"})
    tokens.append(_Token("EOF", "", line, column))
    return tokens


# ── Parser ──────────────────────────────────────────────────────────────────


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0

    @property
    def current(self) -> _Token:
        return self.tokens[self.pos]

    def take(self, kind: str) -> _Token:
        token = self.current
        if token.kind != kind:
            raise QuerySyntaxError(f"unexpected {_describe(token)}", token.line,
                                   token.column, {kind})
        self.pos += 1
        return token

    def peek(self, kind: str) -> bool:
        return self.current.kind == kind

    def parse(self) -> QueryAst:
        self.take("MATCH")
        nodes = [self._node()]
        edges: list[EdgePattern] = []
        while self.peek("-"):
            edges.append(self._edge())
            nodes.append(self._node())
        where: list[Condition] = []
        if self.peek("WHERE"):
            self.take("WHERE")
            where.append(self._condition())
            while self.peek("AND"):
                self.take("AND")
                where.append(self._condition())
        token = self.current
        if token.kind != "RETURN":
            expected = {"RETURN", "-"} if not where else {"RETURN", "AND"}
            raise QuerySyntaxError(f"unexpected {_describe(token)}", token.line,
                                   token.column, expected)
        self.take("RETURN")
        returns = [self._projection()]
        while self.peek(","):
            self.take(",")
            returns.append(self._projection())
        self.take("EOF")

        bound = {node.var for node in nodes}
        duplicates = len(bound) != len(nodes)
        if duplicates:
            counts: dict[str, int] = {}
            for node in nodes:
                counts[node.var] = counts.get(node.var, 0) + 1
            dup = sorted(v for v, c in counts.items() if c > 1)[0]
            raise QuerySemanticError(f"variable {dup!r} is bound twice", dup)
        for item in (*where, *returns):
            if item.var not in bound:
                raise QuerySemanticError(
                    f"variable {item.var!r} is not bound by the MATCH path", item.var)
        return QueryAst(tuple(nodes), tuple(edges), tuple(where), tuple(returns))

    def _node(self) -> NodePattern:
        self.take("(")
        var = str(self.take("IDENT").value)
        label: str | None = None
        if self.peek(":"):
            self.take(":")
            label = str(self.take("IDENT").value)
        self.take(")")
        return NodePattern(var, label)

    def _edge(self) -> EdgePattern:
        self.take("-")
        self.take("[")
        self.take(":")
        rel = str(self.take("IDENT").value)
        self.take("]")
        self.take("-")
        self.take(">")
        return EdgePattern(rel)

    def _condition(self) -> Condition:
        var = str(self.take("IDENT").value)
        self.take(".")
        prop = str(self.take("IDENT").value)
        self.take("=")
        token = self.current
        if token.kind not in ("STRING", "NUMBER", "BOOL"):
            raise QuerySyntaxError(f"unexpected {_describe(token)}", token.line,
                                   token.column, {"STRING", "NUMBER", "BOOL"})
        self.pos += 1
        return Condition(var, prop, token.value)

    def _projection(self) -> Projection:
        var = str(self.take("IDENT").value)
        self.take(".")
        prop = str(self.take("IDENT").value)
        return Projection(var, prop)


def _describe(token: _Token) -> str:
    if token.kind == "EOF":
        return "end of input"
    return f"{token.kind} {token.value!r}" if token.kind in ("IDENT", "STRING", "NUMBER") \
        else repr(token.value)


def parse_query(text: str) -> QueryAst:
    """Parse query text; total apart from the two documented error types."""
    return _Parser(_lex(text)).parse()


# ── Formatter ───────────────────────────────────────────────────────────────


def _format_value(value: Literal) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        escaped = value.replace("\\", "\\\\").replace('"', '\\"')
        escaped = escaped.replace("\n", "\\n").replace("\t", "\\t").replace("\r", "\\r")
        return f'"{escaped}"'
    return repr(float(value))


def format_query(ast: QueryAst) -> str:
    """Canonical text: one clause per line, single spaces, no trailer."""
    path: list[str] = []
    for i, node in enumerate(ast.nodes):
        if i > 0:
            path.append(f"-[:{ast.edges[i - 1].rel}]->")
        if node.label is None:
            path.append(f"({node.var})")
        else:
            path.append(f"({node.var}:{node.label})")
    lines = ["MATCH " + "".join(path)]
    if ast.where:
        lines.append("WHERE " + " AND ".join(
            f"{c.var}.{c.prop} = {_format_value(c.value)}" for c in ast.where))
    lines.append("RETURN " + ", ".join(f"{p.var}.{p.prop}" for p in ast.returns))
    return "\n".join(lines)


# ── Execution ───────────────────────────────────────────────────────────────


def execute(ast: QueryAst, graph: ChronicleGraph) -> list[tuple[Literal, ...]]:
    """Run the query against a graph; rows ordered by bound node ids."""
    return match_pattern(graph, ast)
