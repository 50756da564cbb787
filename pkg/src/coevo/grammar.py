"""Parsing and representation of Xtext-style grammar definitions.

The supported notation is the parser-rule subset used by small Xtext
languages::

    Model:
        (items+=Item)*;
    Item:
        'item' name=ID (':' kind=[Kind|QualifiedName])? ';';

Supported constructs: string keywords, rule calls, assignments (``=``,
``+=``, ``?=``), groups ``( ... )``, alternatives ``|``, the cardinalities
``?`` ``*`` ``+``, and cross-references ``[Target]`` or
``[Target|SyntaxRule]`` (the syntax rule defaults to ID).  The builtin
terminals ID, INT and STRING are hardwired, as are the hidden terminals
(whitespace, ``//`` line comments, ``/* */`` block comments).  Anything
outside this subset -- terminal rules, enum rules, unordered groups,
actions, predicates, ``returns`` clauses -- raises UnsupportedConstruct
rather than being silently mis-parsed.

Header lines before the first rule (``grammar``/``generate``/``import``
statements and the like) are not interpreted; they are kept verbatim in
``Grammar.preamble``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field


BUILTIN_TERMINALS = ("ID", "INT", "STRING")


class GrammarError(Exception):
    """Base class for grammar-definition problems."""


class GrammarSyntaxError(GrammarError):
    def __init__(self, line: int, col: int, message: str):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col
        self.message = message


class DuplicateRule(GrammarError):
    def __init__(self, name: str):
        super().__init__(f"rule {name!r} is defined more than once")
        self.name = name


class UnresolvedRuleReference(GrammarError):
    def __init__(self, name: str):
        super().__init__(f"reference to unknown rule {name!r}")
        self.name = name


class UnsupportedConstruct(GrammarError):
    def __init__(self, description: str):
        super().__init__(description)
        self.description = description


class GrammarExpr:
    """Base class of the closed expression variant set."""

    __slots__ = ()


@dataclass(frozen=True)
class Keyword(GrammarExpr):
    text: str


@dataclass(frozen=True)
class RuleCall(GrammarExpr):
    target: str


@dataclass(frozen=True)
class CrossRef(GrammarExpr):
    """By-name reference ``[target|syntax]``, matched by the syntax rule's tokens."""

    target: str
    syntax: str = "ID"


@dataclass(frozen=True)
class Assignment(GrammarExpr):
    feature: str
    operator: str  # '=', '+=' or '?='
    operand: GrammarExpr


@dataclass(frozen=True)
class Group(GrammarExpr):
    items: tuple[GrammarExpr, ...]


@dataclass(frozen=True)
class Alternatives(GrammarExpr):
    options: tuple[GrammarExpr, ...]


@dataclass(frozen=True)
class Repeat(GrammarExpr):
    inner: GrammarExpr
    cardinality: str  # '?', '*' or '+'


@dataclass(frozen=True)
class Rule:
    name: str
    body: GrammarExpr


@dataclass(frozen=True)
class Grammar:
    name: str
    preamble: str
    rules: tuple[Rule, ...]
    _rule_map: dict = field(init=False, repr=False, compare=False, hash=False, default=None)

    def __post_init__(self):
        object.__setattr__(self, "_rule_map", {r.name: r for r in self.rules})

    def rule(self, name: str) -> Rule | None:
        return self._rule_map.get(name)

    @property
    def entry_rule(self) -> Rule:
        return self.rules[0]


# --------------------------------------------------------------------------
# Tokenizer for the grammar notation itself
# --------------------------------------------------------------------------

# A rule header is one or more bare identifiers followed by ':' (the extra
# identifiers cover headers like 'terminal WS:' so they fail loudly instead
# of vanishing into the preamble).  Header statements such as 'grammar x.y
# with z' or 'generate m "uri"' never match: they carry no colon or contain
# non-identifier characters before it.
_RULE_START_RE = re.compile(r"[ \t]*[A-Za-z_][A-Za-z0-9_]*(?:[ \t]+[A-Za-z_][A-Za-z0-9_]*)*[ \t]*:")
_GRAMMAR_NAME_RE = re.compile(r"^\s*grammar\s+([\w.]+)", re.MULTILINE)

_GTOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n\f\v]+)
  | (?P<comment>//[^\r\n]*|/\*.*?\*/)
  | (?P<id>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<literal>'(?:[^'\\\r\n]|\\.)*')
  | (?P<op>\+=|\?=|=>|->|[:;|()\[\]?*+=&{}.!])
    """,
    re.VERBOSE | re.DOTALL,
)

_ESCAPES = {"n": "\n", "t": "\t", "r": "\r", "\\": "\\", "'": "'", '"': '"'}


def _unquote(literal: str) -> str:
    body = literal[1:-1]
    out = []
    i = 0
    while i < len(body):
        ch = body[i]
        if ch == "\\" and i + 1 < len(body):
            out.append(_ESCAPES.get(body[i + 1], body[i + 1]))
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def _quote(text: str) -> str:
    return "'" + text.replace("\\", "\\\\").replace("'", "\\'") + "'"


class _GToken:
    __slots__ = ("kind", "text", "line", "col")

    def __init__(self, kind, text, line, col):
        self.kind = kind
        self.text = text
        self.line = line
        self.col = col


def _tokenize(text: str, line_offset: int) -> list[_GToken]:
    tokens = []
    pos = 0
    line = 1 + line_offset
    col = 1
    while pos < len(text):
        m = _GTOKEN_RE.match(text, pos)
        if m is None:
            raise GrammarSyntaxError(line, col, f"unexpected character {text[pos]!r}")
        kind = m.lastgroup
        value = m.group()
        if kind not in ("ws", "comment"):
            tokens.append(_GToken(kind, value, line, col))
        newlines = value.count("\n")
        if newlines:
            line += newlines
            col = len(value) - value.rfind("\n")
        else:
            col += len(value)
        pos = m.end()
    return tokens


# --------------------------------------------------------------------------
# Recursive-descent parser over the token list
# --------------------------------------------------------------------------

class _GrammarParser:
    def __init__(self, tokens: list[_GToken]):
        self.tokens = tokens
        self.i = 0

    def peek(self, ahead=0) -> _GToken | None:
        j = self.i + ahead
        return self.tokens[j] if j < len(self.tokens) else None

    def next(self) -> _GToken:
        tok = self.peek()
        if tok is None:
            last = self.tokens[-1] if self.tokens else _GToken("op", "", 1, 1)
            raise GrammarSyntaxError(last.line, last.col, "unexpected end of grammar")
        self.i += 1
        return tok

    def expect(self, text: str) -> _GToken:
        tok = self.next()
        if tok.text != text:
            raise GrammarSyntaxError(tok.line, tok.col, f"expected {text!r}, found {tok.text!r}")
        return tok

    def error(self, tok: _GToken, message: str):
        raise GrammarSyntaxError(tok.line, tok.col, message)

    def parse_rules(self) -> list[Rule]:
        rules = []
        seen = set()
        while self.peek() is not None:
            rules.append(self._rule(seen))
        return rules

    def _rule(self, seen: set) -> Rule:
        tok = self.next()
        if tok.kind != "id":
            self.error(tok, f"expected rule name, found {tok.text!r}")
        nxt = self.peek()
        if tok.text in ("terminal", "enum") and nxt is not None and nxt.kind == "id":
            raise UnsupportedConstruct(f"{tok.text} rules are not supported")
        if nxt is not None and nxt.kind == "id":
            if nxt.text == "returns":
                raise UnsupportedConstruct("'returns' clauses are not supported")
            if nxt.text == "hidden":
                raise UnsupportedConstruct("'hidden' clauses are not supported")
            self.error(nxt, f"expected ':' after rule name {tok.text!r}")
        if tok.text in seen:
            raise DuplicateRule(tok.text)
        seen.add(tok.text)
        self.expect(":")
        body = self._alternatives()
        self.expect(";")
        return Rule(tok.text, body)

    def _alternatives(self) -> GrammarExpr:
        options = [self._sequence()]
        while self.peek() is not None and self.peek().text == "|":
            self.next()
            options.append(self._sequence())
        if len(options) == 1:
            return options[0]
        return Alternatives(tuple(options))

    def _sequence(self) -> GrammarExpr:
        items = []
        while True:
            tok = self.peek()
            if tok is None or tok.text in (";", "|", ")"):
                break
            items.append(self._term())
        if not items:
            tok = self.peek() or _GToken("op", "", 1, 1)
            self.error(tok, "empty sequence")
        if len(items) == 1:
            return items[0]
        return Group(tuple(items))

    def _term(self) -> GrammarExpr:
        expr = self._assignment_or_primary()
        nxt = self.peek()
        if nxt is not None and nxt.text in ("?", "*", "+"):
            self.next()
            expr = Repeat(expr, nxt.text)
            again = self.peek()
            if again is not None and again.text in ("?", "*", "+"):
                raise UnsupportedConstruct("stacked cardinalities are not supported")
        return expr

    def _assignment_or_primary(self) -> GrammarExpr:
        tok = self.peek()
        if tok.kind == "id":
            op = self.peek(1)
            if op is not None and op.text in ("=", "+=", "?="):
                self.next()
                self.next()
                operand = self._primary()
                if op.text == "?=" and not isinstance(operand, Keyword):
                    self.error(op, "'?=' assignments require a keyword operand")
                return Assignment(tok.text, op.text, operand)
        return self._primary()

    def _primary(self) -> GrammarExpr:
        tok = self.next()
        if tok.kind == "literal":
            text = _unquote(tok.text)
            if not text:
                self.error(tok, "empty keyword literal")
            if "\n" in text or "\r" in text:
                self.error(tok, "keyword literals must not contain newlines")
            return Keyword(text)
        if tok.kind == "id":
            return RuleCall(tok.text)
        if tok.text == "(":
            inner = self._alternatives()
            self.expect(")")
            return inner
        if tok.text == "[":
            target = self.next()
            if target.kind != "id":
                self.error(target, "expected rule name in cross-reference")
            syntax = "ID"
            nxt = self.next()
            if nxt.text == "|":
                syn = self.next()
                if syn.kind != "id":
                    self.error(syn, "expected syntax rule name in cross-reference")
                syntax = syn.text
                nxt = self.next()
            if nxt.text != "]":
                self.error(nxt, f"expected ']', found {nxt.text!r}")
            return CrossRef(target.text, syntax)
        if tok.text == "&":
            raise UnsupportedConstruct("unordered groups ('&') are not supported")
        if tok.text in ("=>", "->"):
            raise UnsupportedConstruct("syntactic predicates are not supported")
        if tok.text == "{":
            raise UnsupportedConstruct("actions ('{...}') are not supported")
        if tok.text == "!":
            raise UnsupportedConstruct("negated tokens are not supported")
        if tok.text == ".":
            raise UnsupportedConstruct("wildcard tokens are not supported")
        self.error(tok, f"unexpected {tok.text!r}")


def _split_preamble(source: str) -> tuple[str, str, int]:
    """Split source into (preamble, rule text, preamble line count)."""
    lines = source.splitlines(keepends=True)
    for idx, line in enumerate(lines):
        if _RULE_START_RE.match(line):
            return "".join(lines[:idx]), "".join(lines[idx:]), idx
    return source, "", len(lines)


def _check_references(rules: list[Rule]):
    known = {r.name for r in rules}

    def walk(expr: GrammarExpr):
        if isinstance(expr, RuleCall):
            if expr.target not in known and expr.target not in BUILTIN_TERMINALS:
                raise UnresolvedRuleReference(expr.target)
        elif isinstance(expr, CrossRef):
            if expr.target not in known and expr.target not in BUILTIN_TERMINALS:
                raise UnresolvedRuleReference(expr.target)
            if expr.syntax not in known and expr.syntax not in BUILTIN_TERMINALS:
                raise UnresolvedRuleReference(expr.syntax)
        elif isinstance(expr, Assignment):
            walk(expr.operand)
        elif isinstance(expr, Group):
            for item in expr.items:
                walk(item)
        elif isinstance(expr, Alternatives):
            for option in expr.options:
                walk(option)
        elif isinstance(expr, Repeat):
            walk(expr.inner)

    for rule in rules:
        walk(rule.body)


def parse_grammar(source: str) -> Grammar:
    """Parse a grammar definition, keeping header lines verbatim as preamble.

    Raises GrammarSyntaxError, DuplicateRule, UnresolvedRuleReference or
    UnsupportedConstruct; never returns a partially resolved grammar.
    """
    preamble, rule_text, offset = _split_preamble(source)
    tokens = _tokenize(rule_text, offset)
    if not tokens:
        raise GrammarSyntaxError(1, 1, "grammar contains no rules")
    rules = _GrammarParser(tokens).parse_rules()
    _check_references(rules)
    m = _GRAMMAR_NAME_RE.search(preamble)
    name = m.group(1).rsplit(".", 1)[-1] if m else rules[0].name
    return Grammar(name, preamble, tuple(rules))


# --------------------------------------------------------------------------
# Pretty printer
# --------------------------------------------------------------------------

def format_expr(expr: GrammarExpr) -> str:
    if isinstance(expr, Keyword):
        return _quote(expr.text)
    if isinstance(expr, RuleCall):
        return expr.target
    if isinstance(expr, CrossRef):
        if expr.syntax == "ID":
            return f"[{expr.target}]"
        return f"[{expr.target}|{expr.syntax}]"
    if isinstance(expr, Assignment):
        return f"{expr.feature}{expr.operator}{format_expr(expr.operand)}"
    if isinstance(expr, Group):
        return " ".join(format_expr(item) for item in expr.items)
    if isinstance(expr, Alternatives):
        return " | ".join(format_expr(opt) for opt in expr.options)
    if isinstance(expr, Repeat):
        inner = format_expr(expr.inner)
        if isinstance(expr.inner, (Group, Alternatives, Assignment)):
            inner = f"({inner})"
        return inner + expr.cardinality
    raise TypeError(f"unknown grammar expression {expr!r}")


def format_grammar(grammar: Grammar) -> str:
    """Render a Grammar back to parseable text (structural round-trip)."""
    parts = [grammar.preamble]
    if grammar.preamble and not grammar.preamble.endswith("\n"):
        parts.append("\n")
    for rule in grammar.rules:
        parts.append(f"{rule.name}:\n    {format_expr(rule.body)};\n")
    return "".join(parts)


def structurally_equal(a: Grammar, b: Grammar) -> bool:
    """Rule-level equality: same rule names with equal bodies, order ignored."""
    if {r.name for r in a.rules} != {r.name for r in b.rules}:
        return False
    return all(a.rule(r.name).body == r.body for r in b.rules)
