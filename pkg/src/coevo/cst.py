"""Grammar-driven lossless parsing of DSL instance text.

The parser interprets a :class:`~coevo.grammar.Grammar` directly (no
generated code) using recursive descent with ordered-choice alternatives,
greedy repetition and bounded backtracking.  Every source byte ends up in
the resulting tree: tokens carry the surrounding whitespace, newlines and
comments as leading/trailing trivia, so ``render(parse_instance(s, g))``
reproduces ``s`` exactly.

Trivia attachment policy: trivia following a token on the same line, up to
and including the line's newline, is that token's trailing trivia.  All
other trivia is leading trivia of the next token.  The final token absorbs
whatever trivia remains before end of file.

``validate`` never raises on nonconforming input.  It reports the failing
line, then resynchronizes at the next line whose first token could begin
the entry rule's repeated element, so one validation pass counts every
distinct failed region.
"""

from __future__ import annotations

import re
from bisect import bisect_right
from dataclasses import dataclass, field

from coevo.grammar import (
    BUILTIN_TERMINALS,
    Alternatives,
    Assignment,
    CrossRef,
    Grammar,
    GrammarExpr,
    Group,
    Keyword,
    Repeat,
    RuleCall,
)


class ParseError(Exception):
    def __init__(self, line: int, col: int, expected: str, found: str, blame_line: int | None = None):
        super().__init__(f"{line}:{col}: expected {expected}, found {found}")
        self.line = line
        self.col = col
        self.expected = expected
        self.found = found
        # Line charged by the error-counting rule: the end of the last
        # consumed token when anything was consumed, else the offending token.
        self.blame_line = blame_line if blame_line is not None else line


class AmbiguityLimitExceeded(Exception):
    def __init__(self, budget: int):
        super().__init__(f"backtracking budget of {budget} steps exceeded")
        self.budget = budget


@dataclass(eq=False)
class Trivia:
    kind: str  # whitespace | newline | line_comment | block_comment
    text: str


@dataclass(eq=False)
class Token:
    kind: str  # terminal name or "keyword"
    text: str
    leading: list[Trivia] = field(default_factory=list)
    trailing: list[Trivia] = field(default_factory=list)
    offset: int = -1  # start of text in the source this token was parsed from
    line: int = 0  # 1-based; 0 for synthesized tokens
    col: int = 0


@dataclass(eq=False)
class Child:
    """One slot of a CstNode: a nested node or token, with assignment info."""

    value: "CstNode | Token"
    feature: str | None = None
    operator: str | None = None
    path: tuple[int, ...] | None = None  # element path inside the owning rule body


@dataclass(eq=False)
class CstNode:
    rule: str
    children: list[Child]


@dataclass(eq=False)
class CstDocument:
    root: CstNode
    source: str
    grammar_name: str
    eof_trivia: list[Trivia] = field(default_factory=list)  # only for token-less documents


@dataclass(frozen=True)
class ValidationIssue:
    line: int
    message: str


@dataclass(frozen=True)
class ValidationReport:
    errors: tuple[ValidationIssue, ...]

    @property
    def error_line_count(self) -> int:
        return len({issue.line for issue in self.errors})


def iter_tokens(value) -> "list[Token]":
    """All tokens under a node/token/document, in document order."""
    if isinstance(value, CstDocument):
        value = value.root
    if isinstance(value, Token):
        return [value]
    return _collect_tokens(value)


def _collect_tokens(node: CstNode) -> list[Token]:
    out: list[Token] = []
    for child in node.children:
        if isinstance(child.value, Token):
            out.append(child.value)
        else:
            out.extend(_collect_tokens(child.value))
    return out


def iter_nodes(value) -> "list[CstNode]":
    """All nodes under a node/document (including it), in document order."""
    if isinstance(value, CstDocument):
        value = value.root
    out = [value]
    for child in value.children:
        if isinstance(child.value, CstNode):
            out.extend(iter_nodes(child.value))
    return out


def render(document: CstDocument) -> str:
    """Concatenate every token's leading trivia, text and trailing trivia."""
    parts: list[str] = []
    for token in _collect_tokens(document.root):
        for t in token.leading:
            parts.append(t.text)
        parts.append(token.text)
        for t in token.trailing:
            parts.append(t.text)
    for t in document.eof_trivia:
        parts.append(t.text)
    return "".join(parts)


# --------------------------------------------------------------------------
# Lexical layer
# --------------------------------------------------------------------------

_NL_RE = re.compile(r"\r\n|\r|\n")
_WS_RE = re.compile(r"[ \t\f\v]+")
_LINE_COMMENT_RE = re.compile(r"//[^\r\n]*")
_TERMINAL_RES = {
    "ID": re.compile(r"[A-Za-z_][A-Za-z0-9_]*"),
    "INT": re.compile(r"[0-9]+"),
    "STRING": re.compile(r"'(?:[^'\\\r\n]|\\.)*'|\"(?:[^\"\\\r\n]|\\.)*\""),
}
_WORD_RE = re.compile(r"[A-Za-z0-9_]")


def scan_trivia(source: str, pos: int) -> tuple[tuple[Trivia, ...], int]:
    """Collect whitespace, newlines and comments starting at pos."""
    items: list[Trivia] = []
    n = len(source)
    while pos < n:
        ch = source[pos]
        if ch in " \t\f\v":
            m = _WS_RE.match(source, pos)
            items.append(Trivia("whitespace", m.group()))
            pos = m.end()
        elif ch in "\r\n":
            m = _NL_RE.match(source, pos)
            items.append(Trivia("newline", m.group()))
            pos = m.end()
        elif source.startswith("//", pos):
            m = _LINE_COMMENT_RE.match(source, pos)
            items.append(Trivia("line_comment", m.group()))
            pos = m.end()
        elif source.startswith("/*", pos):
            end = source.find("*/", pos + 2)
            end = n if end < 0 else end + 2  # unterminated comment runs to EOF
            items.append(Trivia("block_comment", source[pos:end]))
            pos = end
        else:
            break
    return tuple(items), pos


def scan_comments(text: str) -> list[tuple[int, int]]:
    """Offsets of every comment in text, ignoring comment-like content in strings."""
    spans: list[tuple[int, int]] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch in "'\"":
            quote = ch
            i += 1
            while i < n:
                if text[i] == "\\":
                    i += 2
                elif text[i] == quote:
                    i += 1
                    break
                elif text[i] in "\r\n":
                    break  # unterminated on this line; resume normal scan
                else:
                    i += 1
        elif text.startswith("//", i):
            end = i
            while end < n and text[end] not in "\r\n":
                end += 1
            spans.append((i, end))
            i = end
        elif text.startswith("/*", i):
            close = text.find("*/", i + 2)
            end = n if close < 0 else close + 2
            spans.append((i, end))
            i = end
        else:
            i += 1
    return spans


def comment_texts(text: str) -> list[str]:
    """Every comment substring of text, in order (for conservation checks)."""
    return [text[a:b] for a, b in scan_comments(text)]


def comment_fragments_by_line(text: str) -> dict[int, str]:
    """Map 1-based line index to the comment content appearing on that line."""
    starts = _line_starts(text)
    bounds = starts + [len(text) + 1]
    fragments: dict[int, list[str]] = {}
    for a, b in scan_comments(text):
        first = bisect_right(starts, a)
        last = bisect_right(starts, max(a, b - 1))
        for line in range(first, last + 1):
            lo = max(a, bounds[line - 1])
            hi = min(b, bounds[line] - 1 if line < len(bounds) else b)
            piece = text[lo:hi].rstrip("\r\n")
            if piece:
                fragments.setdefault(line, []).append(piece)
    return {line: "".join(pieces) for line, pieces in fragments.items()}


def _line_starts(text: str) -> list[int]:
    starts = [0]
    for m in _NL_RE.finditer(text):
        starts.append(m.end())
    return starts


# --------------------------------------------------------------------------
# First-token sets (used for error recovery and plausibility checks)
# --------------------------------------------------------------------------

def first_matchers(grammar: Grammar, expr: GrammarExpr) -> set[tuple[str, str]]:
    """Tokens that can begin expr: ('kw', text) and ('terminal', name) pairs."""
    matchers, _ = _first(grammar, expr, frozenset())
    return matchers


def _first(grammar, expr, seen) -> tuple[set, bool]:
    if isinstance(expr, Keyword):
        return {("kw", expr.text)}, False
    if isinstance(expr, RuleCall):
        if expr.target in BUILTIN_TERMINALS:
            return {("terminal", expr.target)}, False
        if expr.target in seen:
            return set(), False
        return _first(grammar, grammar.rule(expr.target).body, seen | {expr.target})
    if isinstance(expr, CrossRef):
        return _first(grammar, RuleCall(expr.syntax), seen)
    if isinstance(expr, Assignment):
        return _first(grammar, expr.operand, seen)
    if isinstance(expr, Group):
        matchers: set = set()
        for item in expr.items:
            sub, nullable = _first(grammar, item, seen)
            matchers |= sub
            if not nullable:
                return matchers, False
        return matchers, True
    if isinstance(expr, Alternatives):
        matchers = set()
        nullable = False
        for option in expr.options:
            sub, opt_nullable = _first(grammar, option, seen)
            matchers |= sub
            nullable = nullable or opt_nullable
        return matchers, nullable
    if isinstance(expr, Repeat):
        sub, nullable = _first(grammar, expr.inner, seen)
        return sub, nullable or expr.cardinality in ("?", "*")
    raise TypeError(f"unknown grammar expression {expr!r}")


def _matches_any(source: str, pos: int, matchers) -> bool:
    for kind, value in matchers:
        if kind == "kw":
            if source.startswith(value, pos) and _boundary_ok(source, value, pos + len(value)):
                return True
        else:
            if _TERMINAL_RES[value].match(source, pos):
                return True
    return False


def _boundary_ok(source: str, text: str, end: int) -> bool:
    if not text or not _WORD_RE.match(text[-1]):
        return True
    return end >= len(source) or not _WORD_RE.match(source[end])


def starts_like_instance(text: str, grammar: Grammar) -> bool:
    """True if text's first real token could begin the entry rule's content."""
    entry = grammar.entry_rule.body
    matchers = first_matchers(grammar, entry)
    _, pos = scan_trivia(text, 0)
    if pos >= len(text):
        return False
    return _matches_any(text, pos, matchers)


# --------------------------------------------------------------------------
# The interpreting parser
# --------------------------------------------------------------------------

class _Matcher:
    def __init__(self, grammar: Grammar, source: str, budget: int):
        self.grammar = grammar
        self.src = source
        self.budget = budget
        self.steps = 0
        self.line_starts = _line_starts(source)
        self._trivia_cache: dict[int, tuple[tuple[Trivia, ...], int]] = {}
        self.best_at = -1
        self.best_after = -1
        self.best_expected: set[str] = set()

    def linecol(self, pos: int) -> tuple[int, int]:
        line = bisect_right(self.line_starts, pos)
        return line, pos - self.line_starts[line - 1] + 1

    def trivia(self, pos: int) -> tuple[tuple[Trivia, ...], int]:
        hit = self._trivia_cache.get(pos)
        if hit is None:
            hit = scan_trivia(self.src, pos)
            self._trivia_cache[pos] = hit
        return hit

    def _step(self):
        self.steps += 1
        if self.steps > self.budget:
            raise AmbiguityLimitExceeded(self.budget)

    def _fail(self, after: int, at: int, expected: str):
        if at > self.best_at:
            self.best_at = at
            self.best_after = after
            self.best_expected = {expected}
        elif at == self.best_at:
            self.best_expected.add(expected)
            self.best_after = max(self.best_after, after)

    def _token(self, pos: int, kind: str, text: str, end: int) -> tuple[Token, int]:
        run, start = self.trivia(pos)
        line, col = self.linecol(start)
        tok = Token(kind, text, list(run), [], start, line, col)
        return tok, end

    def match_keyword(self, pos: int, text: str):
        _, start = self.trivia(pos)
        if self.src.startswith(text, start) and _boundary_ok(self.src, text, start + len(text)):
            return self._token(pos, "keyword", text, start + len(text))
        self._fail(pos, start, f"'{text}'")
        return None, -1

    def match_terminal(self, pos: int, name: str):
        _, start = self.trivia(pos)
        m = _TERMINAL_RES[name].match(self.src, start)
        if m:
            return self._token(pos, name, m.group(), m.end())
        self._fail(pos, start, name)
        return None, -1

    def match(self, expr: GrammarExpr, pos: int, path: tuple[int, ...]):
        if isinstance(expr, Keyword):
            tok, end = self.match_keyword(pos, expr.text)
            if tok is not None:
                yield end, [Child(tok, None, None, path)]
            return
        if isinstance(expr, RuleCall):
            yield from self._match_call(expr.target, pos, path)
            return
        if isinstance(expr, CrossRef):
            yield from self._match_call(expr.syntax, pos, path)
            return
        if isinstance(expr, Assignment):
            for end, kids in self.match(expr.operand, pos, path + (0,)):
                yield end, [Child(k.value, expr.feature, expr.operator, k.path) for k in kids]
            return
        if isinstance(expr, Group):
            yield from self._match_seq(expr.items, 0, pos, path)
            return
        if isinstance(expr, Alternatives):
            for i, option in enumerate(expr.options):
                if i:
                    self._step()
                yield from self.match(option, pos, path + (i,))
            return
        if isinstance(expr, Repeat):
            yield from self._match_repeat(expr, pos, path)
            return
        raise TypeError(f"unknown grammar expression {expr!r}")

    def _match_call(self, target: str, pos: int, path: tuple[int, ...]):
        if target in BUILTIN_TERMINALS:
            tok, end = self.match_terminal(pos, target)
            if tok is not None:
                yield end, [Child(tok, None, None, path)]
            return
        rule = self.grammar.rule(target)
        for end, kids in self.match(rule.body, pos, ()):
            yield end, [Child(CstNode(rule.name, kids), None, None, path)]

    def _match_seq(self, items, idx: int, pos: int, path: tuple[int, ...]):
        if idx == len(items):
            yield pos, []
            return
        for end, kids in self.match(items[idx], pos, path + (idx,)):
            for end2, rest in self._match_seq(items, idx + 1, end, path):
                yield end2, kids + rest

    def _match_repeat(self, expr: Repeat, pos: int, path: tuple[int, ...]):
        inner_path = path + (0,)
        if expr.cardinality == "?":
            produced = False
            for end, kids in self.match(expr.inner, pos, inner_path):
                produced = True
                yield end, kids
            if produced:
                self._step()
            yield pos, []
            return

        def more(p):
            for end, kids in self.match(expr.inner, p, inner_path):
                if end == p:
                    break  # zero-width iteration would never terminate
                for end2, rest in more(end):
                    yield end2, kids + rest
                self._step()
            yield p, []

        if expr.cardinality == "*":
            yield from more(pos)
        else:  # '+'
            for end, kids in self.match(expr.inner, pos, inner_path):
                if end == pos:
                    break
                for end2, rest in more(end):
                    yield end2, kids + rest
                self._step()

    # -- error reporting ---------------------------------------------------

    def blame_line(self, attempt_pos: int) -> int:
        _, content_start = self.trivia(attempt_pos)
        if self.best_after > content_start:
            return self.linecol(self.best_after)[0]
        at = self.best_at if self.best_at >= 0 else content_start
        return self.linecol(at)[0]

    def parse_error(self, attempt_pos: int) -> ParseError:
        at = self.best_at if self.best_at >= 0 else attempt_pos
        line, col = self.linecol(at)
        expected = " or ".join(sorted(self.best_expected)) or "valid input"
        found = self.src[at : at + 20] or "end of input"
        found = found.splitlines()[0] if found.splitlines() else found
        return ParseError(line, col, expected, repr(found), self.blame_line(attempt_pos))


def _attach_trivia(tokens: list[Token], eof_run: tuple[Trivia, ...]) -> list[Trivia]:
    """Redistribute inter-token trivia runs into trailing/leading lists.

    Returns the document-level trivia (non-empty only for token-less input).
    """
    for i in range(1, len(tokens)):
        run = tokens[i].leading
        split = next((j for j, t in enumerate(run) if t.kind == "newline"), None)
        if split is None:
            tokens[i - 1].trailing = run
            tokens[i].leading = []
        else:
            tokens[i - 1].trailing = run[: split + 1]
            tokens[i].leading = run[split + 1 :]
    if tokens:
        tokens[-1].trailing = list(eof_run)
        return []
    return list(eof_run)


def parse_instance(source: str, grammar: Grammar, budget: int = 10_000) -> CstDocument:
    """Parse instance text into a lossless concrete syntax tree.

    Raises ParseError when the text does not conform to the grammar, and
    AmbiguityLimitExceeded when backtracking exceeds the budget.
    """
    matcher = _Matcher(grammar, source, budget)
    entry = grammar.entry_rule
    first = True
    for end, kids in matcher.match(entry.body, 0, ()):
        if not first:
            matcher._step()
        first = False
        eof_run, final = matcher.trivia(end)
        if final >= len(source):
            root = CstNode(entry.name, kids)
            doc_trivia = _attach_trivia(_collect_tokens(root), eof_run)
            return CstDocument(root, source, grammar.name, doc_trivia)
        matcher._fail(end, final, "end of input")
    raise matcher.parse_error(0)


def validate(source: str, grammar: Grammar, budget: int = 10_000) -> ValidationReport:
    """Count the lines on which the text fails to conform to the grammar.

    Nonconformance is data, not an error: the report lists one entry per
    failed region, charged to the line computed by the blame rule (end of
    the last consumed token, else the offending token).
    """
    try:
        parse_instance(source, grammar, budget)
        return ValidationReport(())
    except ParseError as err:
        first_line, first_message = err.blame_line, str(err)
    except AmbiguityLimitExceeded as err:
        # resource exhaustion counts as a failure of the whole document;
        # the per-element scan below still gets a fresh budget per element
        first_line, first_message = 1, str(err)

    entry_body = grammar.entry_rule.body
    element = None
    if isinstance(entry_body, Repeat) and entry_body.cardinality in ("*", "+"):
        element = entry_body.inner
    if element is None:
        return ValidationReport((ValidationIssue(first_line, first_message),))

    matchers = first_matchers(grammar, element)
    comment_spans = scan_comments(source)
    starts = _line_starts(source)
    issues: list[ValidationIssue] = []
    pos = 0
    n = len(source)
    while True:
        _, content = scan_trivia(source, pos)
        if content >= n:
            break
        matcher = _Matcher(grammar, source, budget)
        end = None
        try:
            for cand_end, _kids in matcher.match(element, pos, ()):
                end = cand_end
                break
        except AmbiguityLimitExceeded:
            end = None
        if end is not None and end > pos:
            pos = end
            continue
        blame = matcher.blame_line(pos)
        expected = " or ".join(sorted(matcher.best_expected)) or "element"
        issues.append(ValidationIssue(blame, f"expected {expected}"))
        resync = _next_resync(source, starts, blame, matchers, comment_spans)
        if resync is None:
            break
        pos = resync
    if not issues:
        issues.append(ValidationIssue(first_line, first_message))
    return ValidationReport(tuple(issues))


def _next_resync(source, starts, after_line, matchers, comment_spans):
    """Offset of the next line after after_line that can begin an element."""
    for line in range(after_line + 1, len(starts) + 1):
        offset = starts[line - 1]
        if any(a <= offset < b for a, b in comment_spans):
            continue
        _, content = scan_trivia(source, offset)
        if content >= len(source):
            continue
        content_line = bisect_right(starts, content)
        if content_line != line:
            continue
        if _matches_any(source, content, matchers):
            return offset
    return None
