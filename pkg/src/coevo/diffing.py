"""Typed, classified differences between two versions of a grammar.

Rules are matched by name; renamed rules surface as a removal plus an
addition.  Matched rule bodies are aligned top-down: child lists are
compared with a longest-common-subsequence over shallow keys (variant
kind, keyword text, feature name, call target), and matched pairs are
recursed into.  Known evolution patterns are classified into dedicated
edit records; anything else becomes an Unclassified edit, never a failure.

Edit paths are index paths into the rule body expression tree (the new
body for insertions and modifications, the old body for removals), using
the same coordinates the instance parser stamps on CST children.
"""

from __future__ import annotations

from dataclasses import dataclass

from coevo import cst
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
    Rule,
    RuleCall,
    format_expr,
)

Path = tuple[int, ...]


@dataclass(frozen=True)
class KeywordInserted:
    kind = "keyword_inserted"
    path: Path
    text: str
    mandatory: bool
    # Anchoring data for the migrator: the old path of the container whose
    # item list gained the keyword, and old paths of preceding matched
    # elements (nearest first).
    context_old_path: Path = ()
    anchors: tuple[Path, ...] = ()

    def to_dict(self):
        return {"kind": self.kind, "path": list(self.path), "text": self.text,
                "mandatory": self.mandatory}


@dataclass(frozen=True)
class KeywordRemoved:
    kind = "keyword_removed"
    path: Path  # old-body coordinates
    text: str

    def to_dict(self):
        return {"kind": self.kind, "path": list(self.path), "text": self.text}


@dataclass(frozen=True)
class SeparatorIntroduced:
    """The ``(X)*`` to ``(X (sep X)*)?`` list-separator rewrite."""

    kind = "separator_introduced"
    path: Path
    separator: str
    list_feature: str

    def to_dict(self):
        return {"kind": self.kind, "path": list(self.path),
                "separator": self.separator, "list_feature": self.list_feature}


@dataclass(frozen=True)
class OptionalGroupAdded:
    kind = "optional_group_added"
    path: Path
    group: GrammarExpr

    def to_dict(self):
        return {"kind": self.kind, "path": list(self.path),
                "group": format_expr(self.group)}


@dataclass(frozen=True)
class CardinalityChanged:
    kind = "cardinality_changed"
    path: Path
    old: str
    new: str
    old_path: Path = ()
    list_feature: str | None = None  # inner assignment feature, when there is one

    def to_dict(self):
        return {"kind": self.kind, "path": list(self.path),
                "from": self.old, "to": self.new}


@dataclass(frozen=True)
class CrossRefWidened:
    kind = "cross_ref_widened"
    path: Path
    target: str
    old_syntax: str
    new_syntax: str

    def to_dict(self):
        return {"kind": self.kind, "path": list(self.path), "target": self.target,
                "old_syntax": self.old_syntax, "new_syntax": self.new_syntax}


@dataclass(frozen=True)
class RuleCallRetargeted:
    kind = "rule_call_retargeted"
    path: Path
    old_target: str
    new_target: str
    compatible: bool  # old target reachable through the new target's alternatives

    def to_dict(self):
        return {"kind": self.kind, "path": list(self.path),
                "old_target": self.old_target, "new_target": self.new_target,
                "compatible": self.compatible}


@dataclass(frozen=True)
class Unclassified:
    kind = "unclassified"
    path: Path
    description: str

    def to_dict(self):
        return {"kind": self.kind, "path": list(self.path),
                "description": self.description}


ElementEdit = (
    KeywordInserted | KeywordRemoved | SeparatorIntroduced | OptionalGroupAdded
    | CardinalityChanged | CrossRefWidened | RuleCallRetargeted | Unclassified
)


@dataclass(frozen=True)
class RuleAddition:
    rule: Rule
    reachability: str  # optional_only | mandatory | unreachable


@dataclass(frozen=True)
class RuleModification:
    rule: str
    edits: tuple[ElementEdit, ...]


@dataclass(frozen=True)
class GrammarDiff:
    added: tuple[RuleAddition, ...]
    removed: tuple[str, ...]
    modified: tuple[RuleModification, ...]

    @property
    def is_empty(self) -> bool:
        return not (self.added or self.removed or self.modified)

    def unclassified_edits(self) -> list[Unclassified]:
        return [e for mod in self.modified for e in mod.edits
                if isinstance(e, Unclassified)]


def diff_to_dict(diff: GrammarDiff) -> dict:
    return {
        "added": [{"rule": a.rule.name, "reachability": a.reachability}
                  for a in diff.added],
        "removed": list(diff.removed),
        "modified": [{"rule": m.rule, "edits": [e.to_dict() for e in m.edits]}
                     for m in diff.modified],
    }


# --------------------------------------------------------------------------
# Alignment machinery
# --------------------------------------------------------------------------

def _key(expr: GrammarExpr):
    if isinstance(expr, Keyword):
        return ("kw", expr.text)
    if isinstance(expr, Assignment):
        return ("assign", expr.feature)
    if isinstance(expr, RuleCall):
        return ("call", expr.target)
    if isinstance(expr, CrossRef):
        return ("xref", expr.target)
    if isinstance(expr, Group):
        return ("group",)
    if isinstance(expr, Alternatives):
        return ("alts",)
    if isinstance(expr, Repeat):
        return ("repeat",)
    raise TypeError(f"unknown grammar expression {expr!r}")


def _lcs_pairs(old_keys, new_keys) -> list[tuple[int, int]]:
    n, m = len(old_keys), len(new_keys)
    table = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n - 1, -1, -1):
        for j in range(m - 1, -1, -1):
            if old_keys[i] == new_keys[j]:
                table[i][j] = 1 + table[i + 1][j + 1]
            else:
                table[i][j] = max(table[i + 1][j], table[i][j + 1])
    pairs = []
    i = j = 0
    while i < n and j < m:
        if old_keys[i] == new_keys[j]:
            pairs.append((i, j))
            i += 1
            j += 1
        elif table[i + 1][j] >= table[i][j + 1]:
            i += 1
        else:
            j += 1
    return pairs


def _as_items(expr: GrammarExpr, base: Path) -> list[tuple[GrammarExpr, Path]]:
    if isinstance(expr, Group):
        return [(item, base + (i,)) for i, item in enumerate(expr.items)]
    return [(expr, base)]


class _RuleDiffer:
    def __init__(self, rule_name: str, old_grammar: Grammar, new_grammar: Grammar):
        self.rule_name = rule_name
        self.old_grammar = old_grammar
        self.new_grammar = new_grammar
        self.new_body = new_grammar.rule(rule_name).body

    def diff(self, old_body: GrammarExpr, new_body: GrammarExpr) -> list[ElementEdit]:
        edits = self._pair(old_body, new_body, (), ())
        if edits is None:
            return [Unclassified((), f"rule {self.rule_name} was rewritten from "
                                     f"{format_expr(old_body)!r} to {format_expr(new_body)!r}")]
        return edits

    # Returns None when the pair cannot be aligned at all.
    def _pair(self, old, new, old_path: Path, new_path: Path) -> list[ElementEdit] | None:
        if old == new:
            return []
        if isinstance(old, Repeat) and isinstance(new, Repeat):
            sep = self._separator_pattern(old, new, new_path)
            if sep is not None:
                return [sep]
            inner = self._pair(old.inner, new.inner, old_path + (0,), new_path + (0,))
            if inner is None:
                return None
            if old.cardinality != new.cardinality:
                feature = _inner_list_feature(new.inner)
                inner.append(CardinalityChanged(new_path, old.cardinality, new.cardinality,
                                                old_path, feature))
            return inner
        if isinstance(old, Group) and isinstance(new, Group):
            return self._lists(_as_items(old, old_path), _as_items(new, new_path))
        if isinstance(old, Assignment) and isinstance(new, Assignment):
            if old.feature != new.feature or old.operator != new.operator:
                return None
            return self._pair(old.operand, new.operand, old_path + (0,), new_path + (0,))
        if isinstance(old, CrossRef) and isinstance(new, CrossRef):
            if old.target == new.target and old.syntax != new.syntax:
                if self._widens(old.syntax, new.syntax):
                    return [CrossRefWidened(new_path, new.target, old.syntax, new.syntax)]
                return [Unclassified(new_path,
                                     f"cross-reference [{old.target}] syntax changed from "
                                     f"{old.syntax} to {new.syntax} (not a widening)")]
            return [Unclassified(new_path,
                                 f"cross-reference changed from {format_expr(old)!r} "
                                 f"to {format_expr(new)!r}")]
        if isinstance(old, RuleCall) and isinstance(new, RuleCall):
            compatible = _reachable_via_alternatives(self.new_grammar, new.target, old.target)
            return [RuleCallRetargeted(new_path, old.target, new.target, compatible)]
        if isinstance(old, Keyword) and isinstance(new, Keyword):
            return None  # handled as removal + insertion by the caller
        # One side gained or lost alternatives: diff the option lists, so
        # 'A' evolving into 'A | B' classifies as an optional addition.
        if isinstance(old, Alternatives) or isinstance(new, Alternatives):
            old_options = (
                [(o, old_path + (i,)) for i, o in enumerate(old.options)]
                if isinstance(old, Alternatives) else [(old, old_path)]
            )
            new_options = (
                [(o, new_path + (i,)) for i, o in enumerate(new.options)]
                if isinstance(new, Alternatives) else [(new, new_path)]
            )
            return self._lists(old_options, new_options, alternatives=True)
        # Mixed shapes: let list alignment sort it out where possible.
        if isinstance(old, Group) or isinstance(new, Group):
            return self._lists(_as_items(old, old_path), _as_items(new, new_path))
        return None

    def _lists(self, old_items, new_items, alternatives: bool = False) -> list[ElementEdit]:
        old_keys = [_key(e) for e, _ in old_items]
        new_keys = [_key(e) for e, _ in new_items]
        pairs = _lcs_pairs(old_keys, new_keys)
        matched_old = {i for i, _ in pairs}
        matched_new = {j for _, j in pairs}
        pair_of_new = dict((j, i) for i, j in pairs)

        edits: list[ElementEdit] = []
        oi = 0
        for j, (new_expr, new_path) in enumerate(new_items):
            if j in matched_new:
                i = pair_of_new[j]
                # removals between the previous match and this one
                while oi < i:
                    if oi not in matched_old:
                        edits.extend(self._removal(old_items[oi], alternatives))
                    oi += 1
                old_expr, old_path = old_items[i]
                sub = self._pair(old_expr, new_expr, old_path, new_path)
                if sub is None:
                    edits.extend(self._removal(old_items[i], alternatives))
                    edits.extend(self._insertion(new_items[j], old_items, pairs, j, alternatives))
                else:
                    edits.extend(sub)
                oi = i + 1
            else:
                edits.extend(self._insertion(new_items[j], old_items, pairs, j, alternatives))
        while oi < len(old_items):
            if oi not in matched_old:
                edits.extend(self._removal(old_items[oi], alternatives))
            oi += 1
        return edits

    def _removal(self, item, alternatives: bool) -> list[ElementEdit]:
        expr, path = item
        if alternatives:
            return [Unclassified(path, f"alternative {format_expr(expr)!r} removed")]
        if isinstance(expr, Keyword):
            return [KeywordRemoved(path, expr.text)]
        return [Unclassified(path, f"element {format_expr(expr)!r} removed")]

    def _insertion(self, item, old_items, pairs, new_index, alternatives) -> list[ElementEdit]:
        expr, path = item
        if alternatives:
            return [OptionalGroupAdded(path, expr)]
        if isinstance(expr, Keyword):
            anchors = tuple(
                old_items[i][1] for i, j in reversed(pairs) if j < new_index
            )
            context = old_items[0][1][:-1] if old_items else ()
            return [KeywordInserted(path, expr.text,
                                    _path_is_mandatory(self.new_body, path),
                                    context, anchors)]
        if isinstance(expr, Repeat) and expr.cardinality in ("?", "*"):
            return [OptionalGroupAdded(path, expr)]
        return [Unclassified(path, f"new mandatory element {format_expr(expr)!r}")]

    def _separator_pattern(self, old: Repeat, new: Repeat, new_path: Path):
        """Recognize ``(X)*`` rewritten to ``(X (sep X)*)?`` exactly."""
        if old.cardinality != "*" or new.cardinality != "?":
            return None
        element = old.inner
        if not isinstance(new.inner, Group) or len(new.inner.items) != 2:
            return None
        head, tail = new.inner.items
        if head != element or not isinstance(tail, Repeat) or tail.cardinality != "*":
            return None
        if not isinstance(tail.inner, Group) or len(tail.inner.items) != 2:
            return None
        sep, repeated = tail.inner.items
        if not isinstance(sep, Keyword) or repeated != element:
            return None
        if not isinstance(element, Assignment) or element.operator != "+=":
            return None
        return SeparatorIntroduced(new_path, sep.text, element.feature)

    def _widens(self, old_syntax: str, new_syntax: str) -> bool:
        samples = {"ID": "sample_ident0", "INT": "42", "STRING": "'text'"}
        sample = samples.get(old_syntax)
        if sample is None:
            return False  # widening only recognized from builtin terminals
        return _syntax_accepts(self.new_grammar, new_syntax, sample)


def _inner_list_feature(expr: GrammarExpr) -> str | None:
    if isinstance(expr, Assignment):
        return expr.feature
    if isinstance(expr, Group):
        for item in expr.items:
            if isinstance(item, Assignment):
                return item.feature
    return None


def _path_is_mandatory(body: GrammarExpr, path: Path) -> bool:
    """True when no ``?``/``*`` repetition lies on the path to the element."""
    node = body
    for idx in path:
        if isinstance(node, Repeat):
            if node.cardinality in ("?", "*"):
                return False
            node = node.inner
        elif isinstance(node, Group):
            node = node.items[idx]
        elif isinstance(node, Alternatives):
            node = node.options[idx]
        elif isinstance(node, Assignment):
            node = node.operand
        else:
            break
    if isinstance(node, Repeat) and node.cardinality in ("?", "*"):
        return False
    return True


def _syntax_accepts(grammar: Grammar, syntax_name: str, sample: str) -> bool:
    matcher = cst._Matcher(grammar, sample, 1000)
    try:
        for end, _ in matcher.match(RuleCall(syntax_name), 0, ()):
            _, final = matcher.trivia(end)
            if final >= len(sample):
                return True
    except cst.AmbiguityLimitExceeded:
        return False
    return False


def _reachable_via_alternatives(grammar: Grammar, from_rule: str, to_rule: str) -> bool:
    """True when to_rule is an alternative of from_rule, transitively."""
    if from_rule == to_rule:
        return True
    seen = set()
    frontier = [from_rule]
    while frontier:
        name = frontier.pop()
        if name in seen or grammar.rule(name) is None:
            continue
        seen.add(name)
        body = grammar.rule(name).body
        options = body.options if isinstance(body, Alternatives) else (body,)
        for option in options:
            if isinstance(option, RuleCall):
                if option.target == to_rule:
                    return True
                frontier.append(option.target)
    return False


# --------------------------------------------------------------------------
# Reachability of added rules
# --------------------------------------------------------------------------

def _call_sites(body: GrammarExpr):
    """Yield (callee, protected) for every rule whose tokens body can require."""

    def walk(expr, protected):
        if isinstance(expr, RuleCall):
            if expr.target not in BUILTIN_TERMINALS:
                yield expr.target, protected
        elif isinstance(expr, CrossRef):
            if expr.syntax not in BUILTIN_TERMINALS:
                yield expr.syntax, protected
        elif isinstance(expr, Assignment):
            yield from walk(expr.operand, protected)
        elif isinstance(expr, Group):
            for item in expr.items:
                yield from walk(item, protected)
        elif isinstance(expr, Alternatives):
            shielded = protected or len(expr.options) >= 2
            for option in expr.options:
                yield from walk(option, shielded)
        elif isinstance(expr, Repeat):
            shielded = protected or expr.cardinality in ("?", "*")
            yield from walk(expr.inner, shielded)

    yield from walk(body, False)


def _reachability(grammar: Grammar) -> dict[str, str]:
    """Classify every rule as mandatory, optional_only or unreachable.

    A rule is mandatory when some chain of unprotected call sites links the
    entry rule to it, meaning every conforming instance must contain it.
    A call site is protected when it sits under a ``?``/``*`` cardinality
    or inside an alternatives choice.
    """
    entry = grammar.entry_rule.name
    reachable = {entry}
    unprotected = {entry}
    changed = True
    while changed:
        changed = False
        for rule in grammar.rules:
            if rule.name not in reachable:
                continue
            for callee, protected in _call_sites(rule.body):
                if grammar.rule(callee) is None:
                    continue
                if callee not in reachable:
                    reachable.add(callee)
                    changed = True
                if not protected and rule.name in unprotected and callee not in unprotected:
                    unprotected.add(callee)
                    changed = True
    out = {}
    for rule in grammar.rules:
        if rule.name in unprotected:
            out[rule.name] = "mandatory"
        elif rule.name in reachable:
            out[rule.name] = "optional_only"
        else:
            out[rule.name] = "unreachable"
    return out


def diff_grammars(old: Grammar, new: Grammar) -> GrammarDiff:
    """Compute the classified difference between two grammar versions."""
    old_names = {r.name for r in old.rules}
    new_names = {r.name for r in new.rules}

    reach = _reachability(new)
    added = tuple(
        RuleAddition(rule, reach[rule.name])
        for rule in new.rules
        if rule.name not in old_names
    )
    removed = tuple(r.name for r in old.rules if r.name not in new_names)

    modified = []
    for rule in old.rules:
        counterpart = new.rule(rule.name)
        if counterpart is None or counterpart.body == rule.body:
            continue
        differ = _RuleDiffer(rule.name, old, new)
        edits = differ.diff(rule.body, counterpart.body)
        if edits:
            modified.append(RuleModification(rule.name, tuple(edits)))
    return GrammarDiff(added, removed, tuple(modified))
