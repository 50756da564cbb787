"""Deterministic migration of concrete syntax trees across a grammar diff.

The planner turns a classified grammar diff into token-level edits on one
document, following three rules: insert every newly mandatory element,
never instantiate optional additions, and leave all trivia untouched.
Inserted separators and terminators attach directly after the anchor
token's text, before its trailing trivia, so same-line comments and line
layout survive.  Any change outside the supported taxonomy escalates to
``NeedsLlm`` instead of producing a half-migrated file.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace

from coevo import cst
from coevo.cst import Child, CstDocument, CstNode, Token, iter_nodes, iter_tokens, render
from coevo.diffing import (
    CardinalityChanged,
    CrossRefWidened,
    GrammarDiff,
    KeywordInserted,
    KeywordRemoved,
    OptionalGroupAdded,
    RuleCallRetargeted,
    SeparatorIntroduced,
    Unclassified,
    diff_grammars,
)
from coevo.grammar import Grammar


class InternalMismatch(Exception):
    """The document's shape contradicts what the diff says about its grammar."""


class AnchorNotFound(Exception):
    """A plan edit refers to a token that is not in the target document."""


class PostconditionViolated(Exception):
    """The migrated text failed validation against the new grammar."""


@dataclass(frozen=True)
class InsertToken:
    anchor: Token
    side: str  # 'before' or 'after'
    token: Token


@dataclass(frozen=True)
class DeleteToken:
    token: Token
    trivia_policy: str = "keep_leading"  # or 'drop_all'


@dataclass(frozen=True)
class ReplaceTokenText:
    token: Token
    new_text: str


CstEdit = InsertToken | DeleteToken | ReplaceTokenText


@dataclass
class MigrationPlan:
    edits: list[CstEdit]
    touched_lines: set[int]


@dataclass
class NeedsLlm:
    reasons: list[str]


MigrationOutcome = MigrationPlan | NeedsLlm


def _context_groups(node: CstNode, prefix: tuple[int, ...]) -> list[list[Child]]:
    """Children under prefix, split into one group per repeat iteration.

    Paths ascend within one iteration of a repeated context; a child whose
    path does not ascend past its predecessor starts the next iteration.
    """
    groups: list[list[Child]] = []
    previous = None
    for child in node.children:
        if child.path is None or child.path[: len(prefix)] != tuple(prefix):
            continue
        if previous is None or child.path <= previous:
            groups.append([])
        groups[-1].append(child)
        previous = child.path
    return groups


def _anchors_for_insert(node: CstNode, edit: KeywordInserted) -> list[tuple[Token, str]]:
    """Locate (anchor token, side) per instantiated insertion context.

    A node without the context (an optional group that never matched)
    yields no anchors and needs no edit.
    """
    if edit.context_old_path:
        groups = _context_groups(node, edit.context_old_path)
    else:
        groups = [node.children]
    anchors: list[tuple[Token, str]] = []
    for group in groups:
        for candidate in edit.anchors:
            tokens = [
                t for child in group
                if child.path is not None
                and child.path[: len(candidate)] == tuple(candidate)
                for t in iter_tokens(child.value)
            ]
            if tokens:
                anchors.append((tokens[-1], "after"))
                break
        else:
            tokens = [t for child in group for t in iter_tokens(child.value)]
            if tokens:
                anchors.append((tokens[0], "before"))
            elif not edit.context_old_path:
                raise InternalMismatch(
                    f"node for rule {node.rule!r} has no tokens to anchor insertion "
                    f"of {edit.text!r}; the document does not match the old grammar"
                )
    return anchors


def _list_elements(node: CstNode, feature: str) -> list[Child]:
    return [c for c in node.children if c.feature == feature]


def _edit_lines(edit: CstEdit) -> set[int]:
    if isinstance(edit, InsertToken):
        return {edit.anchor.line}
    return {edit.token.line}


def plan_migration(
    document: CstDocument,
    diff: GrammarDiff,
    old_grammar: Grammar,
    new_grammar: Grammar,
) -> MigrationOutcome:
    """Derive token edits that make the document conform to the new grammar.

    Optional additions (new optional rules, optional groups, widened
    cross-references, compatible rule-call retargets) need no edits.  The
    remaining cases either produce insertions/deletions or collect into a
    NeedsLlm escalation with every blocking reason listed.
    """
    reasons: list[str] = []
    edits: list[CstEdit] = []
    nodes_by_rule: dict[str, list[CstNode]] = {}
    for node in iter_nodes(document.root):
        nodes_by_rule.setdefault(node.rule, []).append(node)

    for addition in diff.added:
        if addition.reachability == "mandatory":
            reasons.append(
                f"new rule {addition.rule.name!r} is mandatory; existing content "
                f"cannot satisfy it without invented input"
            )

    for removed in diff.removed:
        if nodes_by_rule.get(removed):
            reasons.append(
                f"rule {removed!r} was removed but the instance still uses it"
            )

    for modification in diff.modified:
        nodes = nodes_by_rule.get(modification.rule, [])
        for edit in modification.edits:
            if isinstance(edit, Unclassified):
                reasons.append(
                    f"unclassified change in rule {modification.rule!r}: {edit.description}"
                )
            elif isinstance(edit, RuleCallRetargeted):
                if not edit.compatible:
                    reasons.append(
                        f"rule call in {modification.rule!r} retargeted from "
                        f"{edit.old_target!r} to incompatible {edit.new_target!r}"
                    )
            elif isinstance(edit, CardinalityChanged):
                reasons.extend(
                    _cardinality_problems(edit, modification.rule, nodes)
                )
            elif isinstance(edit, (CrossRefWidened, OptionalGroupAdded)):
                pass  # widening keeps old content valid; optionals stay uninstantiated
            elif isinstance(edit, KeywordInserted):
                # Insert wherever the insertion's context is instantiated;
                # nodes lacking the (optional) context need nothing.  The
                # mandatory flag describes the whole rule, not one node.
                for node in nodes:
                    for anchor, side in _anchors_for_insert(node, edit):
                        edits.append(InsertToken(anchor, side, Token("keyword", edit.text)))
            elif isinstance(edit, KeywordRemoved):
                for node in nodes:
                    for child in node.children:
                        if (
                            child.path == edit.path
                            and isinstance(child.value, Token)
                            and child.value.text == edit.text
                        ):
                            edits.append(DeleteToken(child.value, "keep_leading"))
            elif isinstance(edit, SeparatorIntroduced):
                for node in nodes:
                    elements = _list_elements(node, edit.list_feature)
                    for element in elements[:-1]:
                        tokens = iter_tokens(element.value)
                        if not tokens:
                            raise InternalMismatch(
                                f"list element of {modification.rule!r} has no tokens"
                            )
                        edits.append(
                            InsertToken(tokens[-1], "after", Token("keyword", edit.separator))
                        )

    if reasons:
        return NeedsLlm(reasons)

    edits.sort(key=lambda e: _edit_sort_key(e))
    touched: set[int] = set()
    for edit in edits:
        touched |= _edit_lines(edit)
    return MigrationPlan(edits, touched)


def _edit_sort_key(edit: CstEdit) -> tuple[int, int]:
    if isinstance(edit, InsertToken):
        return (edit.anchor.offset, 0 if edit.side == "before" else 1)
    return (edit.token.offset, 0)


def _cardinality_problems(edit: CardinalityChanged, rule: str, nodes) -> list[str]:
    widenings = {("?", "*"), ("+", "*")}
    if (edit.old, edit.new) in widenings:
        return []
    if edit.list_feature is None:
        return [f"cardinality in rule {rule!r} changed from {edit.old!r} to "
                f"{edit.new!r} and the affected content cannot be checked"]
    problems = []
    for node in nodes:
        count = len(_list_elements(node, edit.list_feature))
        if edit.new == "?" and count > 1:
            problems.append(
                f"rule {rule!r} now allows at most one {edit.list_feature!r} "
                f"but an instance node has {count}"
            )
        if edit.new == "+" and count == 0:
            problems.append(
                f"rule {rule!r} now requires at least one {edit.list_feature!r} "
                f"but an instance node has none"
            )
    return problems


# --------------------------------------------------------------------------
# Applying a plan
# --------------------------------------------------------------------------

class _Rebuilder:
    def __init__(self, plan: MigrationPlan):
        self.inserts_before: dict[int, list[Token]] = {}
        self.inserts_after: dict[int, list[Token]] = {}
        self.deletions: dict[int, str] = {}
        self.replacements: dict[int, str] = {}
        self.pending: list = []  # trivia carried over from deleted tokens
        for edit in plan.edits:
            if isinstance(edit, InsertToken):
                bucket = self.inserts_before if edit.side == "before" else self.inserts_after
                bucket.setdefault(id(edit.anchor), []).append(edit.token)
            elif isinstance(edit, DeleteToken):
                self.deletions[id(edit.token)] = edit.trivia_policy
            else:
                self.replacements[id(edit.token)] = edit.new_text

    def anchors(self) -> set[int]:
        out = set(self.inserts_before) | set(self.inserts_after)
        out |= set(self.deletions) | set(self.replacements)
        return out

    def rebuild_node(self, node: CstNode) -> CstNode:
        children: list[Child] = []
        for child in node.children:
            if isinstance(child.value, CstNode):
                children.append(
                    Child(self.rebuild_node(child.value), child.feature,
                          child.operator, child.path)
                )
                continue
            children.extend(
                Child(tok, child.feature if tok_is_original else None,
                      child.operator if tok_is_original else None,
                      child.path if tok_is_original else None)
                for tok, tok_is_original in self.rebuild_token(child.value)
            )
        return CstNode(node.rule, children)

    def rebuild_token(self, token: Token):
        """Yield (new token, is_the_original) replacements for one token."""
        key = id(token)
        if key in self.deletions:
            if self.deletions[key] == "keep_leading":
                self.pending.extend(token.leading)
                self.pending.extend(token.trailing)
            return
        before = self.inserts_before.get(key, [])
        after = self.inserts_after.get(key, [])
        leading = self.pending + list(token.leading)
        self.pending = []
        text = self.replacements.get(key, token.text)

        if before:
            head = replace(before[0], leading=leading)
            yield head, False
            for extra in before[1:]:
                yield replace(extra), False
            leading = []
        current = replace(token, text=text, leading=leading,
                          trailing=[] if after else list(token.trailing))
        yield current, True
        for i, extra in enumerate(after):
            is_last = i == len(after) - 1
            yield replace(extra, trailing=list(token.trailing) if is_last else []), False


_WORD_CHAR = re.compile(r"[A-Za-z0-9_]")


def _separate_glued_words(tokens: list[Token]):
    """Give word tokens that an edit made adjacent a single space.

    Two word tokens can never abut without trivia in parsed text, so this
    only ever fires where an insertion or replacement created the contact.
    """
    for previous, current in zip(tokens, tokens[1:]):
        if previous.trailing or current.leading:
            continue
        if _WORD_CHAR.match(previous.text[-1]) and _WORD_CHAR.match(current.text[0]):
            current.leading.append(cst.Trivia("whitespace", " "))


def apply_plan(document: CstDocument, plan: MigrationPlan) -> CstDocument:
    """Produce a new document with the plan's edits applied.

    Inserted tokens take over the anchor's trailing (for 'after') or
    leading (for 'before') trivia so they sit directly against the anchor
    text; every other token and all trivia are unchanged, except for a
    single separating space where an inserted word would glue to its
    neighbor.
    """
    rebuilder = _Rebuilder(plan)
    present = {id(tok) for tok in iter_tokens(document)}
    missing = rebuilder.anchors() - present
    if missing:
        raise AnchorNotFound(f"{len(missing)} edit anchor(s) not present in the document")
    root = rebuilder.rebuild_node(document.root)
    eof = list(document.eof_trivia) + rebuilder.pending
    new_doc = CstDocument(root, "", document.grammar_name, eof)
    _separate_glued_words(iter_tokens(new_doc))
    new_doc.source = render(new_doc)
    return new_doc


def migrate_deterministic(
    instance: str,
    old_grammar: Grammar,
    new_grammar: Grammar,
    budget: int = 10_000,
) -> str | NeedsLlm:
    """Parse, diff, plan, apply and render in one step.

    Returns the migrated text, which is guaranteed to validate against the
    new grammar, or a NeedsLlm escalation when the diff exceeds the
    deterministic taxonomy.  PostconditionViolated signals an engine bug,
    never a quietly wrong result.
    """
    document = cst.parse_instance(instance, old_grammar, budget)
    diff = diff_grammars(old_grammar, new_grammar)
    outcome = plan_migration(document, diff, old_grammar, new_grammar)
    if isinstance(outcome, NeedsLlm):
        return outcome
    migrated = render(apply_plan(document, outcome))
    report = cst.validate(migrated, new_grammar, budget)
    if report.error_line_count:
        raise PostconditionViolated(
            f"migrated text still has {report.error_line_count} error line(s) "
            f"under the new grammar"
        )
    return migrated
