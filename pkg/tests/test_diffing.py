import pytest

from coevo.diffing import (
    CardinalityChanged,
    CrossRefWidened,
    KeywordInserted,
    KeywordRemoved,
    OptionalGroupAdded,
    RuleCallRetargeted,
    SeparatorIntroduced,
    Unclassified,
    diff_grammars,
    diff_to_dict,
)
from coevo.grammar import parse_grammar

from _synth import SYNTH_GRAMMAR_TEXTS


def edits_for(diff, rule):
    for modification in diff.modified:
        if modification.rule == rule:
            return modification.edits
    return ()


def test_fixture_diff_added_rules(grammar_v1, grammar_v2):
    diff = diff_grammars(grammar_v1, grammar_v2)
    assert {a.rule.name for a in diff.added} == {
        "PackageDeclaration", "AbstractElement", "Import",
        "QualifiedName", "QualifiedNameWithWildcard",
    }
    assert all(a.reachability == "optional_only" for a in diff.added)
    assert diff.removed == ()


def test_fixture_diff_modifications(grammar_v1, grammar_v2):
    diff = diff_grammars(grammar_v1, grammar_v2)
    assert {m.rule for m in diff.modified} == {"Domainmodel", "DataType", "Entity", "Feature"}

    (retarget,) = edits_for(diff, "Domainmodel")
    assert isinstance(retarget, RuleCallRetargeted)
    assert (retarget.old_target, retarget.new_target) == ("Type", "AbstractElement")
    assert retarget.compatible

    (terminator,) = edits_for(diff, "DataType")
    assert isinstance(terminator, KeywordInserted)
    assert terminator.text == ";" and terminator.mandatory

    entity_edits = edits_for(diff, "Entity")
    assert {type(e) for e in entity_edits} == {CrossRefWidened, SeparatorIntroduced}
    separator = next(e for e in entity_edits if isinstance(e, SeparatorIntroduced))
    assert separator.separator == "," and separator.list_feature == "features"
    widened = next(e for e in entity_edits if isinstance(e, CrossRefWidened))
    assert (widened.target, widened.old_syntax, widened.new_syntax) == (
        "Entity", "ID", "QualifiedName",
    )

    feature_edits = edits_for(diff, "Feature")
    assert {type(e) for e in feature_edits} == {CrossRefWidened, OptionalGroupAdded}


def test_fixture_diff_has_no_unclassified(grammar_v1, grammar_v2):
    diff = diff_grammars(grammar_v1, grammar_v2)
    assert diff.unclassified_edits() == []


@pytest.mark.parametrize("text", [*SYNTH_GRAMMAR_TEXTS.values()])
def test_identity_diff_is_empty(text, grammar_v1_text, grammar_v2_text):
    for source in (text, grammar_v1_text, grammar_v2_text):
        grammar = parse_grammar(source)
        assert diff_grammars(grammar, grammar).is_empty


def test_removed_rule_detected(grammar_v2, grammar_v2_text):
    without_import = grammar_v2_text.replace(
        "Import:\n    'import' importedNamespace=QualifiedNameWithWildcard;\n", ""
    ).replace("PackageDeclaration | Type | Import", "PackageDeclaration | Type")
    stripped = parse_grammar(without_import)
    diff = diff_grammars(grammar_v2, stripped)
    assert diff.removed == ("Import",)


def test_separator_pattern_requires_exact_shape():
    old = parse_grammar("M: 'm' '{' (xs+=X)* '}';\nX: name=ID;\n")
    good = parse_grammar("M: 'm' '{' (xs+=X (',' xs+=X)*)? '}';\nX: name=ID;\n")
    diff = diff_grammars(old, good)
    (edit,) = edits_for(diff, "M")
    assert isinstance(edit, SeparatorIntroduced)
    assert edit.separator == ","

    # a separator around a different element is not the pattern; the element
    # change surfaces as an incompatible retarget instead
    other = parse_grammar("M: 'm' '{' (xs+=Y (',' xs+=Y)*)? '}';\nX: name=ID;\nY: 'y';\n")
    diff = diff_grammars(old, other)
    kinds = edits_for(diff, "M")
    assert not any(isinstance(e, SeparatorIntroduced) for e in kinds)
    assert any(isinstance(e, RuleCallRetargeted) and not e.compatible for e in kinds)


def test_widening_rejects_non_superset():
    old = parse_grammar("M: ref=[T];\nT: 'x' name=ID;\n")
    new = parse_grammar("M: ref=[T|INT];\nT: 'x' name=ID;\n")
    diff = diff_grammars(old, new)
    (edit,) = edits_for(diff, "M")
    assert isinstance(edit, Unclassified)


def test_incompatible_retarget_flagged():
    old = parse_grammar("M: (xs+=A)*;\nA: 'a' name=ID;\nB: 'b' name=ID;\n")
    new = parse_grammar("M: (xs+=B)*;\nA: 'a' name=ID;\nB: 'b' name=ID;\n")
    (edit,) = edits_for(diff_grammars(old, new), "M")
    assert isinstance(edit, RuleCallRetargeted)
    assert not edit.compatible


def test_keyword_removed_classified():
    old = parse_grammar("M: 'm' name=ID ';';\n")
    new = parse_grammar("M: 'm' name=ID;\n")
    (edit,) = edits_for(diff_grammars(old, new), "M")
    assert isinstance(edit, KeywordRemoved)
    assert edit.text == ";"


def test_cardinality_change_classified():
    old = parse_grammar("M: 'm' (xs+=X)?;\nX: name=ID;\n")
    new = parse_grammar("M: 'm' (xs+=X)*;\nX: name=ID;\n")
    (edit,) = edits_for(diff_grammars(old, new), "M")
    assert isinstance(edit, CardinalityChanged)
    assert (edit.old, edit.new) == ("?", "*")


def test_mandatory_addition_reachability():
    old = parse_grammar("M: (xs+=X)*;\nX: 'x' name=ID;\n")
    new = parse_grammar("M: header=Header (xs+=X)*;\nX: 'x' name=ID;\nHeader: 'hdr' name=ID;\n")
    diff = diff_grammars(old, new)
    (addition,) = diff.added
    assert addition.rule.name == "Header"
    assert addition.reachability == "mandatory"


def test_unreachable_addition_reachability():
    old = parse_grammar("M: (xs+=X)*;\nX: 'x' name=ID;\n")
    new = parse_grammar("M: (xs+=X)*;\nX: 'x' name=ID;\nOrphan: 'orphan';\n")
    (addition,) = diff_grammars(old, new).added
    assert addition.reachability == "unreachable"


def test_new_alternative_is_optional_addition():
    old = parse_grammar("M: (xs+=X)*;\nX: A;\nA: 'a' name=ID;\n")
    new = parse_grammar("M: (xs+=X)*;\nX: A | B;\nA: 'a' name=ID;\nB: 'b' name=ID;\n")
    diff = diff_grammars(old, new)
    (addition,) = diff.added
    assert addition.reachability == "optional_only"
    (edit,) = edits_for(diff, "X")
    assert isinstance(edit, OptionalGroupAdded)


def test_diff_json_shape(grammar_v1, grammar_v2):
    payload = diff_to_dict(diff_grammars(grammar_v1, grammar_v2))
    assert set(payload) == {"added", "removed", "modified"}
    assert len(payload["added"]) == 5
    for modification in payload["modified"]:
        for edit in modification["edits"]:
            assert "kind" in edit and "path" in edit
            assert isinstance(edit["path"], list)
