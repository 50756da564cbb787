import pytest

from coevo.grammar import (
    Alternatives,
    Assignment,
    CrossRef,
    DuplicateRule,
    GrammarSyntaxError,
    Group,
    Keyword,
    Repeat,
    RuleCall,
    UnresolvedRuleReference,
    UnsupportedConstruct,
    format_grammar,
    parse_grammar,
    structurally_equal,
)

from _synth import SYNTH_GRAMMAR_TEXTS


def test_fixture_v1_rule_set(grammar_v1):
    assert [r.name for r in grammar_v1.rules] == [
        "Domainmodel", "Type", "DataType", "Entity", "Feature",
    ]


def test_fixture_v2_has_ten_rules(grammar_v2):
    names = [r.name for r in grammar_v2.rules]
    assert len(names) == 10
    for new_rule in ("PackageDeclaration", "AbstractElement", "Import",
                     "QualifiedName", "QualifiedNameWithWildcard"):
        assert new_rule in names


def test_preamble_kept_verbatim(grammar_v1, grammar_v1_text):
    assert grammar_v1.preamble == "...\n\n"
    assert grammar_v1_text.startswith(grammar_v1.preamble)


def test_grammar_name_from_preamble():
    g = parse_grammar("grammar org.example.Mini with Terminals\n\nM: 'm' name=ID;\n")
    assert g.name == "Mini"


def test_grammar_name_falls_back_to_entry_rule(grammar_v1):
    assert grammar_v1.name == "Domainmodel"


def test_entity_body_structure(grammar_v1):
    body = grammar_v1.rule("Entity").body
    assert isinstance(body, Group)
    assert body.items[0] == Keyword("entity")
    assert body.items[1] == Assignment("name", "=", RuleCall("ID"))
    extends = body.items[2]
    assert isinstance(extends, Repeat) and extends.cardinality == "?"
    assert extends.inner == Group((
        Keyword("extends"),
        Assignment("superType", "=", CrossRef("Entity", "ID")),
    ))


def test_crossref_syntax_defaults_to_id(grammar_v1):
    feature = grammar_v1.rule("Feature").body
    type_assignment = feature.items[3]
    assert type_assignment.operand == CrossRef("Type", "ID")


def test_boolean_assignment_requires_keyword():
    with pytest.raises(GrammarSyntaxError):
        parse_grammar("M: (flag?=ID)? name=ID;\n")


def test_duplicate_rule_rejected():
    text = "M: (es+=Entity)*;\nEntity: 'entity' name=ID;\nEntity: 'thing' name=ID;\n"
    with pytest.raises(DuplicateRule) as err:
        parse_grammar(text)
    assert err.value.name == "Entity"


def test_unresolved_reference_rejected():
    with pytest.raises(UnresolvedRuleReference):
        parse_grammar("M: (es+=Missing)*;\n")
    with pytest.raises(UnresolvedRuleReference):
        parse_grammar("M: x=[Nowhere];\n")


@pytest.mark.parametrize(
    "text",
    [
        "M: a=ID & b=ID;",
        "terminal WS: ' ';",
        "enum Color: RED | BLUE;",
        "M returns Thing: name=ID;",
        "M: {Thing} name=ID;",
        "M: => name=ID;",
        "M: 'a'??;",
    ],
)
def test_unsupported_constructs_fail_loudly(text):
    with pytest.raises(UnsupportedConstruct):
        parse_grammar(text)


def test_malformed_notation_reports_position():
    with pytest.raises(GrammarSyntaxError) as err:
        parse_grammar("M:\n    'a' %;\n")
    assert err.value.line == 2


def test_parse_is_deterministic(grammar_v2_text):
    assert parse_grammar(grammar_v2_text) == parse_grammar(grammar_v2_text)


@pytest.mark.parametrize("name", sorted(SYNTH_GRAMMAR_TEXTS))
def test_synth_grammars_round_trip(name):
    grammar = parse_grammar(SYNTH_GRAMMAR_TEXTS[name])
    again = parse_grammar(format_grammar(grammar))
    assert structurally_equal(grammar, again)


def test_fixture_grammars_round_trip(grammar_v1, grammar_v2):
    assert structurally_equal(grammar_v1, parse_grammar(format_grammar(grammar_v1)))
    assert structurally_equal(grammar_v2, parse_grammar(format_grammar(grammar_v2)))


def test_structural_equality_ignores_rule_order():
    a = parse_grammar("M: (xs+=X)*;\nX: 'x' name=ID;\nY: 'y';\nM2: X | Y;\n")
    # same rules, different order below the entry rule
    b = parse_grammar("M: (xs+=X)*;\nY: 'y';\nX: 'x' name=ID;\nM2: X | Y;\n")
    assert structurally_equal(a, b)


def test_alternatives_and_cardinalities_shape():
    g = parse_grammar("M: (a=ID | b=INT)+ ';'?;")
    body = g.rule("M").body
    assert isinstance(body, Group)
    rep = body.items[0]
    assert isinstance(rep, Repeat) and rep.cardinality == "+"
    assert isinstance(rep.inner, Alternatives)
    assert body.items[1] == Repeat(Keyword(";"), "?")


def test_keyword_escapes_round_trip():
    g = parse_grammar(r"M: 'it\'s' name=ID;")
    assert g.rule("M").body.items[0] == Keyword("it's")
    assert structurally_equal(g, parse_grammar(format_grammar(g)))
