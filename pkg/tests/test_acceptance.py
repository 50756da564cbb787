"""Acceptance suite: one test per release criterion, one printed line each.

Everything here runs offline (the scripted mock stands in for any model
provider) and in a few seconds.
"""

import json
from pathlib import Path

from coevo.cli import main
from coevo.cst import comment_fragments_by_line, parse_instance, render, validate
from coevo.diffing import (
    CrossRefWidened,
    KeywordInserted,
    OptionalGroupAdded,
    RuleCallRetargeted,
    SeparatorIntroduced,
    diff_grammars,
)
from coevo.llm import PromptBundle, build_prompt, extract_instance
from coevo.metrics import evaluate
from coevo.migrate import migrate_deterministic

from _synth import mutate_lines, random_instance, synth_grammars

FX = "tests/fixtures/domainmodel"


def report(number: int, text: str):
    print(f"ACCEPTANCE {number}: PASS - {text}")


def test_criterion_1_losslessness(instance_v1, grammar_v1):
    assert render(parse_instance(instance_v1, grammar_v1)) == instance_v1

    grammars = synth_grammars()
    assert len(grammars) >= 3
    checked = 0
    for name, grammar in grammars.items():
        for seed in range(7):
            text = random_instance(grammar, seed)
            assert render(parse_instance(text, grammar)) == text, (name, seed)
            checked += 1
    assert checked >= 20
    report(1, f"render(parse(x)) == x byte-exact on the fixture and {checked} "
              f"synthetic instances over {len(grammars)} grammars")


def test_criterion_2_grammar_coverage(grammar_v1, grammar_v2):
    diff = diff_grammars(grammar_v1, grammar_v2)
    assert {a.rule.name for a in diff.added} == {
        "PackageDeclaration", "AbstractElement", "Import",
        "QualifiedName", "QualifiedNameWithWildcard",
    }
    assert all(a.reachability == "optional_only" for a in diff.added)

    by_rule = {m.rule: m.edits for m in diff.modified}
    assert set(by_rule) == {"Domainmodel", "DataType", "Entity", "Feature"}
    (retarget,) = by_rule["Domainmodel"]
    assert isinstance(retarget, RuleCallRetargeted) and retarget.compatible
    (terminator,) = by_rule["DataType"]
    assert isinstance(terminator, KeywordInserted)
    assert terminator.text == ";" and terminator.mandatory
    assert {type(e) for e in by_rule["Entity"]} == {SeparatorIntroduced, CrossRefWidened}
    assert {type(e) for e in by_rule["Feature"]} == {OptionalGroupAdded, CrossRefWidened}
    assert diff.unclassified_edits() == []
    report(2, "both grammar versions parse; the diff is 5 added rules, 4 "
              "modified rules, zero unclassified edits")


def test_criterion_3_end_to_end_migration(instance_v1, instance_migrated,
                                          grammar_v1, grammar_v2):
    migrated = migrate_deterministic(instance_v1, grammar_v1, grammar_v2)
    assert migrated == instance_migrated
    assert validate(migrated, grammar_v2).error_line_count == 0
    reportd = evaluate(instance_v1, migrated, grammar_v1, grammar_v2).to_dict()
    reportd.pop("oracle_available")
    assert reportd == {
        "line_err": 0, "line_evl": 4, "line_evl_wrg": 0,
        "line_cmt_lost": 0, "line_cmt_save": 7,
        "line_fmt_lost": 0, "line_fmt_save": 21,
        "total_lines_orig": 21,
    }
    report(3, "deterministic migration validates cleanly and scores "
              "(0, 4, 0, 0, 7, 0, 21)")


def test_criterion_4_auxiliary_loss_quantified(instance_v1, instance_flat,
                                               grammar_v1, grammar_v2):
    scored = evaluate(instance_v1, instance_flat, grammar_v1, grammar_v2)
    assert scored.line_err == 0
    assert scored.line_cmt_lost == 7
    assert scored.line_cmt_save == 0
    assert scored.line_fmt_lost >= 3
    report(4, f"abstract-syntax round-trip loses all 7 comment lines and "
              f"{scored.line_fmt_lost} format lines")


def test_criterion_5_metric_partitions(instance_v1, grammar_v1, grammar_v2):
    grammars = synth_grammars()
    cases = [(instance_v1, grammar_v1, grammar_v2)]
    for name, grammar in sorted(grammars.items()):
        for seed in (3, 11):
            cases.append((random_instance(grammar, seed), grammar, grammar))
    pairs = 0
    while pairs < 100:
        for original, old, new in cases:
            evolved = mutate_lines(original, 7_000 + pairs)
            scored = evaluate(original, evolved, old, new)
            assert scored.line_fmt_lost + scored.line_fmt_save == len(original.splitlines())
            expected_comment_lines = len(comment_fragments_by_line(original))
            assert scored.line_cmt_lost + scored.line_cmt_save == expected_comment_lines
            pairs += 1
    report(5, f"format and comment partitions hold on {pairs} randomized pairs")


def test_criterion_6_prompt_fidelity(grammar_v1_text, grammar_v2_text, instance_v1):
    prompt = build_prompt(PromptBundle(grammar_v1_text, grammar_v2_text, instance_v1))
    assert "Please address the following things:" in prompt
    assert ("1. When evolving the instance, please do not omit any mandatory "
            "elements, such as characters enclosed by single quotes.") in prompt
    assert ("2. If <GRAMMAR_2> adds a new grammar rule or a new attribute "
            "that is optional or in an \"OR\" relationship (i.e., |), then "
            "please do not instantiate it.") in prompt
    assert ("3. Do not miss or add any auxiliary information in the "
            "instance, e.g., comments, formats (white space, indents, tabs, "
            "empty lines, etc.).") in prompt
    report(6, "the prompt reproduces the three numbered instructions verbatim")


def _write_script(directory: Path, perfect: int, prose: int, perfect_text: str):
    directory.mkdir(parents=True)
    index = 1
    for _ in range(perfect):
        (directory / f"run-{index:02d}.txt").write_text(
            f"```\n{perfect_text}```\n", encoding="utf-8")
        index += 1
    for _ in range(prose):
        (directory / f"run-{index:02d}.txt").write_text(
            "You should add commas to the features.", encoding="utf-8")
        index += 1


def test_criterion_7_batch_protocol(tmp_path, instance_migrated, capsys):
    accept_script = tmp_path / "accept"
    _write_script(accept_script, 6, 4, instance_migrated)
    code = main(["batch", "--grammar-old", f"{FX}/grammar_v1.xtext",
                 "--grammar-new", f"{FX}/grammar_v2.xtext",
                 "--instance", f"{FX}/instance_v1.dmodel",
                 "--script", str(accept_script), "--out", str(tmp_path / "out-a")])
    summary = json.loads(capsys.readouterr().out)
    assert code == 0
    assert summary["accepted"] is True and summary["good_runs"] == 6

    reject_script = tmp_path / "reject"
    _write_script(reject_script, 5, 5, instance_migrated)
    code = main(["batch", "--grammar-old", f"{FX}/grammar_v1.xtext",
                 "--grammar-new", f"{FX}/grammar_v2.xtext",
                 "--instance", f"{FX}/instance_v1.dmodel",
                 "--script", str(reject_script), "--out", str(tmp_path / "out-r")])
    summary = json.loads(capsys.readouterr().out)
    assert code == 1
    assert summary["accepted"] is False and summary["good_runs"] == 5
    report(7, "6 good runs of 10 are accepted, 5 of 10 are not")


def test_criterion_8_truncation_failure_mode(instance_v1, instance_migrated,
                                             grammar_v1, grammar_v2):
    # cut after 17 of 21 lines (~81 percent), leaving an entity unclosed
    truncated = "\n".join(instance_migrated.splitlines()[:17]) + "\n"
    raw = f"```\n{truncated}```\n"
    extraction = extract_instance(raw, grammar_v2, original=instance_v1)
    assert extraction.failure == "truncated"

    scored = evaluate(instance_v1, extraction.text, grammar_v1, grammar_v2)
    assert scored.line_evl_wrg == 4  # the four dropped tail lines
    assert scored.line_cmt_lost == 1 and scored.line_cmt_save == 6
    assert scored.line_fmt_lost == 4 and scored.line_fmt_save == 17
    assert scored.line_err == 1
    report(8, "the cut response is flagged truncated and its missing tail "
              "is charged to line_evl_wrg and line_cmt_lost")


def test_criterion_9_published_tables_not_reproduced():
    # The published per-language result tables measure proprietary model
    # behavior on a mined corpus; criteria 1 to 8 are the runnable,
    # provider-free substitute and nothing in this package claims to
    # regenerate those numbers.
    import coevo

    for name in dir(coevo):
        assert "table" not in name.lower()
    report(9, "no table reproduction is claimed; criteria 1-8 are the "
              "offline oracle suite")
