"""Line-level scoring of an evolved instance against its original.

Seven counters describe one (original, evolved, new grammar) triple:

* line_err: lines of the evolved text with grammar errors.
* line_evl: original lines that required change and were evolved exactly
  as the deterministic reference migration prescribes.
* line_evl_wrg: original lines lost, evolved differently from the
  reference, or changed although no change was required.
* line_cmt_lost / line_cmt_save: comment-bearing original lines whose
  comment text disappeared or survived.
* line_fmt_lost / line_fmt_save: original lines whose whitespace shape
  (indentation, blankness, inter-token spacing) was lost or kept.  These
  two always partition the original's line count.

Lines are paired by a longest-common-subsequence over normalized content
(whitespace collapsed, trailing separators dropped), so a migration that
only adds separators aligns one-to-one with its original.  The reference
for "required change" is the deterministic migrator; when it escalates,
only lost lines are counted and the report is flagged.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from coevo import cst, migrate
from coevo.diffing import diff_grammars
from coevo.grammar import Grammar


@dataclass(frozen=True)
class LineAlignment:
    """Ordered pairing of line indices (1-based); None marks a gap."""

    pairs: tuple[tuple[int | None, int | None], ...]

    def evolved_for(self) -> dict[int, int]:
        return {a: b for a, b in self.pairs if a is not None and b is not None}


@dataclass
class MetricsReport:
    line_err: int
    line_evl: int
    line_evl_wrg: int
    line_cmt_lost: int
    line_cmt_save: int
    line_fmt_lost: int
    line_fmt_save: int
    total_lines_orig: int
    oracle_available: bool = True

    METRIC_FIELDS = (
        "line_err", "line_evl", "line_evl_wrg", "line_cmt_lost",
        "line_cmt_save", "line_fmt_lost", "line_fmt_save",
    )

    def to_dict(self) -> dict:
        out = {name: getattr(self, name) for name in self.METRIC_FIELDS}
        out["total_lines_orig"] = self.total_lines_orig
        out["oracle_available"] = self.oracle_available
        return out


@dataclass
class BatchSummary:
    averages: dict[str, float]
    good_runs: int
    accepted: bool
    runs: int
    good_threshold: int

    def to_dict(self) -> dict:
        return {
            "averages": dict(self.averages),
            "good_runs": self.good_runs,
            "accepted": self.accepted,
            "runs": self.runs,
            "good_threshold": self.good_threshold,
        }


_SEPARATOR_RE = re.compile(r"\s*[,;](?=\s|$)")


def _normalize(line: str) -> str:
    """Collapse whitespace and drop token-trailing separators.

    Separators are erased wherever they close a token, not just at end of
    line: a migration may insert one mid-line when two elements share a
    line, and such lines must still pair with their originals.
    """
    collapsed = " ".join(line.split())
    while True:
        reduced = _SEPARATOR_RE.sub("", collapsed)
        if reduced == collapsed:
            return collapsed
        collapsed = reduced


def align_lines(original: str, evolved: str) -> LineAlignment:
    """LCS line pairing under normalization; ties take the earliest match."""
    a = [_normalize(line) for line in original.splitlines()]
    b = [_normalize(line) for line in evolved.splitlines()]
    n, m = len(a), len(b)
    table = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n - 1, -1, -1):
        for j in range(m - 1, -1, -1):
            if a[i] == b[j]:
                table[i][j] = 1 + table[i + 1][j + 1]
            else:
                table[i][j] = max(table[i + 1][j], table[i][j + 1])
    pairs: list[tuple[int | None, int | None]] = []
    i = j = 0
    while i < n and j < m:
        if a[i] == b[j]:
            pairs.append((i + 1, j + 1))
            i += 1
            j += 1
        elif table[i + 1][j] >= table[i][j + 1]:
            pairs.append((i + 1, None))
            i += 1
        else:
            pairs.append((None, j + 1))
            j += 1
    pairs.extend((k + 1, None) for k in range(i, n))
    pairs.extend((None, k + 1) for k in range(j, m))
    return LineAlignment(tuple(pairs))


_WS_RUN_RE = re.compile(r"[ \t]+")


def _ws_profile(line: str):
    """Whitespace shape of a line: (leading, internal runs, trailing, blank)."""
    stripped = line.strip()
    if not stripped:
        return ("", (), "", True)
    leading = line[: len(line) - len(line.lstrip())]
    trailing = line[len(line.rstrip()):]
    runs = tuple(_WS_RUN_RE.findall(stripped))
    return (leading, runs, trailing, False)


def evaluate(
    original: str,
    evolved: str,
    old_grammar: Grammar,
    new_grammar: Grammar,
    budget: int = 10_000,
) -> MetricsReport:
    """Score one evolved instance against its original.

    The original must parse under the old grammar.  The evolved text may
    be anything, including empty (a run that produced no instance scores
    as total loss).
    """
    document = cst.parse_instance(original, old_grammar, budget)
    diff = diff_grammars(old_grammar, new_grammar)
    outcome = migrate.plan_migration(document, diff, old_grammar, new_grammar)

    oracle_available = isinstance(outcome, migrate.MigrationPlan)
    required: set[int] = set()
    oracle_line_for: dict[int, str] = {}
    if oracle_available:
        required = set(outcome.touched_lines)
        oracle_text = cst.render(migrate.apply_plan(document, outcome))
        oracle_lines = oracle_text.splitlines()
        oracle_map = align_lines(original, oracle_text).evolved_for()
        oracle_line_for = {
            i: oracle_lines[j - 1] for i, j in oracle_map.items()
        }

    orig_lines = original.splitlines()
    evolved_lines = evolved.splitlines()
    mapping = align_lines(original, evolved).evolved_for()

    line_err = cst.validate(evolved, new_grammar, budget).error_line_count

    orig_comments = cst.comment_fragments_by_line(original)
    evolved_comments = cst.comment_fragments_by_line(evolved)

    line_evl = 0
    line_evl_wrg = 0
    cmt_lost = cmt_save = 0
    fmt_lost = fmt_save = 0

    for i in range(1, len(orig_lines) + 1):
        orig_line = orig_lines[i - 1]
        j = mapping.get(i)
        evolved_line = evolved_lines[j - 1] if j is not None else None
        oracle_line = oracle_line_for.get(i)

        # evolution accuracy
        if evolved_line is None:
            line_evl_wrg += 1
        elif not oracle_available:
            pass  # no reference: only lost lines are counted
        elif i in required:
            if oracle_line is not None and evolved_line == oracle_line:
                line_evl += 1
            else:
                line_evl_wrg += 1
        elif evolved_line != orig_line:
            line_evl_wrg += 1

        # comment preservation
        if i in orig_comments:
            kept = (
                evolved_line is not None
                and j is not None
                and evolved_comments.get(j) == orig_comments[i]
            )
            if kept:
                cmt_save += 1
            else:
                cmt_lost += 1

        # format preservation
        if _format_kept(orig_line, evolved_line, oracle_line):
            fmt_save += 1
        else:
            fmt_lost += 1

    return MetricsReport(
        line_err=line_err,
        line_evl=line_evl,
        line_evl_wrg=line_evl_wrg,
        line_cmt_lost=cmt_lost,
        line_cmt_save=cmt_save,
        line_fmt_lost=fmt_lost,
        line_fmt_save=fmt_save,
        total_lines_orig=len(orig_lines),
        oracle_available=oracle_available,
    )


def _format_kept(orig_line: str, evolved_line: str | None, oracle_line: str | None) -> bool:
    if evolved_line is None:
        return False
    if evolved_line == orig_line:
        return True
    if oracle_line is not None and evolved_line == oracle_line:
        return True
    orig_profile = _ws_profile(orig_line)
    evolved_profile = _ws_profile(evolved_line)
    if orig_profile[3] != evolved_profile[3]:
        return False
    if evolved_profile == orig_profile:
        return True
    return oracle_line is not None and evolved_profile == _ws_profile(oracle_line)


def default_goodness(report: MetricsReport) -> bool:
    """A run is good when it conforms and loses no comments or formatting."""
    return (
        report.line_err == 0
        and report.line_cmt_lost == 0
        and report.line_fmt_lost == 0
    )


def summarize_batch(
    reports: list[MetricsReport],
    records: list | None = None,
    goodness=default_goodness,
    good_threshold: int | None = None,
) -> BatchSummary:
    """Average per-run reports and apply the acceptance threshold.

    The default threshold is ceil(0.6 * runs): six good runs out of ten.
    """
    if not reports:
        raise ValueError("summarize_batch needs at least one report")
    if records is not None and len(records) != len(reports):
        raise ValueError("records and reports must have equal length")
    runs = len(reports)
    threshold = good_threshold if good_threshold is not None else -(-6 * runs // 10)
    fields = MetricsReport.METRIC_FIELDS + ("total_lines_orig",)
    averages = {
        name: sum(getattr(r, name) for r in reports) / runs for name in fields
    }
    good_runs = sum(1 for r in reports if goodness(r))
    return BatchSummary(averages, good_runs, good_runs >= threshold, runs, threshold)
