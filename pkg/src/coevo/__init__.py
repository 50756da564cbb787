"""Co-evolution toolkit for textual DSLs.

Diffs two versions of an Xtext-style grammar, migrates instance files so
they conform to the evolved grammar while keeping comments and layout
byte-exact, and scores any migration (deterministic or LLM-produced) with
a line-level metric suite.
"""

from coevo.grammar import Grammar, parse_grammar, format_grammar
from coevo.cst import CstDocument, parse_instance, render, validate
from coevo.diffing import GrammarDiff, diff_grammars
from coevo.migrate import (
    MigrationPlan,
    NeedsLlm,
    apply_plan,
    migrate_deterministic,
    plan_migration,
)
from coevo.llm import PromptBundle, build_prompt, complete, extract_instance
from coevo.metrics import MetricsReport, align_lines, evaluate, summarize_batch

__version__ = "0.1.0"

__all__ = [
    "Grammar",
    "parse_grammar",
    "format_grammar",
    "CstDocument",
    "parse_instance",
    "render",
    "validate",
    "GrammarDiff",
    "diff_grammars",
    "MigrationPlan",
    "NeedsLlm",
    "plan_migration",
    "apply_plan",
    "migrate_deterministic",
    "PromptBundle",
    "build_prompt",
    "complete",
    "extract_instance",
    "MetricsReport",
    "align_lines",
    "evaluate",
    "summarize_batch",
    "__version__",
]
