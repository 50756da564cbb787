"""LLM migration runs and the repeated-run acceptance protocol.

One run is prompt -> complete -> extract -> evaluate.  A batch repeats
that N times against one provider (the scripted mock consumes one response
file per run) and accepts the prompt/provider combination when at least
the threshold number of runs are good: conforming output with no comment
or format loss.  Runs that yield no instance score as total loss.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from coevo import metrics
from coevo.grammar import Grammar, parse_grammar
from coevo.llm import (
    ExtractionResult,
    PromptBundle,
    ProviderConfig,
    ProviderError,
    build_prompt,
    extract_instance,
    make_provider,
)


@dataclass
class LlmRunRecord:
    run_index: int  # 1-based
    raw_response: str
    extracted: str | None = None
    failure: str | None = None  # no_instance_found | truncated | provider_error: ...
    candidate: str | None = None  # text scored by metrics even on truncation

    def to_dict(self) -> dict:
        return {
            "run_index": self.run_index,
            "raw_response": self.raw_response,
            "extracted": self.extracted,
            "failure": self.failure,
        }


@dataclass
class BatchResult:
    records: list[LlmRunRecord]
    reports: list[metrics.MetricsReport]
    summary: metrics.BatchSummary


def run_llm_once(
    provider,
    grammar1_text: str,
    grammar2_text: str,
    instance_text: str,
    new_grammar: Grammar,
    run_index: int = 1,
    template: str = "final-v1",
) -> LlmRunRecord:
    prompt = build_prompt(PromptBundle(grammar1_text, grammar2_text, instance_text, template))
    try:
        raw = provider.complete(prompt)
    except ProviderError as exc:
        return LlmRunRecord(run_index, "", failure=f"provider_error: {exc}")
    result: ExtractionResult = extract_instance(raw, new_grammar, instance_text)
    return LlmRunRecord(
        run_index,
        raw,
        extracted=result.text if result.ok else None,
        failure=result.failure,
        candidate=result.text,
    )


def run_batch(
    grammar1_text: str,
    grammar2_text: str,
    instance_text: str,
    provider_config: ProviderConfig,
    runs: int = 10,
    good_threshold: int | None = None,
    parallel: int = 1,
    template: str = "final-v1",
) -> BatchResult:
    """Execute the repeated-run protocol and summarize the results."""
    if runs < 1:
        raise ValueError("runs must be positive")
    if good_threshold is not None and good_threshold > runs:
        raise ValueError("good_threshold cannot exceed runs")
    old_grammar = parse_grammar(grammar1_text)
    new_grammar = parse_grammar(grammar2_text)
    provider = make_provider(provider_config)

    def one(run_index: int) -> LlmRunRecord:
        return run_llm_once(
            provider, grammar1_text, grammar2_text, instance_text,
            new_grammar, run_index, template,
        )

    if parallel > 1:
        with ThreadPoolExecutor(max_workers=min(parallel, runs)) as pool:
            records = list(pool.map(one, range(1, runs + 1)))
    else:
        records = [one(i) for i in range(1, runs + 1)]

    reports = [
        metrics.evaluate(instance_text, record.candidate or "", old_grammar, new_grammar)
        for record in records
    ]
    summary = metrics.summarize_batch(reports, records, good_threshold=good_threshold)
    return BatchResult(records, reports, summary)
