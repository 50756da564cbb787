"""Prompt construction, completion providers and response extraction.

The prompt embeds both grammar versions and the instance under the
<GRAMMAR_1>, <GRAMMAR_2> and <INSTANCE_1> markers and instructs the model
to keep mandatory symbols, leave optional additions uninstantiated and
preserve every piece of auxiliary information.

Two providers exist: a scripted mock that replays response files from a
directory (the whole pipeline runs with zero network access) and a
generic chat-completion HTTP client with bearer-token auth.
"""

from __future__ import annotations

import os
import re
import threading
from dataclasses import dataclass
from pathlib import Path

import httpx

from coevo import cst
from coevo.grammar import Grammar


class ProviderError(Exception):
    pass


class ProviderTimeout(ProviderError):
    pass


PROMPT_TEMPLATES = {
    "final-v1": (
        "<GRAMMAR_1> is the initial grammar of the DSL. We evolved it to get "
        "<GRAMMAR_2>. <INSTANCE_1> was originally a text instance that "
        "followed <GRAMMAR_1>. Now I want you to analyze the differences "
        "between the two versions of the grammar and, based on these "
        "differences, modify <INSTANCE_1> and get <INSTANCE_2>, which will "
        "follow <GRAMMAR_2>. Please address the following things:\n"
        "1. When evolving the instance, please do not omit any mandatory "
        "elements, such as characters enclosed by single quotes.\n"
        "2. If <GRAMMAR_2> adds a new grammar rule or a new attribute that "
        "is optional or in an \"OR\" relationship (i.e., |), then please do "
        "not instantiate it.\n"
        "3. Do not miss or add any auxiliary information in the instance, "
        "e.g., comments, formats (white space, indents, tabs, empty lines, "
        "etc.).\n"
        "\n"
        "<GRAMMAR_1>\n{grammar1}\n\n<GRAMMAR_2>\n{grammar2}\n\n"
        "<INSTANCE_1>\n{instance1}\n"
    ),
}


@dataclass(frozen=True)
class PromptBundle:
    grammar1: str
    grammar2: str
    instance1: str
    template: str = "final-v1"


def build_prompt(bundle: PromptBundle) -> str:
    """Pure template substitution of the three inputs into the prompt."""
    if not (bundle.grammar1 and bundle.grammar2 and bundle.instance1):
        raise ValueError("prompt bundle texts must be non-empty")
    template = PROMPT_TEMPLATES.get(bundle.template)
    if template is None:
        raise ValueError(f"unknown prompt template {bundle.template!r}")
    return template.format(
        grammar1=bundle.grammar1,
        grammar2=bundle.grammar2,
        instance1=bundle.instance1,
    )


@dataclass(frozen=True)
class ProviderConfig:
    kind: str  # 'mock' or 'http'
    endpoint_url: str | None = None
    model_name: str = ""
    api_key_env: str | None = None
    timeout: float = 30.0
    script_path: str | None = None
    temperature: float = 0.0

    def __post_init__(self):
        if self.kind == "http":
            if not self.endpoint_url or not self.api_key_env:
                raise ValueError("http provider needs endpoint_url and api_key_env")
        elif self.kind == "mock":
            if not self.script_path:
                raise ValueError("mock provider needs script_path")
        else:
            raise ValueError(f"unknown provider kind {self.kind!r}")


class MockProvider:
    """Replays response files (run-01.txt, run-02.txt, ...) in order.

    The cursor wraps around when the script is exhausted and is guarded by
    a lock so concurrent batch runs stay well-defined.
    """

    def __init__(self, config: ProviderConfig):
        directory = Path(config.script_path)
        if not directory.is_dir():
            raise ProviderError(f"mock script directory not found: {directory}")
        self.responses = sorted(directory.glob("run-*"))
        if not self.responses:
            raise ProviderError(f"no run-* response files in {directory}")
        self._cursor = 0
        self._lock = threading.Lock()

    def complete(self, prompt: str) -> str:
        with self._lock:
            path = self.responses[self._cursor % len(self.responses)]
            self._cursor += 1
        return path.read_text(encoding="utf-8")


class HttpProvider:
    """Generic chat-completion client: one user message, bearer auth."""

    def __init__(self, config: ProviderConfig):
        self.config = config

    def complete(self, prompt: str) -> str:
        config = self.config
        api_key = os.environ.get(config.api_key_env or "")
        if not api_key:
            raise ValueError(
                f"environment variable {config.api_key_env!r} is not set"
            )
        payload = {
            "model": config.model_name,
            "temperature": config.temperature,
            "messages": [{"role": "user", "content": prompt}],
        }
        try:
            response = httpx.post(
                config.endpoint_url,
                json=payload,
                headers={"Authorization": f"Bearer {api_key}"},
                timeout=config.timeout,
            )
        except httpx.TimeoutException as exc:
            raise ProviderTimeout(f"provider timed out after {config.timeout}s") from exc
        except httpx.HTTPError as exc:
            raise ProviderError(str(exc)) from exc
        if response.status_code // 100 != 2:
            raise ProviderError(f"{response.status_code} {response.text[:200]}")
        try:
            return response.json()["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise ProviderError(f"malformed completion response: {exc}") from exc


def make_provider(config: ProviderConfig):
    return MockProvider(config) if config.kind == "mock" else HttpProvider(config)


def complete(config: ProviderConfig, prompt: str) -> str:
    """One-shot completion through a freshly built provider."""
    return make_provider(config).complete(prompt)


# --------------------------------------------------------------------------
# Response extraction
# --------------------------------------------------------------------------

_FENCE_RE = re.compile(r"```[^\n]*\n(.*?)```", re.DOTALL)
_OPEN_FENCE_RE = re.compile(r"```[^\n]*\n")


@dataclass(frozen=True)
class ExtractionResult:
    status: str  # 'ok', 'no_instance_found' or 'truncated'
    text: str | None  # candidate text; present for 'ok' and 'truncated'

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @property
    def failure(self) -> str | None:
        return None if self.ok else self.status


def extract_instance(
    raw_response: str,
    grammar: Grammar | None = None,
    original: str | None = None,
) -> ExtractionResult:
    """Pull a candidate instance out of a raw model response.

    The first fenced code block wins; otherwise the whole response counts
    when its first real token could begin the grammar's entry rule (which
    requires passing the grammar).  The candidate is flagged truncated when
    its block comments are unbalanced, its brace balance disagrees with the
    original instance, or it dropped 20 percent or more of the original's
    lines.  The returned text is always a contiguous slice of the response.
    """
    candidate: str | None = None
    match = _FENCE_RE.search(raw_response)
    if match:
        candidate = raw_response[match.start(1):match.end(1)]
    else:
        opened = _OPEN_FENCE_RE.search(raw_response)
        if opened:
            # a response cut off inside its code block still has a candidate
            candidate = raw_response[opened.end():]
        elif grammar is not None and cst.starts_like_instance(raw_response, grammar):
            candidate = raw_response
    if candidate is None:
        return ExtractionResult("no_instance_found", None)
    if _looks_truncated(candidate, original):
        return ExtractionResult("truncated", candidate)
    return ExtractionResult("ok", candidate)


def _code_only(text: str) -> str:
    spans = cst.scan_comments(text)
    out = []
    last = 0
    for a, b in spans:
        out.append(text[last:a])
        last = b
    out.append(text[last:])
    return "".join(out)


def _unbalanced_block_comments(text: str) -> bool:
    for a, b in cst.scan_comments(text):
        if text.startswith("/*", a) and not text[a:b].endswith("*/"):
            return True  # comment opened but never closed
    return "*/" in _code_only(text)


def _looks_truncated(candidate: str, original: str | None) -> bool:
    if _unbalanced_block_comments(candidate):
        return True
    if original is None:
        return False
    orig_code = _code_only(original)
    cand_code = _code_only(candidate)
    orig_balance = orig_code.count("{") - orig_code.count("}")
    cand_balance = cand_code.count("{") - cand_code.count("}")
    if cand_balance != orig_balance:
        return True
    orig_count = len(original.splitlines())
    cand_count = len(candidate.splitlines())
    return orig_count > 0 and cand_count <= 0.8 * orig_count  # a drop of 20% or more
