"""HTTP service exposing the co-evolution pipeline.

Stateless JSON endpoints over the core package: grammar diffing, instance
validation, migration (deterministic engine or an LLM provider), metric
evaluation and the repeated-run batch protocol.  Texts travel in request
bodies; persistence is the client's concern.

Run with: ``uvicorn coevo.service:app``
"""

from __future__ import annotations

from typing import Literal

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from coevo import batch, cst, metrics, migrate
from coevo.diffing import diff_grammars, diff_to_dict
from coevo.grammar import GrammarError, parse_grammar
from coevo.llm import ProviderConfig, ProviderError


class GrammarPairRequest(BaseModel):
    grammar_old: str
    grammar_new: str


class ValidateRequest(BaseModel):
    grammar: str
    instance: str


class ValidationIssueModel(BaseModel):
    line: int
    message: str


class ValidateResponse(BaseModel):
    errors: list[ValidationIssueModel]
    error_line_count: int


class ProviderSpec(BaseModel):
    kind: Literal["mock", "http"] = "mock"
    script_path: str | None = None
    endpoint_url: str | None = None
    model_name: str = ""
    api_key_env: str | None = None
    timeout: float = 30.0
    temperature: float = 0.0

    def to_config(self) -> ProviderConfig:
        return ProviderConfig(
            kind=self.kind,
            endpoint_url=self.endpoint_url,
            model_name=self.model_name,
            api_key_env=self.api_key_env,
            timeout=self.timeout,
            script_path=self.script_path,
            temperature=self.temperature,
        )


class MigrateRequest(GrammarPairRequest):
    instance: str
    engine: Literal["deterministic", "llm"] = "deterministic"
    provider: ProviderSpec | None = None
    template: str = "final-v1"


class MigrateResponse(BaseModel):
    status: Literal["ok", "needs_llm", "extraction_failed"]
    migrated: str | None = None
    reasons: list[str] = Field(default_factory=list)
    raw_response: str | None = None
    failure: str | None = None


class EvalRequest(GrammarPairRequest):
    original: str
    evolved: str


class MetricsModel(BaseModel):
    line_err: int
    line_evl: int
    line_evl_wrg: int
    line_cmt_lost: int
    line_cmt_save: int
    line_fmt_lost: int
    line_fmt_save: int
    total_lines_orig: int
    oracle_available: bool


class BatchRequest(GrammarPairRequest):
    instance: str
    provider: ProviderSpec
    runs: int = 10
    good_threshold: int | None = None
    parallel: int = 1
    template: str = "final-v1"


class BatchRunModel(BaseModel):
    run_index: int
    raw_response: str
    extracted: str | None
    failure: str | None
    good: bool
    metrics: MetricsModel


class BatchSummaryModel(BaseModel):
    averages: dict[str, float]
    good_runs: int
    accepted: bool
    runs: int
    good_threshold: int


class BatchResponse(BaseModel):
    runs: list[BatchRunModel]
    summary: BatchSummaryModel


def _grammar_or_422(text: str, which: str):
    try:
        return parse_grammar(text)
    except GrammarError as exc:
        raise HTTPException(
            status_code=422,
            detail={"kind": "grammar_error", "which": which, "message": str(exc)},
        )


def _instance_error(exc: Exception) -> HTTPException:
    return HTTPException(
        status_code=422,
        detail={"kind": "instance_error", "message": str(exc)},
    )


def create_app() -> FastAPI:
    app = FastAPI(title="coevo", version="0.1.0")

    @app.exception_handler(ProviderError)
    async def provider_error(request, exc):  # noqa: ANN001
        from fastapi.responses import JSONResponse

        return JSONResponse(
            status_code=502,
            content={"detail": {"kind": "provider_error", "message": str(exc)}},
        )

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.post("/diff")
    def diff(request: GrammarPairRequest) -> dict:
        old = _grammar_or_422(request.grammar_old, "old")
        new = _grammar_or_422(request.grammar_new, "new")
        return diff_to_dict(diff_grammars(old, new))

    @app.post("/validate", response_model=ValidateResponse)
    def validate(request: ValidateRequest):
        grammar = _grammar_or_422(request.grammar, "grammar")
        report = cst.validate(request.instance, grammar)
        return ValidateResponse(
            errors=[ValidationIssueModel(line=e.line, message=e.message) for e in report.errors],
            error_line_count=report.error_line_count,
        )

    @app.post("/migrate", response_model=MigrateResponse)
    def migrate_endpoint(request: MigrateRequest):
        old = _grammar_or_422(request.grammar_old, "old")
        new = _grammar_or_422(request.grammar_new, "new")
        if request.engine == "deterministic":
            try:
                outcome = migrate.migrate_deterministic(request.instance, old, new)
            except (cst.ParseError, cst.AmbiguityLimitExceeded) as exc:
                raise _instance_error(exc)
            if isinstance(outcome, migrate.NeedsLlm):
                return MigrateResponse(status="needs_llm", reasons=outcome.reasons)
            return MigrateResponse(status="ok", migrated=outcome)
        if request.provider is None:
            raise HTTPException(
                status_code=422,
                detail={"kind": "config_error", "message": "llm engine needs a provider"},
            )
        try:
            config = request.provider.to_config()
        except ValueError as exc:
            raise HTTPException(
                status_code=422, detail={"kind": "config_error", "message": str(exc)}
            )
        provider = batch.make_provider(config)
        try:
            record = batch.run_llm_once(
                provider, request.grammar_old, request.grammar_new,
                request.instance, new, template=request.template,
            )
        except ValueError as exc:
            raise HTTPException(
                status_code=422, detail={"kind": "config_error", "message": str(exc)}
            )
        if record.failure is not None:
            return MigrateResponse(
                status="extraction_failed", migrated=record.candidate,
                raw_response=record.raw_response, failure=record.failure,
            )
        return MigrateResponse(
            status="ok", migrated=record.extracted, raw_response=record.raw_response
        )

    @app.post("/eval", response_model=MetricsModel)
    def eval_endpoint(request: EvalRequest):
        old = _grammar_or_422(request.grammar_old, "old")
        new = _grammar_or_422(request.grammar_new, "new")
        try:
            report = metrics.evaluate(request.original, request.evolved, old, new)
        except (cst.ParseError, cst.AmbiguityLimitExceeded) as exc:
            raise _instance_error(exc)
        return MetricsModel(**report.to_dict())

    @app.post("/batch", response_model=BatchResponse)
    def batch_endpoint(request: BatchRequest):
        _grammar_or_422(request.grammar_old, "old")
        _grammar_or_422(request.grammar_new, "new")
        try:
            config = request.provider.to_config()
            result = batch.run_batch(
                request.grammar_old, request.grammar_new, request.instance,
                config, runs=request.runs, good_threshold=request.good_threshold,
                parallel=request.parallel, template=request.template,
            )
        except ValueError as exc:
            raise HTTPException(
                status_code=422, detail={"kind": "config_error", "message": str(exc)}
            )
        except cst.ParseError as exc:
            raise _instance_error(exc)
        runs = [
            BatchRunModel(
                run_index=record.run_index,
                raw_response=record.raw_response,
                extracted=record.extracted,
                failure=record.failure,
                good=metrics.default_goodness(report),
                metrics=MetricsModel(**report.to_dict()),
            )
            for record, report in zip(result.records, result.reports)
        ]
        return BatchResponse(
            runs=runs, summary=BatchSummaryModel(**result.summary.to_dict())
        )

    return app


app = create_app()
