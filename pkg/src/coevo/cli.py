"""Thin command-line client for the co-evolution service.

Every subcommand reads local files, calls the HTTP API (in-process by
default, or a remote server via --server) and persists results locally.
Exit codes are part of the contract: 0 success, 1 batch not accepted,
2 grammar or conformance error, 3 I/O problem, 4 deterministic migration
escalated to the LLM, 5 provider or extraction failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import httpx

EXIT_OK = 0
EXIT_NOT_ACCEPTED = 1
EXIT_GRAMMAR = 2
EXIT_IO = 3
EXIT_NEEDS_LLM = 4
EXIT_PROVIDER = 5


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read {path}: {exc}")


def _write(path: Path, text: str):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write {path}: {exc}")


class ServiceClient:
    """HTTP access to the service; in-process unless --server is given."""

    def __init__(self, server: str | None):
        if server:
            self._client = httpx.Client(base_url=server, timeout=600.0)
        else:
            from fastapi.testclient import TestClient

            from coevo.service import create_app

            self._client = TestClient(create_app())

    def post(self, path: str, payload: dict) -> dict:
        try:
            response = self._client.post(path, json=payload)
        except httpx.HTTPError as exc:
            raise CliError(EXIT_IO, f"cannot reach service: {exc}")
        if response.status_code // 100 == 2:
            return response.json()
        detail = {}
        try:
            detail = response.json().get("detail", {})
        except ValueError:
            pass
        kind = detail.get("kind", "") if isinstance(detail, dict) else ""
        message = detail.get("message", response.text) if isinstance(detail, dict) else response.text
        if kind in ("grammar_error", "instance_error"):
            raise CliError(EXIT_GRAMMAR, message)
        if kind in ("provider_error", "config_error"):
            raise CliError(EXIT_PROVIDER, message)
        raise CliError(EXIT_IO, f"service error {response.status_code}: {message}")


def _provider_payload(args) -> dict:
    return {
        "kind": args.provider,
        "script_path": args.script,
        "endpoint_url": args.endpoint,
        "model_name": args.model,
        "api_key_env": args.api_key_env,
        "timeout": args.timeout,
        "temperature": args.temperature,
    }


def cmd_diff(args, client: ServiceClient) -> int:
    payload = {
        "grammar_old": _read(args.grammar_old),
        "grammar_new": _read(args.grammar_new),
    }
    result = client.post("/diff", payload)
    print(json.dumps(result, indent=2))
    return EXIT_OK


def cmd_validate(args, client: ServiceClient) -> int:
    payload = {"grammar": _read(args.grammar), "instance": _read(args.instance)}
    result = client.post("/validate", payload)
    print(json.dumps(result, indent=2))
    return EXIT_OK


def cmd_migrate(args, client: ServiceClient) -> int:
    payload = {
        "grammar_old": _read(args.grammar_old),
        "grammar_new": _read(args.grammar_new),
        "instance": _read(args.instance),
        "engine": args.engine,
    }
    if args.engine == "llm":
        payload["provider"] = _provider_payload(args)
    result = client.post("/migrate", payload)
    out = Path(args.out)
    if result.get("raw_response") is not None:
        _write(out.with_name(out.name + ".response.txt"), result["raw_response"])
    status = result["status"]
    if status == "needs_llm":
        for reason in result["reasons"]:
            print(f"needs llm: {reason}", file=sys.stderr)
        return EXIT_NEEDS_LLM
    if status == "extraction_failed":
        print(f"extraction failed: {result.get('failure')}", file=sys.stderr)
        return EXIT_PROVIDER
    _write(out, result["migrated"])
    print(f"wrote {out}")
    return EXIT_OK


def cmd_eval(args, client: ServiceClient) -> int:
    payload = {
        "grammar_old": _read(args.grammar_old),
        "grammar_new": _read(args.grammar_new),
        "original": _read(args.instance),
        "evolved": _read(args.evolved),
    }
    result = client.post("/eval", payload)
    print(json.dumps(result, indent=2))
    return EXIT_OK


def cmd_batch(args, client: ServiceClient) -> int:
    payload = {
        "grammar_old": _read(args.grammar_old),
        "grammar_new": _read(args.grammar_new),
        "instance": _read(args.instance),
        "provider": _provider_payload(args),
        "runs": args.runs,
        "good_threshold": args.good_threshold,
        "parallel": args.parallel,
    }
    result = client.post("/batch", payload)
    out_dir = Path(args.out)
    manifest_runs = []
    for run in result["runs"]:
        run_dir = out_dir / f"run-{run['run_index']:02d}"
        artifacts = {}
        response_path = run_dir / "response.txt"
        _write(response_path, run["raw_response"])
        artifacts["raw_response"] = str(response_path)
        if run["extracted"] is not None:
            migrated_path = run_dir / "migrated.txt"
            _write(migrated_path, run["extracted"])
            artifacts["migrated"] = str(migrated_path)
        metrics_path = run_dir / "metrics.json"
        _write(metrics_path, json.dumps(run["metrics"], indent=2) + "\n")
        artifacts["metrics"] = str(metrics_path)
        manifest_runs.append(
            {
                "run_index": run["run_index"],
                "failure": run["failure"],
                "good": run["good"],
                "artifacts": artifacts,
            }
        )
    manifest = {
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "config": {
            "grammar_old": args.grammar_old,
            "grammar_new": args.grammar_new,
            "instance": args.instance,
            "engine": "llm",
            "provider": _provider_payload(args),
            "runs": args.runs,
            "good_threshold": args.good_threshold,
            "parallel": args.parallel,
            "note": args.note,
        },
        "runs": manifest_runs,
        "summary": result["summary"],
    }
    _write(out_dir / "manifest.json", json.dumps(manifest, indent=2) + "\n")
    summary = result["summary"]
    print(json.dumps(summary, indent=2))
    return EXIT_OK if summary["accepted"] else EXIT_NOT_ACCEPTED


def cmd_serve(args, _client=None) -> int:
    import uvicorn

    uvicorn.run("coevo.service:app", host=args.host, port=args.port)
    return EXIT_OK


def _add_provider_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--provider", choices=["mock", "http"], default="mock")
    parser.add_argument("--script", help="directory of run-*.txt responses (mock)")
    parser.add_argument("--endpoint", help="chat-completion endpoint URL (http)")
    parser.add_argument("--model", default="", help="model name sent to the provider")
    parser.add_argument("--api-key-env", default="COEVO_API_KEY",
                        help="environment variable holding the API key (http)")
    parser.add_argument("--timeout", type=float, default=30.0)
    parser.add_argument("--temperature", type=float, default=0.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coevo",
        description="Migrate and evaluate textual DSL instances across grammar versions.",
    )
    parser.add_argument("--server", help="service base URL; default runs in-process")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("diff", help="diff two grammar versions")
    p.add_argument("--grammar-old", required=True)
    p.add_argument("--grammar-new", required=True)
    p.set_defaults(func=cmd_diff)

    p = sub.add_parser("validate", help="check an instance against a grammar")
    p.add_argument("--grammar", required=True)
    p.add_argument("--instance", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("migrate", help="migrate one instance")
    p.add_argument("--grammar-old", required=True)
    p.add_argument("--grammar-new", required=True)
    p.add_argument("--instance", required=True)
    p.add_argument("--engine", choices=["deterministic", "llm"], default="deterministic")
    p.add_argument("--out", required=True, help="path of the migrated instance")
    _add_provider_flags(p)
    p.set_defaults(func=cmd_migrate)

    p = sub.add_parser("eval", help="score an evolved instance")
    p.add_argument("--grammar-old", required=True)
    p.add_argument("--grammar-new", required=True)
    p.add_argument("--instance", required=True, help="the original instance")
    p.add_argument("--evolved", required=True, help="the evolved instance to score")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("batch", help="run the repeated-run LLM protocol")
    p.add_argument("--grammar-old", required=True)
    p.add_argument("--grammar-new", required=True)
    p.add_argument("--instance", required=True)
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--good-threshold", type=int, default=None,
                   help="good runs needed to accept (default: 60%% of runs, "
                        "so 6 out of 10)")
    p.add_argument("--parallel", type=int, default=1)
    p.add_argument("--out", required=True, help="directory for per-run artifacts")
    p.add_argument("--note", default="", help="free-text metadata echoed in the manifest")
    _add_provider_flags(p)
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "serve":
            return cmd_serve(args)
        client = ServiceClient(args.server)
        return args.func(args, client)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


def run():
    sys.exit(main())


if __name__ == "__main__":
    run()
