"""Command-line interface.

Commands: ingest, index, ask, edit, status, artifacts, serve. Exit codes:
0 success, 1 user error, 2 system error. Every command honors --json for
machine-readable output. Configuration comes from STORE_ROOT, PROVIDER_*,
ENGINE_CMD_TEMPLATE, TRACK_MANIFEST.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .canonical import canonical_dumps
from .errors import (
    DefinitionError,
    EngineError,
    NotFound,
    ParseError,
    PreconditionError,
    ProviderError,
    StorycutError,
    StructuredOutputError,
    ValidationError,
    WorkflowConflictError,
    WorkflowFailed,
)
from .media import probe
from .orchestrator.engine import WorkflowEngine
from .runtime import Runtime, build_runtime

USER_ERRORS = (
    PreconditionError,
    NotFound,
    DefinitionError,
    ValidationError,
    WorkflowConflictError,
    ParseError,
)
SYSTEM_ERRORS = (EngineError, ProviderError, StructuredOutputError, WorkflowFailed)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="storycut", description="Prompt-driven long-form video pipeline")
    parser.add_argument("--json", action="store_true", help="machine-readable output")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("ingest", help="create a project from media files")
    p.add_argument("paths", nargs="+")
    p.add_argument("--project", help="project id (default: first file stem)")

    p = sub.add_parser("index", help="run the comprehension workflow")
    p.add_argument("project")
    p.add_argument("--no-refine", action="store_true", help="skip the refinement pass")

    p = sub.add_parser("ask", help="answer a question against the index")
    p.add_argument("project")
    p.add_argument("question")

    p = sub.add_parser("edit", help="compile an editing prompt into a plan and render")
    p.add_argument("project")
    p.add_argument("prompt")
    p.add_argument("--variants", type=int, default=1)

    p = sub.add_parser("status", help="show a workflow's activity log")
    p.add_argument("workflow_id")

    p = sub.add_parser("artifacts", help="list project artifacts (or print one kind)")
    p.add_argument("project")
    p.add_argument("kind", nargs="?")

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8787)
    return parser


def _emit(stdout, payload: dict, as_json: bool, lines: list[str]):
    if as_json:
        print(json.dumps(payload, sort_keys=True, indent=2), file=stdout)
    else:
        for line in lines:
            print(line, file=stdout)


def _sanitize_project_id(stem: str) -> str:
    import re

    cleaned = re.sub(r"[^A-Za-z0-9._-]", "-", stem).strip("-.")
    return cleaned or "project"


def cli_dispatch(argv, *, env=None, stdout=None, runtime: Runtime | None = None) -> int:
    """Parse and run one CLI invocation; returns the process exit code."""
    env = env if env is not None else os.environ
    stdout = stdout or sys.stdout
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=stdout)
        print(parser.format_usage(), file=stdout, end="")
        return 1
    if not args.command:
        print(parser.format_help(), file=stdout, end="")
        return 1
    try:
        rt = runtime if runtime is not None else build_runtime(env)
        return _run_command(args, rt, stdout)
    except USER_ERRORS as exc:
        _print_error(stdout, exc, args.json)
        return 1
    except SYSTEM_ERRORS as exc:
        _print_error(stdout, exc, args.json)
        return 2
    except StorycutError as exc:
        _print_error(stdout, exc, args.json)
        return 2


def _print_error(stdout, exc: Exception, as_json: bool):
    if as_json:
        body = {"error": str(exc), "type": type(exc).__name__}
        if isinstance(exc, ValidationError):
            body["report"] = exc.report.to_json()
        print(json.dumps(body, sort_keys=True), file=stdout)
    else:
        print(f"error: {exc}", file=stdout)


def _run_command(args, rt: Runtime, stdout) -> int:
    if args.command == "ingest":
        return _cmd_ingest(args, rt, stdout)
    if args.command == "index":
        return _cmd_index(args, rt, stdout)
    if args.command == "ask":
        return _cmd_ask(args, rt, stdout)
    if args.command == "edit":
        return _cmd_edit(args, rt, stdout)
    if args.command == "status":
        return _cmd_status(args, rt, stdout)
    if args.command == "artifacts":
        return _cmd_artifacts(args, rt, stdout)
    if args.command == "serve":
        return _cmd_serve(args, rt, stdout)
    raise PreconditionError(f"unknown command {args.command!r}")


def _cmd_ingest(args, rt: Runtime, stdout) -> int:
    paths = [Path(p) for p in args.paths]
    for path in paths:
        if not path.is_file():
            raise NotFound(f"media file not found: {path}")
    project_id = args.project or _sanitize_project_id(paths[0].stem)
    store = rt.store
    store.create_project(project_id)
    assets = []
    for path in paths:
        uri = store.add_media(project_id, path)
        asset = probe(store, uri)
        store.put_artifact(project_id, "media_asset", canonical_dumps(asset.to_json()))
        assets.append(asset.to_json())
    payload = {"assets": assets, "project_id": project_id}
    lines = [f"project {project_id} created with {len(assets)} asset(s)"]
    lines += [
        f"  {a['asset_id']}  {a['duration_ms'] / 1000:.3f}s  {a['width']}x{a['height']}@{a['fps']:g}"
        for a in assets
    ]
    _emit(stdout, payload, args.json, lines)
    return 0


def _cmd_index(args, rt: Runtime, stdout) -> int:
    engine = WorkflowEngine(rt)
    params = {}
    if args.no_refine:
        params["refinement_enabled"] = False
    workflow_id = engine.start(args.project, "comprehend", params)
    record = engine.load_record(workflow_id, args.project)
    payload = {
        "result": record.result,
        "status": record.status,
        "workflow_id": workflow_id,
    }
    _emit(
        stdout,
        payload,
        args.json,
        [
            f"workflow {workflow_id} {record.status}",
            f"index: {record.result.get('index_uri', '(none)')}",
        ],
    )
    return 0


def _cmd_ask(args, rt: Runtime, stdout) -> int:
    engine = WorkflowEngine(rt)
    workflow_id = engine.start(args.project, "qa", {"question": args.question})
    record = engine.load_record(workflow_id, args.project)
    response = record.result.get("response", {})
    payload = {"response": response, "workflow_id": workflow_id}
    lines = [response.get("answer", "")]
    citations = response.get("cited_timestamps", [])
    if citations:
        lines.append("citations: " + ", ".join(citations))
    lines.append(f"grounded: {str(response.get('grounded', False)).lower()}")
    _emit(stdout, payload, args.json, lines)
    return 0


def _cmd_edit(args, rt: Runtime, stdout) -> int:
    if args.variants < 1:
        raise PreconditionError("--variants must be >= 1")
    engine = WorkflowEngine(rt)
    if args.variants == 1:
        workflow_ids = [engine.start(args.project, "edit", {"prompt": args.prompt})]
    else:
        workflow_ids = engine.fork_variants(args.project, [args.prompt] * args.variants)
    results = []
    lines = []
    for workflow_id in workflow_ids:
        record = engine.load_record(workflow_id, args.project)
        results.append({"result": record.result, "status": record.status, "workflow_id": workflow_id})
        lines.append(f"workflow {workflow_id} {record.status}")
        lines.append(f"  plan: {record.result.get('plan_uri', '(none)')}")
        lines.append(f"  download: {record.result.get('download_uri', '(none)')}")
    _emit(stdout, {"workflows": results}, args.json, lines)
    return 0


def _cmd_status(args, rt: Runtime, stdout) -> int:
    engine = WorkflowEngine(rt)
    record = engine.load_record(args.workflow_id)
    payload = record.to_json()
    payload["percent_complete"] = record.percent_complete()
    lines = [
        f"workflow {record.workflow_id} [{record.definition}] {record.status} "
        f"({record.percent_complete()}% complete)"
    ]
    for act in record.activities:
        mark = "ok" if act.status == "completed" else "FAILED"
        lines.append(f"  {act.name:<28} {mark:<8} attempts={act.attempt}")
        if act.error:
            lines.append(f"      {act.error['type']}: {act.error['message']}")
    _emit(stdout, payload, args.json, lines)
    return 0


def _cmd_artifacts(args, rt: Runtime, stdout) -> int:
    store = rt.store
    streams = store.list_streams(args.project)
    if args.kind:
        matches = {s: r for s, r in streams.items() if r.kind == args.kind or s == args.kind}
        if not matches:
            raise NotFound(f"no {args.kind!r} artifacts in project {args.project!r}")
        if len(matches) == 1 and not args.json:
            ref = next(iter(matches.values()))
            data = store.get_artifact(ref)
            stdout.write(data.decode("utf-8", errors="replace"))
            return 0
        streams = matches
    payload = {"artifacts": {s: r.to_json() for s, r in streams.items()}}
    lines = [
        f"{s:<32} v{r.version:<4} {r.hash[:12]}  {r.uri}" for s, r in streams.items()
    ]
    _emit(stdout, payload, args.json, lines or ["(no artifacts)"])
    return 0


def _cmd_serve(args, rt: Runtime, stdout) -> int:
    from .http import http_serve

    print(f"serving on http://{args.host}:{args.port}", file=stdout)
    http_serve(rt, host=args.host, port=args.port)
    return 0


def main() -> int:
    return cli_dispatch(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
