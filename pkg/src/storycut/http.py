"""HTTP surface: project ingestion, indexing, QA, editing, artifact access.

Handlers are thin over the store and workflow engine; every behavior here
is also reachable through the CLI and produces identical artifacts.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, Response
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .errors import (
    NotFound,
    ParseError,
    PreconditionError,
    StorycutError,
    ValidationError,
    WorkflowConflictError,
    WorkflowFailed,
)
from .media import probe
from .canonical import canonical_dumps
from .orchestrator.engine import WorkflowEngine
from .runtime import Runtime


class CreateProjectRequest(BaseModel):
    project_id: str | None = None
    media: list[str] = Field(default_factory=list)


class IndexRequest(BaseModel):
    refinement_enabled: bool | None = None


class QARequest(BaseModel):
    question: str


class EditRequest(BaseModel):
    prompt: str
    variants: int = 1


def create_app(runtime: Runtime) -> FastAPI:
    app = FastAPI(title="storycut", version="0.1.0")
    engine = WorkflowEngine(runtime)
    store = runtime.store

    @app.exception_handler(StorycutError)
    async def _storycut_error(_request, exc: StorycutError):
        if isinstance(exc, NotFound):
            return JSONResponse({"error": str(exc)}, status_code=404)
        if isinstance(exc, WorkflowConflictError):
            return JSONResponse({"error": str(exc)}, status_code=409)
        if isinstance(exc, ValidationError):
            return JSONResponse(
                {"error": str(exc), "report": exc.report.to_json()}, status_code=422
            )
        if isinstance(exc, (PreconditionError, ParseError)):
            return JSONResponse({"error": str(exc)}, status_code=422)
        if isinstance(exc, WorkflowFailed):
            return JSONResponse({"error": str(exc)}, status_code=500)
        return JSONResponse({"error": str(exc), "type": type(exc).__name__}, status_code=500)

    @app.post("/projects")
    def create_project(body: CreateProjectRequest):
        if not body.media:
            raise PreconditionError("at least one media path is required")
        first = Path(body.media[0])
        project_id = body.project_id or first.stem or "project"
        store.create_project(project_id)
        assets = []
        for media_path in body.media:
            path = Path(media_path)
            if not path.is_file():
                raise NotFound(f"media file not found: {path}")
            uri = store.add_media(project_id, path)
            asset = probe(store, uri)
            store.put_artifact(project_id, "media_asset", canonical_dumps(asset.to_json()))
            assets.append(asset.to_json())
        return {"assets": assets, "project_id": project_id}

    @app.post("/projects/{project_id}/index")
    def run_index(project_id: str, body: IndexRequest):
        params = {}
        if body.refinement_enabled is not None:
            params["refinement_enabled"] = body.refinement_enabled
        workflow_id = engine.start(project_id, "comprehend", params, check_conflict=True)
        record = engine.load_record(workflow_id, project_id)
        return {"result": record.result, "status": record.status, "workflow_id": workflow_id}

    @app.post("/projects/{project_id}/qa")
    def run_qa(project_id: str, body: QARequest):
        if not body.question.strip():
            raise PreconditionError("question must be non-empty")
        workflow_id = engine.start(project_id, "qa", {"question": body.question})
        record = engine.load_record(workflow_id, project_id)
        return {
            "response": record.result.get("response"),
            "status": record.status,
            "workflow_id": workflow_id,
        }

    @app.post("/projects/{project_id}/edit")
    def run_edit(project_id: str, body: EditRequest):
        if not body.prompt.strip():
            raise PreconditionError("prompt must be non-empty")
        if body.variants < 1:
            raise PreconditionError("variants must be >= 1")
        if body.variants == 1:
            workflow_ids = [
                engine.start(project_id, "edit", {"prompt": body.prompt}, check_conflict=True)
            ]
        else:
            workflow_ids = engine.fork_variants(project_id, [body.prompt] * body.variants)
        out = []
        for workflow_id in workflow_ids:
            record = engine.load_record(workflow_id, project_id)
            out.append(
                {
                    "download_uri": record.result.get("download_uri"),
                    "result": record.result,
                    "status": record.status,
                    "workflow_id": workflow_id,
                }
            )
        return {"workflows": out}

    @app.get("/projects/{project_id}/artifacts/{kind}")
    def get_artifact(project_id: str, kind: str):
        streams = store.list_streams(project_id)
        matches = {s: r for s, r in streams.items() if r.kind == kind or s == kind}
        if not matches:
            raise NotFound(f"no {kind!r} artifacts in project {project_id!r}")
        stream = sorted(matches)[0]
        ref = matches[stream]
        data = store.get_artifact(ref)
        media_type = "application/json" if ref.uri.endswith(".json") else "application/octet-stream"
        return Response(content=data, media_type=media_type, headers={"ETag": ref.hash})

    @app.get("/workflows/{workflow_id}")
    def get_workflow(workflow_id: str):
        record = engine.load_record(workflow_id)
        payload = record.to_json()
        payload["percent_complete"] = record.percent_complete()
        return payload

    return app


def http_serve(runtime: Runtime, host: str = "127.0.0.1", port: int = 8787):
    """Run the HTTP service (blocking)."""
    import uvicorn

    uvicorn.run(create_app(runtime), host=host, port=port, log_level="warning")
