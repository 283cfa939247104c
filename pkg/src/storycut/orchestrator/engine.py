"""Durable in-process workflow engine.

Workflows are deterministic replay scripts: a definition function runs
activities through its context, each activity checkpoints its output
ArtifactRef (keyed by an input hash of activity name, config, and
predecessor hashes) into the workflow record, and resume re-executes the
definition with completed activities replayed from the checkpointed refs.
"""

from __future__ import annotations

import threading
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from ..canonical import canonical_dumps, canonical_loads, stable_digest
from ..errors import (
    RETRYABLE_ERRORS,
    DefinitionError,
    HashMismatchError,
    NotFound,
    PreconditionError,
    WorkflowConflictError,
    WorkflowFailed,
)
from ..model import SCHEMA_VERSION
from ..runtime import Runtime
from ..store import ArtifactRef


@dataclass(frozen=True)
class RetryPolicy:
    """Per-activity retry behavior for transient failures."""

    max_attempts: int = 3
    backoff_base: float = 1.0
    backoff_factor: float = 2.0
    jitter: float = 0.0  # fraction of the delay; 0 keeps runs deterministic

    def __post_init__(self):
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")

    def delay(self, attempt: int) -> float:
        base = self.backoff_base * (self.backoff_factor ** (attempt - 1))
        if self.jitter:
            import random

            base *= 1 + random.uniform(-self.jitter, self.jitter)
        return base


class KillSignal(Exception):
    """Injected interruption point; the workflow record stays resumable."""


@dataclass
class ActivityEntry:
    name: str
    attempt: int
    input_hash: str
    status: str  # completed | failed
    output: dict | None = None
    error: dict | None = None
    started_at: str = ""
    finished_at: str = ""

    def to_json(self) -> dict:
        return {
            "attempt": self.attempt,
            "error": self.error,
            "finished_at": self.finished_at,
            "input_hash": self.input_hash,
            "name": self.name,
            "output": self.output,
            "started_at": self.started_at,
            "status": self.status,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ActivityEntry":
        return cls(
            name=obj["name"],
            attempt=obj["attempt"],
            input_hash=obj["input_hash"],
            status=obj["status"],
            output=obj.get("output"),
            error=obj.get("error"),
            started_at=obj.get("started_at", ""),
            finished_at=obj.get("finished_at", ""),
        )


@dataclass
class WorkflowRecord:
    workflow_id: str
    project_id: str
    definition: str
    status: str  # pending | running | failed | completed
    params: dict
    input_key: str
    activities: list[ActivityEntry] = field(default_factory=list)
    journal: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    result: dict = field(default_factory=dict)
    checkpoint: int = 0
    created_at: str = ""
    updated_at: str = ""

    def find(self, name: str) -> ActivityEntry | None:
        """Latest log entry for an activity; the log itself is append-only."""
        for entry in reversed(self.activities):
            if entry.name == name:
                return entry
        return None

    def latest_by_activity(self) -> dict[str, ActivityEntry]:
        latest: dict[str, ActivityEntry] = {}
        for entry in self.activities:
            latest[entry.name] = entry
        return latest

    def percent_complete(self) -> int:
        if self.status == "completed":
            return 100
        latest = self.latest_by_activity()
        if not latest:
            return 0
        done = sum(1 for a in latest.values() if a.status == "completed")
        return int(100 * done / len(latest))

    def to_json(self) -> dict:
        return {
            "activities": [a.to_json() for a in self.activities],
            "checkpoint": self.checkpoint,
            "created_at": self.created_at,
            "definition": self.definition,
            "input_key": self.input_key,
            "journal": list(self.journal),
            "kind": "workflow_record",
            "params": self.params,
            "project_id": self.project_id,
            "result": self.result,
            "schema_version": SCHEMA_VERSION,
            "status": self.status,
            "updated_at": self.updated_at,
            "warnings": list(self.warnings),
            "workflow_id": self.workflow_id,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "WorkflowRecord":
        return cls(
            workflow_id=obj["workflow_id"],
            project_id=obj["project_id"],
            definition=obj["definition"],
            status=obj["status"],
            params=obj.get("params", {}),
            input_key=obj.get("input_key", ""),
            activities=[ActivityEntry.from_json(a) for a in obj.get("activities", [])],
            journal=list(obj.get("journal", [])),
            warnings=list(obj.get("warnings", [])),
            result=obj.get("result", {}),
            checkpoint=obj.get("checkpoint", 0),
            created_at=obj.get("created_at", ""),
            updated_at=obj.get("updated_at", ""),
        )


class WorkflowContext:
    """Handed to definition functions; runs and checkpoints activities."""

    def __init__(self, engine: "WorkflowEngine", record: WorkflowRecord):
        self.engine = engine
        self.record = record
        self.runtime = engine.runtime
        self.store = engine.runtime.store
        self.gateway = engine.runtime.gateway(journal=record.journal, warnings=record.warnings)

    def activity(self, name: str, fn, inputs: dict, policy: RetryPolicy | None = None) -> ArtifactRef:
        return self.engine.run_activity(self.record, name, fn, inputs, policy)

    def parallel(self, tasks: list[tuple[str, object, dict]]) -> list[ArtifactRef]:
        """Run independent activities on the worker pool, preserving order."""
        if not tasks:
            return []
        with ThreadPoolExecutor(max_workers=self.engine.max_workers) as pool:
            futures = [pool.submit(self.activity, name, fn, inputs) for name, fn, inputs in tasks]
            results = []
            first_error = None
            for future in futures:
                try:
                    results.append(future.result())
                except BaseException as exc:  # keep the first; let siblings finish
                    if first_error is None:
                        first_error = exc
            if first_error is not None:
                raise first_error
        return results

    def load(self, ref: ArtifactRef) -> dict:
        return canonical_loads(self.store.get_artifact(ref))

    def put(self, kind: str, doc: dict, stream: str | None = None) -> ArtifactRef:
        return self.store.put_artifact(
            self.record.project_id, kind, canonical_dumps(doc), stream=stream
        )


class WorkflowEngine:
    """Runs registered workflow definitions with durable checkpoints."""

    def __init__(
        self,
        runtime: Runtime,
        *,
        sleeper=time.sleep,
        kill_after: str | None = None,
        max_workers: int | None = None,
    ):
        from . import definitions as _definitions

        self.runtime = runtime
        self.sleeper = sleeper
        self.kill_after = kill_after
        self.killed = False
        self.max_workers = max_workers or runtime.max_workers
        self.definitions: dict = dict(_definitions.BUILTIN_DEFINITIONS)
        self._record_locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    # -- record persistence ---------------------------------------------------

    def _lock_for(self, workflow_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._record_locks.setdefault(workflow_id, threading.Lock())

    def _persist(self, record: WorkflowRecord):
        record.updated_at = self.runtime.now()
        self.runtime.store.put_artifact(
            record.project_id,
            "workflow_record",
            canonical_dumps(record.to_json()),
            stream=f"workflow-{record.workflow_id}",
        )

    def load_record(self, workflow_id: str, project_id: str | None = None) -> WorkflowRecord:
        store = self.runtime.store
        projects = [project_id] if project_id else store.list_projects()
        for project in projects:
            try:
                data = store.latest_bytes(project, f"workflow-{workflow_id}", kind="workflow_record")
            except NotFound:
                continue
            return WorkflowRecord.from_json(canonical_loads(data))
        raise NotFound(f"unknown workflow {workflow_id!r}")

    def list_records(self, project_id: str) -> list[WorkflowRecord]:
        store = self.runtime.store
        records = []
        for stream, ref in store.list_streams(project_id).items():
            if stream.startswith("workflow-"):
                records.append(WorkflowRecord.from_json(canonical_loads(store.get_artifact(ref))))
        return records

    # -- lifecycle --------------------------------------------------------------

    def start(
        self,
        project_id: str,
        definition: str,
        params: dict | None = None,
        *,
        check_conflict: bool = False,
    ) -> str:
        """Create a record and execute the definition to completion (or kill)."""
        self.runtime.store.require_project(project_id)
        if definition not in self.definitions:
            raise DefinitionError(f"unknown workflow definition {definition!r}")
        params = params or {}
        input_key = stable_digest(
            {"config": self.runtime.config.to_json(), "definition": definition, "params": params}
        )
        if check_conflict:
            for existing in self.list_records(project_id):
                if existing.status == "running" and existing.input_key == input_key:
                    raise WorkflowConflictError(
                        f"workflow {existing.workflow_id} already running for this input"
                    )
        record = WorkflowRecord(
            workflow_id=uuid.uuid4().hex[:12],
            project_id=project_id,
            definition=definition,
            status="running",
            params=params,
            input_key=input_key,
            created_at=self.runtime.now(),
        )
        self._persist(record)
        self._execute(record)
        return record.workflow_id

    def _execute(self, record: WorkflowRecord) -> WorkflowRecord:
        ctx = WorkflowContext(self, record)
        fn = self.definitions[record.definition]
        try:
            result = fn(ctx, record.params)
        except KillSignal:
            self.killed = True
            self._persist(record)
            return record
        except WorkflowFailed:
            self._persist(record)
            raise
        record.status = "completed"
        record.result = result or {}
        self._persist(record)
        return record

    def resume(self, workflow_id: str) -> WorkflowRecord:
        """Continue from the first incomplete activity; completed work replays.

        The activity log stays append-only: failed attempts remain in the
        log and a successful re-run appends a fresh completed entry.
        """
        record = self.load_record(workflow_id)
        if record.status == "completed":
            return record
        if record.status not in ("running", "failed"):
            raise PreconditionError(f"workflow {workflow_id} is {record.status}; cannot resume")
        record.status = "running"
        self._persist(record)
        return self._execute(record)

    def fork_variants(self, project_id: str, prompts: list[str]) -> list[str]:
        """One concurrent edit workflow per prompt over the shared index."""
        store = self.runtime.store
        try:
            store.latest(project_id, "narrative_index")
        except NotFound:
            raise PreconditionError(f"project {project_id!r} has no narrative index") from None
        if not prompts:
            return []
        with ThreadPoolExecutor(max_workers=max(1, min(len(prompts), self.max_workers))) as pool:
            futures = [
                pool.submit(self.start, project_id, "edit", {"prompt": prompt}) for prompt in prompts
            ]
            return [f.result() for f in futures]

    # -- activity runner ----------------------------------------------------------

    def run_activity(
        self,
        record: WorkflowRecord,
        name: str,
        fn,
        inputs: dict,
        policy: RetryPolicy | None = None,
    ) -> ArtifactRef:
        """Run one activity with replay, retry, and checkpointing semantics.

        Completed activities replay from their checkpointed output ref after
        an input-hash match; retryable errors back off per the policy; the
        output ref is journaled exactly once per input hash.
        """
        input_hash = self._input_hash(name, inputs)
        lock = self._lock_for(record.workflow_id)
        with lock:
            existing = record.find(name)
            if existing is not None and existing.status == "completed":
                if existing.input_hash != input_hash:
                    raise HashMismatchError(
                        f"activity {name!r} checkpoint is stale: inputs changed since it completed"
                    )
                return ArtifactRef.from_json(existing.output)

        policy = policy or RetryPolicy(max_attempts=self.runtime.config.retry_limit)
        attempt = 0
        started_at = self.runtime.now()
        while True:
            attempt += 1
            try:
                ref = fn()
                break
            except KillSignal:
                raise
            except RETRYABLE_ERRORS as exc:
                with lock:
                    record.journal.append(
                        {
                            "activity": name,
                            "attempt": attempt,
                            "error": f"{type(exc).__name__}: {exc}",
                            "kind": "retry",
                        }
                    )
                if attempt >= policy.max_attempts:
                    self._fail(record, name, attempt, input_hash, exc, started_at)
                    raise WorkflowFailed(f"activity {name!r} exhausted retries: {exc}") from exc
                self.sleeper(policy.delay(attempt))
            except Exception as exc:
                self._fail(record, name, attempt, input_hash, exc, started_at)
                raise WorkflowFailed(f"activity {name!r} failed: {exc}") from exc

        entry = ActivityEntry(
            name=name,
            attempt=attempt,
            input_hash=input_hash,
            status="completed",
            output=ref.to_json(),
            started_at=started_at,
            finished_at=self.runtime.now(),
        )
        with lock:
            record.activities.append(entry)
            record.checkpoint += 1
            self._persist(record)
        if self.kill_after == name:
            raise KillSignal(name)
        return ref

    def _fail(self, record, name, attempt, input_hash, exc, started_at):
        entry = ActivityEntry(
            name=name,
            attempt=attempt,
            input_hash=input_hash,
            status="failed",
            error={"message": str(exc), "type": type(exc).__name__},
            started_at=started_at,
            finished_at=self.runtime.now(),
        )
        with self._lock_for(record.workflow_id):
            record.activities.append(entry)
            record.status = "failed"
            self._persist(record)

    def _input_hash(self, name: str, inputs: dict) -> str:
        def normalize(value):
            if isinstance(value, ArtifactRef):
                return {"ref_hash": value.hash}
            if isinstance(value, (list, tuple)):
                return [normalize(v) for v in value]
            return value

        normalized = {key: normalize(value) for key, value in inputs.items()}
        return stable_digest(
            {"config": self.runtime.config.to_json(), "inputs": normalized, "name": name}
        )
