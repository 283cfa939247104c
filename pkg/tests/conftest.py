from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from storyworld import StoryWorld  # noqa: E402

from storycut.canonical import canonical_dumps, canonical_loads  # noqa: E402
from storycut.config import PipelineConfig  # noqa: E402
from storycut.model import NarrativeIndex  # noqa: E402
from storycut.orchestrator.engine import WorkflowEngine  # noqa: E402
from storycut.runtime import Runtime  # noqa: E402
from storycut.store import FilesystemStore, ProjectStore  # noqa: E402

FIXED_CLOCK = "2026-01-15T12:00:00Z"


def make_runtime(root: Path, provider, config: PipelineConfig | None = None, **overrides) -> Runtime:
    return Runtime(
        store=ProjectStore(FilesystemStore(root)),
        provider=provider,
        config=config or PipelineConfig(),
        clock=lambda: FIXED_CLOCK,
        **overrides,
    )


def ingest_story(runtime: Runtime, world: StoryWorld, project_id: str = "expedition") -> str:
    store = runtime.store
    store.create_project(project_id)
    descriptor = canonical_dumps(world.media_descriptor())
    store.backend.put(f"{project_id}/media/fixture.json", descriptor)
    return project_id


def build_index(runtime: Runtime, world: StoryWorld, project_id: str = "expedition", **params):
    ingest_story(runtime, world, project_id)
    engine = WorkflowEngine(runtime, sleeper=lambda _: None)
    workflow_id = engine.start(project_id, "comprehend", params)
    record = engine.load_record(workflow_id, project_id)
    data = runtime.store.latest_bytes(project_id, "narrative_index")
    return NarrativeIndex.from_json(canonical_loads(data)), record, engine


@pytest.fixture
def world():
    return StoryWorld()


@pytest.fixture
def runtime(tmp_path, world):
    return make_runtime(tmp_path / "store", world.provider())


@pytest.fixture(scope="session")
def session_index(tmp_path_factory):
    """One full comprehension run shared by read-only tests."""
    world = StoryWorld()
    rt = make_runtime(tmp_path_factory.mktemp("session-store"), world.provider())
    index, record, engine = build_index(rt, world)
    return {"index": index, "record": record, "runtime": rt, "world": world, "engine": engine}


@pytest.fixture
def fixture_index(session_index) -> NarrativeIndex:
    return session_index["index"]
