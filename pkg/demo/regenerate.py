#!/usr/bin/env python3
"""Regenerate the demo script directory.

Records the scripted story provider's traffic for the demo flows
(indexing, two questions, one edit) and dumps it fingerprint-keyed into
demo/scripts/. Re-run after changing prompt templates, because template
edits shift request fingerprints.
"""

from __future__ import annotations

import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "tests"))

from storyworld import StoryWorld  # noqa: E402

from storycut.canonical import canonical_dumps  # noqa: E402
from storycut.gateway.providers import RecordingProvider  # noqa: E402
from storycut.orchestrator.engine import WorkflowEngine  # noqa: E402
from storycut.runtime import Runtime  # noqa: E402
from storycut.store import FilesystemStore, ProjectStore  # noqa: E402

DEMO_QUESTIONS = [
    "When does the crew talk about the beacon?",
    "Who keeps the radio open?",
]
DEMO_EDIT_PROMPT = "Recap the expedition"
DURATION_S = 600.0


def main() -> int:
    demo_dir = Path(__file__).resolve().parent
    world = StoryWorld(duration_s=DURATION_S)
    (demo_dir / "media.json").write_bytes(canonical_dumps(world.media_descriptor()))

    recorder = RecordingProvider(world.provider())
    with tempfile.TemporaryDirectory() as tmp:
        runtime = Runtime(store=ProjectStore(FilesystemStore(tmp)), provider=recorder)
        store = runtime.store
        store.create_project("demo")
        store.backend.put("demo/media/media.json", canonical_dumps(world.media_descriptor()))
        engine = WorkflowEngine(runtime)
        engine.start("demo", "comprehend")
        for question in DEMO_QUESTIONS:
            engine.start("demo", "qa", {"question": question})
        engine.start("demo", "edit", {"prompt": DEMO_EDIT_PROMPT})

    scripts = demo_dir / "scripts"
    for stale in scripts.glob("*"):
        stale.unlink()
    recorder.dump_dir(scripts)
    print(f"wrote {len(list(scripts.glob('*.txt')))} scripts to {scripts}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
