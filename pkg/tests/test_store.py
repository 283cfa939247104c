from __future__ import annotations

import hashlib

import pytest

from storycut.canonical import canonical_dumps
from storycut.errors import IntegrityError, NotFound, PreconditionError, ValidationError
from storycut.store import FilesystemStore, ProjectStore


@pytest.fixture
def store(tmp_path) -> ProjectStore:
    return ProjectStore(FilesystemStore(tmp_path / "store"))


GOOD_DOC = canonical_dumps({"hello": "world", "kind": "scratch_notes"})


class TestProjects:
    def test_create_and_list(self, store):
        store.create_project("demo")
        store.create_project("other")
        assert store.list_projects() == ["demo", "other"]
        assert store.project_exists("demo")
        assert not store.project_exists("ghost")

    def test_bad_project_id_rejected(self, store):
        with pytest.raises(PreconditionError):
            store.create_project("../escape")
        with pytest.raises(PreconditionError):
            store.create_project("")

    def test_backend_refuses_paths_escaping_root(self, store):
        from storycut.errors import StoreError

        with pytest.raises(StoreError, match="escapes"):
            store.backend.put("../outside.txt", b"nope")
        with pytest.raises(StoreError, match="escapes"):
            store.backend.get("a/../../outside.txt")


class TestArtifacts:
    def test_put_get_round_trip(self, store):
        store.create_project("demo")
        ref = store.put_artifact("demo", "scratch_notes", GOOD_DOC)
        assert store.get_artifact(ref) == GOOD_DOC

    def test_hash_matches_independent_digest(self, store):
        store.create_project("demo")
        ref = store.put_artifact("demo", "scratch_notes", GOOD_DOC)
        assert ref.hash == hashlib.sha256(GOOD_DOC).hexdigest()
        assert ref.hash[:16] in ref.uri

    def test_identical_bytes_idempotent(self, store):
        store.create_project("demo")
        first = store.put_artifact("demo", "scratch_notes", GOOD_DOC)
        second = store.put_artifact("demo", "scratch_notes", GOOD_DOC)
        assert first == second
        assert first.version == 1

    def test_versions_append_only(self, store):
        store.create_project("demo")
        v1 = store.put_artifact("demo", "scratch_notes", GOOD_DOC)
        v2 = store.put_artifact("demo", "scratch_notes", canonical_dumps({"v": 2}))
        assert (v1.version, v2.version) == (1, 2)
        assert store.backend.exists(v1.uri) and store.backend.exists(v2.uri)
        assert store.latest("demo", "scratch_notes").version == 2

    def test_corrupted_bytes_raise_integrity_error(self, store):
        store.create_project("demo")
        ref = store.put_artifact("demo", "scratch_notes", GOOD_DOC)
        path = store.backend.local_path(ref.uri)
        raw = bytearray(path.read_bytes())
        raw[0] ^= 0xFF
        path.write_bytes(bytes(raw))
        with pytest.raises(IntegrityError):
            store.get_artifact(ref)

    def test_latest_missing_raises_not_found(self, store):
        store.create_project("demo")
        with pytest.raises(NotFound):
            store.latest("demo", "narrative_index")

    def test_invalid_schema_bound_artifact_rejected_and_not_written(self, store):
        store.create_project("demo")
        bad_plan = canonical_dumps({"kind": "edit_plan", "entries": [], "narration": []})
        with pytest.raises(ValidationError):
            store.put_artifact("demo", "edit_plan", bad_plan)
        assert store.backend.list_prefix("demo/plans") == []

    def test_streams_separate_versions(self, store):
        store.create_project("demo")
        a = store.put_artifact("demo", "scene_trace", GOOD_DOC, stream="scene-trace-00")
        b = store.put_artifact("demo", "scene_trace", GOOD_DOC, stream="scene-trace-01")
        assert a.uri != b.uri
        streams = store.list_streams("demo")
        assert {"scene-trace-00", "scene-trace-01"} <= set(streams)


class TestMedia:
    def test_add_media_content_addressed(self, store, tmp_path):
        store.create_project("demo")
        source = tmp_path / "clip.json"
        source.write_bytes(b'{"synthetic_media": true}')
        uri = store.add_media("demo", source)
        assert uri.startswith("demo/media/")
        assert store.backend.get(uri) == source.read_bytes()
        assert store.add_media("demo", source) == uri

    def test_missing_media_raises(self, store, tmp_path):
        store.create_project("demo")
        with pytest.raises(NotFound):
            store.add_media("demo", tmp_path / "ghost.mp4")
