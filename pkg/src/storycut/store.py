"""Project artifact store.

Persists every pipeline artifact through an object-store abstraction with a
filesystem reference backend: content-hashed immutable versions, atomic
writes, schema validation on write for schema-bound kinds, and per-stream
"latest" pointers guarded by advisory locks.

Layout per project::

    <project>/.project
    <project>/media/       raw uploads (content-addressed filenames)
    <project>/segments/    downsampled segment artifacts
    <project>/artifacts/   intermediate comprehension and editing artifacts
    <project>/index/       narrative indexes
    <project>/plans/       edit plans
    <project>/renders/     rendered outputs, narration audio, manifests
    <project>/workflows/   workflow records
"""

from __future__ import annotations

import re
import shutil
import tempfile
from dataclasses import dataclass
from pathlib import Path

from filelock import FileLock

from .canonical import canonical_dumps, canonical_loads, content_hash
from .errors import IntegrityError, NotFound, PreconditionError, StoreError, ValidationError
from .validation import SCHEMA_BOUND_KINDS, validate

_PROJECT_ID_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._-]*$")
_VERSION_RE = re.compile(r"^(?P<stream>.+)-v(?P<version>\d{6})-(?P<hash>[0-9a-f]{16})(?P<ext>\..+)$")

AREAS = ("media", "segments", "artifacts", "index", "plans", "renders", "workflows")

_KIND_AREAS = {
    "narrative_index": "index",
    "edit_plan": "plans",
    "workflow_record": "workflows",
    "segment": "segments",
    "render": "renders",
    "render_manifest": "renders",
    "narration_audio": "renders",
}

BINARY_KINDS = frozenset({"segment", "render", "narration_audio"})


@dataclass(frozen=True)
class ArtifactRef:
    """Immutable pointer to one stored artifact version."""

    project_id: str
    kind: str
    stream: str
    uri: str
    hash: str
    version: int

    def to_json(self) -> dict:
        return {
            "hash": self.hash,
            "kind": self.kind,
            "project_id": self.project_id,
            "stream": self.stream,
            "uri": self.uri,
            "version": self.version,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ArtifactRef":
        return cls(
            project_id=obj["project_id"],
            kind=obj["kind"],
            stream=obj["stream"],
            uri=obj["uri"],
            hash=obj["hash"],
            version=obj["version"],
        )


class FilesystemStore:
    """Reference object-store backend rooted at a directory.

    put() is atomic (temp file + rename) and refuses paths that escape the
    root. Alternative backends only need put/get/exists/list_prefix/delete,
    local_path, and lock with the same semantics.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root).resolve()
        self.root.mkdir(parents=True, exist_ok=True)

    def _resolve(self, path: str) -> Path:
        full = (self.root / path).resolve()
        if not full.is_relative_to(self.root):
            raise StoreError(f"path escapes store root: {path}")
        return full

    def put(self, path: str, data: bytes):
        target = self._resolve(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        try:
            fd = tempfile.NamedTemporaryFile(dir=target.parent, prefix=".tmp-", delete=False)
            with fd:
                fd.write(data)
            Path(fd.name).replace(target)
        except OSError as exc:
            raise StoreError(f"write failed for {path}: {exc}") from exc

    def put_file(self, path: str, source: Path):
        target = self._resolve(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        try:
            fd = tempfile.NamedTemporaryFile(dir=target.parent, prefix=".tmp-", delete=False)
            fd.close()
            shutil.copyfile(source, fd.name)
            Path(fd.name).replace(target)
        except OSError as exc:
            raise StoreError(f"copy failed for {path}: {exc}") from exc

    def get(self, path: str) -> bytes:
        target = self._resolve(path)
        if not target.is_file():
            raise NotFound(f"no object at {path}")
        try:
            return target.read_bytes()
        except OSError as exc:
            raise StoreError(f"read failed for {path}: {exc}") from exc

    def exists(self, path: str) -> bool:
        return self._resolve(path).exists()

    def list_prefix(self, prefix: str) -> list[str]:
        base = self._resolve(prefix)
        if not base.is_dir():
            return []
        out = []
        for child in sorted(base.rglob("*")):
            if not child.is_file() or child.name.startswith(".tmp-"):
                continue
            rel = child.relative_to(self.root)
            if ".locks" in rel.parts:
                continue
            out.append(str(rel))
        return out

    def delete(self, path: str):
        target = self._resolve(path)
        if target.is_file():
            target.unlink()

    def local_path(self, path: str) -> Path:
        """Real filesystem location (for subprocess engines)."""
        return self._resolve(path)

    def lock(self, name: str) -> FileLock:
        lock_dir = self.root / ".locks"
        lock_dir.mkdir(exist_ok=True)
        safe = re.sub(r"[^A-Za-z0-9._-]", "_", name)
        return FileLock(str(lock_dir / f"{safe}.lock"))


class ProjectStore:
    """Artifact operations over one object-store backend."""

    def __init__(self, backend: FilesystemStore):
        self.backend = backend

    # -- projects -----------------------------------------------------------

    def create_project(self, project_id: str) -> str:
        if not _PROJECT_ID_RE.match(project_id or ""):
            raise PreconditionError(f"invalid project id {project_id!r}")
        self.backend.put(f"{project_id}/.project", b"{}\n")
        return project_id

    def project_exists(self, project_id: str) -> bool:
        return self.backend.exists(f"{project_id}/.project")

    def require_project(self, project_id: str):
        if not self.project_exists(project_id):
            raise NotFound(f"unknown project {project_id!r}")

    def list_projects(self) -> list[str]:
        out = []
        for path in self.backend.list_prefix(""):
            parts = Path(path).parts
            if len(parts) == 2 and parts[1] == ".project":
                out.append(parts[0])
        return sorted(out)

    # -- media uploads --------------------------------------------------------

    def add_media(self, project_id: str, source: Path) -> str:
        """Copy an upload into the project media area, content-addressed."""
        self.require_project(project_id)
        source = Path(source)
        if not source.is_file():
            raise NotFound(f"media file not found: {source}")
        digest = content_hash(source.read_bytes())
        uri = f"{project_id}/media/{digest[:16]}-{source.name}"
        if not self.backend.exists(uri):
            self.backend.put_file(uri, source)
        return uri

    # -- artifacts ------------------------------------------------------------

    def _area_for(self, kind: str) -> str:
        return _KIND_AREAS.get(kind, "artifacts")

    def put_artifact(
        self,
        project_id: str,
        kind: str,
        data: bytes,
        *,
        stream: str | None = None,
        ext: str = ".json",
    ) -> ArtifactRef:
        """Write one immutable artifact version; idempotent on identical bytes."""
        self.require_project(project_id)
        stream = stream or kind
        if kind in SCHEMA_BOUND_KINDS:
            report = validate(data)
            if not report.ok:
                raise ValidationError(report)
        digest = content_hash(data)
        area = self._area_for(kind)
        with self.backend.lock(f"{project_id}:{stream}"):
            entries = self._stream_entries(project_id, area, stream)
            for version, hash16, uri in entries:
                # prefix match first; verify the full digest only on a hit
                if hash16 == digest[:16] and content_hash(self.backend.get(uri)) == digest:
                    return ArtifactRef(project_id, kind, stream, uri, digest, version)
            version = entries[-1][0] + 1 if entries else 1
            filename = f"{stream}-v{version:06d}-{digest[:16]}{ext}"
            uri = f"{project_id}/{area}/{filename}"
            self.backend.put(uri, data)
            ref = ArtifactRef(project_id, kind, stream, uri, digest, version)
            pointer = {"file": filename, "hash": digest, "kind": kind, "version": version}
            self.backend.put(f"{project_id}/{area}/{stream}.latest", canonical_dumps(pointer))
        return ref

    def _stream_entries(self, project_id: str, area: str, stream: str) -> list[tuple[int, str, str]]:
        """(version, hash16, uri) per stored version, ascending."""
        entries = []
        for path in self.backend.list_prefix(f"{project_id}/{area}"):
            m = _VERSION_RE.match(Path(path).name)
            if m and m.group("stream") == stream:
                entries.append((int(m.group("version")), m.group("hash"), path))
        entries.sort()
        return entries

    def get_artifact(self, ref: ArtifactRef) -> bytes:
        data = self.backend.get(ref.uri)
        if content_hash(data) != ref.hash:
            raise IntegrityError(f"content hash mismatch for {ref.uri}")
        return data

    def latest(self, project_id: str, stream: str, kind: str | None = None) -> ArtifactRef:
        self.require_project(project_id)
        if kind:
            areas = [self._area_for(kind)]
        else:
            areas = list(dict.fromkeys([self._area_for(stream), *AREAS]))
        for area in areas:
            pointer_uri = f"{project_id}/{area}/{stream}.latest"
            if not self.backend.exists(pointer_uri):
                continue
            pointer = canonical_loads(self.backend.get(pointer_uri))
            return ArtifactRef(
                project_id=project_id,
                kind=pointer.get("kind", stream),
                stream=stream,
                uri=f"{project_id}/{area}/{pointer['file']}",
                hash=pointer["hash"],
                version=pointer["version"],
            )
        raise NotFound(f"no {stream!r} artifact for project {project_id!r}")

    def latest_bytes(self, project_id: str, stream: str, kind: str | None = None) -> bytes:
        return self.get_artifact(self.latest(project_id, stream, kind))

    def list_streams(self, project_id: str) -> dict[str, ArtifactRef]:
        """Latest ref per stream across all areas."""
        self.require_project(project_id)
        out: dict[str, ArtifactRef] = {}
        for path in self.backend.list_prefix(project_id):
            name = Path(path).name
            if not name.endswith(".latest"):
                continue
            stream = name[: -len(".latest")]
            pointer = canonical_loads(self.backend.get(path))
            out[stream] = ArtifactRef(
                project_id=project_id,
                kind=pointer.get("kind", stream),
                stream=stream,
                uri=str(Path(path).parent / pointer["file"]),
                hash=pointer["hash"],
                version=pointer["version"],
            )
        return dict(sorted(out.items()))

    def local_path(self, uri: str) -> Path:
        return self.backend.local_path(uri)
