"""Runtime wiring: store, provider, engines, adapters, clock.

One Runtime instance backs a CLI invocation or an HTTP service. The creation
timestamp is frozen per runtime so artifacts produced within one session are
byte-stable (wall-clock fields still get excluded from logical hashes).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Callable, Mapping

from .config import PipelineConfig
from .edit.adapters import FixtureBeatDetector, FixtureTranscriber, MockTTS, MusicTrack, load_track_manifest
from .errors import ProviderError
from .gateway.core import ModelGateway
from .gateway.providers import resolve_provider
from .media import NullEngine, SubprocessEngine
from .store import FilesystemStore, ProjectStore


class UnconfiguredProvider:
    """Placeholder that fails loudly the first time a model call is needed.

    Lets provider-free commands (ingest, status, artifacts) run without
    PROVIDER_* configuration.
    """

    name = "unconfigured"
    model_id = "unconfigured"
    max_inflight = None

    def __init__(self, message: str):
        self.message = message

    def send(self, kind, prompt, attachments=(), *, fingerprint=""):
        raise ProviderError(self.message)

DEFAULT_STORE_ROOT = "./storycut-data"


def _utc_now_iso() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass
class Runtime:
    store: ProjectStore
    provider: Any
    config: PipelineConfig = field(default_factory=PipelineConfig)
    media_engine: Any = field(default_factory=NullEngine)
    tts: Any = field(default_factory=MockTTS)
    transcriber: Any = field(default_factory=FixtureTranscriber)
    beat_detector: Any = field(default_factory=lambda: FixtureBeatDetector(default_bpm=120))
    tracks: list[MusicTrack] = field(default_factory=list)
    pose_adapter: Any = None  # optional dynamic-cropping adapter; no model ships
    clock: Callable[[], str] | None = None
    max_workers: int = 4

    def __post_init__(self):
        if self.clock is None:
            stamp = _utc_now_iso()
            self.clock = lambda: stamp

    def now(self) -> str:
        return self.clock()

    def gateway(self, journal: list | None = None, warnings: list | None = None) -> ModelGateway:
        return ModelGateway(self.provider, self.config, journal=journal, warnings=warnings)


def build_runtime(
    env: Mapping[str, str],
    *,
    provider: Any | None = None,
    store_root: str | None = None,
    config: PipelineConfig | None = None,
    **overrides,
) -> Runtime:
    """Assemble a Runtime from the environment.

    Recognized variables: STORE_ROOT, PROVIDER_NAME / PROVIDER_SCRIPT_DIR /
    PROVIDER_BASE_URL / PROVIDER_MODEL / PROVIDER_API_KEY,
    ENGINE_CMD_TEMPLATE (presence selects the subprocess engine),
    TRACK_MANIFEST (music library JSON). Keyword overrides win.
    """
    root = store_root or env.get("STORE_ROOT", DEFAULT_STORE_ROOT)
    store = ProjectStore(FilesystemStore(root))
    if provider is None:
        try:
            provider = resolve_provider(env)
        except ProviderError as exc:
            provider = UnconfiguredProvider(str(exc))
    engine = overrides.pop("media_engine", None)
    if engine is None:
        template = env.get("ENGINE_CMD_TEMPLATE")
        engine = SubprocessEngine(template) if template else NullEngine()
    tracks = overrides.pop("tracks", None)
    if tracks is None:
        manifest = env.get("TRACK_MANIFEST")
        tracks = load_track_manifest(manifest) if manifest else []
    return Runtime(
        store=store,
        provider=provider,
        config=config or PipelineConfig(),
        media_engine=engine,
        tracks=tracks,
        **overrides,
    )
