"""Invariant validation for persisted artifacts.

``validate`` is total: any parseable input yields a report, never an
exception. Reports carry a path to each offending field so callers (CLI,
HTTP 422 bodies, the store write gate) can surface precise diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass

from .canonical import canonical_loads
from .model import MEDIA_FORMATS, UNATTRIBUTED, RenderingMode
from .timecode import parse_ms

COVERAGE_GAP_TOLERANCE_MS = 1000


@dataclass(frozen=True)
class Violation:
    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.path}: {self.message}"


@dataclass
class ValidationReport:
    violations: list[Violation]

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def summary(self) -> str:
        if self.ok:
            return "valid"
        return "; ".join(str(v) for v in self.violations[:8]) + (
            f" (+{len(self.violations) - 8} more)" if len(self.violations) > 8 else ""
        )

    def to_json(self) -> dict:
        return {"ok": self.ok, "violations": [{"message": v.message, "path": v.path} for v in self.violations]}


class _Collector:
    def __init__(self):
        self.violations: list[Violation] = []

    def add(self, path: str, message: str):
        self.violations.append(Violation(path, message))

    def report(self) -> ValidationReport:
        return ValidationReport(self.violations)


def _parse_ts(out: _Collector, path: str, value) -> int | None:
    if not isinstance(value, str):
        out.add(path, f"expected HH:MM:SS.mmm string, got {type(value).__name__}")
        return None
    try:
        return parse_ms(value)
    except ValueError as exc:
        out.add(path, str(exc))
        return None


def _check_range(out: _Collector, path: str, obj) -> tuple[int, int] | None:
    if not isinstance(obj, dict):
        out.add(path, "expected range object")
        return None
    start = _parse_ts(out, f"{path}.start", obj.get("start"))
    end = _parse_ts(out, f"{path}.end", obj.get("end"))
    if start is None or end is None:
        return None
    if start >= end:
        out.add(path, f"start must precede end ({obj.get('start')} >= {obj.get('end')})")
        return None
    return start, end


def validate(artifact) -> ValidationReport:
    """Validate a parsed artifact (or bytes, or a domain object).

    Unknown kinds validate clean; the point is catching violations in the
    schema-bound artifacts (index, edit plan, workflow record).
    """
    if hasattr(artifact, "to_json"):
        artifact = artifact.to_json()
    if isinstance(artifact, (bytes, str)):
        artifact = canonical_loads(artifact)
    out = _Collector()
    if not isinstance(artifact, dict):
        out.add("$", f"artifact must be a JSON object, got {type(artifact).__name__}")
        return out.report()
    kind = artifact.get("kind")
    checker = _CHECKERS.get(kind)
    if checker is not None:
        try:
            checker(out, artifact)
        except Exception as exc:  # totality guard; a crash is itself a violation
            out.add("$", f"validator error: {exc}")
    return out.report()


# --- narrative index ---------------------------------------------------------


def _check_index(out: _Collector, doc: dict):
    meta = doc.get("meta")
    if not isinstance(meta, dict):
        out.add("meta", "missing provenance meta")
        meta = {}
    duration_ms = meta.get("duration_ms")
    if not isinstance(duration_ms, int) or duration_ms <= 0:
        out.add("meta.duration_ms", f"must be a positive integer, got {duration_ms!r}")
        duration_ms = None
    if not doc.get("project_id"):
        out.add("project_id", "missing")

    synopsis = doc.get("synopsis") or {}
    if synopsis.get("media_format") not in MEDIA_FORMATS:
        out.add("synopsis.media_format", f"not one of {MEDIA_FORMATS}")
    plot_points = synopsis.get("plot_points") or []
    if not plot_points:
        out.add("synopsis.plot_points", "must be non-empty")
    for i, point in enumerate(plot_points):
        if not isinstance(point, dict) or not point.get("text"):
            out.add(f"synopsis.plot_points[{i}].text", "missing")
        elif point.get("range") is not None:
            _check_range(out, f"synopsis.plot_points[{i}].range", point["range"])

    graph = doc.get("characters") or {}
    known: set[str] = set()
    for i, node in enumerate(graph.get("nodes") or []):
        name = node.get("name") if isinstance(node, dict) else None
        if not name:
            out.add(f"characters.nodes[{i}].name", "missing")
            continue
        folded = name.casefold()
        if folded in known:
            out.add(f"characters.nodes[{i}].name", f"duplicate name after case-folding: {name!r}")
        known.add(folded)
        for alias in node.get("aliases") or []:
            known.add(str(alias).casefold())
    for i, edge in enumerate(graph.get("edges") or []):
        for end in ("from", "to"):
            name = edge.get(end) if isinstance(edge, dict) else None
            if not name or name.casefold() not in known:
                out.add(f"characters.edges[{i}].{end}", f"endpoint {name!r} is not a graph node")

    config = meta.get("config") or {}
    interval_ms = round(float(config.get("annotation_interval", 20.0)) * 1000)
    scenes = doc.get("scenes") or []
    prev_start = None
    spans: list[tuple[int, int]] = []
    for i, scene in enumerate(scenes):
        path = f"scenes[{i}]"
        span = _check_range(out, f"{path}.range", scene.get("range"))
        if span is None:
            continue
        spans.append(span)
        if prev_start is not None and span[0] < prev_start:
            out.add(f"{path}.range.start", "scenes not sorted by range start")
        prev_start = span[0]
        _check_annotations(out, path, scene, span, interval_ms, known)

    if duration_ms is not None and spans:
        _check_coverage(out, sorted(spans), duration_ms)
    elif duration_ms is not None and not spans:
        out.add("scenes", "no scene traces; coverage of the media is required")


def _check_annotations(out, path, scene, span, interval_ms, known_names):
    prev_at = None
    annotations = scene.get("annotations") or []
    for j, ann in enumerate(annotations):
        apath = f"{path}.annotations[{j}]"
        at = _parse_ts(out, f"{apath}.at", ann.get("at"))
        if at is None:
            continue
        if not span[0] <= at <= span[1]:
            out.add(f"{apath}.at", f"timestamp outside scene range {span}")
        if prev_at is not None:
            if at <= prev_at:
                out.add(f"{apath}.at", "annotation timestamps must be strictly increasing")
            elif at - prev_at > 3 * interval_ms:
                out.add(f"{apath}.at", f"gap {(at - prev_at) / 1000:.3f}s exceeds 3x annotation interval")
        prev_at = at
        dialogue = ann.get("dialogue")
        affect = ann.get("affect")
        if dialogue is None and not ann.get("visual") and affect is None:
            out.add(apath, "annotation must carry dialogue, visual, or affect")
        if affect is not None:
            intensity = affect.get("intensity")
            if not isinstance(intensity, (int, float)) or not 0 <= intensity <= 1:
                out.add(f"{apath}.affect.intensity", f"must be in [0,1], got {intensity!r}")
        if dialogue is not None:
            speaker = dialogue.get("speaker")
            if speaker and speaker != UNATTRIBUTED and speaker.casefold() not in known_names:
                out.add(f"{apath}.dialogue.speaker", f"speaker {speaker!r} has no character node")


def _check_coverage(out, spans, duration_ms):
    covered_to = 0
    for start, end in spans:
        if start - covered_to > COVERAGE_GAP_TOLERANCE_MS:
            out.add(
                "scenes",
                f"coverage gap > 1 s: [{covered_to / 1000:.3f}s, {start / 1000:.3f}s) uncovered",
            )
        covered_to = max(covered_to, end)
    if duration_ms - covered_to > COVERAGE_GAP_TOLERANCE_MS:
        out.add(
            "scenes",
            f"coverage gap > 1 s: [{covered_to / 1000:.3f}s, {duration_ms / 1000:.3f}s) uncovered",
        )


# --- edit plan ---------------------------------------------------------------


def _check_plan(out: _Collector, doc: dict):
    if not doc.get("plan_id"):
        out.add("plan_id", "missing")
    if not doc.get("prompt"):
        out.add("prompt", "missing")
    meta = doc.get("meta") or {}
    assets = meta.get("assets") or {}

    narration_ids = set()
    for i, seg in enumerate(doc.get("narration") or []):
        path = f"narration[{i}]"
        nid = seg.get("narration_id")
        if not nid:
            out.add(f"{path}.narration_id", "missing")
        elif nid in narration_ids:
            out.add(f"{path}.narration_id", f"duplicate id {nid!r}")
        else:
            narration_ids.add(nid)
        if not seg.get("text"):
            out.add(f"{path}.text", "must be non-empty")
        if seg.get("audio_uri") and not (
            isinstance(seg.get("est_duration_ms"), int) and seg["est_duration_ms"] > 0
        ):
            out.add(f"{path}.est_duration_ms", "must be > 0 once audio exists")

    modes = {m.value for m in RenderingMode}
    for i, entry in enumerate(doc.get("entries") or []):
        path = f"entries[{i}]"
        position = entry.get("output_position")
        if position != i:
            out.add(f"{path}.output_position", f"expected contiguous position {i}, got {position!r}")
        span = _check_range(out, f"{path}.source", entry.get("source"))
        asset_id = entry.get("asset_id")
        if asset_id not in assets:
            out.add(f"{path}.asset_id", f"asset {asset_id!r} not in meta.assets")
        elif span is not None and span[1] > int(assets[asset_id]):
            out.add(f"{path}.source.end", f"exceeds asset duration {assets[asset_id]} ms")
        mode = entry.get("rendering_mode")
        if mode not in modes:
            out.add(f"{path}.rendering_mode", f"unknown mode {mode!r}")
        nid = entry.get("narration_id")
        if mode == RenderingMode.NARRATED_OVERLAY.value and not nid:
            out.add(f"{path}.narration_id", "narrated_overlay entries require a narration binding")
        if nid is not None and nid not in narration_ids:
            out.add(f"{path}.narration_id", f"references unknown narration {nid!r}")
        if not entry.get("justification"):
            out.add(f"{path}.justification", "must be non-empty")
        if not entry.get("narrative_function"):
            out.add(f"{path}.narrative_function", "must be non-empty")


# --- workflow record ---------------------------------------------------------

WORKFLOW_STATUSES = ("pending", "running", "failed", "completed")


def _check_workflow(out: _Collector, doc: dict):
    status = doc.get("status")
    if status not in WORKFLOW_STATUSES:
        out.add("status", f"unknown status {status!r}")
    if not doc.get("workflow_id"):
        out.add("workflow_id", "missing")
    activities = doc.get("activities") or []
    latest: dict = {}
    for i, act in enumerate(activities):
        path = f"activities[{i}]"
        if not act.get("name"):
            out.add(f"{path}.name", "missing")
        if not act.get("input_hash"):
            out.add(f"{path}.input_hash", "missing")
        if act.get("status") == "completed" and not act.get("output"):
            out.add(f"{path}.output", "completed activity must carry an output ref")
        if act.get("name"):
            latest[act["name"]] = act.get("status")
    # the log is append-only; an activity's state is its latest entry
    all_completed = bool(latest) and all(state == "completed" for state in latest.values())
    if status == "completed" and not all_completed:
        out.add("status", "completed workflow has incomplete activities")


_CHECKERS = {
    "narrative_index": _check_index,
    "edit_plan": _check_plan,
    "workflow_record": _check_workflow,
}

SCHEMA_BOUND_KINDS = frozenset(_CHECKERS)
