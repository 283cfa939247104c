"""Structured-output schemas: one parser per prompt kind.

Parsers normalize model text into plain validated dicts (timestamps become
integer milliseconds). Violations raise OutputInvalid with a message precise
enough to drive the repair re-prompt. Freeform kinds use the trivial text
schema.
"""

from __future__ import annotations

import json
import re

from ..model import MEDIA_FORMATS
from ..timecode import parse_ms


class OutputInvalid(Exception):
    """Model output failed its schema or an operation-level validator."""


_FENCE_RE = re.compile(r"^```[a-zA-Z]*\n|\n?```$", re.MULTILINE)


def _json_object(text: str) -> dict:
    cleaned = _FENCE_RE.sub("", text.strip()).strip()
    candidates = [cleaned]
    start, end = cleaned.find("{"), cleaned.rfind("}")
    if 0 <= start < end:
        candidates.append(cleaned[start : end + 1])
    last_error = "no JSON object found"
    for candidate in candidates:
        try:
            obj = json.loads(candidate)
        except json.JSONDecodeError as exc:
            last_error = f"invalid JSON: {exc.msg} at position {exc.pos}"
            continue
        if isinstance(obj, dict):
            return obj
        last_error = f"expected a JSON object, got {type(obj).__name__}"
    raise OutputInvalid(last_error)


def _require(obj: dict, key: str, types, path: str = ""):
    where = f"{path}.{key}" if path else key
    if key not in obj:
        raise OutputInvalid(f"missing required field {where!r}")
    if not isinstance(obj[key], types):
        names = types.__name__ if isinstance(types, type) else "/".join(t.__name__ for t in types)
        raise OutputInvalid(f"field {where!r} must be {names}, got {type(obj[key]).__name__}")
    return obj[key]


def _nonempty_str(obj: dict, key: str, path: str = "") -> str:
    value = _require(obj, key, str, path)
    if not value.strip():
        raise OutputInvalid(f"field {(path + '.' if path else '') + key!r} must be non-empty")
    return value


def _str_list(obj: dict, key: str, path: str = "") -> list[str]:
    value = obj.get(key, [])
    if not isinstance(value, list) or any(not isinstance(v, str) for v in value):
        raise OutputInvalid(f"field {key!r} must be a list of strings")
    return value


def time_value_ms(value, where: str) -> int:
    """Accept seconds (number) or "HH:MM:SS.mmm" and return milliseconds."""
    if isinstance(value, bool):
        raise OutputInvalid(f"{where} must be a timestamp, got bool")
    if isinstance(value, (int, float)):
        if value < 0:
            raise OutputInvalid(f"{where} must be non-negative, got {value}")
        return round(value * 1000)
    if isinstance(value, str):
        try:
            return parse_ms(value)
        except ValueError:
            try:
                seconds = float(value)
            except ValueError:
                raise OutputInvalid(f"{where} is not a timestamp: {value!r}") from None
            if seconds < 0:
                raise OutputInvalid(f"{where} must be non-negative, got {value}")
            return round(seconds * 1000)
    raise OutputInvalid(f"{where} must be seconds or HH:MM:SS.mmm, got {type(value).__name__}")


def _characters_list(obj: dict, key: str) -> list[dict]:
    out = []
    for i, entry in enumerate(obj.get(key, [])):
        if not isinstance(entry, dict):
            raise OutputInvalid(f"{key}[{i}] must be an object")
        name = _nonempty_str(entry, "name", f"{key}[{i}]")
        out.append({"name": name, "description": str(entry.get("description", ""))})
    return out


def _parse_scratchpad_fields(obj: dict) -> dict:
    media_format = _nonempty_str(obj, "media_format").strip().casefold()
    if media_format not in MEDIA_FORMATS:
        raise OutputInvalid(f"media_format must be one of {MEDIA_FORMATS}, got {media_format!r}")
    return {
        "media_format": media_format,
        "setting": _nonempty_str(obj, "setting"),
        "premise": _nonempty_str(obj, "premise"),
        "characters": _characters_list(obj, "characters"),
        "dynamics": _str_list(obj, "dynamics"),
        "open_threads": _str_list(obj, "open_threads"),
    }


def parse_bootstrap_scratchpad(text: str) -> dict:
    return _parse_scratchpad_fields(_json_object(text))


def parse_compress_scratchpad(text: str) -> dict:
    return _parse_scratchpad_fields(_json_object(text))


def parse_segment_comprehend(text: str) -> dict:
    obj = _json_object(text)
    return {
        "summary": _nonempty_str(obj, "summary"),
        "new_characters": _characters_list(obj, "new_characters"),
        "dynamics": _str_list(obj, "dynamics"),
        "open_threads": _str_list(obj, "open_threads"),
        "resolved_threads": _str_list(obj, "resolved_threads"),
    }


def parse_scene_comprehend(text: str) -> dict:
    obj = _json_object(text)
    raw = _require(obj, "annotations", list)
    if not raw:
        raise OutputInvalid("annotations must be non-empty")
    annotations = []
    for i, ann in enumerate(raw):
        if not isinstance(ann, dict):
            raise OutputInvalid(f"annotations[{i}] must be an object")
        at_ms = time_value_ms(ann.get("at"), f"annotations[{i}].at")
        dialogue = ann.get("dialogue")
        if dialogue is not None:
            if not isinstance(dialogue, dict):
                raise OutputInvalid(f"annotations[{i}].dialogue must be an object or null")
            dialogue = {
                "speaker": str(dialogue.get("speaker", "")).strip(),
                "text": _nonempty_str(dialogue, "text", f"annotations[{i}].dialogue"),
            }
        affect = ann.get("affect")
        if affect is not None:
            if not isinstance(affect, dict):
                raise OutputInvalid(f"annotations[{i}].affect must be an object or null")
            intensity = affect.get("intensity")
            if not isinstance(intensity, (int, float)) or isinstance(intensity, bool) or not 0 <= intensity <= 1:
                raise OutputInvalid(f"annotations[{i}].affect.intensity must be in [0,1]")
            affect = {"label": _nonempty_str(affect, "label", f"annotations[{i}].affect"), "intensity": float(intensity)}
        visual = ann.get("visual")
        if visual is not None and not isinstance(visual, str):
            raise OutputInvalid(f"annotations[{i}].visual must be a string or null")
        if dialogue is None and not visual and affect is None:
            raise OutputInvalid(f"annotations[{i}] needs at least one of dialogue/visual/affect")
        speech_act = ann.get("speech_act")
        if speech_act is not None and not isinstance(speech_act, str):
            raise OutputInvalid(f"annotations[{i}].speech_act must be a string or null")
        annotations.append(
            {
                "at_ms": at_ms,
                "dialogue": dialogue,
                "speech_act": speech_act,
                "visual": visual,
                "affect": affect,
                "boundary": bool(ann.get("boundary", False)),
            }
        )
    return {"annotations": annotations}


def parse_refine(text: str) -> dict:
    obj = _json_object(text)
    out: dict = {}
    if "attributions" in obj:
        attributions = _require(obj, "attributions", list)
        parsed = []
        for i, att in enumerate(attributions):
            if not isinstance(att, dict):
                raise OutputInvalid(f"attributions[{i}] must be an object")
            parsed.append(
                {
                    "at_ms": time_value_ms(att.get("at"), f"attributions[{i}].at"),
                    "speaker": _nonempty_str(att, "speaker", f"attributions[{i}]"),
                }
            )
        out["attributions"] = parsed
    if "plot_points" in obj:
        points = _require(obj, "plot_points", list)
        parsed = []
        for i, point in enumerate(points):
            if not isinstance(point, dict):
                raise OutputInvalid(f"plot_points[{i}] must be an object")
            entry = {"text": _nonempty_str(point, "text", f"plot_points[{i}]"), "start_ms": None, "end_ms": None}
            if point.get("start") is not None and point.get("end") is not None:
                entry["start_ms"] = time_value_ms(point["start"], f"plot_points[{i}].start")
                entry["end_ms"] = time_value_ms(point["end"], f"plot_points[{i}].end")
                if entry["start_ms"] >= entry["end_ms"]:
                    raise OutputInvalid(f"plot_points[{i}] start must precede end")
            parsed.append(entry)
        if not parsed:
            raise OutputInvalid("plot_points must be non-empty when present")
        out["plot_points"] = parsed
    if "characters" in obj:
        graph = _require(obj, "characters", dict)
        nodes = []
        for i, node in enumerate(graph.get("nodes", [])):
            if not isinstance(node, dict):
                raise OutputInvalid(f"characters.nodes[{i}] must be an object")
            nodes.append(
                {
                    "name": _nonempty_str(node, "name", f"characters.nodes[{i}]"),
                    "aliases": _str_list(node, "aliases"),
                    "description": str(node.get("description", "")),
                }
            )
        edges = []
        for i, edge in enumerate(graph.get("edges", [])):
            if not isinstance(edge, dict):
                raise OutputInvalid(f"characters.edges[{i}] must be an object")
            edges.append(
                {
                    "from": _nonempty_str(edge, "from", f"characters.edges[{i}]"),
                    "to": _nonempty_str(edge, "to", f"characters.edges[{i}]"),
                    "relationship": _nonempty_str(edge, "relationship", f"characters.edges[{i}]"),
                }
            )
        out["characters"] = {"nodes": nodes, "edges": edges}
    if not out:
        raise OutputInvalid("refine output must include at least one of attributions/plot_points/characters")
    return out


def parse_qa_route(text: str) -> dict:
    obj = _json_object(text)
    needs = _require(obj, "needs_visual", bool)
    return {"needs_visual": needs, "rationale": _nonempty_str(obj, "rationale")}


def parse_qa_answer(text: str) -> dict:
    obj = _json_object(text)
    cited = obj.get("cited_timestamps", [])
    if not isinstance(cited, list):
        raise OutputInvalid("cited_timestamps must be a list")
    timestamps = [time_value_ms(v, f"cited_timestamps[{i}]") for i, v in enumerate(cited)]
    return {
        "answer": _nonempty_str(obj, "answer"),
        "cited_timestamps_ms": timestamps,
        "grounded": _require(obj, "grounded", bool),
    }


def parse_storyboard_structure(text: str) -> dict:
    obj = _json_object(text)
    raw = _require(obj, "sections", list)
    if not raw:
        raise OutputInvalid("sections must be non-empty")
    sections = []
    for i, sec in enumerate(raw):
        if not isinstance(sec, dict):
            raise OutputInvalid(f"sections[{i}] must be an object")
        target = sec.get("target_duration")
        if not isinstance(target, (int, float)) or isinstance(target, bool) or target <= 0:
            raise OutputInvalid(f"sections[{i}].target_duration must be positive seconds")
        mode = str(sec.get("mode", "chronological")).strip().casefold()
        if mode not in ("thematic", "chronological"):
            raise OutputInvalid(f"sections[{i}].mode must be 'thematic' or 'chronological'")
        sections.append(
            {
                "intent": _nonempty_str(sec, "intent", f"sections[{i}]"),
                "tone": _nonempty_str(sec, "tone", f"sections[{i}]"),
                "target_duration_ms": round(float(target) * 1000),
                "mode": mode,
            }
        )
    return {"sections": sections}


def parse_retrieve_clips(text: str) -> dict:
    obj = _json_object(text)
    raw = _require(obj, "clips", list)
    clips = []
    for i, clip in enumerate(raw):
        if not isinstance(clip, dict):
            raise OutputInvalid(f"clips[{i}] must be an object")
        start_ms = time_value_ms(clip.get("start"), f"clips[{i}].start")
        end_ms = time_value_ms(clip.get("end"), f"clips[{i}].end")
        if start_ms >= end_ms:
            raise OutputInvalid(f"clips[{i}] start must precede end")
        clips.append(
            {
                "start_ms": start_ms,
                "end_ms": end_ms,
                "justification": _nonempty_str(clip, "justification", f"clips[{i}]"),
                "narrative_function": _nonempty_str(clip, "narrative_function", f"clips[{i}]"),
            }
        )
    return {"clips": clips}


def parse_music_select(text: str) -> dict:
    obj = _json_object(text)
    keywords = _str_list(obj, "keywords")
    if not keywords:
        raise OutputInvalid("keywords must be non-empty")
    return {"keywords": [k.strip().casefold() for k in keywords if k.strip()]}


def parse_text(text: str) -> str:
    if not text.strip():
        raise OutputInvalid("response must be non-empty text")
    return text.strip()


_PARSERS = {
    "bootstrap_scratchpad": parse_bootstrap_scratchpad,
    "segment_comprehend": parse_segment_comprehend,
    "compress_scratchpad": parse_compress_scratchpad,
    "scene_comprehend": parse_scene_comprehend,
    "refine": parse_refine,
    "qa_route": parse_qa_route,
    "qa_answer": parse_qa_answer,
    "storyboard_reason": parse_text,
    "storyboard_structure": parse_storyboard_structure,
    "narrate": parse_text,
    "retrieve_clips": parse_retrieve_clips,
    "music_select": parse_music_select,
}


def parse_output(kind: str, text: str):
    """Parse and validate one model response for its kind's schema."""
    return _PARSERS[kind](text)
