"""Question answering grounded in a narrative index.

The index is formatted into a budgeted prompt (synopsis and character graph
always included, scene traces elided to one-line stubs when the budget
forces it), answers cite index timestamps, and a routing call decides
whether to attach visual evidence clips retrieved by lexical relevance.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction

from .config import PipelineConfig
from .errors import BudgetError, PreconditionError, ProviderError, StructuredOutputError
from .gateway.core import ModelGateway, PromptKind, estimate_tokens
from .model import SCHEMA_VERSION, ClipSelection, NarrativeIndex, RenderingMode, SceneTrace
from .timecode import TimeRange, format_ms

DEFAULT_QA_BUDGET = 16000
CITATION_TOLERANCE_MS = 2000
_SNIPPET_CHARS = 80

_TOKEN_RE = re.compile(r"[a-z0-9']+")


@dataclass
class QAResponse:
    """Answer plus its grounding: citations and optional evidence clips."""

    answer: str
    cited_timestamps_ms: list[int]
    evidence_clips: list[ClipSelection]
    grounded: bool
    warnings: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "answer": self.answer,
            "cited_timestamps": [format_ms(t) for t in self.cited_timestamps_ms],
            "evidence_clips": [c.to_json() for c in self.evidence_clips],
            "grounded": self.grounded,
            "kind": "qa_response",
            "schema_version": SCHEMA_VERSION,
            "warnings": list(self.warnings),
        }


# --- index prompt formatting ---------------------------------------------------


def _scene_stub_text(scene: SceneTrace) -> str:
    return f"Scene {scene.scene_id} [{scene.range}]: (elided, {len(scene.annotations)} annotations)"


def format_index_prompt(index: NarrativeIndex, budget: int) -> str:
    """Render the index within a token budget.

    The synopsis and character graph are always included. Scene traces are
    upgraded from stubs to full traces newest-first while the budget allows;
    every scene id appears either way.
    """
    synopsis = index.synopsis
    head_lines = [
        f"format: {synopsis.media_format}",
        f"setting: {synopsis.setting}",
        f"premise: {synopsis.premise}",
        "plot points:",
    ]
    for point in synopsis.plot_points:
        span = f" [{point.range}]" if point.range else ""
        head_lines.append(f"- {point.text}{span}")
    head_lines.append("characters:")
    head_lines.append(index.characters.to_adjacency_text())
    head = "\n".join(head_lines)
    if estimate_tokens(head) > budget:
        raise BudgetError(
            f"budget {budget} cannot hold the synopsis and character graph "
            f"({estimate_tokens(head)} tokens)"
        )

    scenes = list(index.scenes)
    texts = [_scene_stub_text(s) for s in scenes]

    def assembled() -> str:
        return head + "\n\nscenes:\n" + "\n".join(texts)

    if estimate_tokens(assembled()) > budget:
        raise BudgetError(
            f"budget {budget} cannot hold the synopsis, graph, and scene stubs"
        )
    for i in range(len(scenes) - 1, -1, -1):
        stub = texts[i]
        texts[i] = scenes[i].prompt_text()
        if estimate_tokens(assembled()) > budget:
            texts[i] = stub
    return assembled()


# --- routing ---------------------------------------------------------------------


def needs_visual_evidence(question: str, index: NarrativeIndex, gateway: ModelGateway) -> bool:
    """Ask the routing agent whether clips should accompany the answer.

    The decision and the model's rationale are journaled. Degrades to False
    (text-only answer) on gateway failure, with a warning.
    """
    request = gateway.request(PromptKind.QA_ROUTE, [("question", question)])
    try:
        value = gateway.complete(request).value
    except (ProviderError, StructuredOutputError) as exc:
        gateway.warn(f"visual-evidence routing unavailable ({exc}); defaulting to text-only")
        return False
    decision = bool(value["needs_visual"])
    gateway.note(
        {"kind": "qa_route_decision", "needs_visual": decision, "rationale": value["rationale"]}
    )
    return decision


# --- retrieval --------------------------------------------------------------------


def _tokens(text: str) -> frozenset[str]:
    return frozenset(_TOKEN_RE.findall(text.casefold()))


def retrieve_clips(
    index: NarrativeIndex, query: str, window: TimeRange | None = None
) -> list[ClipSelection]:
    """Rank annotation neighborhoods by normalized lexical overlap.

    Score is the Jaccard overlap between query tokens and annotation tokens
    (exact rational arithmetic); ties break toward the earlier timestamp.
    Each hit expands to its adjacent-annotation neighborhood, clamped to the
    window when one is given.
    """
    query_tokens = _tokens(query)
    if not query_tokens:
        return []
    scored: list[tuple[Fraction, int, TimeRange, str]] = []
    for scene in index.scenes:
        anns = scene.annotations
        for j, ann in enumerate(anns):
            if window is not None and not window.contains(ann.at_ms):
                continue
            ann_tokens = _tokens(ann.text_content())
            inter = len(query_tokens & ann_tokens)
            if inter == 0:
                continue
            score = Fraction(inter, len(query_tokens | ann_tokens))
            start = anns[j - 1].at_ms if j > 0 else scene.range.start_ms
            end = anns[j + 1].at_ms if j + 1 < len(anns) else scene.range.end_ms
            if window is not None:
                start = max(start, window.start_ms)
                end = min(end, window.end_ms)
            if start >= end:
                continue
            snippet = ann.text_content()[:_SNIPPET_CHARS]
            scored.append((score, ann.at_ms, TimeRange(start, end), snippet))

    scored.sort(key=lambda item: (-item[0], item[1]))
    asset_id = index.primary_asset_id()
    return [
        ClipSelection(
            asset_id=asset_id,
            source=rng,
            output_position=rank,
            justification=f"matches annotation at {format_ms(at_ms)}: {snippet}",
            narrative_function="evidence",
            rendering_mode=RenderingMode.UNTRIMMED,
        )
        for rank, (_, at_ms, rng, snippet) in enumerate(scored)
    ]


# --- answering ---------------------------------------------------------------------


def _grounding_timestamps(index: NarrativeIndex) -> list[int]:
    stamps = set(index.annotation_timestamps_ms())
    for scene in index.scenes:
        stamps.add(scene.range.start_ms)
        stamps.add(scene.range.end_ms)
    return sorted(stamps)


def answer(
    index: NarrativeIndex,
    question: str,
    gateway: ModelGateway,
    config: PipelineConfig | None = None,
    *,
    budget: int = DEFAULT_QA_BUDGET,
) -> QAResponse:
    """Answer a question using only the formatted index prompt.

    Cited timestamps must exist in the index within 2 s; anything else is
    dropped with a warning and the response is marked ungrounded.
    """
    if not question or not question.strip():
        raise PreconditionError("question must be non-empty")
    index_prompt = format_index_prompt(index, budget)
    request = gateway.request(
        PromptKind.QA_ANSWER, [("index", index_prompt), ("question", question)]
    )
    value = gateway.complete(request).value

    valid = _grounding_timestamps(index)
    warnings: list[str] = []
    kept: list[int] = []
    for ts in value["cited_timestamps_ms"]:
        if any(abs(ts - known) <= CITATION_TOLERANCE_MS for known in valid):
            kept.append(ts)
        else:
            warnings.append(f"dropped citation {format_ms(ts)}: no index timestamp within 2 s")
    grounded = bool(value["grounded"]) and len(kept) == len(value["cited_timestamps_ms"])

    evidence: list[ClipSelection] = []
    if needs_visual_evidence(question, index, gateway):
        evidence = retrieve_clips(index, question)
    return QAResponse(
        answer=value["answer"],
        cited_timestamps_ms=kept,
        evidence_clips=evidence,
        grounded=grounded,
        warnings=warnings,
    )
