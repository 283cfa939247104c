"""Global scaffold: draft synopsis plus character graph from the coarse pass."""

from __future__ import annotations

from dataclasses import dataclass

from ..config import PipelineConfig
from ..errors import PreconditionError
from ..gateway.core import ModelGateway, PromptKind
from ..gateway.structured import OutputInvalid
from ..model import (
    SCHEMA_VERSION,
    CharacterEdge,
    CharacterGraph,
    CharacterNode,
    GlobalSynopsis,
    PlotPoint,
)
from ..timecode import TimeRange
from .scratchpad import Scratchpad


@dataclass(frozen=True)
class GlobalScaffold:
    """Coarse-pass output guiding scene comprehension and refinement."""

    draft_synopsis: GlobalSynopsis
    draft_graph: CharacterGraph
    segment_summaries: tuple[tuple[TimeRange, str], ...]
    warnings: tuple[str, ...] = ()

    def summaries_text(self) -> str:
        return "\n".join(f"{i + 1}. [{rng}] {text}" for i, (rng, text) in enumerate(self.segment_summaries))

    def to_json(self) -> dict:
        return {
            "draft_graph": self.draft_graph.to_json(),
            "draft_synopsis": self.draft_synopsis.to_json(),
            "kind": "scaffold",
            "schema_version": SCHEMA_VERSION,
            "segment_summaries": [
                {"range": rng.to_json(), "text": text} for rng, text in self.segment_summaries
            ],
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "GlobalScaffold":
        return cls(
            draft_synopsis=GlobalSynopsis.from_json(obj["draft_synopsis"]),
            draft_graph=CharacterGraph.from_json(obj["draft_graph"]),
            segment_summaries=tuple(
                (TimeRange.from_json(s["range"]), s["text"]) for s in obj["segment_summaries"]
            ),
            warnings=tuple(obj.get("warnings", ())),
        )


def _require_sections(value: dict):
    if "plot_points" not in value:
        raise OutputInvalid("scaffold synthesis requires a plot_points section")
    if "characters" not in value:
        raise OutputInvalid("scaffold synthesis requires a characters section")


def _merged_graph(scratchpad: Scratchpad, section: dict) -> CharacterGraph:
    """Model nodes merged with scratchpad cast; scratchpad names never vanish."""
    nodes: list[CharacterNode] = []
    index: dict[str, int] = {}
    for node in section.get("nodes", []):
        key = node["name"].casefold()
        if key in index:
            continue
        index[key] = len(nodes)
        nodes.append(CharacterNode(node["name"], tuple(node.get("aliases", ())), node["description"]))
    for name, description in scratchpad.characters:
        if name.casefold() not in index:
            index[name.casefold()] = len(nodes)
            nodes.append(CharacterNode(name, (), description))
    return CharacterGraph(tuple(nodes), ())


def build_global_scaffold(
    summaries: list[tuple[TimeRange, str]],
    scratchpad: Scratchpad,
    gateway: ModelGateway,
    config: PipelineConfig | None = None,
) -> GlobalScaffold:
    """Synthesize the draft synopsis and relationship graph.

    Edges whose endpoints stay unknown after the repair budget are dropped
    with a warning instead of failing the pass.
    """
    if not summaries:
        raise PreconditionError("at least one segment summary is required")
    config = config or gateway.config

    summaries = list(summaries)
    base_blocks = [
        ("memory", scratchpad.render_text()),
        ("summaries", "\n".join(f"{i + 1}. [{rng}] {text}" for i, (rng, text) in enumerate(summaries))),
    ]
    warnings: list[str] = []
    feedback: list[tuple[str, str]] = []
    value = None
    for _ in range(1 + config.repair_attempts):
        request = gateway.request(PromptKind.REFINE, base_blocks + feedback)
        value = gateway.complete(request, validator=_require_sections).value
        graph = _merged_graph(scratchpad, value["characters"])
        known = graph.known_names()
        bad = [
            e
            for e in value["characters"].get("edges", [])
            if e["from"].casefold() not in known or e["to"].casefold() not in known
        ]
        if not bad:
            break
        names = ", ".join(sorted({e["from"] for e in bad} | {e["to"] for e in bad}))
        feedback = [
            (
                "error",
                f"these edge endpoints are not known characters: {names}. "
                "Use exact node names from the memory block.",
            )
        ]
    assert value is not None

    graph = _merged_graph(scratchpad, value["characters"])
    known = graph.known_names()
    edges: list[CharacterEdge] = []
    for edge in value["characters"].get("edges", []):
        src, dst = known.get(edge["from"].casefold()), known.get(edge["to"].casefold())
        if src is None or dst is None:
            warnings.append(f"dropped graph edge to unknown name: {edge['from']} -> {edge['to']}")
            continue
        edges.append(CharacterEdge(src, dst, edge["relationship"]))
    graph = CharacterGraph(graph.nodes, tuple(edges))

    plot_points = tuple(
        PlotPoint(
            p["text"],
            TimeRange(p["start_ms"], p["end_ms"]) if p.get("start_ms") is not None else None,
        )
        for p in value["plot_points"]
    )
    synopsis = GlobalSynopsis(
        media_format=scratchpad.media_format,
        setting=scratchpad.setting,
        premise=scratchpad.premise,
        plot_points=plot_points,
    )
    return GlobalScaffold(
        draft_synopsis=synopsis,
        draft_graph=graph,
        segment_summaries=tuple(summaries),
        warnings=tuple(warnings),
    )
