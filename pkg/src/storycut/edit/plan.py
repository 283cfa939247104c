"""Edit plan assembly: selections + narration + storyboard -> validated plan."""

from __future__ import annotations

import hashlib
from dataclasses import replace

from ..config import PipelineConfig
from ..errors import PreconditionError, ValidationError
from ..model import (
    ClipSelection,
    EditPlan,
    MusicRef,
    NarrationSegment,
    RenderingMode,
    Storyboard,
    build_meta,
    finalize_artifact,
)
from ..validation import ValidationReport, Violation, validate


def deterministic_plan_id(project_id: str, prompt: str, index_hash: str) -> str:
    h = hashlib.sha256(f"{project_id}\x00{prompt}\x00{index_hash}".encode("utf-8"))
    return f"plan-{h.hexdigest()[:16]}"


def assemble_edit_plan(
    prompt: str,
    storyboard: Storyboard,
    narration: list[NarrationSegment],
    selections: dict[str, list[ClipSelection]],
    *,
    project_id: str,
    assets: dict[str, int],
    primary_asset_id: str,
    duration_ms: int,
    index_hash: str,
    storyboard_ref: str,
    config: PipelineConfig,
    model: dict,
    created_at: str,
    music: MusicRef | None = None,
    warnings: list[str] | None = None,
) -> EditPlan:
    """Shape validated inputs into a canonical EditPlan.

    Entries take storyboard order then selection order with contiguous
    output positions; narrated-overlay clips bind to their section's
    narration segment. Raises ValidationError listing every violation.
    """
    if not prompt or not prompt.strip():
        raise PreconditionError("prompt must be non-empty")
    narration_by_section = {n.storyboard_section_id: n for n in narration}

    pre_violations = []
    for section in storyboard.sections:
        seg = narration_by_section.get(section.section_id)
        if seg is None:
            pre_violations.append(
                Violation(f"narration[{section.section_id}]", "storyboard section has no narration")
            )
        elif not selections.get(section.section_id):
            pre_violations.append(
                Violation(f"entries[{section.section_id}]", "narration segment has zero clip selections")
            )
    if pre_violations:
        raise ValidationError(ValidationReport(pre_violations))

    entries: list[ClipSelection] = []
    for section in storyboard.sections:
        seg = narration_by_section[section.section_id]
        for clip in selections[section.section_id]:
            narration_id = seg.narration_id if clip.rendering_mode == RenderingMode.NARRATED_OVERLAY else None
            entries.append(
                replace(clip, output_position=len(entries), narration_id=narration_id)
            )

    meta = build_meta(
        config=config,
        assets=assets,
        primary_asset_id=primary_asset_id,
        duration_ms=duration_ms,
        model=model,
        refinement_enabled=config.refinement_enabled,
        created_at=created_at,
        warnings=warnings,
        extra={"index_hash": index_hash},
    )
    plan = EditPlan(
        plan_id=deterministic_plan_id(project_id, prompt, index_hash),
        project_id=project_id,
        prompt=prompt,
        storyboard_ref=storyboard_ref,
        entries=tuple(entries),
        narration=tuple(narration),
        music=music,
        meta=meta,
    )
    doc = finalize_artifact(plan.to_json(), created_at)
    report = validate(doc)
    if not report.ok:
        raise ValidationError(report)
    return EditPlan.from_json(doc)
