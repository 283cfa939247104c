"""Prompt templates, one per prompt kind.

Templates are editable assets: each entry documents the context-block labels
it expects and pins the exact output shape. Context blocks are appended
below the instruction as "### <label>" sections by the gateway.
"""

from __future__ import annotations

_JSON_ONLY = "Respond with a single JSON object and nothing else."

TEMPLATES: dict[str, str] = {
    # blocks: segment (uri + range of the first macro segment)
    "bootstrap_scratchpad": (
        "You are watching the first segment of a longer video. Establish the narrative "
        "scaffold: the media format (one of: cinematic, instructional, keynote, interview, "
        "sports, other), the overall setting, the story premise, the key named characters, "
        "and their interpersonal dynamics. List any plot facts that remain unresolved.\n"
        f"{_JSON_ONLY}\n"
        'Shape: {"media_format": str, "setting": str, "premise": str, '
        '"characters": [{"name": str, "description": str}], '
        '"dynamics": [str], "open_threads": [str]}'
    ),
    # blocks: memory (current scratchpad), segment (uri + range)
    "segment_comprehend": (
        "Continue watching the video. The memory block summarizes everything established so "
        "far; rely on it for continuity. Summarize this segment, then report narrative state "
        "changes: newly introduced characters, updated interpersonal dynamics, newly opened "
        "plot threads, and previously open threads this segment resolves.\n"
        f"{_JSON_ONLY}\n"
        'Shape: {"summary": str, "new_characters": [{"name": str, "description": str}], '
        '"dynamics": [str], "open_threads": [str], "resolved_threads": [str]}'
    ),
    # blocks: memory (over-budget scratchpad), budget (token budget)
    "compress_scratchpad": (
        "The memory block exceeds its token budget. Distill it into a compact summary that "
        "keeps every character name, the premise, the setting, and all unresolved threads. "
        "Shorten descriptions; never drop a name.\n"
        f"{_JSON_ONLY}\n"
        'Shape: {"media_format": str, "setting": str, "premise": str, '
        '"characters": [{"name": str, "description": str}], '
        '"dynamics": [str], "open_threads": [str]}'
    ),
    # blocks: synopsis, characters, scene (uri + range), cadence (annotation interval)
    "scene_comprehend": (
        "Annotate this scene with the guidance of the draft synopsis and character graph. "
        "Emit one annotation roughly every interval stated in the cadence block, and extra "
        "annotations at semantic boundaries such as camera cuts (mark those with "
        '"boundary": true). Each annotation carries paraphrased dialogue with speaker '
        "attribution, narrative-relevant speech acts, cinematographic descriptors, and "
        "affective signals. Timestamps are absolute seconds from the start of the video and "
        "must stay inside the scene range.\n"
        f"{_JSON_ONLY}\n"
        'Shape: {"annotations": [{"at": seconds, "dialogue": {"speaker": str, "text": str} '
        'or null, "speech_act": str or null, "visual": str or null, '
        '"affect": {"label": str, "intensity": 0..1} or null, "boundary": bool}]}'
    ),
    # blocks: synopsis, characters, plus either scene/trace or summaries/memory
    "refine": (
        "Reconcile the coarse narrative scaffold with the fine-grained material in the "
        "context blocks. Resolve missing or unattributed speaker names where the character "
        "graph supports it, repair character graph inconsistencies, and enrich the plot "
        "point list with timestamp ranges and inferred causality. Only include the sections "
        "you have corrections for.\n"
        f"{_JSON_ONLY}\n"
        'Shape: {"attributions": [{"at": seconds, "speaker": str}], '
        '"plot_points": [{"text": str, "start": seconds, "end": seconds}], '
        '"characters": {"nodes": [{"name": str, "aliases": [str], "description": str}], '
        '"edges": [{"from": str, "to": str, "relationship": str}]}}'
    ),
    # blocks: question
    "qa_route": (
        "Decide whether answering this question requires attaching visual evidence clips, "
        "or whether the textual narrative index alone suffices. Explain briefly.\n"
        f"{_JSON_ONLY}\n"
        'Shape: {"needs_visual": bool, "rationale": str}'
    ),
    # blocks: index (formatted narrative index), question
    "qa_answer": (
        "Answer the question using only the narrative index provided; do not invent facts "
        "beyond it. Cite the index timestamps (absolute seconds) that ground the answer. If "
        "the index does not contain the answer, say so, return no citations, and set "
        '"grounded" to false.\n'
        f"{_JSON_ONLY}\n"
        'Shape: {"answer": str, "cited_timestamps": [seconds], "grounded": bool}'
    ),
    # blocks: index, prompt (the user editing request)
    "storyboard_reason": (
        "Think through how to fulfil this editing request with the indexed footage: the "
        "tone, the narrative perspective, the scope, which arcs or moments matter, and a "
        "candidate ordering of sections. Freeform prose; no JSON."
    ),
    # blocks: index, prompt, reasoning (output of the reasoning step)
    "storyboard_structure": (
        "Turn the reasoning into a structured storyboard: an ordered list of thematic or "
        "chronological sections, each with its storytelling intent, a tone label, and a "
        "target duration in seconds.\n"
        f"{_JSON_ONLY}\n"
        'Shape: {"sections": [{"intent": str, "tone": str, "target_duration": seconds, '
        '"mode": "thematic" or "chronological"}]}'
    ),
    # blocks: section (intent + tone + target duration), synopsis
    "narrate": (
        "Write the voiceover narration for this storyboard section: naturalistic spoken "
        "prose matching the requested tone, sized for the target duration at a comfortable "
        "narration pace. Output the narration text only."
    ),
    # blocks: narration (the script text), traces (full timestamped scene traces)
    "retrieve_clips": (
        "Select the source video spans that best visualize this narration. Concentrate on "
        "the timestamped scene descriptions: pick moments whose visuals, tone, and pacing "
        "match the script. Times are absolute seconds within the source video. Justify "
        "every selection and name its narrative function (exposition, emotionally salient "
        "dialogue, montage, ...). Total selected duration should roughly match the "
        "narration duration.\n"
        f"{_JSON_ONLY}\n"
        'Shape: {"clips": [{"start": seconds, "end": seconds, "justification": str, '
        '"narrative_function": str}]}'
    ),
    # blocks: tones (storyboard tone labels), prompt
    "music_select": (
        "Propose search keywords for background music matching these tone labels and the "
        "user request.\n"
        f"{_JSON_ONLY}\n"
        'Shape: {"keywords": [str]}'
    ),
}


def render(kind, blocks: tuple[tuple[str, str], ...]) -> str:
    """Template text followed by the labeled context blocks."""
    key = getattr(kind, "value", kind)
    body = TEMPLATES[key]
    if not blocks:
        return body
    sections = "\n\n".join(f"### {label}\n{text}" for label, text in blocks)
    return f"{body}\n\n{sections}"
