"""Three-phase comprehension: coarse scratchpad pass, scene pass, refinement."""

from .refine import check_coverage, count_unattributed, refine_index
from .scaffold import GlobalScaffold, build_global_scaffold
from .scenes import comprehend_scene, scene_id_for
from .scratchpad import Scratchpad, bootstrap_scratchpad, compress_scratchpad, comprehend_segment

__all__ = [
    "GlobalScaffold",
    "Scratchpad",
    "bootstrap_scratchpad",
    "build_global_scaffold",
    "check_coverage",
    "comprehend_scene",
    "comprehend_segment",
    "compress_scratchpad",
    "count_unattributed",
    "refine_index",
    "scene_id_for",
]
