"""Width and antichain structure of random subfamilies of the Boolean lattice."""

from .antichain import (
    AntichainResult,
    ConclusionCheck,
    Verdict,
    check_hit_conclusion,
    check_main_conclusion,
    find_special,
    max_antichain,
    max_antichain_bipartite,
)
from .bounds import expansion_bound, iso_bounds, kk_shadow_bound
from .containers import PipelineParams, run_pipeline, strong_container, weak_container
from .errors import GuardExceeded, NonUniformFamilyError, PreconditionError, RetryExhausted
from .lattice import Family, MiddleGraph, Subset, closure, shadow, two_linked_components
from .sampler import RngStream, derive_stream, sample_family

__all__ = [
    "AntichainResult", "ConclusionCheck", "Verdict", "check_hit_conclusion", "check_main_conclusion",
    "find_special", "max_antichain", "max_antichain_bipartite", "expansion_bound", "iso_bounds",
    "kk_shadow_bound", "PipelineParams", "run_pipeline", "strong_container", "weak_container",
    "GuardExceeded", "NonUniformFamilyError", "PreconditionError", "RetryExhausted", "Family",
    "MiddleGraph", "Subset", "closure", "shadow", "two_linked_components", "RngStream",
    "derive_stream", "sample_family",
]
__version__ = "0.1.0"
