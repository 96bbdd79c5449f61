"""Numerical optimisation: a small SDP solver and the see-saw search."""

from .sdp import (
    SdpProblem,
    SdpSolution,
    block_sum_problem,
    direct_sum,
    gram_problem,
    polish_povm,
    povm_update,
    povm_update_many,
    sdp_solve,
    state_update,
)
from .seesaw import RestartTrace, SeesawConfig, SeesawResult, seesaw

__all__ = [
    "RestartTrace",
    "SdpProblem",
    "SdpSolution",
    "SeesawConfig",
    "SeesawResult",
    "block_sum_problem",
    "direct_sum",
    "gram_problem",
    "polish_povm",
    "povm_update",
    "povm_update_many",
    "sdp_solve",
    "seesaw",
    "state_update",
]
