"""Construct, certify and use sparse binary RIP-p measurement matrices."""

from .matrix import SparseBinaryMatrix, load_matrix
from .construct import (
    ParamPlan,
    check_incoherence,
    gen_from_plan,
    gen_matrix,
    plan_params,
    plan_params_p_ge2,
    plan_params_p_lt2,
)

__version__ = "0.1.0"

__all__ = [
    "ParamPlan",
    "SparseBinaryMatrix",
    "check_incoherence",
    "gen_from_plan",
    "gen_matrix",
    "load_matrix",
    "plan_params",
    "plan_params_p_ge2",
    "plan_params_p_lt2",
]
