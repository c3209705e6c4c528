"""Application Services Initialization"""

from .assumption_service import check_assumptions, check_hjb
from .estimator_service import build_partition, evaluate, fit_layer, quad_conditional, quadrature_rule
from .experiment_service import ExperimentService, rate_analysis
from .reference_service import (
    binomial_american_put,
    geometric_put_reference,
    lognormal_european_put,
    reduce_geometric,
)
from .sampling_service import euler_step, simulate, weights
from .scheme_service import backward_step, quadrature_backward_step, solve_mc, solve_quadrature

__all__ = [
    "check_assumptions",
    "check_hjb",
    "build_partition",
    "fit_layer",
    "evaluate",
    "quadrature_rule",
    "quad_conditional",
    "ExperimentService",
    "rate_analysis",
    "reduce_geometric",
    "binomial_american_put",
    "lognormal_european_put",
    "geometric_put_reference",
    "euler_step",
    "simulate",
    "weights",
    "backward_step",
    "quadrature_backward_step",
    "solve_mc",
    "solve_quadrature",
]
