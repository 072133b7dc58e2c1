"""Rate-distortion-perception functions of discrete sources.

The solver minimizes ``I(X; Xhat) + s1 E[d] + s2 D_f(p || q)`` by
alternating minimization, reports certified lower and upper bounds on the
rate, and exposes the linearization of its update map.
"""

from .errors import (
    ConfigError,
    CurvatureUnavailableError,
    DegenerateNormalizerError,
    DimensionError,
    LambdaInfeasibleError,
    NotOnSimplexError,
    OracleInfeasibleError,
    RDPFError,
    SingularRatioError,
)
from .fdiv import CHI2, DIVERGENCES, HELLINGER, KL, TV, FDivergence, divergence, get_divergence
from .oracles import binary_rdf, binary_tv_multipliers, closed_form_binary_tv, grid_oracle
from .simplex import hamming, induced_marginal, mutual_information
from .solver import SolveResult, SolverConfig, solve, solve_exact_implicit
from .spectral import analyze, instability_threshold
from .sweep import CurvePoint, RunConfig, emit, load_config, run_sweep

__all__ = [
    "CHI2", "DIVERGENCES", "HELLINGER", "KL", "TV",
    "ConfigError", "CurvatureUnavailableError", "CurvePoint", "DegenerateNormalizerError",
    "DimensionError", "FDivergence", "LambdaInfeasibleError", "NotOnSimplexError",
    "OracleInfeasibleError", "RDPFError", "RunConfig", "SingularRatioError", "SolveResult",
    "SolverConfig", "analyze", "binary_rdf", "binary_tv_multipliers", "closed_form_binary_tv",
    "divergence", "emit", "get_divergence", "grid_oracle", "hamming", "induced_marginal",
    "instability_threshold", "load_config", "mutual_information", "run_sweep", "solve",
    "solve_exact_implicit",
]
