"""Tabular robust constrained average-cost MDPs: actor-critic solver and exact oracles."""

__version__ = "0.1.0"

from .actor import ActorConfig, run
from .critic import CriticConfig, RobustEval, bellman_residual, td_evaluate
from .mdp_core import (FixedKernel, IndexedSignal, PolicyTable, TabularRcmdp, evaluate_fixed,
                       stationary_distribution, validate)
from .oracle import exact_f, grid_optimal, robust_evaluate
from .sampling import GenerativeModel, MlmcConfig
from .uncertainty import Contamination, TotalVariation, Wasserstein, sigma_exact, span_seminorm

__all__ = [
    "ActorConfig", "Contamination", "CriticConfig", "FixedKernel", "GenerativeModel", "IndexedSignal",
    "MlmcConfig", "PolicyTable", "RobustEval", "TabularRcmdp", "TotalVariation", "Wasserstein",
    "bellman_residual", "evaluate_fixed", "exact_f", "grid_optimal", "robust_evaluate", "run",
    "sigma_exact", "span_seminorm", "stationary_distribution", "td_evaluate", "validate",
]
