"""The scalarized constrained objective shared by the actor and the oracle."""

import numpy as np

from .errors import ConfigError


def auto_lambda(epsilon, zeta=0.0):
    """Trade-off weight 4 / max(epsilon, zeta)."""
    scale = max(epsilon, zeta)
    if scale <= 0:
        raise ConfigError("auto lambda needs epsilon or zeta > 0")
    return 4.0 / scale


def f_terms(g_values, thresholds, lam, zeta):
    g_values = np.asarray(g_values, dtype=float)
    thresholds = np.asarray(thresholds, dtype=float)
    return np.concatenate([[g_values[0] / lam], g_values[1:] - thresholds + zeta])


def f_value(g_values, thresholds, lam, zeta=0.0):
    """Objective max{g0 / lam, max_i (g_i - b_i + zeta)} and its active index.

    Ties go to the lowest index, so the cost term wins any tie.
    """
    if lam <= 0:
        raise ConfigError(f"lambda must be positive, got {lam}")
    terms = f_terms(g_values, thresholds, lam, zeta)
    active = int(np.argmax(terms))
    return float(terms[active]), active
