"""Exact desk-scale ground truth: robust evaluation, exact F, grid-optimal policies."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import BudgetExceeded, ConfigError, NoConvergence
from .mdp_core import ANCHOR, FixedKernel, PolicyTable, evaluate_fixed
from .objective import f_value
from .uncertainty import sigma_exact, span_seminorm, support_values

RESIDUAL_TOL = 1e-8
MAX_ALTERNATIONS = 10_000


@dataclass(frozen=True, eq=False)
class OracleEval:
    g: float
    V: np.ndarray
    worst_kernel: FixedKernel
    residual: float


def _gap(nominal, policy, values, model, v, g):
    n_s, n_a, _ = nominal.shape
    sig = support_values(model, nominal.reshape(-1, n_s), v).reshape(n_s, n_a)
    return np.einsum("sa,sa->s", policy.probs, values - g + sig) - v


def robust_evaluate(mdp, policy, signal, model, anchor=ANCHOR, tol=RESIDUAL_TOL,
                    max_iter=MAX_ALTERNATIONS) -> OracleEval:
    """Worst-case average value by adversarial policy iteration over kernels.

    Alternates exact evaluation under the current kernel with row-wise
    worst-case kernel extraction. A row is only replaced when the new row
    strictly improves on it, which rules out cycling between tied kernels.

    Stops when ``T_g(V) - V`` (nonnegative at the current kernel's own gain)
    is below ``tol`` everywhere. A span test alone is not enough: when every
    row gains the same constant the span is 0 but g is still too small.
    """
    values = np.asarray(getattr(signal, "values", signal), dtype=float)
    nominal = np.asarray(mdp.nominal_kernel)
    n_s, n_a, _ = nominal.shape
    trans = nominal.copy()
    last = np.inf
    for _ in range(max_iter):
        kernel = FixedKernel(trans)
        g, v = evaluate_fixed(kernel, policy, values, anchor)
        gap = _gap(nominal, policy, values, model, v, g)
        last = float(np.abs(gap).max())
        if last <= tol:
            return OracleEval(g, v, kernel, span_seminorm(gap))
        changed = False
        new = trans.copy()
        for s in range(n_s):
            for a in range(n_a):
                res = sigma_exact(model, nominal[s, a], v)
                if res.sigma > float(trans[s, a] @ v) + 1e-13 * (1.0 + abs(res.sigma)):
                    new[s, a] = res.worst_row / res.worst_row.sum()
                    changed = True
        if not changed:
            break
        trans = new
    raise NoConvergence(f"robust evaluation stalled with residual {last:.3e}", residual=last)


def exact_f(mdp, policy, model, lam, zeta=0.0, anchor=ANCHOR):
    """Returns (F, active_index, g_vector) using oracle evaluation of every signal."""
    g = np.array([robust_evaluate(mdp, policy, sig, model, anchor).g for sig in mdp.signals()])
    f, active = f_value(g, mdp.thresholds, lam, zeta)
    return f, active, g


def simplex_grid(n, step):
    """All points of the n-simplex with coordinates in multiples of ``step``."""
    k = int(round(1.0 / step))
    if k < 1 or abs(k * step - 1.0) > 1e-9:
        raise ConfigError(f"grid_step must divide 1, got {step}")
    pts = [np.array(c, dtype=float) / k
           for c in itertools.product(range(k + 1), repeat=n - 1) if sum(c) <= k]
    return np.array([np.append(p, 1.0 - p.sum()) for p in pts]) if n > 1 else np.ones((1, 1))


def grid_size(n_states, n_actions, step):
    from math import comb

    k = int(round(1.0 / step))
    return comb(k + n_actions - 1, n_actions - 1) ** n_states


def grid_optimal(mdp, model, grid_step=0.05, budget=200_000, anchor=ANCHOR):
    """Best feasible policy on a per-state simplex grid.

    Returns ``(policy, g0, feasible)``. When no grid policy is feasible the
    policy with the smallest worst constraint violation is returned with
    ``feasible=False``.
    """
    count = grid_size(mdp.n_states, mdp.n_actions, grid_step)
    if count > budget:
        raise BudgetExceeded(f"policy grid has {count} points, budget is {budget}", count=count)
    rows = simplex_grid(mdp.n_actions, grid_step)
    signals = mdp.signals()
    best_feasible = None
    best_violation = None
    for combo in itertools.product(range(len(rows)), repeat=mdp.n_states):
        policy = PolicyTable(rows[list(combo)])
        g = np.array([robust_evaluate(mdp, policy, sig, model, anchor).g for sig in signals])
        violation = float(np.max(g[1:] - mdp.thresholds)) if mdp.n_constraints else -np.inf
        if violation <= 0:
            if best_feasible is None or g[0] < best_feasible[1]:
                best_feasible = (policy, float(g[0]))
        elif best_violation is None or violation < best_violation[2]:
            best_violation = (policy, float(g[0]), violation)
    if best_feasible is not None:
        return best_feasible[0], best_feasible[1], True
    return best_violation[0], best_violation[1], False
