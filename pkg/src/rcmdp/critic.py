"""Robust average-cost TD critic."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DivergenceError
from .mdp_core import ANCHOR, IndexedSignal
from .sampling import MlmcConfig, estimate_sigma_all
from .uncertainty import span_seminorm, support_values


@dataclass(frozen=True)
class CriticConfig:
    """Budgets and step-size schedules for :func:`td_evaluate`.

    Step sizes are ``eta_t = eta_scale / (1 + t) ** eta_power`` for the value
    loop and ``beta_t = beta_scale / (1 + t) ** beta_power`` for the gain loop.
    """

    t_value_iters: int = 100_000
    t_gain_iters: int = 10_000
    eta_scale: float = 0.5
    eta_power: float = 0.6
    beta_scale: float = 1.0
    beta_power: float = 1.0
    anchor: int = ANCHOR
    mlmc: MlmcConfig = field(default_factory=MlmcConfig)
    blowup_bound: float | None = None
    # test hook: replace sampled sigma by the exact support function
    exact_sigma: bool = False

    def __post_init__(self):
        if self.t_value_iters < 0 or self.t_gain_iters < 0:
            raise ConfigError("iteration counts must be nonnegative")
        if self.eta_scale <= 0 or self.beta_scale <= 0:
            raise ConfigError("step-size scales must be positive")
        if self.eta_power < 0 or self.beta_power < 0:
            raise ConfigError("step-size powers must be nonnegative")

    def eta(self, t):
        return self.eta_scale / (1.0 + t) ** self.eta_power

    def beta(self, t):
        return self.beta_scale / (1.0 + t) ** self.beta_power

    def to_dict(self):
        out = {k: getattr(self, k) for k in (
            "t_value_iters", "t_gain_iters", "eta_scale", "eta_power", "beta_scale",
            "beta_power", "anchor", "blowup_bound", "exact_sigma")}
        out["n_max"] = self.mlmc.n_max
        return out

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        n_max = d.pop("n_max", None)
        if n_max is not None:
            d["mlmc"] = MlmcConfig(int(n_max))
        return cls(**d)


@dataclass(frozen=True, eq=False)
class RobustEval:
    g: float
    V: np.ndarray
    index: int = 0


def _signal_values(signal):
    return np.asarray(signal.values if isinstance(signal, IndexedSignal) else signal, dtype=float)


def _blowup_bound(mdp, values, cfg):
    if cfg.blowup_bound is not None:
        return cfg.blowup_bound
    kern = np.asarray(mdp.nominal_kernel)
    p_min = kern[kern > 0].min()
    return 1e3 * (1.0 + span_seminorm(values)) / p_min


def _sigma(gm, v, model, cfg, nominal):
    if cfg.exact_sigma:
        n_s, n_a, _ = nominal.shape
        return support_values(model, nominal.reshape(-1, n_s), v).reshape(n_s, n_a)
    return estimate_sigma_all(gm, v, model, cfg.mlmc)


def td_evaluate(gm, policy, signal, model, cfg: CriticConfig = CriticConfig(), v0=None,
                on_step=None) -> RobustEval:
    """Estimate the robust average value g and anchored relative values V.

    Phase 1 runs ``t_value_iters`` synchronous sweeps of
    ``V <- V + eta_t (T_hat_0(V) - V)`` followed by re-anchoring, with the gain
    fixed at 0. Phase 2 freezes ``V`` and averages
    ``mean_s [sum_a pi (r + sigma_hat(V)) - V]`` into ``g`` with steps ``beta_t``.

    ``on_step(phase, t, V, g)`` is called after every update (phase 1 or 2).
    """
    mdp = gm.mdp
    values = _signal_values(signal)
    pi = policy.probs
    nominal = np.asarray(mdp.nominal_kernel)
    anchor = cfg.anchor
    bound = _blowup_bound(mdp, values, cfg)
    r_pi = np.einsum("sa,sa->s", pi, values)

    v = np.zeros(mdp.n_states) if v0 is None else np.array(v0, dtype=float)
    v -= v[anchor]
    for t in range(cfg.t_value_iters):
        sig = _sigma(gm, v, model, cfg, nominal)
        target = r_pi + np.einsum("sa,sa->s", pi, sig)
        v = v + cfg.eta(t) * (target - v)
        v -= v[anchor]
        if not np.all(np.isfinite(v)) or np.abs(v).max() > bound:
            raise DivergenceError(
                f"critic value iterate exceeded {bound:.3g} at step {t}; check step sizes")
        if on_step is not None:
            on_step(1, t, v, 0.0)

    g = 0.0
    for t in range(cfg.t_gain_iters):
        sig = _sigma(gm, v, model, cfg, nominal)
        delta = r_pi + np.einsum("sa,sa->s", pi, sig) - v
        g += cfg.beta(t) * (delta.mean() - g)
        if on_step is not None:
            on_step(2, t, v, g)
    index = signal.index if isinstance(signal, IndexedSignal) else 0
    return RobustEval(float(g), v, index)


def bellman_operator(mdp, policy, signal, model, v, g):
    """Exact robust Bellman operator T_g(V)(s) = sum_a pi(a|s)[r - g + sigma(V)]."""
    values = _signal_values(signal)
    nominal = np.asarray(mdp.nominal_kernel)
    n_s, n_a, _ = nominal.shape
    sig = support_values(model, nominal.reshape(-1, n_s), np.asarray(v, dtype=float)).reshape(n_s, n_a)
    return np.einsum("sa,sa->s", policy.probs, values - g + sig)


def bellman_residual(mdp, policy, signal, model, evaluation) -> float:
    """Span of T_g(V) - V with the exact support function."""
    v = np.asarray(evaluation.V, dtype=float)
    return span_seminorm(bellman_operator(mdp, policy, signal, model, v, evaluation.g) - v)
