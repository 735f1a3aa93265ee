"""Primal-only robust constrained actor-critic."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .critic import CriticConfig, RobustEval, td_evaluate
from .errors import ConfigError
from .mdp_core import IndexedSignal, PolicyTable
from .objective import auto_lambda, f_terms, f_value
from .oracle import exact_f
from .sampling import estimate_sigma_all
from .uncertainty import span_seminorm, support_values

__all__ = [
    "ActorConfig", "QTable", "TraceRecord", "RunTrace", "auto_lambda", "build_q",
    "f_value", "policy_update", "project_simplex", "run",
]

BEST_MODES = ("critic", "exact")


@dataclass(frozen=True)
class ActorConfig:
    """Outer-loop settings.

    ``step_size=None`` selects ``eps / (2 C Q_max^2)`` with ``C = mismatch_c``
    and ``Q_max = 1 + (largest span of any critic V seen so far)``.
    ``lambda_rule`` is ``"auto"`` (``4 / max(eps, zeta)``) or a positive number.
    """

    total_iters: int = 200
    step_size: float | None = None
    epsilon: float = 0.05
    zeta: float = 0.0
    lambda_rule: str | float = "auto"
    critic: CriticConfig = field(default_factory=lambda: CriticConfig(2000, 500))
    best_iterate_mode: str = "critic"
    track_exact: bool = False
    mismatch_c: float = 1.0
    warm_start: bool = True

    def __post_init__(self):
        if self.total_iters < 0:
            raise ConfigError("total_iters must be nonnegative")
        if self.step_size is not None and self.step_size <= 0:
            raise ConfigError(f"step size must be positive, got {self.step_size}")
        if self.epsilon <= 0 or self.zeta < 0:
            raise ConfigError("epsilon must be positive and zeta nonnegative")
        if self.best_iterate_mode not in BEST_MODES:
            raise ConfigError(f"best_iterate_mode must be one of {BEST_MODES}")
        if self.mismatch_c <= 0:
            raise ConfigError("mismatch_c must be positive")
        self.lam  # validates the lambda rule

    @property
    def lam(self) -> float:
        if self.lambda_rule == "auto":
            return auto_lambda(self.epsilon, self.zeta)
        try:
            lam = float(self.lambda_rule)
        except (TypeError, ValueError):
            raise ConfigError(f"lambda_rule must be 'auto' or a number, got {self.lambda_rule!r}") from None
        if lam <= 0:
            raise ConfigError(f"lambda must be positive, got {lam}")
        return lam

    def default_step(self, max_span):
        q_max = 1.0 + max_span
        return self.epsilon / (2.0 * self.mismatch_c * q_max**2)

    def to_dict(self):
        return {
            "total_iters": self.total_iters, "step_size": self.step_size,
            "epsilon": self.epsilon, "zeta": self.zeta, "lambda_rule": self.lambda_rule,
            "critic": self.critic.to_dict(), "best_iterate_mode": self.best_iterate_mode,
            "track_exact": self.track_exact, "mismatch_c": self.mismatch_c,
            "warm_start": self.warm_start,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "critic" in d:
            d["critic"] = CriticConfig.from_dict(d["critic"])
        return cls(**d)


@dataclass(frozen=True, eq=False)
class QTable:
    values: np.ndarray
    index: int = 0


@dataclass
class TraceRecord:
    t: int
    g_hat: np.ndarray
    f_hat: float
    active_index: int
    policy_hash: str
    wall_clock: float
    step_size: float
    f_exact: float | None = None
    g_exact: np.ndarray | None = None


@dataclass
class RunTrace:
    lam: float
    zeta: float
    thresholds: np.ndarray
    records: list = field(default_factory=list)
    policies: list = field(default_factory=list)
    best_t: int | None = None
    policy: PolicyTable | None = None

    def f_values(self, mode="critic"):
        if mode == "exact":
            return np.array([r.f_exact for r in self.records], dtype=float)
        return np.array([r.f_hat for r in self.records], dtype=float)

    def recompute_f(self, record):
        """F from the stored g estimates (consistency check on the trace)."""
        return float(f_terms(record.g_hat, self.thresholds, self.lam, self.zeta).max())


def build_q(evaluation: RobustEval, signal, model, gm=None, mdp=None, exact=False, mlmc=None) -> QTable:
    """Q(s, a) = signal(s, a) - g + sigma(V).

    ``sigma`` is the exact support function when ``exact`` is set (needs
    ``mdp`` or ``gm``), otherwise one sampled estimate per (s, a) from ``gm``.
    """
    values = np.asarray(signal.values if isinstance(signal, IndexedSignal) else signal, dtype=float)
    v = np.asarray(evaluation.V, dtype=float)
    if exact:
        nominal = np.asarray((mdp if mdp is not None else gm.mdp).nominal_kernel)
        n_s, n_a, _ = nominal.shape
        sig = support_values(model, nominal.reshape(-1, n_s), v).reshape(n_s, n_a)
    else:
        if gm is None:
            raise ConfigError("sampled Q construction needs a generative model")
        sig = estimate_sigma_all(gm, v, model) if mlmc is None else estimate_sigma_all(gm, v, model, mlmc)
    index = signal.index if isinstance(signal, IndexedSignal) else evaluation.index
    return QTable(values - evaluation.g + sig, index)


def project_simplex(y):
    """Euclidean projection of each row of ``y`` onto the probability simplex."""
    y = np.atleast_2d(np.asarray(y, dtype=float))
    n = y.shape[1]
    u = -np.sort(-y, axis=1)
    css = np.cumsum(u, axis=1) - 1.0
    k = np.arange(1, n + 1)
    cond = u - css / k > 0
    rho = n - 1 - np.argmax(cond[:, ::-1], axis=1)
    theta = css[np.arange(y.shape[0]), rho] / (rho + 1.0)
    return np.maximum(y - theta[:, None], 0.0)


def policy_update(policy: PolicyTable, q: QTable, eta: float) -> PolicyTable:
    """Row-wise argmin_p eta <Q, p> + |p - pi|^2, i.e. project(pi - eta Q / 2)."""
    probs = project_simplex(policy.probs - 0.5 * eta * np.asarray(q.values))
    # projection output sums to 1 up to rounding; renormalize the residual away
    probs /= probs.sum(axis=1, keepdims=True)
    return PolicyTable(probs)


def run(mdp, model, cfg: ActorConfig, gm, initial_policy: PolicyTable | None = None, callback=None):
    """Robust constrained actor-critic outer loop.

    Each iteration evaluates every signal with the critic, forms sampled
    Q-tables, selects the active index from the critic's g estimates and
    takes a projected step on that index's Q-table. Returns the iterate with
    the smallest F (critic estimates or exact oracle per
    ``best_iterate_mode``) and the full trace.
    """
    lam = cfg.lam
    policy = initial_policy or PolicyTable.uniform(mdp.n_states, mdp.n_actions)
    trace = RunTrace(lam, cfg.zeta, np.asarray(mdp.thresholds))
    signals = mdp.signals()
    track_exact = cfg.track_exact or cfg.best_iterate_mode == "exact"
    warm = [None] * len(signals)
    max_span = 0.0
    start = time.perf_counter()
    for t in range(cfg.total_iters):
        evals, qs = [], []
        for i, sig in enumerate(signals):
            ev = td_evaluate(gm, policy, sig, model, cfg.critic, v0=warm[i] if cfg.warm_start else None)
            evals.append(ev)
            warm[i] = ev.V
            qs.append(build_q(ev, sig, model, gm=gm, mlmc=cfg.critic.mlmc))
            max_span = max(max_span, span_seminorm(ev.V))
        g_hat = np.array([ev.g for ev in evals])
        f_hat, active = f_value(g_hat, mdp.thresholds, lam, cfg.zeta)
        eta = cfg.step_size if cfg.step_size is not None else cfg.default_step(max_span)
        rec = TraceRecord(t, g_hat, f_hat, active, policy.digest(), time.perf_counter() - start, eta)
        if track_exact:
            rec.f_exact, _, rec.g_exact = exact_f(mdp, policy, model, lam, cfg.zeta)
        trace.records.append(rec)
        trace.policies.append(policy)
        if callback is not None:
            callback(rec)
        policy = policy_update(policy, qs[active], eta)

    if not trace.records:
        trace.policy = policy
        return policy, trace
    f_vals = trace.f_values("exact" if cfg.best_iterate_mode == "exact" else "critic")
    trace.best_t = int(np.argmin(f_vals))
    trace.policy = trace.policies[trace.best_t]
    return trace.policy, trace
