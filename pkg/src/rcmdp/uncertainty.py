"""Support functions of (s,a)-rectangular uncertainty sets.

The adversary maximizes: ``sigma(V) = max_{q in set} q . V``. Three sets are
supported, each a ball of radius ``R`` around a nominal next-state row:

* contamination ``{(1-R) p + R q}``: closed form;
* total variation ``{q : 0.5 |q - p|_1 <= R}``: greedy mass transfer;
* Wasserstein-l ``{q : W_l(p, q) <= R}``: transport LP (primal) or the exact
  piecewise-linear dual in the transport multiplier.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import linprog

from .errors import ConfigError, InfeasibleSet
from .mdp_core import FixedKernel

MEMBERSHIP_TOL = 1e-9
# gains at or below this count as "nominal already optimal"
_TIE_TOL = 1e-12


@dataclass(frozen=True)
class Contamination:
    radius: float

    def __post_init__(self):
        # radius 0 is the degenerate nominal set, kept for testing
        if not 0.0 <= self.radius <= 1.0:
            raise ConfigError(f"contamination radius must lie in [0, 1], got {self.radius}")

    name = "contamination"

    def with_radius(self, radius):
        return replace(self, radius=float(radius))

    def to_dict(self):
        return {"kind": self.name, "radius": self.radius}


@dataclass(frozen=True)
class TotalVariation:
    radius: float

    def __post_init__(self):
        if not 0.0 <= self.radius <= 1.0:
            raise ConfigError(f"TV radius must lie in [0, 1], got {self.radius}")

    name = "tv"

    def with_radius(self, radius):
        return replace(self, radius=float(radius))

    def to_dict(self):
        return {"kind": self.name, "radius": self.radius}


@dataclass(frozen=True, eq=False)
class Wasserstein:
    radius: float
    metric: np.ndarray
    order: float = 1.0

    def __post_init__(self):
        if self.radius < 0:
            raise ConfigError(f"Wasserstein radius must be nonnegative, got {self.radius}")
        if self.order < 1:
            raise ConfigError(f"Wasserstein order must be >= 1, got {self.order}")
        d = np.array(self.metric, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise ConfigError(f"metric must be square, got shape {d.shape}")
        if np.any(d < 0) or np.any(np.diag(d) != 0) or not np.allclose(d, d.T, atol=0, rtol=0):
            raise ConfigError("metric must be nonnegative, symmetric, with zero diagonal")
        d.setflags(write=False)
        object.__setattr__(self, "metric", d)
        object.__setattr__(self, "_transport_cost", d**self.order)

    name = "wasserstein"

    @property
    def transport_cost(self):
        return self._transport_cost

    @property
    def budget(self):
        return self.radius**self.order

    @classmethod
    def line_metric(cls, n_states, radius, order=1.0):
        """Ground metric |i - j| on state indices."""
        idx = np.arange(n_states, dtype=float)
        return cls(radius, np.abs(idx[:, None] - idx[None, :]), order)

    def with_radius(self, radius):
        return Wasserstein(float(radius), self.metric, self.order)

    def to_dict(self):
        return {"kind": self.name, "radius": self.radius, "order": self.order,
                "metric": self.metric.tolist()}


UncertaintyModel = Contamination | TotalVariation | Wasserstein


def model_from_dict(spec, n_states=None):
    kind = spec.get("kind")
    radius = float(spec.get("radius", 0.0))
    if kind == "contamination":
        return Contamination(radius)
    if kind == "tv":
        return TotalVariation(radius)
    if kind == "wasserstein":
        order = float(spec.get("order", 1.0))
        if spec.get("metric") is not None:
            return Wasserstein(radius, np.asarray(spec["metric"], dtype=float), order)
        if n_states is None:
            raise ConfigError("Wasserstein model needs a metric or n_states for the default line metric")
        return Wasserstein.line_metric(n_states, radius, order)
    raise ConfigError(f"unknown uncertainty model kind {kind!r}")


@dataclass(frozen=True, eq=False)
class SupportResult:
    sigma: float
    worst_row: np.ndarray


def span_seminorm(v) -> float:
    v = np.asarray(v, dtype=float)
    return float(v.max() - v.min())


def _argmax_low(v):
    # np.argmax returns the first maximizer, i.e. lowest index on ties
    return int(np.argmax(v))


def _tv_greedy(rows, v, radius):
    """Vectorized greedy TV support; returns (sigma, moved-mass matrix)."""
    target = _argmax_low(v)
    rest = [s for s in np.argsort(v, kind="stable") if s != target]
    order = np.array(rest + [target], dtype=int)
    mass = np.minimum(radius, 1.0 - rows[:, target])
    cum = np.cumsum(rows[:, order], axis=1)
    capped = np.minimum(cum, mass[:, None])
    removed_ord = np.diff(capped, axis=1, prepend=0.0)
    removed_ord[:, -1] = 0.0
    removed = np.zeros_like(rows)
    removed[:, order] = removed_ord
    delta = -removed
    delta[:, target] += removed.sum(axis=1)
    sigma = rows @ v + delta @ v
    return sigma, delta


def _wasserstein_lambdas(v, cost):
    """Candidate multipliers: 0 and every positive crossing of two lines
    ``V(y) - lam * cost[x, y]`` sharing the same source x."""
    dv = v[None, :, None] - v[None, None, :]
    dc = cost[:, :, None] - cost[:, None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        lam = dv / dc
    lam = lam[(dc != 0) & np.isfinite(lam) & (lam > 0)]
    return np.unique(np.concatenate([[0.0], lam]))


def wasserstein_dual_values(rows, v, model: Wasserstein):
    """Exact dual ``min_{lam>=0} lam R^l + sum_x p(x) max_y (V(y) - lam d(x,y)^l)``.

    The objective is convex and piecewise linear in ``lam``, so its minimum
    sits at ``lam = 0`` or at a crossing of two of the inner lines; all
    candidates are evaluated at once.
    """
    rows = np.atleast_2d(rows)
    cost = model.transport_cost
    lams = _wasserstein_lambdas(v, cost)
    inner = (v[None, None, :] - lams[:, None, None] * cost[None, :, :]).max(axis=2)
    obj = lams[None, :] * model.budget + rows @ inner.T
    return obj.min(axis=1)


def support_values(model, rows, v) -> np.ndarray:
    """Support function for a batch of rows (shape (K, S)) at one V."""
    v = np.asarray(v, dtype=float)
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if isinstance(model, Contamination):
        return (1.0 - model.radius) * (rows @ v) + model.radius * v.max()
    if isinstance(model, TotalVariation):
        return _tv_greedy(rows, v, model.radius)[0]
    if isinstance(model, Wasserstein):
        return wasserstein_dual_values(rows, v, model)
    raise TypeError(f"unsupported uncertainty model {type(model).__name__}")


def _wasserstein_lp(row, v, model):
    n = v.size
    cost = model.transport_cost
    # variables gamma[x, y] flattened row-major; maximize sum gamma[x, y] V(y)
    c = -np.tile(v, n)
    a_eq = np.kron(np.eye(n), np.ones((1, n)))
    a_ub = cost.reshape(1, -1)
    res = linprog(c, A_ub=a_ub, b_ub=[model.budget], A_eq=a_eq, b_eq=row,
                  bounds=(0, None), method="highs")
    if res.status != 0:
        raise InfeasibleSet(f"transport LP failed: {res.message}")
    gamma = res.x.reshape(n, n)
    q = np.clip(gamma.sum(axis=0), 0.0, None)
    return q / q.sum()


def sigma_exact(model, nominal_row, v) -> SupportResult:
    """Exact support value and an achieving next-state distribution.

    When the nominal row already attains the maximum (e.g. constant ``V``)
    the nominal row itself is returned as the worst row.
    """
    row = np.asarray(nominal_row, dtype=float)
    v = np.asarray(v, dtype=float)
    base = float(row @ v)
    if isinstance(model, Contamination):
        target = _argmax_low(v)
        sigma = (1.0 - model.radius) * base + model.radius * float(v[target])
        worst = (1.0 - model.radius) * row
        worst[target] += model.radius
    elif isinstance(model, TotalVariation):
        s, delta = _tv_greedy(row[None, :], v, model.radius)
        sigma = float(s[0])
        worst = np.clip(row + delta[0], 0.0, None)
    elif isinstance(model, Wasserstein):
        worst = _wasserstein_lp(row, v, model)
        sigma = float(worst @ v)
    else:
        raise TypeError(f"unsupported uncertainty model {type(model).__name__}")
    if sigma - base <= _TIE_TOL:
        return SupportResult(max(sigma, base), row.copy())
    return SupportResult(sigma, worst)


def worst_case_kernel(model, kernel, v) -> FixedKernel:
    """Kernel assembled row by row from the achieving rows of ``sigma_exact``.

    ``kernel`` may be a :class:`FixedKernel`, a ``TabularRcmdp`` (its nominal
    kernel is used) or a raw ``(S, A, S)`` array.
    """
    trans = getattr(kernel, "nominal_kernel", None)
    if trans is None:
        trans = getattr(kernel, "trans", kernel)
    trans = np.asarray(trans, dtype=float)
    out = np.empty_like(trans)
    n_s, n_a, _ = trans.shape
    for s in range(n_s):
        for a in range(n_a):
            out[s, a] = sigma_exact(model, trans[s, a], v).worst_row
    return FixedKernel(out)


def wasserstein_distance(p, q, metric, order=1.0) -> float:
    """W_l(p, q) by the transport LP (used for set-membership checks)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    n = p.size
    cost = np.asarray(metric, dtype=float) ** order
    a_eq = np.vstack([np.kron(np.eye(n), np.ones((1, n))), np.kron(np.ones((1, n)), np.eye(n))])
    b_eq = np.concatenate([p, q])
    res = linprog(cost.ravel(), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if res.status != 0:
        raise InfeasibleSet(f"transport LP failed: {res.message}")
    return float(max(res.fun, 0.0) ** (1.0 / order))


def membership_violation(model, nominal_row, q) -> float:
    """How far ``q`` lies outside the set around ``nominal_row`` (0 if inside)."""
    p = np.asarray(nominal_row, dtype=float)
    q = np.asarray(q, dtype=float)
    simplex = max(0.0, -float(q.min())) + abs(float(q.sum()) - 1.0)
    if isinstance(model, Contamination):
        r = model.radius
        if r == 0:
            return simplex + float(np.abs(q - p).max())
        # q = (1-R) p + R w needs w = (q - (1-R) p) / R >= 0
        w = (q - (1.0 - r) * p) / r
        return simplex + max(0.0, -float(w.min())) * r
    if isinstance(model, TotalVariation):
        return simplex + max(0.0, 0.5 * float(np.abs(q - p).sum()) - model.radius)
    if isinstance(model, Wasserstein):
        dist = wasserstein_distance(p, q, model.metric, model.order)
        return simplex + max(0.0, dist**model.order - model.budget)
    raise TypeError(f"unsupported uncertainty model {type(model).__name__}")
