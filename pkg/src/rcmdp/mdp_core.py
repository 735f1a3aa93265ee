"""Tabular RCMDP data types and exact evaluation under a single kernel."""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from .errors import ErgodicityWarning, SingularChain, StructuralError

ANCHOR = 0
KERNEL_TOL = 1e-12
POLICY_TOL = 1e-10
# reciprocal condition number below which a chain is treated as singular
_RCOND_MIN = 1e-13


def _frozen(arr, dtype=float):
    out = np.array(arr, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


def _check_rows(arr, tol, what):
    if not np.all(np.isfinite(arr)):
        raise StructuralError(f"{what} contains non-finite entries")
    if np.any(arr < 0):
        raise StructuralError(f"{what} has negative entries")
    err = np.abs(arr.sum(axis=-1) - 1.0)
    if np.any(err > tol):
        idx = np.unravel_index(int(np.argmax(err)), err.shape)
        raise StructuralError(f"{what} row {tuple(int(i) for i in idx)} sums to {1.0 - err[idx]:+.3e} off 1")


@dataclass(frozen=True, eq=False)
class TabularRcmdp:
    """Finite robust constrained average-cost MDP.

    ``cost`` is the signal at index 0; ``constraints[i-1]`` is the signal at
    index ``i``. All signal arrays have shape ``(n_states, n_actions)`` and the
    nominal kernel has shape ``(n_states, n_actions, n_states)``.
    """

    cost: np.ndarray
    constraints: tuple
    thresholds: np.ndarray
    nominal_kernel: np.ndarray
    initial_dist: np.ndarray

    def __post_init__(self):
        cost = _frozen(self.cost)
        if cost.ndim != 2 or cost.shape[0] < 1 or cost.shape[1] < 1:
            raise StructuralError(f"cost must be a nonempty (S, A) array, got shape {cost.shape}")
        n_s, n_a = cost.shape
        cons = tuple(_frozen(c) for c in self.constraints)
        for i, c in enumerate(cons, start=1):
            if c.shape != (n_s, n_a):
                raise StructuralError(f"constraint {i} has shape {c.shape}, expected {(n_s, n_a)}")
        thr = _frozen(np.asarray(self.thresholds, dtype=float).reshape(-1))
        if thr.shape != (len(cons),):
            raise StructuralError(f"expected {len(cons)} thresholds, got {thr.shape[0]}")
        for i, sig in enumerate((cost,) + cons):
            if not np.all(np.isfinite(sig)) or np.any(sig < 0) or np.any(sig > 1):
                raise StructuralError(f"signal {i} has entries outside [0, 1]")
        kern = _frozen(self.nominal_kernel)
        if kern.shape != (n_s, n_a, n_s):
            raise StructuralError(f"nominal_kernel has shape {kern.shape}, expected {(n_s, n_a, n_s)}")
        _check_rows(kern, KERNEL_TOL, "nominal_kernel")
        rho = _frozen(self.initial_dist)
        if rho.shape != (n_s,):
            raise StructuralError(f"initial_dist has shape {rho.shape}, expected {(n_s,)}")
        _check_rows(rho, KERNEL_TOL, "initial_dist")
        object.__setattr__(self, "cost", cost)
        object.__setattr__(self, "constraints", cons)
        object.__setattr__(self, "thresholds", thr)
        object.__setattr__(self, "nominal_kernel", kern)
        object.__setattr__(self, "initial_dist", rho)

    @property
    def n_states(self) -> int:
        return self.cost.shape[0]

    @property
    def n_actions(self) -> int:
        return self.cost.shape[1]

    @property
    def n_constraints(self) -> int:
        return len(self.constraints)

    def signal(self, index: int) -> IndexedSignal:
        if index == 0:
            return IndexedSignal(0, self.cost)
        if not 1 <= index <= self.n_constraints:
            raise IndexError(f"signal index {index} out of range 0..{self.n_constraints}")
        return IndexedSignal(index, self.constraints[index - 1])

    def signals(self):
        return [self.signal(i) for i in range(self.n_constraints + 1)]

    def kernel(self) -> FixedKernel:
        return FixedKernel(self.nominal_kernel)


@dataclass(frozen=True, eq=False)
class PolicyTable:
    probs: np.ndarray

    def __post_init__(self):
        p = _frozen(self.probs)
        if p.ndim != 2:
            raise StructuralError(f"policy must be 2-D (S, A), got shape {p.shape}")
        _check_rows(p, POLICY_TOL, "policy")
        object.__setattr__(self, "probs", p)

    @classmethod
    def uniform(cls, n_states, n_actions):
        return cls(np.full((n_states, n_actions), 1.0 / n_actions))

    @classmethod
    def deterministic(cls, actions, n_actions):
        actions = np.asarray(actions, dtype=int)
        probs = np.zeros((actions.size, n_actions))
        probs[np.arange(actions.size), actions] = 1.0
        return cls(probs)

    @property
    def n_states(self):
        return self.probs.shape[0]

    @property
    def n_actions(self):
        return self.probs.shape[1]

    def digest(self) -> str:
        """Short stable hash of the probability table (for run traces)."""
        import hashlib

        return hashlib.sha256(np.ascontiguousarray(self.probs).tobytes()).hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class FixedKernel:
    trans: np.ndarray

    def __post_init__(self):
        t = _frozen(self.trans)
        if t.ndim != 3 or t.shape[0] != t.shape[2]:
            raise StructuralError(f"kernel must have shape (S, A, S), got {t.shape}")
        _check_rows(t, KERNEL_TOL, "kernel")
        object.__setattr__(self, "trans", t)

    def induced_chain(self, policy: PolicyTable) -> np.ndarray:
        """State-to-state matrix M[s, s'] = sum_a pi(a|s) P(s'|s, a)."""
        return np.einsum("sa,sat->st", policy.probs, self.trans)


@dataclass(frozen=True, eq=False)
class IndexedSignal:
    index: int
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))


@dataclass
class ChainCheck:
    label: str
    irreducible: bool
    aperiodic: bool

    @property
    def ergodic(self):
        return self.irreducible and self.aperiodic


@dataclass
class ValidationReport:
    checks: list = field(default_factory=list)
    stochasticity_violations: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.stochasticity_violations and all(c.ergodic for c in self.checks)

    @property
    def failing(self):
        return [c for c in self.checks if not c.ergodic]

    def to_dict(self):
        return {
            "ok": self.ok,
            "stochasticity_violations": list(self.stochasticity_violations),
            "checks": [
                {"policy": c.label, "irreducible": c.irreducible, "aperiodic": c.aperiodic}
                for c in self.checks
            ],
        }


def chain_structure(chain: np.ndarray) -> tuple[bool, bool]:
    """Return (irreducible, aperiodic) for a row-stochastic matrix."""
    n = chain.shape[0]
    graph = nx.DiGraph()
    graph.add_nodes_from(range(n))
    graph.add_edges_from(zip(*np.nonzero(chain > 0)))
    irreducible = nx.is_strongly_connected(graph)
    # aperiodicity is only meaningful (and only defined by networkx) on a strongly connected graph
    aperiodic = nx.is_aperiodic(graph) if irreducible else False
    return irreducible, aperiodic


def _deterministic_policies(n_states, n_actions, k, rng):
    total = n_actions**n_states
    if total <= k:
        return [np.array(acts) for acts in itertools.product(range(n_actions), repeat=n_states)]
    return [rng.integers(0, n_actions, size=n_states) for _ in range(k)]


def validate(mdp: TabularRcmdp, n_policies: int = 32, seed: int = 0, warn: bool = True) -> ValidationReport:
    """Sampled ergodicity check of the nominal kernel.

    Tests the uniform policy plus ``min(n_policies, |A|^|S|)`` deterministic
    policies (all of them when there are few enough). Stochasticity problems
    raise :class:`StructuralError`; reducible or periodic chains only emit an
    :class:`ErgodicityWarning` and are listed in the report.
    """
    report = ValidationReport()
    kern = np.asarray(mdp.nominal_kernel)
    err = np.abs(kern.sum(axis=-1) - 1.0)
    for s, a in zip(*np.nonzero(err > KERNEL_TOL)):
        report.stochasticity_violations.append((int(s), int(a)))
    if report.stochasticity_violations or np.any(kern < 0):
        raise StructuralError(f"nominal kernel rows not stochastic at {report.stochasticity_violations}")

    kernel = mdp.kernel()
    rng = np.random.default_rng(seed)
    n_s, n_a = mdp.n_states, mdp.n_actions
    candidates = [("uniform", PolicyTable.uniform(n_s, n_a))]
    for acts in _deterministic_policies(n_s, n_a, min(n_policies, n_a**n_s), rng):
        candidates.append(("det:" + ",".join(str(int(a)) for a in acts), PolicyTable.deterministic(acts, n_a)))
    for label, pol in candidates:
        irr, aper = chain_structure(kernel.induced_chain(pol))
        report.checks.append(ChainCheck(label, irr, aper))
    if warn and report.failing:
        bad = ", ".join(c.label for c in report.failing[:5])
        warnings.warn(f"{len(report.failing)} tested policies induce a reducible/periodic chain: {bad}",
                      ErgodicityWarning, stacklevel=2)
    return report


def _solve(system, rhs, what):
    if system.shape[0] == 1:
        if system[0, 0] == 0:
            raise SingularChain(f"{what}: singular 1x1 system")
        return rhs / system[0, 0]
    rcond = 1.0 / np.linalg.cond(system)
    if not np.isfinite(rcond) or rcond < _RCOND_MIN:
        raise SingularChain(f"{what}: linear system is rank deficient (rcond={rcond:.2e})")
    return np.linalg.solve(system, rhs)


def stationary_distribution(kernel: FixedKernel, policy: PolicyTable) -> np.ndarray:
    """Stationary distribution d of the policy-induced chain (d M = d, sum d = 1)."""
    chain = kernel.induced_chain(policy)
    n = chain.shape[0]
    system = chain.T - np.eye(n)
    system[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    d = _solve(system, rhs, "stationary distribution")
    return d


def evaluate_fixed(kernel: FixedKernel, policy: PolicyTable, signal, anchor: int = ANCHOR):
    """Average value and anchored relative value function under one kernel.

    Solves the Poisson system ``V + g 1 - M V = r_pi`` together with
    ``V[anchor] = 0`` as one dense (S+1)x(S+1) linear system.

    Returns:
        ``(g, V)`` with ``V[anchor] == 0``.
    """
    values = signal.values if isinstance(signal, IndexedSignal) else np.asarray(signal, dtype=float)
    chain = kernel.induced_chain(policy)
    r_pi = np.einsum("sa,sa->s", policy.probs, values)
    n = chain.shape[0]
    system = np.zeros((n + 1, n + 1))
    system[:n, :n] = np.eye(n) - chain
    system[:n, n] = 1.0
    system[n, anchor] = 1.0
    rhs = np.append(r_pi, 0.0)
    sol = _solve(system, rhs, "Poisson equation")
    v = sol[:n].copy()
    v[anchor] = 0.0
    return float(sol[n]), v
