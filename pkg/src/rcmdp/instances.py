"""Instance generators and JSON (de)serialization of instances and policies."""

from __future__ import annotations

import json
import os
import tempfile

import numpy as np

from .errors import ParamError, ParseError, StructuralError
from .mdp_core import PolicyTable, TabularRcmdp

GRID_MOVES = ((-1, 0), (1, 0), (0, -1), (0, 1))  # up, down, left, right


def garnet(n_states, n_actions, branching, n_constraints=0, thresholds=None, seed=0):
    """Random garnet instance: each (s, a) row has ``branching`` random support
    states with Dirichlet(1) weights; cost and constraints are U[0, 1]."""
    if n_states < 1 or n_actions < 1:
        raise ParamError("n_states and n_actions must be >= 1")
    if not 1 <= branching <= n_states:
        raise ParamError(f"branching must lie in [1, n_states], got {branching}")
    if n_constraints < 0:
        raise ParamError("n_constraints must be >= 0")
    rng = np.random.default_rng(seed)
    kernel = np.zeros((n_states, n_actions, n_states))
    for s in range(n_states):
        for a in range(n_actions):
            support = rng.choice(n_states, size=branching, replace=False)
            w = rng.dirichlet(np.ones(branching))
            # close the row on its last entry so it sums to 1 (exactly 1.0 when branching == 1)
            w[-1] = max(0.0, 1.0 - w[:-1].sum())
            kernel[s, a, support] = w
    cost = rng.random((n_states, n_actions))
    constraints = [rng.random((n_states, n_actions)) for _ in range(n_constraints)]
    if thresholds is None:
        thresholds = [0.5] * n_constraints
    thresholds = list(np.broadcast_to(np.asarray(thresholds, dtype=float), (n_constraints,)))
    return TabularRcmdp(cost, tuple(constraints), thresholds, kernel, np.full(n_states, 1.0 / n_states))


def gridworld(size, slip=0.1, hazards=None, threshold=0.1, goal=None, start=0):
    """N x N gridworld with four moves.

    The intended move succeeds with probability ``1 - slip``; otherwise a
    uniformly random move is taken. Moves off the grid leave the agent in
    place. Any action at the goal resets to ``start``. Cost is 1 everywhere
    except the goal; the single constraint is hazard-cell occupancy.
    """
    if size < 1:
        raise ParamError("grid size must be >= 1")
    if not 0.0 <= slip <= 1.0:
        raise ParamError(f"slip must lie in [0, 1], got {slip}")
    n = size * size
    goal = n - 1 if goal is None else int(goal)
    if hazards is None:
        hazards = [n // 2] if n > 2 else []
    for cell in list(hazards) + [goal, start]:
        if not 0 <= cell < n:
            raise ParamError(f"cell {cell} outside the {size}x{size} grid")

    def step(cell, move):
        r, c = divmod(cell, size)
        dr, dc = GRID_MOVES[move]
        r2, c2 = r + dr, c + dc
        if 0 <= r2 < size and 0 <= c2 < size:
            return r2 * size + c2
        return cell

    kernel = np.zeros((n, 4, n))
    for cell in range(n):
        for a in range(4):
            if cell == goal and n > 1:
                kernel[cell, a, start] = 1.0
                continue
            kernel[cell, a, step(cell, a)] += 1.0 - slip
            for m in range(4):
                kernel[cell, a, step(cell, m)] += slip / 4.0
    cost = np.ones((n, 4))
    cost[goal] = 0.0
    hazard = np.zeros((n, 4))
    hazard[list(hazards)] = 1.0
    init = np.zeros(n)
    init[start] = 1.0
    return TabularRcmdp(cost, (hazard,), [threshold], kernel, init)


GENERATORS = {"random-garnet": garnet, "garnet": garnet, "gridworld": gridworld}


def generate_instance(kind, params=None, seed=0):
    params = dict(params or {})
    if kind in ("random-garnet", "garnet"):
        try:
            return garnet(seed=seed, **params)
        except TypeError as exc:
            raise ParamError(str(exc)) from None
    if kind == "gridworld":
        try:
            return gridworld(**params)
        except TypeError as exc:
            raise ParamError(str(exc)) from None
    raise ParamError(f"unknown instance kind {kind!r}")


def instance_to_dict(mdp: TabularRcmdp):
    return {
        "n_states": mdp.n_states,
        "n_actions": mdp.n_actions,
        "cost": mdp.cost.tolist(),
        "constraints": [c.tolist() for c in mdp.constraints],
        "thresholds": mdp.thresholds.tolist(),
        "nominal_kernel": mdp.nominal_kernel.tolist(),
        "initial_dist": mdp.initial_dist.tolist(),
    }


def _field(d, name):
    if name not in d:
        raise ParseError("missing required field", field=name)
    return d[name]


def instance_from_dict(d):
    if not isinstance(d, dict):
        raise ParseError("instance must be a JSON object")
    try:
        mdp = TabularRcmdp(
            np.asarray(_field(d, "cost"), dtype=float),
            tuple(np.asarray(c, dtype=float) for c in d.get("constraints", [])),
            np.asarray(d.get("thresholds", []), dtype=float),
            np.asarray(_field(d, "nominal_kernel"), dtype=float),
            np.asarray(_field(d, "initial_dist"), dtype=float),
        )
    except (ValueError, TypeError) as exc:
        if isinstance(exc, (StructuralError, ParseError)):
            raise
        raise ParseError(f"malformed array: {exc}") from None
    for key in ("n_states", "n_actions"):
        if key in d and int(d[key]) != getattr(mdp, key):
            raise ParseError(f"declared {key}={d[key]} disagrees with arrays", field=key)
    return mdp


def read_json(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc.msg}", line=exc.lineno) from None


def write_atomic(path, text):
    """Write ``text`` to ``path`` via a temp file in the same directory + rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, obj):
    # json emits shortest round-trip float reprs, so floats reload bit-exactly
    write_atomic(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def load_instance(path):
    return instance_from_dict(read_json(path))


def save_instance(path, mdp):
    write_json(path, instance_to_dict(mdp))


def policy_from_dict(d):
    probs = d.get("probs") if isinstance(d, dict) else d
    if probs is None:
        raise ParseError("missing required field", field="probs")
    try:
        return PolicyTable(np.asarray(probs, dtype=float))
    except ValueError as exc:
        if isinstance(exc, StructuralError):
            raise
        raise ParseError(f"malformed policy: {exc}", field="probs") from None


def load_policy(path):
    return policy_from_dict(read_json(path))


def save_policy(path, policy):
    write_json(path, {"probs": policy.probs.tolist()})
