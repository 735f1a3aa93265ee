import os

import numpy as np
import pytest

from rcmdp.instances import load_instance
from rcmdp.mdp_core import PolicyTable, TabularRcmdp

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


def fixture_path(name):
    return os.path.join(FIXTURES, name)


def random_mdp(rng, n_states, n_actions, n_constraints=0, full_support=True):
    if full_support:
        kernel = rng.dirichlet(np.ones(n_states), size=(n_states, n_actions))
    else:
        kernel = rng.dirichlet(np.ones(n_states) * 0.3, size=(n_states, n_actions))
    cons = tuple(rng.random((n_states, n_actions)) for _ in range(n_constraints))
    return TabularRcmdp(rng.random((n_states, n_actions)), cons, [0.5] * n_constraints, kernel,
                        np.full(n_states, 1.0 / n_states))


def random_policy(rng, n_states, n_actions):
    return PolicyTable(rng.dirichlet(np.ones(n_actions), size=n_states))


def single_kernel_mdp(chain, signal=None):
    """MDP with one action whose kernel is ``chain``."""
    chain = np.asarray(chain, dtype=float)
    n = chain.shape[0]
    sig = np.zeros((n, 1)) if signal is None else np.asarray(signal, dtype=float).reshape(n, 1)
    return TabularRcmdp(sig, (), [], chain[:, None, :], np.full(n, 1.0 / n))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def three_state():
    return load_instance(fixture_path("three_state.json"))


@pytest.fixture(scope="session")
def two_state_constrained():
    return load_instance(fixture_path("two_state_constrained.json"))


@pytest.fixture(scope="session")
def two_state_slack():
    return load_instance(fixture_path("two_state_slack.json"))


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
