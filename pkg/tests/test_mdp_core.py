import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rcmdp.errors import ErgodicityWarning, SingularChain, StructuralError
from rcmdp.mdp_core import (FixedKernel, IndexedSignal, PolicyTable, TabularRcmdp, chain_structure,
                            evaluate_fixed, stationary_distribution, validate)

from conftest import random_mdp, random_policy, single_kernel_mdp


def one_action(chain):
    return FixedKernel(np.asarray(chain, dtype=float)[:, None, :])


def test_construction_rejects_bad_rows():
    with pytest.raises(StructuralError):
        TabularRcmdp([[0.5]], (), [], [[[0.9]]], [1.0])
    with pytest.raises(StructuralError):
        TabularRcmdp([[1.5]], (), [], [[[1.0]]], [1.0])
    with pytest.raises(StructuralError):
        TabularRcmdp([[0.5]], (), [], [[[1.0]]], [0.7])
    with pytest.raises(StructuralError):
        PolicyTable([[0.6, 0.6]])


def test_arrays_are_immutable():
    mdp = single_kernel_mdp([[1.0]])
    with pytest.raises(ValueError):
        mdp.cost[0, 0] = 1.0


def test_signal_indexing(two_state_constrained):
    mdp = two_state_constrained
    assert np.array_equal(mdp.signal(0).values, mdp.cost)
    assert np.array_equal(mdp.signal(1).values, mdp.constraints[0])
    with pytest.raises(IndexError):
        mdp.signal(2)


class TestValidate:
    def test_mixing_chain_passes(self):
        mdp = single_kernel_mdp([[0.5, 0.5], [0.5, 0.5]])
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            report = validate(mdp)
        assert report.ok
        assert all(c.irreducible and c.aperiodic for c in report.checks)

    def test_identity_kernel_is_reducible(self):
        mdp = single_kernel_mdp(np.eye(2))
        with pytest.warns(ErgodicityWarning):
            report = validate(mdp)
        assert not report.checks[0].irreducible

    def test_two_cycle_is_periodic(self):
        mdp = single_kernel_mdp([[0.0, 1.0], [1.0, 0.0]])
        with pytest.warns(ErgodicityWarning):
            report = validate(mdp)
        assert report.checks[0].irreducible and not report.checks[0].aperiodic

    def test_policy_count(self, rng):
        mdp = random_mdp(rng, 6, 3)
        report = validate(mdp)
        # uniform + min(32, 3**6) sampled deterministic policies
        assert len(report.checks) == 33
        small = random_mdp(rng, 2, 2)
        assert len(validate(small).checks) == 1 + 4

    def test_stochasticity_violation_raises(self):
        mdp = single_kernel_mdp([[0.5, 0.5], [0.5, 0.5]])
        object.__setattr__(mdp, "nominal_kernel", np.array([[[0.5, 0.4]], [[0.5, 0.5]]]))
        with pytest.raises(StructuralError):
            validate(mdp)

    def test_single_state(self):
        assert validate(single_kernel_mdp([[1.0]])).ok

    def test_chain_structure_gcd(self):
        # cycles of length 2 and 3 through state 0: gcd 1, aperiodic
        chain = np.zeros((4, 4))
        chain[0, 1] = chain[0, 2] = 0.5
        chain[1, 0] = 1.0
        chain[2, 3] = 1.0
        chain[3, 0] = 1.0
        assert chain_structure(chain) == (True, True)


class TestStationary:
    def test_symmetric(self):
        d = stationary_distribution(one_action([[0.5, 0.5], [0.5, 0.5]]), PolicyTable([[1.0], [1.0]]))
        np.testing.assert_allclose(d, [0.5, 0.5], atol=1e-14)

    def test_two_state_hand_solution(self):
        # d0 * 0.1 = d1 * 0.5 with d0 + d1 = 1
        d = stationary_distribution(one_action([[0.9, 0.1], [0.5, 0.5]]), PolicyTable([[1.0], [1.0]]))
        np.testing.assert_allclose(d, [5 / 6, 1 / 6], atol=1e-14)

    def test_single_state(self):
        d = stationary_distribution(one_action([[1.0]]), PolicyTable([[1.0]]))
        assert d.tolist() == [1.0]

    def test_matches_matrix_power(self, rng):
        mdp = random_mdp(rng, 5, 3)
        pol = random_policy(rng, 5, 3)
        kern = mdp.kernel()
        d = stationary_distribution(kern, pol)
        chain = kern.induced_chain(pol)
        power = np.linalg.matrix_power(chain, 512)
        np.testing.assert_allclose(d, power[0], atol=1e-12)
        assert np.abs(d @ chain - d).max() <= 1e-10

    def test_reducible_raises(self):
        with pytest.raises(SingularChain):
            stationary_distribution(one_action(np.eye(2)), PolicyTable([[1.0], [1.0]]))


class TestEvaluateFixed:
    def test_constant_signal(self, rng):
        mdp = random_mdp(rng, 4, 2)
        g, v = evaluate_fixed(mdp.kernel(), random_policy(rng, 4, 2), np.full((4, 2), 0.3))
        assert g == pytest.approx(0.3, abs=1e-14)
        np.testing.assert_allclose(v, 0.0, atol=1e-13)

    def test_single_state_two_actions(self):
        kern = FixedKernel(np.ones((1, 2, 1)))
        g, v = evaluate_fixed(kern, PolicyTable([[0.5, 0.5]]), IndexedSignal(0, [[0.2, 0.8]]))
        assert g == pytest.approx(0.5, abs=1e-15)
        assert v.tolist() == [0.0]

    def test_two_state_poisson_by_hand(self):
        # g = d . [0, 1] = 1/6; row 0 with V0 = 0 gives 0 = -1/6 + 0.1 V1
        g, v = evaluate_fixed(one_action([[0.9, 0.1], [0.5, 0.5]]), PolicyTable([[1.0], [1.0]]),
                              np.array([[0.0], [1.0]]))
        assert g == pytest.approx(1 / 6, abs=1e-14)
        np.testing.assert_allclose(v, [0.0, 5 / 3], atol=1e-13)

    def test_poisson_residual_and_gain_formula(self, rng):
        mdp = random_mdp(rng, 6, 3)
        pol = random_policy(rng, 6, 3)
        kern = mdp.kernel()
        g, v = evaluate_fixed(kern, pol, mdp.signal(0), anchor=0)
        r_pi = (pol.probs * mdp.cost).sum(1)
        chain = kern.induced_chain(pol)
        assert np.abs(r_pi - g + chain @ v - v).max() <= 1e-9
        assert g == pytest.approx(stationary_distribution(kern, pol) @ r_pi, abs=1e-12)
        assert v[0] == 0.0

    def test_gain_independent_of_start_state(self):
        # long-run empirical averages from two start states agree with g
        rng = np.random.default_rng(0)
        chain = np.array([[0.9, 0.1, 0.0], [0.2, 0.5, 0.3], [0.3, 0.0, 0.7]])
        signal = np.array([0.1, 0.9, 0.4])
        g, _ = evaluate_fixed(one_action(chain), PolicyTable(np.ones((3, 1))), signal[:, None])
        steps = 200_000
        for start in (0, 2):
            s, total = start, 0.0
            u = rng.random(steps)
            cdf = np.cumsum(chain, axis=1)
            for k in range(steps):
                total += signal[s]
                s = int(np.searchsorted(cdf[s], u[k], side="right"))
            # mixing-time-inflated standard error is well below this tolerance
            assert total / steps == pytest.approx(g, abs=0.01)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31), shift=st.floats(-0.3, 0.3), anchor=st.integers(0, 3))
def test_signal_shift_moves_gain_only(seed, shift, anchor):
    rng = np.random.default_rng(seed)
    mdp = random_mdp(rng, 4, 2)
    pol = random_policy(rng, 4, 2)
    sig = 0.35 + 0.3 * rng.random((4, 2))
    g1, v1 = evaluate_fixed(mdp.kernel(), pol, sig, anchor)
    g2, v2 = evaluate_fixed(mdp.kernel(), pol, sig + shift, anchor)
    assert g2 - g1 == pytest.approx(shift, abs=1e-12)
    np.testing.assert_allclose(v1, v2, atol=1e-11)
    assert v1[anchor] == 0.0
