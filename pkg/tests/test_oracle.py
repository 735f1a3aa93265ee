import itertools

import numpy as np
import pytest

from rcmdp.errors import BudgetExceeded, ConfigError
from rcmdp.mdp_core import FixedKernel, PolicyTable, TabularRcmdp, evaluate_fixed
from rcmdp.oracle import exact_f, grid_optimal, grid_size, robust_evaluate, simplex_grid
from rcmdp.uncertainty import Contamination, TotalVariation, Wasserstein

from bruteforce import members
from conftest import random_mdp, random_policy

RADII = (0.0, 0.1, 0.2, 0.4)


def models(n, r):
    return [Contamination(r), TotalVariation(r), Wasserstein.line_metric(n, r)]


def test_zero_radius_is_nominal(rng):
    mdp = random_mdp(rng, 4, 2)
    pol = random_policy(rng, 4, 2)
    g, v = evaluate_fixed(mdp.kernel(), pol, mdp.cost)
    for m in models(4, 0.0):
        out = robust_evaluate(mdp, pol, mdp.signal(0), m)
        assert out.g == pytest.approx(g, abs=1e-12)
        np.testing.assert_allclose(out.V, v, atol=1e-10)


def test_single_state():
    mdp = TabularRcmdp([[0.3, 0.9]], (), [], np.ones((1, 2, 1)), [1.0])
    out = robust_evaluate(mdp, PolicyTable([[0.5, 0.5]]), mdp.cost, TotalVariation(0.5))
    assert out.g == pytest.approx(0.6) and out.V.tolist() == [0.0]


def test_contamination_vs_vertex_enumeration(three_state):
    # the rectangular set's extreme kernels put the extra mass on one state per (s, a)
    model = Contamination(0.1)
    nominal = np.asarray(three_state.nominal_kernel)
    pol = PolicyTable.uniform(3, 2)
    best = -np.inf
    for choice in itertools.product(range(3), repeat=6):
        trans = 0.9 * nominal.copy()
        for k, j in enumerate(choice):
            trans[k // 2, k % 2, j] += 0.1
        best = max(best, evaluate_fixed(FixedKernel(trans), pol, three_state.cost)[0])
    assert robust_evaluate(three_state, pol, three_state.signal(0), model).g == pytest.approx(best, abs=1e-9)


def test_dominates_nominal_and_monotone_in_radius(rng):
    for _ in range(5):
        mdp = random_mdp(rng, 4, 2)
        pol = random_policy(rng, 4, 2)
        for kind in range(3):
            gs = [robust_evaluate(mdp, pol, mdp.signal(0), models(4, r)[kind]).g for r in RADII]
            assert all(b >= a - 1e-9 for a, b in zip(gs, gs[1:]))


def test_worst_kernel_is_a_member(rng):
    mdp = random_mdp(rng, 3, 2)
    pol = random_policy(rng, 3, 2)
    for m in models(3, 0.25):
        out = robust_evaluate(mdp, pol, mdp.signal(0), m)
        assert out.residual <= 1e-8
        for s in range(3):
            for a in range(2):
                assert members(m, mdp.nominal_kernel[s, a], out.worst_kernel.trans[s, a][None])[0]
        g, _ = evaluate_fixed(out.worst_kernel, pol, mdp.cost)
        assert g == pytest.approx(out.g, abs=1e-12)


class TestExactF:
    def test_matches_components(self, two_state_constrained):
        mdp = two_state_constrained
        pol = PolicyTable.uniform(2, 2)
        model = Contamination(0.1)
        f, active, g = exact_f(mdp, pol, model, lam=80)
        assert g[1] == pytest.approx(robust_evaluate(mdp, pol, mdp.signal(1), model).g)
        assert active == 1 and f == pytest.approx(g[1] - 0.35)

    def test_cost_only(self, three_state):
        mdp = TabularRcmdp(three_state.cost, (), [], three_state.nominal_kernel, three_state.initial_dist)
        f, active, g = exact_f(mdp, PolicyTable.uniform(3, 2), TotalVariation(0.1), lam=4.0)
        assert active == 0 and f == pytest.approx(g[0] / 4.0)


class TestGridOptimal:
    def test_simplex_grid(self):
        pts = simplex_grid(3, 0.25)
        assert len(pts) == 15 and np.allclose(pts.sum(axis=1), 1)
        assert grid_size(2, 3, 0.25) == 15**2
        with pytest.raises(ConfigError):
            simplex_grid(2, 0.3)

    def test_dominant_deterministic_policy(self):
        kern = np.tile([0.5, 0.5], (2, 2, 1))
        mdp = TabularRcmdp([[0.1, 0.9], [0.8, 0.2]], (), [], kern, [0.5, 0.5])
        pol, g0, feasible = grid_optimal(mdp, TotalVariation(0.1), grid_step=0.25)
        assert feasible
        np.testing.assert_array_equal(pol.probs, [[1, 0], [0, 1]])
        # worst rows move 0.1 toward state 1: stationary [0.4, 0.6] on costs [0.1, 0.2]
        assert g0 == pytest.approx(0.16, abs=1e-12)

    def test_infeasible_reports_least_violation(self, two_state_constrained):
        mdp = two_state_constrained
        bad = TabularRcmdp(mdp.cost, mdp.constraints, [-1.0], mdp.nominal_kernel, mdp.initial_dist)
        pol, _, feasible = grid_optimal(bad, Contamination(0.1), grid_step=0.25)
        assert not feasible
        g1 = robust_evaluate(bad, pol, bad.signal(1), Contamination(0.1)).g
        others = [robust_evaluate(bad, PolicyTable(p), bad.signal(1), Contamination(0.1)).g
                  for p in itertools.product(simplex_grid(2, 0.25), repeat=2)]
        assert g1 == pytest.approx(min(others), abs=1e-12)

    def test_unit_step_enumerates_deterministic(self, two_state_constrained):
        mdp = two_state_constrained
        model = Contamination(0.1)
        _, g0, feasible = grid_optimal(mdp, model, grid_step=1.0)
        det = []
        for acts in itertools.product(range(2), repeat=2):
            pol = PolicyTable.deterministic(acts, 2)
            g = [robust_evaluate(mdp, pol, s, model).g for s in mdp.signals()]
            if g[1] <= mdp.thresholds[0]:
                det.append(g[0])
        assert feasible == bool(det)
        if det:
            assert g0 == pytest.approx(min(det))

    def test_refinement_never_hurts(self, two_state_constrained):
        model = Contamination(0.1)
        coarse = grid_optimal(two_state_constrained, model, grid_step=0.5)[1]
        fine = grid_optimal(two_state_constrained, model, grid_step=0.25)[1]
        assert fine <= coarse + 1e-12

    def test_budget(self, rng):
        with pytest.raises(BudgetExceeded) as err:
            grid_optimal(random_mdp(rng, 6, 3), TotalVariation(0.1), grid_step=0.05)
        assert err.value.count == grid_size(6, 3, 0.05)


def test_uniform_row_gain_is_not_mistaken_for_convergence(rng):
    # rows bounded away from 0: TV moves R of mass from argmin V to argmax V in
    # every row, so the nominal V stays a fixed point and g rises by R span(V)
    kern = 0.6 * rng.dirichlet(np.ones(4), size=(4, 2)) + 0.1
    mdp = TabularRcmdp(rng.random((4, 2)), (), [], kern, np.full(4, 0.25))
    pol = random_policy(rng, 4, 2)
    g, v = evaluate_fixed(mdp.kernel(), pol, mdp.cost)
    out = robust_evaluate(mdp, pol, mdp.signal(0), TotalVariation(0.05))
    assert out.g == pytest.approx(g + 0.05 * np.ptp(v), abs=1e-12)
    np.testing.assert_allclose(out.V, v, atol=1e-10)


def relative_value_iteration(mdp, pol, model, iters=5_000):
    from rcmdp.uncertainty import support_values

    nominal = np.asarray(mdp.nominal_kernel)
    n_s, n_a, _ = nominal.shape
    v = np.zeros(n_s)
    for _ in range(iters):
        sig = support_values(model, nominal.reshape(-1, n_s), v).reshape(n_s, n_a)
        tv = (pol.probs * (mdp.cost + sig)).sum(axis=1)
        g, v = tv[0], tv - tv[0]
    return g, v


@pytest.mark.parametrize("kind", range(3))
def test_agrees_with_relative_value_iteration(rng, kind):
    for _ in range(4):
        mdp = random_mdp(rng, 4, 2)
        pol = random_policy(rng, 4, 2)
        model = models(4, 0.2)[kind]
        g, v = relative_value_iteration(mdp, pol, model)
        out = robust_evaluate(mdp, pol, mdp.signal(0), model)
        assert out.g == pytest.approx(g, abs=1e-8)
        np.testing.assert_allclose(out.V, v, atol=1e-7)
