"""Exact verification engine on trees: pins, cross-routes, and failure modes."""

import math

import numpy as np
import pytest

import oracles
from forwardperf.fields import ExponentialFieldParams, entropy_kernel, exponential_slice
from forwardperf.tree_market import (
    TreeMeasure,
    density_process,
    enumerate_product_measures,
    measure_from_leaf_masses,
    reference_measure,
)
from forwardperf.tree_verifier import (
    check_exponential_conditions,
    check_forward_supermartingale,
    check_self_generation_dual,
    check_self_generation_primal,
    check_value_conjugacy,
    dual_value,
    entropy,
    forward_measure,
    min_entropy,
    primal_value,
    replicate_inverse_gamma,
    solve_entropy_shift,
)
from treegen import (
    binomial_tree,
    constant_field,
    random_tree,
    replicable_gamma,
    solved_field,
    trinomial_tree,
    two_period_tree,
    uniform_trinomial_tree,
)


def const_map(tree, val):
    return {nid: val for nid in tree._dfs_order}


# -- replication of 1/gamma ----------------------------------------------


def test_replicate_constant_gamma():
    tree = two_period_tree()
    res = replicate_inverse_gamma(tree, const_map(tree, 1.7))
    assert res.feasible
    assert res.psi == {"r": 0.0, "a": 0.0, "b": 0.0}
    assert res.residual == 0.0


def test_replicate_binomial_pin():
    tree = binomial_tree()  # d = (+1, -1)
    gamma = {"r": 0.5, "u": 1.0 / 2.5, "d": 1.0 / 1.5}
    res = replicate_inverse_gamma(tree, gamma)
    assert res.feasible
    assert res.psi["r"] == pytest.approx(0.5, abs=1e-14)


def test_replicate_infeasible_trinomial():
    tree = trinomial_tree()  # d = (1, 0, -1)
    gamma = {"r": 0.5, "u": 1.0 / 2.5, "m": 1.0 / 2.2, "d": 1.0 / 1.5}
    res = replicate_inverse_gamma(tree, gamma)
    assert not res.feasible
    assert res.failed_node == "r"
    assert res.residual == pytest.approx(0.2, abs=1e-12)
    assert res.psi is None


def test_replicate_rejects_bad_gamma():
    tree = binomial_tree()
    with pytest.raises(ValueError, match="positive"):
        replicate_inverse_gamma(tree, {"r": 0.0, "u": 1.0, "d": 1.0})


def test_random_replicable_gamma_is_replicable():
    for seed in range(5):
        tree = random_tree(seed)
        gamma, psi = replicable_gamma(tree, seed)
        res = replicate_inverse_gamma(tree, gamma)
        assert res.feasible
        assert res.residual <= 1e-10
        for nid, val in psi.items():
            assert res.psi[nid] == pytest.approx(val, abs=1e-12)


# -- primal values -------------------------------------------------------


def test_primal_symmetric_binomial():
    tree = binomial_tree(p_up=0.5)
    field = constant_field(tree)
    res = primal_value(tree, field, 0.7)
    assert res.method == "exponential"
    assert res.values["r"] == pytest.approx(-math.exp(-0.7), rel=1e-12)
    assert res.policy["r"] == pytest.approx(0.0, abs=1e-9)


def test_primal_binomial_pin():
    tree = binomial_tree()
    field = constant_field(tree)
    res = primal_value(tree, field, 0.0)
    assert res.values["r"] == pytest.approx(-0.8, abs=1e-10)
    assert res.log_factor["r"] == pytest.approx(math.log(0.8), abs=1e-10)
    assert res.policy["r"] == pytest.approx(0.5 * math.log(4.0), abs=1e-8)


def test_primal_trinomial_pin():
    tree = trinomial_tree()
    field = constant_field(tree)
    res = primal_value(tree, field, 0.0)
    want = -(0.3 + 2.0 * math.sqrt(0.1))
    assert res.values["r"] == pytest.approx(want, abs=1e-9)
    assert res.policy["r"] == pytest.approx(0.5 * math.log(2.5), abs=1e-8)


def test_primal_factor_matches_scipy_oracle():
    tree = trinomial_tree()
    gamma = const_map(tree, 1.4)
    a = {"r": 0.0, "u": 0.2, "m": -0.1, "d": 0.3}
    field = ExponentialFieldParams(gamma=gamma, a_shift=a)
    res = primal_value(tree, field, 0.0)
    _, want = oracles.one_step_factor(
        (0.5, 0.3, 0.2), (1.0, 0.0, -1.0), (1.4, 1.4, 1.4), (0.2, -0.1, 0.3)
    )
    assert math.exp(res.log_factor["r"]) == pytest.approx(want, abs=1e-10)


def test_primal_grid_route_matches_exponential():
    tree = two_period_tree()
    field = solved_field(tree, seed=3)
    fast = primal_value(tree, field, 0.4)
    slices = {nid: field.slice_at(nid) for nid in tree._dfs_order}
    grid = primal_value(tree, slices, 0.4)
    assert fast.method == "exponential"
    assert grid.method == "grid"
    assert grid.grid_error is not None
    for n in ("r",):
        assert grid.values[n] == pytest.approx(fast.values[n], abs=5e-7)
        assert abs(grid.values[n] - fast.values[n]) <= 20.0 * max(grid.grid_error, 1e-9)


def test_primal_grid_rejects_offgrid_wealth():
    tree = binomial_tree()
    slices = {nid: exponential_slice(1.0, 0.0) for nid in tree._dfs_order}
    with pytest.raises(ValueError):
        primal_value(tree, slices, 25.0)


def test_primal_per_node_wealth():
    tree = two_period_tree()
    field = solved_field(tree, seed=4)
    res = primal_value(tree, field, {"a": 0.5, "b": -0.5}, t=1, T=2)
    for n, x in (("a", 0.5), ("b", -0.5)):
        want = -math.exp(-field.gamma[n] * x + field.a_shift[n])
        assert res.values[n] == pytest.approx(want, rel=1e-9)


def test_primal_window_validation():
    tree = two_period_tree()
    field = constant_field(tree)
    with pytest.raises(ValueError):
        primal_value(tree, field, 0.0, t=2, T=1)
    with pytest.raises(ValueError):
        primal_value(tree, field, 0.0, t=0, T=5)


def test_primal_exponential_separation():
    # u(xi; t, T) / U(t, xi) constant in xi on the fast path
    tree = two_period_tree()
    field = solved_field(tree, seed=5)
    xs = np.linspace(-3.0, 3.0, 9)
    ratios = []
    for x in xs:
        res = primal_value(tree, field, float(x))
        u_slice = -math.exp(-field.gamma["r"] * float(x) + field.a_shift["r"])
        ratios.append(res.values["r"] / u_slice)
    ratios = np.array(ratios)
    assert np.max(np.abs(ratios - ratios[0])) <= 1e-9 * abs(ratios[0])


# -- dual values ---------------------------------------------------------


def test_dual_binomial_pin():
    tree = binomial_tree()
    field = constant_field(tree)
    res = dual_value(tree, field, 1.0)
    want = 0.8 * entropy_kernel(0.625) + 0.2 * entropy_kernel(2.5)
    assert want == pytest.approx(-1.0 - math.log(0.8), abs=1e-12)
    assert res.values["r"] == pytest.approx(want, abs=1e-8)
    q = res.minimizer["r"]
    assert q.at("r")[0] == pytest.approx(0.5, abs=1e-7)
    assert res.kkt_residual["r"] <= 1e-8
    assert not res.near_boundary["r"]


def test_dual_uniform_trinomial_pin():
    tree = uniform_trinomial_tree()
    field = constant_field(tree)
    res = dual_value(tree, field, 1.0)
    assert res.values["r"] == pytest.approx(-1.0, abs=1e-8)
    # minimizer is P itself: alpha = 2/3 on the (1/2, 0, 1/2) vertex
    np.testing.assert_allclose(res.minimizer["r"].at("r"), [1/3, 1/3, 1/3], atol=1e-6)


def test_dual_trinomial_matches_1d_oracle():
    tree = trinomial_tree()
    field = constant_field(tree)
    res = dual_value(tree, field, 1.0)
    b_star, want = oracles.symmetric_trinomial_dual_min((0.5, 0.3, 0.2))
    assert res.values["r"] == pytest.approx(want, abs=1e-8)
    assert res.minimizer["r"].at("r")[0] == pytest.approx(b_star, abs=1e-6)


def test_dual_generic_field_matches_exponential():
    # the slice-based route must agree with the closed-form route
    tree = trinomial_tree()
    field = solved_field(tree, seed=6)
    slices = {nid: field.slice_at(nid) for nid in tree._dfs_order}
    a = dual_value(tree, field, 1.5)
    b = dual_value(tree, slices, 1.5)
    assert b.values["r"] == pytest.approx(a.values["r"], abs=1e-6)


def test_dual_terminal_window_is_conjugate():
    tree = binomial_tree()
    field = solved_field(tree, seed=7)
    res = dual_value(tree, field, 2.0, t=1, T=1)
    for n in ("u", "d"):
        want = entropy_kernel(2.0 / field.gamma[n]) - (2.0 / field.gamma[n]) * field.a_shift[n]
        assert res.values[n] == pytest.approx(want, rel=1e-12)


def test_dual_eta_zero_paths():
    tree = binomial_tree()
    res = dual_value(tree, constant_field(tree), 0.0)
    assert res.values["r"] == 0.0
    slices = {nid: exponential_slice(1.0, 0.0) for nid in tree._dfs_order}
    with pytest.raises(ValueError, match="outside the validated regime"):
        dual_value(tree, slices, 0.0)
    with pytest.raises(ValueError, match="nonnegative"):
        dual_value(tree, constant_field(tree), -1.0)


def test_dual_near_boundary_flag():
    # huge shifts on the outer leaves pull the minimizer to the (1/2, 0, 1/2) vertex
    tree = uniform_trinomial_tree()
    field = ExponentialFieldParams(
        gamma=const_map(tree, 1.0),
        a_shift={"r": 0.0, "u": 20.0, "m": 0.0, "d": 20.0},
    )
    res = dual_value(tree, field, 1.0)
    assert res.near_boundary["r"]
    assert res.minimizer["r"].at("r")[1] == pytest.approx(0.0, abs=1e-5)
    assert res.minimizer["r"].at("r")[0] == pytest.approx(0.5, abs=1e-5)


def test_dual_minimizer_roundtrip():
    # leaf masses -> measure -> density -> masses, plus martingale residual
    tree = two_period_tree()
    field = solved_field(tree, seed=8)
    res = dual_value(tree, field, 1.0)
    q = res.minimizer["r"]
    interior = [n for n in tree._dfs_order if not tree.is_leaf(n)]
    assert q.martingale_residual(tree, interior) <= 1e-8
    masses = {w: q.node_mass(tree, w) for w in tree.leaves()}
    assert sum(masses.values()) == pytest.approx(1.0, abs=1e-9)
    rebuilt = measure_from_leaf_masses(tree, "r", 2, masses)
    z = density_process(tree, rebuilt)
    for w in tree.leaves():
        p_w = tree.cond_prob("r", w)
        assert z.at(w) * p_w == pytest.approx(masses[w], abs=1e-10)


def test_dual_scaling_consistency():
    # v(eta) = (eta + h(eta)) / gamma + eta * minH for constant-gamma solved fields
    tree = trinomial_tree()
    gamma = const_map(tree, 1.6)
    a = solve_entropy_shift(tree, gamma, 0.0)
    field = ExponentialFieldParams(gamma=gamma, a_shift=a)
    ent = min_entropy(tree, gamma, a)
    for e in (0.5, 1.0, 2.0):
        res = dual_value(tree, field, e)
        want = (e + entropy_kernel(e)) / 1.6 + e * ent.values["r"]
        assert res.values["r"] == pytest.approx(want, abs=1e-8)


# -- entropy -------------------------------------------------------------


def test_entropy_reference_measure_pin():
    tree = uniform_trinomial_tree()
    res = entropy(tree, const_map(tree, 1.0), const_map(tree, 0.0), reference_measure(tree))
    assert res.values["r"] == pytest.approx(-1.0, rel=1e-14)


def test_entropy_vertex_pin():
    tree = uniform_trinomial_tree()
    q = TreeMeasure(cond={"r": (0.5, 0.0, 0.5)})
    res = entropy(tree, const_map(tree, 1.0), const_map(tree, 0.0), q)
    assert res.values["r"] == pytest.approx((2.0 / 3.0) * entropy_kernel(1.5), rel=1e-12)


def test_entropy_constant_shift_pin():
    tree = uniform_trinomial_tree()
    c = 0.7
    res = entropy(tree, const_map(tree, 1.0), const_map(tree, c), reference_measure(tree))
    assert res.values["r"] == pytest.approx(-1.0 - c, rel=1e-12)


def test_min_entropy_equals_dual_at_unit_argument():
    tree = two_period_tree()
    field = solved_field(tree, seed=9)
    ent = min_entropy(tree, field.gamma, field.a_shift)
    dual = dual_value(tree, field, 1.0)
    assert ent.values["r"] == pytest.approx(dual.values["r"], abs=1e-12)


def test_min_entropy_below_any_vertex():
    tree = trinomial_tree()
    gamma = const_map(tree, 1.0)
    a = const_map(tree, 0.0)
    ent = min_entropy(tree, gamma, a)
    for q in enumerate_product_measures(tree):
        res = entropy(tree, gamma, a, q)
        assert ent.values["r"] <= res.values["r"] + 1e-9


# -- entropy shift construction ------------------------------------------


def test_solve_shift_binomial_pin():
    tree = binomial_tree()
    a = solve_entropy_shift(tree, const_map(tree, 1.0), 0.0)
    assert a["r"] == pytest.approx(math.log(0.8), abs=1e-9)
    assert a["u"] == 0.0 and a["d"] == 0.0


def test_solve_shift_trinomial_matches_kl_oracle():
    tree = trinomial_tree()
    a = solve_entropy_shift(tree, const_map(tree, 1.0), 0.0)
    _, kl = oracles.symmetric_trinomial_kl_min((0.5, 0.3, 0.2))
    # at gamma = 1, A_T = 0 the root shift is minus the classical KL minimum
    assert a["r"] == pytest.approx(-kl, abs=1e-8)


def test_solve_shift_symmetric_market_zero():
    tree = binomial_tree(p_up=0.5)
    a = solve_entropy_shift(tree, const_map(tree, 1.0), 0.0)
    assert a["r"] == pytest.approx(0.0, abs=1e-10)


def test_solve_shift_consistent_over_windows():
    for seed in (11, 12, 13):
        tree = random_tree(seed)
        field = solved_field(tree, seed)
        pairs = [(t, T) for t in range(tree.horizon) for T in range(t + 1, tree.horizon + 1)]
        rep = check_exponential_conditions(tree, field.gamma, field.a_shift, pairs, tol=1e-9)
        assert rep.all_passed, rep.to_text()


def test_solve_shift_refuses_2b_violation():
    tree = trinomial_tree()
    gamma = {"r": 0.5, "u": 1.0 / 2.5, "m": 1.0 / 2.2, "d": 1.0 / 1.5}
    with pytest.raises(ValueError, match="r"):
        solve_entropy_shift(tree, gamma, 0.0)


def test_solve_shift_rejects_bad_gamma():
    tree = binomial_tree()
    with pytest.raises(ValueError, match="positive"):
        solve_entropy_shift(tree, {"r": 1.0, "u": -1.0, "d": 1.0}, 0.0)


# -- self-generation checks ----------------------------------------------


def test_self_generation_clean_field_passes():
    tree = two_period_tree()
    field = solved_field(tree, seed=21)
    pairs = [(0, 1), (0, 2), (1, 2)]
    rep_p = check_self_generation_primal(tree, field, pairs, [-1.0, 0.0, 2.0])
    rep_d = check_self_generation_dual(tree, field, pairs, [0.5, 1.0, 2.0])
    assert rep_p.all_passed, rep_p.to_text()
    assert rep_d.all_passed, rep_d.to_text()
    assert rep_p["primal-self-generation"].value <= 1e-9
    assert rep_d["dual-self-generation"].value <= 1e-7


def test_self_generation_detects_root_perturbation():
    tree = two_period_tree()
    field = solved_field(tree, seed=22).with_offsets({"r": 0.1})
    pairs = [(0, 1), (0, 2), (1, 2)]
    rep_p = check_self_generation_primal(tree, field, pairs, [0.0])
    rep_d = check_self_generation_dual(tree, field, pairs, [1.0])
    assert not rep_p.all_passed
    assert not rep_d.all_passed
    # gap in shift units is exactly the perturbation
    assert rep_p["primal-self-generation"].value == pytest.approx(0.1, abs=1e-9)
    assert rep_d["dual-self-generation"].value == pytest.approx(0.1, abs=1e-7)
    # the window that excludes the root stays clean
    assert rep_p["primal-self-generation[t=1,T=2]"].verdict
    assert rep_d["dual-self-generation[t=1,T=2]"].verdict


# -- conjugacy between computed fields -----------------------------------


def test_conjugacy_clean_field():
    tree = two_period_tree()
    field = solved_field(tree, seed=23)
    rep = check_value_conjugacy(tree, field, 0, 2, [-1.0, 0.0, 1.0], [0.5, 1.0, 2.0])
    assert rep.all_passed, rep.to_text()


def test_conjugacy_foc_pin_binomial():
    # solved binomial at xi = 0: u(0) = -0.8, so the attaining eta is 0.8
    tree = binomial_tree()
    gamma = const_map(tree, 1.0)
    a = solve_entropy_shift(tree, gamma, 0.0)
    field = ExponentialFieldParams(gamma=gamma, a_shift=a)
    rep = check_value_conjugacy(tree, field, 0, 1, [0.0], [0.5, 1.0, 2.0])
    assert rep.all_passed
    eta_hat = rep["conjugacy-primal-from-dual[t=0,T=1]"].details["eta_hat"]["r"]
    assert eta_hat == pytest.approx(0.8, abs=1e-5)


def test_conjugacy_foc_pin_uniform_trinomial():
    tree = uniform_trinomial_tree()
    field = constant_field(tree)
    rep = check_value_conjugacy(tree, field, 0, 1, [0.0], [0.5, 1.0, 2.0])
    assert rep.all_passed
    eta_hat = rep["conjugacy-primal-from-dual[t=0,T=1]"].details["eta_hat"]["r"]
    assert eta_hat == pytest.approx(1.0, abs=1e-5)


def test_conjugacy_foc_matches_marginal():
    # the attaining eta equals u'(xi) by finite differences on the computed primal
    tree = two_period_tree()
    field = solved_field(tree, seed=24)
    xi = 0.3
    rep = check_value_conjugacy(tree, field, 0, 2, [xi], [0.5, 1.0, 2.0])
    eta_hat = rep["conjugacy-primal-from-dual[t=0,T=2]"].details["eta_hat"]["r"]
    eps = 1e-5
    up = primal_value(tree, field, xi + eps).values["r"]
    dn = primal_value(tree, field, xi - eps).values["r"]
    assert eta_hat == pytest.approx((up - dn) / (2 * eps), rel=1e-3)


def test_conjugacy_requires_fast_path():
    tree = trinomial_tree()
    gamma = {"r": 0.5, "u": 1.0 / 2.5, "m": 1.0 / 2.2, "d": 1.0 / 1.5}
    field = ExponentialFieldParams(gamma=gamma, a_shift=const_map(tree, 0.0))
    with pytest.raises(ValueError, match="fast path"):
        check_value_conjugacy(tree, field, 0, 1, [0.0], [1.0])


def test_weak_duality_any_field():
    # u(xi) <= v(eta) + xi eta even for fields that are not self-generating
    for seed in (31, 32):
        tree = random_tree(seed)
        gamma, _ = replicable_gamma(tree, seed)
        rng = np.random.default_rng(seed)
        a = {nid: float(rng.uniform(-0.5, 0.5)) for nid in tree._dfs_order}
        field = ExponentialFieldParams(gamma=gamma, a_shift=a)
        xis = np.linspace(-2.0, 2.0, 7)
        etas = np.logspace(-1, 1, 7)
        for xi in xis:
            u = primal_value(tree, field, float(xi)).values[tree.root]
            for eta in etas:
                v = dual_value(tree, field, float(eta)).values[tree.root]
                assert v + float(xi) * float(eta) - u >= -1e-9


# -- exponential conditions ----------------------------------------------


def test_exponential_conditions_clean():
    tree = two_period_tree()
    field = solved_field(tree, seed=25)
    pairs = [(0, 1), (0, 2), (1, 2)]
    rep = check_exponential_conditions(tree, field.gamma, field.a_shift, pairs)
    assert rep.all_passed, rep.to_text()
    assert rep["exp-condition-inverse-gamma-martingale"].value <= 1e-10
    assert rep["exp-condition-entropy-identity"].value <= 1e-8


def test_exponential_conditions_flag_perturbation():
    tree = two_period_tree()
    field = solved_field(tree, seed=26).with_offsets({"r": 0.1})
    rep = check_exponential_conditions(tree, field.gamma, field.a_shift, [(0, 2)])
    assert not rep.all_passed
    rec = rep["exp-condition-entropy-identity[t=0,T=2]"]
    assert not rec.verdict
    assert rec.value == pytest.approx(0.1, abs=1e-7)
    # the 1/gamma martingale condition does not see shifts
    assert rep["exp-condition-inverse-gamma-martingale[t=0,T=2]"].verdict


def test_exponential_conditions_2b_example():
    # unique martingale measure is (1/2, 1/2); leaves 1/gamma = (2.5, 1.5)
    # average to 2.0, so root 1/gamma = 2 passes and 4/3 fails by 2/3
    tree = binomial_tree(p_up=0.5)
    ok_gamma = {"r": 0.5, "u": 1.0 / 2.5, "d": 1.0 / 1.5}
    rep = check_exponential_conditions(tree, ok_gamma, const_map(tree, 0.0), [(0, 1)])
    assert rep["exp-condition-inverse-gamma-martingale[t=0,T=1]"].verdict
    bad_gamma = {"r": 0.75, "u": 1.0 / 2.5, "d": 1.0 / 1.5}
    rep = check_exponential_conditions(tree, bad_gamma, const_map(tree, 0.0), [(0, 1)])
    rec = rep["exp-condition-inverse-gamma-martingale[t=0,T=1]"]
    assert not rec.verdict
    assert rec.value == pytest.approx(2.0 / 3.0, abs=1e-9)

def test_exponential_conditions_positivity():
    tree = binomial_tree()
    gamma = {"r": 1.0, "u": -1.0, "d": 1.0}
    rep = check_exponential_conditions(tree, gamma, const_map(tree, 0.0), [])
    assert not rep["exp-condition-positivity"].verdict
    assert rep["exp-condition-positivity"].worst_node == "u"


# -- forward measure -----------------------------------------------------


def test_forward_measure_weights_pin():
    tree = binomial_tree(p_up=0.5)
    q = TreeMeasure(cond={"r": (0.5, 0.5)})
    gamma = {"r": 0.5, "u": 1.0 / 2.5, "d": 1.0 / 1.5}
    fwd = forward_measure(tree, q, gamma)
    assert fwd.node_mass(tree, "u") == pytest.approx(0.625, abs=1e-12)
    assert fwd.node_mass(tree, "d") == pytest.approx(0.375, abs=1e-12)


def test_forward_measure_refuses_2b_violation():
    tree = binomial_tree(p_up=0.5)
    q = TreeMeasure(cond={"r": (0.5, 0.5)})
    gamma = {"r": 2.0, "u": 1.0 / 2.5, "d": 1.0 / 1.5}
    with pytest.raises(ValueError, match="inverse-gamma"):
        forward_measure(tree, q, gamma)


def test_forward_measure_of_reference_under_constant_gamma():
    tree = two_period_tree()
    q = enumerate_product_measures(tree)[0]
    fwd = forward_measure(tree, q, const_map(tree, 1.3))
    for w in tree.leaves():
        assert fwd.node_mass(tree, w) == pytest.approx(q.node_mass(tree, w), abs=1e-12)


# -- forward supermartingale ---------------------------------------------


def test_forward_supermartingale_clean():
    tree = two_period_tree()
    field = solved_field(tree, seed=27)
    for (t, T) in ((0, 1), (0, 2), (1, 2)):
        rep = check_forward_supermartingale(tree, field.gamma, field.a_shift, t, T)
        assert rep.all_passed, rep.to_text()
        assert rep[f"forward-martingale-at-optimum[t={t},T={T}]"].value <= 1e-8


def test_forward_supermartingale_perturbation():
    tree = two_period_tree()
    field = solved_field(tree, seed=28).with_offsets({"r": 0.1})
    rep = check_forward_supermartingale(tree, field.gamma, field.a_shift, 0, 2)
    # the inequality direction still holds; only the equality at the
    # entropy minimizer breaks, by exactly the perturbation
    assert rep["forward-supermartingale[t=0,T=2]"].verdict
    rec = rep["forward-martingale-at-optimum[t=0,T=2]"]
    assert not rec.verdict
    assert rec.value == pytest.approx(0.1, abs=1e-7)


def test_forward_supermartingale_guards():
    tree = two_period_tree()
    field = solved_field(tree, seed=29)
    with pytest.raises(ValueError, match="nondegenerate"):
        check_forward_supermartingale(tree, field.gamma, field.a_shift, 1, 1)
    bad = dict(field.gamma)
    bad["a1"] = -1.0
    with pytest.raises(ValueError, match="positive"):
        check_forward_supermartingale(tree, bad, field.a_shift, 0, 2)
    non2b = {"r": 0.5, "u": 1.0 / 2.5, "m": 1.0 / 2.2, "d": 1.0 / 1.5}
    with pytest.raises(ValueError):
        check_forward_supermartingale(
            trinomial_tree(), non2b, {n: 0.0 for n in non2b}, 0, 1
        )
