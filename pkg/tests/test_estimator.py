import numpy as np
import pytest

from conftest import M_PRINTED, S_PRINTED, V_TRUE, pattern_zoo
from dscov.errors import InputError, InsufficientDataError
from dscov.estimator import (
    EstimatorOptions,
    SparseCholesky,
    _Problem,
    estimate,
    objective,
    objective_gradient,
    objective_value,
    realize,
    sample_covariance,
    simulate_gaussian,
)
from dscov.graph import build_clique_tree, check_chordal, path_of_cliques
from dscov.local import constraint_residual, is_doubly_sparse
from dscov.synthetic import random_doubly_sparse


@pytest.fixture(scope="module")
def printed_fit():
    from conftest import SIX_EDGES

    g = check_chordal(6, SIX_EDGES)
    t = build_clique_tree(g)
    return g, t, estimate(S_PRINTED, g, t)


def test_parameter_count_and_round_trip(six_graph):
    ch = SparseCholesky(six_graph)
    assert ch.n_params == 6 + len(six_graph.edges)
    x = ch.from_matrix(V_TRUE)
    _, m = realize(ch, x)
    np.testing.assert_allclose(m, V_TRUE, atol=1e-12)


def test_objective_forms_agree(six_graph, six_tree):
    ch = SparseCholesky(six_graph)
    x = ch.from_matrix(V_TRUE)
    dense = np.trace(np.linalg.solve(V_TRUE, S_PRINTED)) + np.linalg.slogdet(V_TRUE)[1]
    assert objective(x, ch, S_PRINTED, six_tree) == pytest.approx(dense, rel=1e-12)
    assert objective_value(V_TRUE, S_PRINTED, six_tree) == pytest.approx(dense, rel=1e-12)


def test_gradients_match_finite_differences(six_graph, six_tree):
    rng = np.random.default_rng(0)
    ch = SparseCholesky(six_graph)
    x = ch.from_matrix(V_TRUE) + 0.1 * rng.standard_normal(ch.n_params)
    ga = objective_gradient(x, ch, S_PRINTED, six_tree)
    gf = objective_gradient(x, ch, S_PRINTED, six_tree, mode="fd")
    assert np.abs(ga - gf).max() <= 1e-6 * np.abs(gf).max()
    prob = _Problem(S_PRINTED, ch, six_tree, None)
    lam = rng.standard_normal(len(prob.iu[0]))
    _, ga = prob.lagrangian(x, lam, 7.0)
    _, gf = prob.lagrangian_fd(x, lam, 7.0, 1e-6)
    assert np.abs(ga - gf).max() <= 1e-6 * np.abs(gf).max()


def test_printed_sample_estimate(printed_fit):
    g, t, res = printed_fit
    assert res.converged
    assert res.constraint_norm <= 1e-6
    assert is_doubly_sparse(res.m_hat, g, t, tol=1e-6)
    assert res.objective <= objective_value(V_TRUE, S_PRINTED, t)
    assert res.objective <= objective_value(M_PRINTED, S_PRINTED, t) + 1e-2
    np.testing.assert_allclose(res.theta_hat @ res.m_hat, np.eye(6), atol=1e-5)


def test_outer_trace_is_monotone_in_constraint(printed_fit):
    _, _, res = printed_fit
    norms = [e["constraint_norm"] for e in res.trace if e["accepted"]]
    assert norms
    assert all(b <= a for a, b in zip(norms, norms[1:]))
    assert res.to_json()["converged"] is True


def test_exact_recovery_when_s_is_doubly_sparse(six_graph, six_tree):
    res = estimate(V_TRUE, six_graph, six_tree)
    np.testing.assert_allclose(res.m_hat, V_TRUE, atol=1e-6)


def test_permutation_equivariance(six_graph):
    perm = np.array([3, 0, 5, 1, 4, 2])
    inv = np.argsort(perm)
    opts = EstimatorOptions(constraint_tol=1e-10)
    res = estimate(S_PRINTED, six_graph, build_clique_tree(six_graph), opts)
    gp = six_graph.relabel(perm)
    sp = S_PRINTED[np.ix_(inv, inv)]  # sp[perm[i], perm[j]] = S[i, j]
    rp = estimate(sp, gp, build_clique_tree(gp), opts)
    np.testing.assert_allclose(rp.m_hat[np.ix_(perm, perm)], res.m_hat, atol=1e-8 * np.abs(res.m_hat).max())


def test_fd_gradient_mode_converges(six_graph, six_tree):
    opts = EstimatorOptions(gradient_mode="fd")
    res = estimate(S_PRINTED, six_graph, six_tree, opts)
    assert res.constraint_norm <= 1e-4
    assert res.objective <= objective_value(V_TRUE, S_PRINTED, six_tree)


def test_non_convergence_is_reported_not_raised(six_graph, six_tree):
    opts = EstimatorOptions(constraint_tol=1e-14, max_outer=1, max_inner=3, newton_polish=False)
    res = estimate(S_PRINTED, six_graph, six_tree, opts)
    assert not res.converged
    assert np.isfinite(res.objective)


def test_two_clique_sector_topology():
    # 23 vertices, cliques of 13 and 12 sharing 2
    rng = np.random.default_rng(4)
    from dscov.bench import two_block_bridge

    g = two_block_bridge(23, 2)
    t = build_clique_tree(g)
    assert sorted(map(len, t.cliques)) == [12, 13] and len(t.separators[0]) == 2
    truth = random_doubly_sparse(t, rng)
    s, _ = sample_covariance(simulate_gaussian(truth, 400, 1))
    res = estimate(s, g, t)
    assert res.converged
    assert res.objective <= objective_value(truth, s, t) + 1e-9


def test_random_patterns_feasible():
    rng = np.random.default_rng(8)
    for g in pattern_zoo(rng, 3):
        t = build_clique_tree(g)
        truth = random_doubly_sparse(t, rng)
        s, _ = sample_covariance(simulate_gaussian(truth, 200, 2))
        res = estimate(s, g, t)
        assert res.converged, res.message
        assert constraint_residual(res.m_hat, t)[1] <= 1e-6


def test_simulation_is_seeded():
    a = simulate_gaussian(V_TRUE, 10, 5)
    np.testing.assert_array_equal(a, simulate_gaussian(V_TRUE, 10, 5))
    assert not np.array_equal(a, simulate_gaussian(V_TRUE, 10, 6))


def test_input_validation(six_graph, six_tree):
    with pytest.raises(InsufficientDataError):
        sample_covariance(np.ones((1, 3)))
    bad = S_PRINTED.copy()
    bad[0, 0] = -5.0
    with pytest.raises(InputError):
        estimate(bad, six_graph, six_tree)
    with pytest.raises(InputError):
        estimate(np.eye(5), six_graph, six_tree)
    with pytest.raises(InputError):
        EstimatorOptions(penalty_growth=1.0)
    with pytest.raises(InputError):
        EstimatorOptions(gradient_mode="magic")
    with pytest.raises(InputError):
        simulate_gaussian(-np.eye(2), 3, 0)


def test_factor_pattern_on_clique_path():
    g = path_of_cliques(3, 4, 2)
    ch = SparseCholesky(g)
    rng = np.random.default_rng(1)
    _, m = realize(ch, rng.standard_normal(ch.n_params))
    assert np.abs(m[~g.mask()]).max() <= 1e-12
