import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import THETA_DEN, THETA_NUM, V_TRUE, all_clique_trees, pattern_zoo
from dscov.errors import ConsistencyError, InputError, SingularBlockError
from dscov.graph import banded_graph, build_clique_tree, check_chordal, path_of_cliques
from dscov.local import (
    PartialMatrix,
    as_symmetric,
    constraint_residual,
    is_doubly_sparse,
    local_inverse,
    local_logdet,
    markov_complete,
    separator_fill,
)
from dscov.synthetic import random_doubly_sparse, random_inverse_subordinate


def test_golden_pair(six_graph, six_tree):
    lv = local_inverse(V_TRUE, six_tree)
    np.testing.assert_allclose(lv * THETA_DEN, THETA_NUM, atol=1e-6)
    lt = local_inverse(THETA_NUM / THETA_DEN, six_tree)
    np.testing.assert_allclose(lt, V_TRUE, atol=1e-10)
    assert is_doubly_sparse(V_TRUE, six_graph, six_tree)


def test_logdet_matches_dense(six_tree):
    assert local_logdet(V_TRUE, six_tree) == pytest.approx(np.linalg.slogdet(V_TRUE)[1], rel=1e-13)


def test_perturbation_inside_clique_keeps_constraint(six_graph, six_tree):
    # (1,2) touches no separator-crossing product, so the inverse stays
    # zero off the graph
    m = V_TRUE.copy()
    m[0, 1] = m[1, 0] = 9.0
    _, norm = constraint_residual(m, six_tree)
    assert norm < 1e-12
    assert np.abs(np.linalg.inv(m)[:2, 4:]).max() < 1e-12


def test_perturbation_breaks_constraint(six_graph, six_tree):
    m = V_TRUE.copy()
    m[0, 2] = m[2, 0] = 9.0
    _, norm = constraint_residual(m, six_tree)
    assert norm > 0.01
    assert not is_doubly_sparse(m, six_graph, six_tree)


def test_separator_block_example():
    # the (1,2)-(3,4)-(5,6) block split of the worked example
    a, s, b = [0, 1], [2, 3], [4, 5]
    fill = separator_fill(V_TRUE[np.ix_(a, s)], V_TRUE[np.ix_(s, s)], V_TRUE[np.ix_(s, b)])
    np.testing.assert_array_less(np.abs(fill), 1e-12)
    assert separator_fill(np.zeros((2, 0)), np.zeros((0, 0)), np.zeros((0, 3))).shape == (2, 3)


def test_markov_completion_of_golden_pair(six_tree):
    full = markov_complete(PartialMatrix.from_matrix(V_TRUE, six_tree))
    np.testing.assert_allclose(full, V_TRUE, atol=1e-12)


def test_completion_rejects_disagreeing_blocks(six_tree):
    pm = PartialMatrix.from_matrix(V_TRUE, six_tree)
    pm.blocks[1] = pm.blocks[1].copy()
    pm.blocks[1][0, 0] += 1.0
    with pytest.raises(ConsistencyError):
        markov_complete(pm)


def test_completion_inverse_is_subordinate_and_maximises_logdet():
    rng = np.random.default_rng(3)
    g = path_of_cliques(4, 4, 2)
    t = build_clique_tree(g)
    m, _ = random_inverse_subordinate(g, rng)
    noisy = m + 0.3 * rng.standard_normal(m.shape)
    noisy = 0.5 * (noisy + noisy.T)
    # keep only the clique blocks of a dense SPD matrix
    base = noisy @ noisy.T / g.p + np.eye(g.p)
    full = markov_complete(PartialMatrix.from_matrix(base, t))
    theta = np.linalg.inv(full)
    assert np.abs(theta[~g.mask()]).max() < 1e-10
    ld = np.linalg.slogdet(full)[1]
    assert local_logdet(full, t) == pytest.approx(ld, rel=1e-12)
    # any other completion agreeing on the cliques has smaller determinant
    off = ~g.mask()
    for _ in range(20):
        d = np.zeros_like(full)
        d[off] = rng.standard_normal(off.sum())
        d = 0.5 * (d + d.T) * 0.05
        w = np.linalg.eigvalsh(full + d)
        if w.min() > 0:
            assert np.linalg.slogdet(full + d)[1] < ld


def test_low_rank_off_diagonal_blocks():
    # entries across a separator S factor through S: rank <= |S|
    rng = np.random.default_rng(5)
    g = path_of_cliques(3, 5, 2)
    t = build_clique_tree(g)
    m = random_doubly_sparse(t, rng)
    left, right = list(range(0, 3)), list(range(5, g.p))
    assert np.linalg.matrix_rank(m[np.ix_(left, right)], tol=1e-10) == 0
    m, _ = random_inverse_subordinate(g, rng)
    assert np.linalg.matrix_rank(m[np.ix_(left, right)], tol=1e-8) <= 2


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_random_doubly_sparse_properties(seed):
    rng = np.random.default_rng(seed)
    g = pattern_zoo(rng, 1 + seed % 3)[-1]
    t = build_clique_tree(g)
    m = random_doubly_sparse(t, rng)
    assert np.linalg.eigvalsh(m).min() > 0
    assert is_doubly_sparse(m, g, t, tol=1e-8)
    inv = np.linalg.inv(m)
    np.testing.assert_allclose(local_inverse(m, t), inv, rtol=0, atol=1e-10 * np.abs(inv).max())


def test_tree_independence():
    rng = np.random.default_rng(11)
    g = check_chordal(7, [(0, 1), (0, 2), (1, 2), (0, 3), (0, 4), (3, 4), (0, 5), (0, 6), (5, 6)])
    trees = all_clique_trees(g)
    m = random_doubly_sparse(trees[0], rng)
    ref = local_inverse(m, trees[0])
    for t in trees[1:]:
        np.testing.assert_allclose(local_inverse(m, t), ref, atol=1e-12)
        assert local_logdet(m, t) == pytest.approx(local_logdet(m, trees[0]), abs=1e-12)


def test_singular_block_is_reported(six_tree):
    m = V_TRUE.copy()
    m[:, 4] = m[:, 5]
    m[4, :] = m[5, :]
    with pytest.raises(SingularBlockError) as err:
        local_inverse(m, six_tree)
    assert set(err.value.vertices) >= {4, 5}


def test_indefinite_blocks_allowed_for_inverse_not_logdet():
    g = banded_graph(3, 1)
    t = build_clique_tree(g)
    m = np.array([[1.0, 2.0, 0.0], [2.0, 1.0, 0.5], [0.0, 0.5, 1.0]])
    local_inverse(m, t)
    with pytest.raises(SingularBlockError):
        local_logdet(m, t)


def test_as_symmetric():
    m = np.array([[1.0, 2.0], [2.0 + 1e-14, 1.0]])
    out = as_symmetric(m)
    assert np.array_equal(out, out.T)
    with pytest.raises(InputError):
        as_symmetric(np.array([[1.0, 2.0], [3.0, 1.0]]))
    with pytest.raises(InputError):
        as_symmetric(np.array([[np.nan]]))
    with pytest.raises(InputError):
        as_symmetric(np.ones((2, 3)))
