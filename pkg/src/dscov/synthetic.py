"""Random test matrices on chordal patterns."""

import numpy as np
from scipy import linalg

from .local import tree_traversal

__all__ = [
    "random_doubly_sparse",
    "random_inverse_subordinate",
    "random_spd",
]


def random_spd(n, rng, ridge=1.0):
    a = rng.standard_normal((n, n))
    return a @ a.T / max(n, 1) + ridge * np.eye(n)


def random_doubly_sparse(tree, rng):
    """SPD matrix with both itself and its inverse subordinate to the graph
    of ``tree``.

    Cliques are added in traversal order.  A new clique's coupling to its
    separator ``S`` is drawn from the left null space of
    ``inv(M[S, S]) @ M[S, K]`` (``K`` = vertices placed earlier, outside
    ``S``), which makes the Markov fill ``M[N, K]`` exactly zero.  The new
    diagonal block adds the Schur-complement correction so the result stays
    positive definite.
    """
    p = tree.p
    m = np.zeros((p, p))
    placed = np.zeros(p, dtype=bool)
    for child, sep in tree_traversal(tree):
        clique = list(tree.cliques[child])
        s = list(sep)
        new = [v for v in clique if not placed[v]]
        known = [v for v in np.flatnonzero(placed) if v not in sep]
        block = random_spd(len(new), rng)
        if s:
            m_ss = m[np.ix_(s, s)]
            if known:
                q = np.linalg.solve(m_ss, m[np.ix_(s, known)])
                basis = linalg.null_space(q.T)
            else:
                basis = np.eye(len(s))
            w = rng.standard_normal((len(new), basis.shape[1])) @ basis.T
            m[np.ix_(new, s)] = w
            m[np.ix_(s, new)] = w.T
            block = block + w @ np.linalg.solve(m_ss, w.T)
        m[np.ix_(new, new)] = block
        placed[clique] = True
    return 0.5 * (m + m.T)


def random_inverse_subordinate(graph, rng):
    """Dense SPD matrix whose inverse is subordinate to ``graph``: the
    inverse of a random diagonally dominant precision on the pattern."""
    p = graph.p
    theta = np.zeros((p, p))
    for i, j in graph.edges:
        theta[i, j] = theta[j, i] = rng.uniform(-1.0, 1.0)
    theta[np.diag_indices(p)] = np.abs(theta).sum(axis=1) + rng.uniform(0.5, 1.5, p)
    m = np.linalg.inv(theta)
    return 0.5 * (m + m.T), theta
