"""Local inverse and log-determinant formulas on a clique tree.

For a chordal graph with cliques ``C`` and separators ``J`` the local
function is::

    L(M) = sum_c scatter(inv(M[c, c])) - sum_j scatter(inv(M[j, j]))

``L(M)`` equals ``inv(M)`` exactly when ``inv(M)`` is zero off the graph,
so ``C = M @ L(M) - I`` vanishes precisely on doubly sparse matrices.
"""

from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from . import _backend
from .errors import ConsistencyError, InputError, SingularBlockError
from .graph import pattern_subordinate

__all__ = [
    "SINGULAR_RTOL",
    "as_symmetric",
    "local_inverse",
    "local_logdet",
    "constraint_residual",
    "is_doubly_sparse",
    "separator_fill",
    "PartialMatrix",
    "markov_complete",
    "tree_traversal",
]

# relative pivot threshold below which a block counts as singular
SINGULAR_RTOL = 1e-12


def as_symmetric(m, rtol=1e-10):
    """Return ``m`` as a C-contiguous float array that is exactly symmetric.

    Asymmetry up to ``rtol`` times the largest entry is averaged away;
    anything larger is rejected.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InputError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InputError("matrix has non-finite entries")
    if m.size:
        gap = np.abs(m - m.T).max()
        if gap > rtol * max(np.abs(m).max(), 1.0):
            raise InputError(f"matrix is not symmetric (max asymmetry {gap:.3g})")
        if gap:
            m = 0.5 * (m + m.T)
    return np.ascontiguousarray(m)


def _check_tree(m, tree):
    if m.shape[0] != tree.p:
        raise InputError(f"matrix dimension {m.shape[0]} does not match clique tree ({tree.p})")


def _raise_bad(tree, status, allowed):
    bad = np.flatnonzero(status > allowed)
    if bad.size:
        b = int(bad[0])
        verts = tree.block_sets()[b]
        kind = "singular" if status[b] == 2 else "not positive definite"
        raise SingularBlockError(
            verts, "{} block on vertices {{{}}}".format(kind, ",".join(str(v + 1) for v in verts))
        )


def local_inverse(m, tree, backend=None):
    """Evaluate ``L(m)`` from clique and separator blocks only.

    Raises
    ------
    SingularBlockError
        If any clique or separator block is singular.
    """
    m = as_symmetric(m)
    _check_tree(m, tree)
    k = _backend.get_kernels(backend)
    out, _, status = k.local_inverse(m, *tree.blocks(), SINGULAR_RTOL)
    _raise_bad(tree, status, 1)
    return out


def local_logdet(m, tree, backend=None):
    """Sum of clique log-determinants minus separator log-determinants.

    Equals ``log det(m)`` whenever ``inv(m)`` is subordinate to the graph.
    Every block must be positive definite.
    """
    m = as_symmetric(m)
    _check_tree(m, tree)
    k = _backend.get_kernels(backend)
    _, logdet, status = k.local_inverse(m, *tree.blocks(), SINGULAR_RTOL)
    _raise_bad(tree, status, 0)
    return float(logdet)


def constraint_residual(m, tree, backend=None):
    """Return ``(C, ||C||_F)`` with ``C = m @ L(m) - I``."""
    m = as_symmetric(m)
    c = m @ local_inverse(m, tree, backend=backend)
    c[np.diag_indices_from(c)] -= 1.0
    return c, float(np.linalg.norm(c))


def is_doubly_sparse(m, graph, tree, tol=1e-8):
    """True iff ``m`` is subordinate to ``graph`` (entries at non-edges at
    most ``tol * max|m|``) and ``||m @ L(m) - I||_F <= tol``."""
    m = as_symmetric(m)
    scale = np.abs(m).max() if m.size else 0.0
    if not pattern_subordinate(m, graph, tol * scale):
        return False
    try:
        _, norm = constraint_residual(m, tree)
    except SingularBlockError:
        return False
    return norm <= tol


def _solve_sep(m_ss, rhs, verts):
    scale = np.abs(m_ss).max()
    if scale == 0:
        raise SingularBlockError(verts)
    lu, piv = linalg.lu_factor(m_ss, check_finite=False)
    # same relative pivot rule as the kernels
    if np.abs(np.diag(lu)).min() < SINGULAR_RTOL * scale:
        raise SingularBlockError(verts)
    return linalg.lu_solve((lu, piv), rhs, check_finite=False)


def separator_fill(m_as, m_ss, m_sb, sep=()):
    """Off-tree block ``m_as @ inv(m_ss) @ m_sb`` forced by a zero inverse
    block; an empty separator gives zeros."""
    m_as = np.atleast_2d(np.asarray(m_as, dtype=float))
    m_sb = np.atleast_2d(np.asarray(m_sb, dtype=float))
    m_ss = np.asarray(m_ss, dtype=float).reshape(m_as.shape[1], m_as.shape[1])
    if m_ss.size == 0:
        return np.zeros((m_as.shape[0], m_sb.shape[1]))
    return m_as @ _solve_sep(m_ss, m_sb, sep)


@dataclass
class PartialMatrix:
    """Symmetric matrix known only on the diagonal blocks of a clique tree.

    ``blocks[i]`` is the dense block for ``tree.cliques[i]`` (rows/columns
    in the clique's sorted vertex order).
    """

    tree: object
    blocks: dict

    @property
    def p(self):
        return self.tree.p

    @classmethod
    def from_matrix(cls, m, tree):
        m = np.asarray(m, dtype=float)
        return cls(tree, {i: m[np.ix_(c, c)].copy() for i, c in enumerate(tree.cliques)})

    def check(self, rtol=1e-12):
        """Check block shapes and that neighbouring cliques agree on separators."""
        for i, c in enumerate(self.tree.cliques):
            if i not in self.blocks:
                raise InputError(f"missing block for clique {i}")
            b = np.asarray(self.blocks[i], dtype=float)
            if b.shape != (len(c), len(c)):
                raise InputError(f"block {i} has shape {b.shape}, clique size {len(c)}")
            self.blocks[i] = as_symmetric(b)
        scale = max((np.abs(b).max() for b in self.blocks.values() if b.size), default=1.0)
        for a, b, sep in self.tree.tree_edges:
            if not sep:
                continue
            ia = [self.tree.cliques[a].index(v) for v in sep]
            ib = [self.tree.cliques[b].index(v) for v in sep]
            xa = self.blocks[a][np.ix_(ia, ia)]
            xb = self.blocks[b][np.ix_(ib, ib)]
            if np.abs(xa - xb).max() > rtol * scale:
                raise ConsistencyError(
                    f"cliques {a} and {b} disagree on separator "
                    + "{" + ",".join(str(v + 1) for v in sep) + "}"
                )
        return self


def markov_complete(pm):
    """Fill the unspecified entries so that the inverse is subordinate to
    the graph (the maximum-determinant completion).

    Cliques are attached in tree order from the root; each new clique's
    private vertices ``N`` receive ``M[N, K] = M[N, S] inv(M[S, S]) M[S, K]``
    against everything ``K`` placed so far, with ``S`` the separator.
    """
    pm.check()
    tree = pm.tree
    p = tree.p
    out = np.zeros((p, p))
    placed = np.zeros(p, dtype=bool)

    def put(i):
        c = list(tree.cliques[i])
        out[np.ix_(c, c)] = pm.blocks[i]

    if not tree.cliques:
        return out
    order = tree_traversal(tree)
    put(order[0][0])
    placed[list(tree.cliques[order[0][0]])] = True
    for child, sep in order[1:]:
        c = tree.cliques[child]
        new = [v for v in c if not placed[v]]
        known = [v for v in np.flatnonzero(placed) if v not in sep]
        put(child)
        if new and known:
            s = list(sep)
            if s:
                fill = separator_fill(out[np.ix_(new, s)], out[np.ix_(s, s)],
                                      out[np.ix_(s, known)], sep)
            else:
                fill = np.zeros((len(new), len(known)))
            out[np.ix_(new, known)] = fill
            out[np.ix_(known, new)] = fill.T
        placed[list(c)] = True
    return out


def tree_traversal(tree):
    """Breadth-first ``(clique, separator)`` order from the root."""
    k = len(tree.cliques)
    nbrs = [[] for _ in range(k)]
    for a, b, sep in tree.tree_edges:
        nbrs[a].append((b, sep))
        nbrs[b].append((a, sep))
    seen = {tree.root}
    order = [(tree.root, ())]
    q = deque([tree.root])
    while q:
        u = q.popleft()
        for w, sep in nbrs[u]:
            if w not in seen:
                seen.add(w)
                order.append((w, sep))
                q.append(w)
    return order
