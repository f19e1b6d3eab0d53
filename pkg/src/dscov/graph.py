"""Chordal graphs: chordality testing, maximal cliques, clique trees and
triangulation.

Vertices are 0-based integers throughout the Python API.  The JSON/CSV file
formats and the CLI use 1-based labels; conversion happens only in
:mod:`dscov.formats`.
"""

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations

import numpy as np

from .errors import InputError, NotChordalError

__all__ = [
    "ChordalGraph",
    "CliqueTree",
    "normalize_edges",
    "check_chordal",
    "is_chordal",
    "maximal_cliques",
    "build_clique_tree",
    "triangulate",
    "pattern_subordinate",
    "complete_graph",
    "banded_graph",
    "path_of_cliques",
]


def normalize_edges(p, edges):
    """Validate an edge list and return it as a sorted tuple of ``(i, j)``
    pairs with ``i < j``.  Duplicate and reversed pairs collapse."""
    p = int(p)
    if p < 0:
        raise InputError(f"vertex count must be non-negative, got {p}")
    out = set()
    for e in edges:
        if len(e) != 2:
            raise InputError(f"edge {e!r} does not have two endpoints")
        i, j = int(e[0]), int(e[1])
        if not (0 <= i < p and 0 <= j < p):
            raise InputError(f"edge ({i}, {j}) references a vertex outside [0, {p})")
        if i == j:
            raise InputError(f"self-loop at vertex {i}")
        out.add((min(i, j), max(i, j)))
    return tuple(sorted(out))


def _adjacency(p, edges):
    adj = [set() for _ in range(p)]
    for i, j in edges:
        adj[i].add(j)
        adj[j].add(i)
    return adj


@dataclass(frozen=True)
class ChordalGraph:
    """An undirected chordal graph with a perfect elimination ordering.

    Instances are produced by :func:`check_chordal` or :func:`triangulate`,
    which guarantee that ``peo`` is valid.
    """

    p: int
    edges: tuple
    peo: tuple

    @cached_property
    def adj(self):
        return _adjacency(self.p, self.edges)

    def has_edge(self, i, j):
        return j in self.adj[i]

    @cached_property
    def edge_set(self):
        return frozenset(self.edges)

    def mask(self):
        """Boolean p x p matrix, True on the diagonal and on edges."""
        m = np.eye(self.p, dtype=bool)
        for i, j in self.edges:
            m[i, j] = m[j, i] = True
        return m

    def relabel(self, perm):
        """Return the graph with vertex ``v`` renamed ``perm[v]``."""
        perm = list(perm)
        return check_chordal(self.p, [(perm[i], perm[j]) for i, j in self.edges])


@dataclass(frozen=True)
class CliqueTree:
    """Maximal cliques joined in a tree with running intersection.

    ``tree_edges`` holds ``(a, b, separator)`` triples; ``a`` is the clique
    already in the tree when ``b`` was attached, so the edges list a
    traversal from ``root``.  Empty separators (between components) are
    kept as edges but contribute no block to the local formulas.
    """

    p: int
    cliques: tuple
    tree_edges: tuple
    root: int = 0
    _blocks: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    @property
    def separators(self):
        return [sep for _, _, sep in self.tree_edges]

    def blocks(self):
        """Flat block description ``(idx, ptr, sign)`` consumed by the kernels:
        every clique with sign +1, then every non-empty separator with -1."""
        if "flat" not in self._blocks:
            sets = list(self.cliques) + [s for s in self.separators if s]
            sign = [1.0] * len(self.cliques) + [-1.0] * (len(sets) - len(self.cliques))
            ptr = np.zeros(len(sets) + 1, dtype=np.int64)
            ptr[1:] = np.cumsum([len(s) for s in sets])
            idx = np.fromiter(
                (v for s in sets for v in s), dtype=np.int64, count=int(ptr[-1])
            )
            self._blocks["flat"] = (idx, ptr, np.asarray(sign), sets)
        return self._blocks["flat"][:3]

    def block_sets(self):
        self.blocks()
        return self._blocks["flat"][3]

    def validate(self):
        """Raise ``InputError`` unless every clique-tree invariant holds."""
        k = len(self.cliques)
        cl = [set(c) for c in self.cliques]
        if len(self.tree_edges) != max(k - 1, 0):
            raise InputError("clique tree must have exactly len(cliques) - 1 edges")
        nbrs = [[] for _ in range(k)]
        for a, b, sep in self.tree_edges:
            if set(sep) != cl[a] & cl[b]:
                raise InputError(f"separator of edge ({a}, {b}) is not the clique intersection")
            nbrs[a].append(b)
            nbrs[b].append(a)
        if k and len(_reach(nbrs, 0, range(k))) != k:
            raise InputError("clique tree edges do not span the cliques")
        for a, b in combinations(range(k), 2):
            if cl[a] <= cl[b] or cl[b] <= cl[a]:
                raise InputError(f"clique {a} and {b} are nested")
        for v in range(self.p):
            holders = [c for c in range(k) if v in cl[c]]
            if not holders:
                raise InputError(f"vertex {v} belongs to no clique")
            if len(_reach(nbrs, holders[0], holders)) != len(holders):
                raise InputError(f"running intersection fails at vertex {v}")
        return self

    def to_json(self):
        return {
            "cliques": [[v + 1 for v in c] for c in self.cliques],
            "edges": [
                {"a": a, "b": b, "sep": [v + 1 for v in sep]}
                for a, b, sep in self.tree_edges
            ],
        }


def _reach(nbrs, start, allowed):
    allowed = set(allowed)
    seen = {start}
    todo = [start]
    while todo:
        u = todo.pop()
        for w in nbrs[u]:
            if w in allowed and w not in seen:
                seen.add(w)
                todo.append(w)
    return seen


def _mcs_order(p, adj):
    """Maximum cardinality search; returns the visit order (lowest index
    wins ties).  The reverse of the visit order is a PEO iff the graph is
    chordal."""
    weight = [0] * p
    done = [False] * p
    order = []
    for _ in range(p):
        best = -1
        for v in range(p):
            if not done[v] and (best < 0 or weight[v] > weight[best]):
                best = v
        done[best] = True
        order.append(best)
        for w in adj[best]:
            if not done[w]:
                weight[w] += 1
    return order


def _peo_violation(adj, peo):
    """Return ``(v, a, b)`` where ``a``, ``b`` are non-adjacent later
    neighbours of ``v`` under ``peo``, or None if ``peo`` is perfect."""
    pos = {v: k for k, v in enumerate(peo)}
    for v in peo:
        later = [w for w in adj[v] if pos[w] > pos[v]]
        if len(later) < 2:
            continue
        first = min(later, key=pos.__getitem__)
        for w in later:
            if w != first and w not in adj[first]:
                return v, first, w
    return None


def _chordless_cycle(p, adj):
    """Find a chordless cycle of length >= 4, or None for a chordal graph.

    For each vertex v and pair of non-adjacent neighbours a < b, a shortest
    a-b path avoiding v's other neighbours closes a chordless cycle.
    """
    for v in range(p):
        nv = sorted(adj[v])
        for a, b in combinations(nv, 2):
            if b in adj[a]:
                continue
            banned = (adj[v] | {v}) - {a, b}
            prev = {a: None}
            q = deque([a])
            while q and b not in prev:
                u = q.popleft()
                for w in sorted(adj[u]):
                    if w not in banned and w not in prev:
                        prev[w] = u
                        q.append(w)
            if b in prev:
                path = []
                u = b
                while u is not None:
                    path.append(u)
                    u = prev[u]
                return (v,) + tuple(reversed(path))
    return None


def check_chordal(p, edges):
    """Test chordality and return a :class:`ChordalGraph`.

    Parameters
    ----------
    p : int
        Number of vertices.
    edges : iterable of pairs
        0-based undirected edges.

    Raises
    ------
    InputError
        For out-of-range vertices or self-loops.
    NotChordalError
        If the graph has a chordless cycle; the cycle is attached.
    """
    edges = normalize_edges(p, edges)
    adj = _adjacency(p, edges)
    peo = tuple(reversed(_mcs_order(p, adj)))
    if _peo_violation(adj, peo) is not None:
        cycle = _chordless_cycle(p, adj)
        # MCS never fails on a chordal graph, so a cycle must exist
        assert cycle is not None
        raise NotChordalError(cycle)
    return ChordalGraph(p, edges, peo)


def is_chordal(p, edges):
    try:
        check_chordal(p, edges)
    except NotChordalError:
        return False
    return True


def maximal_cliques(g):
    """Maximal cliques of a chordal graph, read off its PEO.

    Each clique is a sorted tuple; the list is sorted by smallest member.
    """
    pos = {v: k for k, v in enumerate(g.peo)}
    cands = []
    for v in g.peo:
        cands.append(frozenset([v] + [w for w in g.adj[v] if pos[w] > pos[v]]))
    # a candidate is maximal iff it is not contained in another candidate
    cands = sorted(set(cands), key=len, reverse=True)
    kept = []
    for c in cands:
        if not any(c < k for k in kept):
            kept.append(c)
    return sorted((tuple(sorted(c)) for c in kept), key=lambda c: (c[0], c))


def build_clique_tree(g, cliques=None):
    """Clique tree by Prim's maximum-weight spanning tree on intersection
    sizes, starting from clique 0 and breaking ties by clique order.

    Zero-weight edges connect components, so disconnected graphs give a
    tree with empty separators.
    """
    if cliques is None:
        cliques = maximal_cliques(g)
    cliques = tuple(tuple(c) for c in cliques)
    k = len(cliques)
    sets = [set(c) for c in cliques]
    in_tree = [False] * k
    edges = []
    if k:
        in_tree[0] = True
    # best[b] = (weight, attaching clique) for cliques not yet in the tree
    best = [(-1, -1)] * k
    for b in range(1, k):
        best[b] = (len(sets[0] & sets[b]), 0)
    for _ in range(k - 1):
        nxt = -1
        for b in range(k):
            if not in_tree[b] and (nxt < 0 or best[b][0] > best[nxt][0]):
                nxt = b
        a = best[nxt][1]
        in_tree[nxt] = True
        edges.append((a, nxt, tuple(sorted(sets[a] & sets[nxt]))))
        for b in range(k):
            if not in_tree[b]:
                w = len(sets[nxt] & sets[b])
                if w > best[b][0]:
                    best[b] = (w, nxt)
    return CliqueTree(g.p, cliques, tuple(edges), 0).validate()


def _fill_of(adj, v):
    nb = sorted(adj[v])
    return [(a, b) for a, b in combinations(nb, 2) if b not in adj[a]]


def triangulate(p, edges):
    """Greedy min-fill triangulation.

    Returns ``(graph, fill)`` where ``fill`` lists the added edges.  Ties on
    fill count go to the vertex whose fill-edge list is lexicographically
    smallest, then to the lowest vertex.  Chordal input always has a
    zero-fill (simplicial) vertex left, so it comes back unchanged.
    """
    edges = normalize_edges(p, edges)
    work = _adjacency(p, edges)
    remaining = set(range(p))
    fill = []
    while remaining:
        best = None
        for v in sorted(remaining):
            f = _fill_of(work, v)
            key = (len(f), f, v)
            if best is None or key < best[0]:
                best = (key, v, f)
        _, v, f = best
        for a, b in f:
            work[a].add(b)
            work[b].add(a)
            fill.append((a, b))
        for w in work[v]:
            work[w].discard(v)
        remaining.discard(v)
        work[v] = set()
    fill = sorted(set(fill))
    return check_chordal(p, list(edges) + fill), fill


def pattern_subordinate(m, g, tol=0.0):
    """True iff every off-diagonal entry of ``m`` at a non-edge has
    magnitude at most ``tol``."""
    m = np.asarray(m, dtype=float)
    if m.shape != (g.p, g.p):
        raise InputError(f"matrix shape {m.shape} does not match graph size {g.p}")
    off = ~g.mask()
    return bool(np.all(np.abs(m[off]) <= tol))


def complete_graph(p):
    return check_chordal(p, combinations(range(p), 2))


def banded_graph(p, bandwidth):
    """Chordal band graph: ``i ~ j`` iff ``0 < |i - j| <= bandwidth``."""
    return check_chordal(
        p, [(i, j) for i in range(p) for j in range(i + 1, min(p, i + bandwidth + 1))]
    )


def path_of_cliques(k, size, overlap):
    """``k`` cliques of ``size`` vertices, consecutive ones sharing
    ``overlap`` vertices."""
    if not 0 <= overlap < size:
        raise InputError("overlap must satisfy 0 <= overlap < size")
    step = size - overlap
    p = step * (k - 1) + size
    edges = set()
    for c in range(k):
        lo = c * step
        edges.update(combinations(range(lo, lo + size), 2))
    return check_chordal(p, edges)
