"""Shared fixtures: the six-variable golden pair and graph helpers."""

from itertools import combinations

import numpy as np
import pytest

from dscov.graph import CliqueTree, banded_graph, build_clique_tree, check_chordal, path_of_cliques

# covariance of the worked six-variable example and its inverse (x 21540)
V_TRUE = np.array([
    [13, 8, 4, 2, 0, 0],
    [8, 13, 2, 1, 0, 0],
    [4, 2, 10, 6, 1, 1],
    [2, 1, 6, 13, 10, 10],
    [0, 0, 1, 10, 13, 8],
    [0, 0, 1, 10, 8, 13],
], dtype=float)

THETA_NUM = np.array([
    [2960, -1690, -900, 90, 0, 0],
    [-1690, 2675, 150, -15, 0, 0],
    [-900, 150, 8715, -12180, 5385, 5385],
    [90, -15, -12180, 23835, -10770, -10770],
    [0, 0, 5385, -10770, 7539, 3231],
    [0, 0, 5385, -10770, 3231, 7539],
], dtype=float)
THETA_DEN = 21540.0

# printed sample covariance from n = 100 draws of V_TRUE
S_PRINTED = np.array([
    [16.703, 8.774, 4.113, 2.629, -0.25, 1.16],
    [8.774, 11.559, 1.92, 0.01, -1.605, -0.854],
    [4.113, 1.92, 10.07, 5.813, 1.245, 0.947],
    [2.629, 0.01, 5.813, 12.424, 10.227, 9.68],
    [-0.25, -1.605, 1.245, 10.227, 13.958, 7.88],
    [1.16, -0.854, 0.947, 9.68, 7.88, 13.345],
])

# printed estimate at S_PRINTED
M_PRINTED = np.array([
    [37.126, 16.09, 2.384, 1.175, 0, 0],
    [16.09, 26.676, 1.477, 0.728, 0, 0],
    [2.384, 1.477, 10.933, 2.507, -2.974, -2.811],
    [1.175, 0.728, 2.507, 6.07, 4.989, 4.715],
    [0, 0, -2.974, 4.989, 18.091, 5.179],
    [0, 0, -2.811, 4.715, 5.179, 18.607],
])

SIX_EDGES = [(i, j) for i in range(6) for j in range(i + 1, 6) if V_TRUE[i, j] != 0]


@pytest.fixture
def six_graph():
    return check_chordal(6, SIX_EDGES)


@pytest.fixture
def six_tree(six_graph):
    return build_clique_tree(six_graph)


def all_clique_trees(g):
    """Every maximum-weight spanning tree of the clique intersection graph,
    by brute force over edge subsets (fine for a handful of cliques)."""
    tree0 = build_clique_tree(g)
    cliques = tree0.cliques
    k = len(cliques)
    sets = [set(c) for c in cliques]
    pairs = list(combinations(range(k), 2))
    weight = {e: len(sets[e[0]] & sets[e[1]]) for e in pairs}
    best = sum(len(s) for s in tree0.separators)
    out = []
    for chosen in combinations(pairs, k - 1):
        if sum(weight[e] for e in chosen) != best:
            continue
        parent = list(range(k))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        ok = True
        for a, b in chosen:
            ra, rb = find(a), find(b)
            if ra == rb:
                ok = False
                break
            parent[ra] = rb
        if ok:
            edges = tuple((a, b, tuple(sorted(sets[a] & sets[b]))) for a, b in chosen)
            out.append(CliqueTree(g.p, cliques, edges, 0).validate())
    return out


def pattern_zoo(rng, count):
    """Small chordal graphs of assorted kinds (see the branches below)."""
    from dscov.graph import triangulate

    out = []
    while len(out) < count:
        kind = len(out) % 3
        if kind == 0:
            out.append(banded_graph(int(rng.integers(3, 15)), int(rng.integers(1, 4))))
        elif kind == 1:
            size = int(rng.integers(2, 6))
            out.append(path_of_cliques(int(rng.integers(2, 5)), size, int(rng.integers(0, size))))
        else:
            p = int(rng.integers(4, 13))
            edges = [e for e in combinations(range(p), 2) if rng.random() < 0.3]
            out.append(triangulate(p, edges)[0])
    return out


# acceptance lines, printed again at the end of the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
