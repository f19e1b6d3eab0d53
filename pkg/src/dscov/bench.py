"""Timing harness: local inverse formula against dense inversion.

Each instance is a random doubly sparse SPD matrix on a chordal pattern.
For every size the harness records the median wall time of
``local_inverse`` (per kernel backend) and of ``numpy.linalg.inv``, the
largest relative discrepancy between the two, and whether repeated local
runs are bitwise identical.
"""

import csv
import time
from dataclasses import asdict, dataclass
from itertools import combinations

import numpy as np

from . import _backend
from .graph import banded_graph, build_clique_tree, check_chordal, path_of_cliques
from .local import local_inverse
from .synthetic import random_doubly_sparse

__all__ = ["FAMILIES", "BenchRow", "make_instance", "run_bench", "write_csv"]

FAMILIES = ("banded", "two-block-bridge", "path-of-cliques", "complete")


def two_block_bridge(p, bridge=2):
    """Two cliques covering ``p`` vertices that share ``bridge`` vertices."""
    half = (p + bridge) // 2
    a = range(0, half)
    b = range(half - bridge, p)
    return check_chordal(p, list(combinations(a, 2)) + list(combinations(b, 2)))


def make_instance(family, size, rng, bandwidth=2, clique_size=5, overlap=2):
    """Return ``(graph, tree, m)`` for a pattern family.

    ``size`` is the matrix dimension, except for ``path-of-cliques`` where
    it is the number of cliques.
    """
    if family == "banded":
        g = banded_graph(size, bandwidth)
    elif family == "two-block-bridge":
        g = two_block_bridge(size, overlap)
    elif family == "path-of-cliques":
        g = path_of_cliques(size, clique_size, overlap)
    elif family == "complete":
        g = check_chordal(size, combinations(range(size), 2))
    else:
        raise ValueError(f"unknown pattern family {family!r}; choose from {FAMILIES}")
    t = build_clique_tree(g)
    return g, t, random_doubly_sparse(t, rng)


@dataclass
class BenchRow:
    family: str
    size: int
    p: int
    backend: str
    repetitions: int
    local_median_s: float
    dense_median_s: float
    max_rel_discrepancy: float
    deterministic: bool


def _median_time(fn, reps):
    times = []
    outs = []
    for _ in range(reps):
        t0 = time.perf_counter()
        outs.append(fn())
        times.append(time.perf_counter() - t0)
    return float(np.median(times)), outs


def run_bench(family, sizes, repetitions=5, backends=None, seed=0, **params):
    """Benchmark rows, one per (size, backend)."""
    backends = backends or [_backend.BACKEND]
    rng = np.random.default_rng(seed)
    rows = []
    for size in sizes:
        _, t, m = make_instance(family, size, rng, **params)
        dense_t, dense_outs = _median_time(lambda: np.linalg.inv(m), repetitions)
        dense = dense_outs[-1]
        scale = np.abs(dense).max()
        for name in backends:
            local_t, outs = _median_time(lambda: local_inverse(m, t, backend=name), repetitions)
            same = all(np.array_equal(outs[0], o) for o in outs[1:])
            disc = float(np.abs(outs[0] - dense).max() / scale)
            rows.append(BenchRow(family, int(size), m.shape[0], name, repetitions,
                                 local_t, dense_t, disc, same))
    return rows


def write_csv(path, rows):
    fields = list(BenchRow.__dataclass_fields__)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields)
        w.writeheader()
        for r in rows:
            w.writerow(asdict(r))
