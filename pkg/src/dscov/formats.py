"""File formats.

Vertex labels in every file are 1-based; everything returned to Python is
0-based.

* Graph: JSON ``{"p": 6, "edges": [[1, 2], ...]}``.
* Clique tree: JSON ``{"cliques": [[...]], "edges": [{"a", "b", "sep"}]}``
  (``a``/``b`` are 0-based clique positions, ``sep`` holds vertex labels).
* Matrix: CSV with ``p`` rows of ``p`` numbers and no header, or JSON
  ``{"p": p, "rows": [[...]]}``; chosen by file extension.
* Observations: CSV with a header row of variable names.
"""

import csv
import json
from pathlib import Path

import numpy as np

from .errors import DscovError

__all__ = [
    "FormatError",
    "read_graph",
    "graph_json",
    "write_graph",
    "write_tree",
    "read_tree",
    "read_matrix",
    "write_matrix",
    "read_observations",
    "write_observations",
    "write_json",
]


class FormatError(DscovError):
    """Unreadable or malformed input file."""


def read_text(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc.strerror or exc}") from None
    if not text.strip():
        raise FormatError(f"{path} is empty")
    return text


def _load_json(path):
    try:
        return json.loads(read_text(path))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None


def read_graph(path):
    """Return ``(p, edges)`` with 0-based edges (validation of ranges is
    left to :func:`dscov.graph.check_chordal`)."""
    obj = _load_json(path)
    try:
        p = int(obj["p"])
        edges = [(int(a) - 1, int(b) - 1) for a, b in obj["edges"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: expected {{p, edges: [[i, j], ...]}} ({exc})") from None
    return p, edges


def graph_json(p, edges):
    return {"p": int(p), "edges": [[i + 1, j + 1] for i, j in edges]}


def write_graph(path, p, edges):
    write_json(path, graph_json(p, edges))


def write_tree(path, tree):
    write_json(path, tree.to_json())


def read_tree(path, p):
    """Rebuild a :class:`~dscov.graph.CliqueTree` from its JSON form."""
    from .graph import CliqueTree

    obj = _load_json(path)
    try:
        cliques = tuple(tuple(sorted(v - 1 for v in c)) for c in obj["cliques"])
        edges = tuple(
            (int(e["a"]), int(e["b"]), tuple(sorted(v - 1 for v in e["sep"])))
            for e in obj["edges"]
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: malformed clique tree ({exc})") from None
    root = edges[0][0] if edges else 0
    return CliqueTree(p, cliques, edges, root).validate()


def read_matrix(path):
    path = Path(path)
    if path.suffix.lower() == ".json":
        obj = _load_json(path)
        try:
            m = np.asarray(obj["rows"], dtype=float)
            p = int(obj.get("p", m.shape[0]))
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"{path}: expected {{p, rows}} ({exc})") from None
    else:
        text = read_text(path)
        try:
            rows = [[float(v) for v in r] for r in csv.reader(text.splitlines()) if r]
            m = np.asarray(rows, dtype=float)
        except ValueError as exc:
            raise FormatError(f"{path}: non-numeric matrix entry ({exc})") from None
        p = m.shape[0]
    if m.ndim != 2 or m.shape != (p, p):
        raise FormatError(f"{path}: expected a {p} x {p} matrix, got shape {m.shape}")
    return m


def write_matrix(path, m):
    """Write the full matrix with 17 significant digits (CSV or JSON)."""
    path = Path(path)
    m = np.asarray(m, dtype=float)
    if path.suffix.lower() == ".json":
        write_json(path, {"p": m.shape[0], "rows": m.tolist()})
        return
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for row in m:
            w.writerow([f"{v:.17g}" for v in row])


def read_observations(path):
    """Return ``(names, data)`` from a CSV with a header row."""
    text = read_text(path)
    rows = [r for r in csv.reader(text.splitlines()) if r]
    names = [h.strip() for h in rows[0]]
    try:
        data = np.asarray([[float(v) for v in r] for r in rows[1:]], dtype=float)
    except ValueError as exc:
        raise FormatError(f"{path}: non-numeric observation ({exc})") from None
    if data.size and data.shape[1] != len(names):
        raise FormatError(f"{path}: rows do not match the {len(names)}-column header")
    return names, data.reshape(-1, len(names))


def write_observations(path, data, names=None):
    data = np.asarray(data, dtype=float)
    if names is None:
        names = [f"x{i + 1}" for i in range(data.shape[1])]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for row in data:
            w.writerow([f"{v:.17g}" for v in row])


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2) + "\n")
