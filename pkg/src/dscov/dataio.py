"""Price panels to residual covariances, and sector-based chordal graphs.

The pipeline is: prices -> log returns (complete-case aligned) -> OLS
residuals against a market index -> sample covariance -> estimate on a
two-clique sector graph whose separator is a set of bridge tickers.
"""

import csv
import json
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np

from .errors import InputError, InsufficientDataError
from .formats import FormatError, read_text
from .graph import build_clique_tree, check_chordal

__all__ = [
    "ReturnsPanel",
    "IndexRegression",
    "SectorSpec",
    "read_prices",
    "log_returns",
    "index_residuals",
    "sector_graph",
    "heatmap_rows",
    "export_heatmap_data",
]


@dataclass
class ReturnsPanel:
    dates: list
    tickers: list
    values: np.ndarray
    index_column: str | None = None
    dropped_dates: list = field(default_factory=list)

    @property
    def n(self):
        return self.values.shape[0]

    def summary(self):
        return {
            "observations": self.n,
            "tickers": len(self.tickers),
            "dropped_dates": len(self.dropped_dates),
            "dropped": list(self.dropped_dates),
        }


def read_prices(path):
    """Read ``date,T1,T2,...``; blank or ``NA`` cells become NaN.

    Returns ``(dates, tickers, prices)``.
    """
    rows = [r for r in csv.reader(read_text(path).splitlines()) if r]
    header = [h.strip() for h in rows[0]]
    if len(header) < 2 or header[0].lower() != "date":
        raise FormatError(f"{path}: header must be 'date,TICKER1,...'")
    dates, values = [], []
    for r in rows[1:]:
        if len(r) != len(header):
            raise FormatError(f"{path}: row for {r[0]!r} has {len(r)} fields, expected {len(header)}")
        dates.append(r[0].strip())
        try:
            values.append([
                float(v) if v.strip() not in ("", "NA", "NaN", "nan") else np.nan
                for v in r[1:]
            ])
        except ValueError as exc:
            raise FormatError(f"{path}: bad price on {r[0]} ({exc})") from None
    return dates, header[1:], np.asarray(values, dtype=float).reshape(len(dates), -1)


def log_returns(prices, dates, tickers, index_column=None):
    """Log returns on complete-case dates.

    Dates with any missing price are dropped first (and listed in
    ``dropped_dates``); returns are then taken between consecutive kept
    dates, so the panel has one fewer row than the kept dates.
    """
    prices = np.asarray(prices, dtype=float)
    dates = list(dates)
    tickers = list(tickers)
    if prices.shape != (len(dates), len(tickers)):
        raise InputError("price matrix shape does not match dates x tickers")
    if index_column is not None and index_column not in tickers:
        raise InputError(f"index column {index_column!r} is not among the tickers")
    if sorted(dates) != dates:
        raise InputError("dates are not in increasing order")
    bad = np.argwhere(~np.isnan(prices) & (prices <= 0))
    if bad.size:
        i, j = bad[0]
        raise InputError(f"non-positive price {prices[i, j]} for {tickers[j]} on {dates[i]}")
    keep = ~np.isnan(prices).any(axis=1)
    dropped = [d for d, k in zip(dates, keep) if not k]
    kept = prices[keep]
    kept_dates = [d for d, k in zip(dates, keep) if k]
    if kept.shape[0] < 3:
        raise InsufficientDataError("fewer than 3 complete dates; need at least 2 returns")
    r = np.diff(np.log(kept), axis=0)
    return ReturnsPanel(kept_dates[1:], tickers, r, index_column, dropped)


@dataclass
class IndexRegression:
    tickers: list
    residuals: np.ndarray
    intercept: np.ndarray
    slope: np.ndarray
    slope_stderr: np.ndarray


def index_residuals(panel):
    """Regress every non-index column on ``(1, index)`` by least squares.

    Residual columns have zero mean and are orthogonal to the index.
    """
    if panel.index_column is None:
        raise InputError("panel has no designated index column")
    if panel.n < 3:
        raise InsufficientDataError("need at least 3 return observations")
    j = panel.tickers.index(panel.index_column)
    idx = panel.values[:, j]
    others = [k for k in range(len(panel.tickers)) if k != j]
    y = panel.values[:, others]
    xc = idx - idx.mean()
    sxx = float(xc @ xc)
    if sxx <= 1e-14 * max(float(idx @ idx), 1e-300):
        raise InputError("index returns have zero variance")
    slope = xc @ (y - y.mean(axis=0)) / sxx
    intercept = y.mean(axis=0) - slope * idx.mean()
    resid = y - intercept - np.outer(idx, slope)
    # project out round-off so orthogonality holds to working precision
    resid -= resid.mean(axis=0)
    resid -= np.outer(xc, xc @ resid / sxx)
    dof = max(panel.n - 2, 1)
    stderr = np.sqrt((resid ** 2).sum(axis=0) / dof / sxx)
    return IndexRegression([panel.tickers[k] for k in others], resid, intercept, slope, stderr)


@dataclass
class SectorSpec:
    """Named ticker groups plus a bridge set shared by the two groups.

    Each clique is ``group + bridge``.  A bridge ticker may be listed in up to
    two groups, or left out of the groups entirely.
    """

    groups: dict
    bridge: list = field(default_factory=list)

    @classmethod
    def from_json(cls, path):
        try:
            obj = json.loads(read_text(path))
            return cls({str(k): list(v) for k, v in obj["groups"].items()}, list(obj.get("bridge", [])))
        except (json.JSONDecodeError, KeyError, TypeError, AttributeError) as exc:
            raise FormatError(f"{path}: expected {{groups: {{name: [...]}}, bridge: [...]}} ({exc})") from None

    def validate(self, tickers=None):
        bridge = set(self.bridge)
        count = {}
        for members in self.groups.values():
            for t in members:
                count[t] = count.get(t, 0) + 1
        for t, c in count.items():
            if t not in bridge and c != 1:
                raise InputError(f"ticker {t} appears in {c} groups")
            if t in bridge and c > 2:
                raise InputError(f"bridge ticker {t} appears in {c} groups")
        if bridge and len(self.groups) != 2:
            raise InputError(
                f"a bridge joins exactly two groups; got {len(self.groups)} (unsupported topology)"
            )
        if tickers is not None:
            covered = set(count) | bridge
            if covered != set(tickers):
                missing = sorted(set(tickers) - covered)
                extra = sorted(covered - set(tickers))
                raise InputError(f"sector spec does not cover the tickers (missing {missing}, unknown {extra})")
        return self


def sector_graph(spec, tickers):
    """Union of complete graphs on each ``group + bridge``, in ``tickers``
    vertex order, with its clique tree."""
    tickers = list(tickers)
    spec.validate(tickers)
    pos = {t: i for i, t in enumerate(tickers)}
    edges = set()
    for members in spec.groups.values():
        clique = sorted({pos[t] for t in members} | {pos[t] for t in spec.bridge})
        edges.update(combinations(clique, 2))
    g = check_chordal(len(tickers), edges)
    return g, build_clique_tree(g)


def heatmap_rows(m, labels, correlation=False):
    """``(row_label, col_label, value)`` triples in row-major order;
    ``correlation=True`` normalises by ``sqrt(m_ii m_jj)``."""
    m = np.asarray(m, dtype=float)
    labels = list(labels)
    if m.shape != (len(labels), len(labels)):
        raise InputError("label count does not match the matrix size")
    if correlation:
        d = np.diag(m)
        if np.any(d <= 0):
            raise InputError("cannot normalise: non-positive diagonal entry")
        s = np.sqrt(d)
        m = m / np.outer(s, s)
        m[np.diag_indices_from(m)] = 1.0
    return [(labels[i], labels[j], float(m[i, j])) for i in range(len(labels)) for j in range(len(labels))]


def export_heatmap_data(m, labels, prefix):
    """Write ``<prefix>_values.csv`` and ``<prefix>_correlation.csv`` with
    ``row,col,value`` columns; returns the two paths."""
    paths = []
    for suffix, corr in (("values", False), ("correlation", True)):
        rows = heatmap_rows(m, labels, correlation=corr)
        path = Path(f"{prefix}_{suffix}.csv")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["row", "col", "value"])
            for r, c, v in rows:
                w.writerow([r, c, f"{v:.17g}"])
        paths.append(path)
    return paths
