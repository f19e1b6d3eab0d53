"""``dscov`` command-line interface.

Exit codes: 0 success, 1 I/O or parse error, 2 invalid mathematical input
(non-chordal graph, non-PSD data, ...), 3 singular block, 4 estimator did
not converge (outputs are still written).
"""

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, _backend
from .bench import FAMILIES, run_bench, write_csv
from .dataio import (
    SectorSpec,
    export_heatmap_data,
    index_residuals,
    log_returns,
    read_prices,
    sector_graph,
)
from .errors import InputError, NotChordalError, SingularBlockError
from .estimator import (
    EstimatorOptions,
    estimate,
    objective_value,
    sample_covariance,
    simulate_gaussian,
)
from .formats import (
    FormatError,
    graph_json,
    read_graph,
    read_matrix,
    read_observations,
    read_tree,
    write_json,
    write_matrix,
    write_observations,
)
from .graph import build_clique_tree, check_chordal, normalize_edges, triangulate
from .local import (
    PartialMatrix,
    constraint_residual,
    local_inverse,
    local_logdet,
    markov_complete,
)

log = logging.getLogger("dscov")

EXIT_OK, EXIT_IO, EXIT_INVALID, EXIT_SINGULAR, EXIT_NOCONV = 0, 1, 2, 3, 4


def _labels(vs):
    return [v + 1 for v in vs]


def _load_graph_edges(path):
    p, edges = read_graph(path)
    try:
        edges = normalize_edges(p, edges)
    except InputError as exc:
        raise FormatError(f"{path}: {exc}") from None
    return p, edges


def _load_chordal(args):
    """Graph and clique tree from ``--graph`` (and optional ``--tree``)."""
    p, edges = _load_graph_edges(args.graph)
    g = check_chordal(p, edges)
    tree = read_tree(args.tree, p) if getattr(args, "tree", None) else build_clique_tree(g)
    return g, tree


def _out(args, suffix=""):
    return Path(f"{args.out}{suffix}")


def cmd_check_chordal(args):
    p, edges = _load_graph_edges(args.graph_file)
    try:
        g = check_chordal(p, edges)
    except NotChordalError as exc:
        write_json(_out(args, ".json"), {"chordal": False, "cycle": _labels(exc.cycle)})
        print(f"not chordal: chordless cycle {'-'.join(map(str, _labels(exc.cycle)))}")
        return EXIT_INVALID
    tree = build_clique_tree(g)
    write_json(_out(args, ".json"), {
        "chordal": True,
        "p": p,
        "peo": _labels(g.peo),
        "clique_tree": tree.to_json(),
    })
    print(f"chordal: {len(tree.cliques)} maximal cliques")
    for c in tree.cliques:
        print("  {" + ",".join(map(str, _labels(c))) + "}")
    return EXIT_OK


def cmd_clique_tree(args):
    args.graph = args.graph_file
    _, tree = _load_chordal(args)
    write_json(_out(args, ".json"), tree.to_json())
    for a, b, sep in tree.tree_edges:
        print(f"clique {a} -- clique {b}  separator {{{','.join(map(str, _labels(sep)))}}}")
    return EXIT_OK


def cmd_triangulate(args):
    p, edges = _load_graph_edges(args.graph_file)
    g, fill = triangulate(p, edges)
    obj = graph_json(g.p, g.edges)
    obj["fill"] = [[i + 1, j + 1] for i, j in fill]
    write_json(_out(args, ".json"), obj)
    print(f"added {len(fill)} fill edge(s)")
    return EXIT_OK


def cmd_local_inverse(args):
    m = read_matrix(args.matrix_file)
    _, tree = _load_chordal(args)
    lm = local_inverse(m, tree)
    _, cnorm = constraint_residual(m, tree)
    write_matrix(_out(args, ".csv"), lm)
    write_json(_out(args, ".json"), {"local_inverse": lm.tolist(), "constraint_norm": cnorm})
    print(f"local inverse written; ||M L(M) - I||_F = {cnorm:.3e}")
    return EXIT_OK


def cmd_local_logdet(args):
    m = read_matrix(args.matrix_file)
    _, tree = _load_chordal(args)
    ld = local_logdet(m, tree)
    write_json(_out(args, ".json"), {"local_logdet": ld})
    print(f"local log-determinant: {ld:.17g}")
    return EXIT_OK


def cmd_complete(args):
    m = read_matrix(args.matrix_file)
    _, tree = _load_chordal(args)
    full = markov_complete(PartialMatrix.from_matrix(m, tree))
    write_matrix(_out(args, ".csv"), full)
    write_json(_out(args, ".json"), {"completion": full.tolist()})
    print("completion written")
    return EXIT_OK


def _read_cov_or_data(path, kind):
    """Return ``(S, names, n)`` from a covariance matrix or observations."""
    if kind in ("auto", "cov"):
        try:
            s = read_matrix(path)
            return s, None, None
        except FormatError:
            if kind == "cov":
                raise
    names, data = read_observations(path)
    s, _ = sample_covariance(data)
    return s, names, data.shape[0]


def cmd_estimate(args):
    # graph first: a non-chordal graph fails before any optimisation
    if args.sector:
        spec = SectorSpec.from_json(args.sector)
    else:
        if not args.graph:
            raise FormatError("estimate needs --graph or --sector")
        g, tree = _load_chordal(args)
    names = None
    n = None
    if args.simulate:
        if not args.truth:
            raise FormatError("--simulate needs --truth")
        truth = read_matrix(args.truth)
        data = simulate_gaussian(truth, args.simulate, args.seed)
        s, _ = sample_covariance(data)
        n = args.simulate
    elif args.input:
        s, names, n = _read_cov_or_data(args.input, args.kind)
    else:
        raise FormatError("estimate needs an input file or --simulate")
    if args.sector:
        if names is None:
            raise FormatError("--sector needs observations with a header of tickers")
        g, tree = sector_graph(spec, names)
    if s.shape[0] != g.p:
        raise InputError(f"covariance is {s.shape[0]} x {s.shape[0]} but the graph has {g.p} vertices")
    opts = EstimatorOptions(
        constraint_tol=args.tol,
        max_outer=args.max_outer,
        max_inner=args.max_inner,
        gradient_mode=args.gradient_mode,
        restarts=args.restarts,
        seed=args.seed,
    )
    res = estimate(s, g, tree, opts)
    report = res.to_json()
    report["n_observations"] = n
    report["labels"] = names
    report["options"] = vars(opts)
    if args.simulate:
        report["truth_objective"] = objective_value(truth, s, tree)
        report["max_abs_error_vs_truth"] = float(np.abs(res.m_hat - truth).max())
    write_json(_out(args, ".json"), report)
    write_matrix(_out(args, "_m.csv"), res.m_hat)
    write_matrix(_out(args, "_theta.csv"), res.theta_hat)
    write_matrix(_out(args, "_s.csv"), s)
    status = "converged" if res.converged else "NOT converged"
    print(f"{status}: objective {res.objective:.10g}, ||C||_F {res.constraint_norm:.3e}, "
          f"{res.outer_iterations} outer / {res.inner_iterations} inner iterations")
    if args.simulate:
        print(f"max |M_hat - truth| = {report['max_abs_error_vs_truth']:.4g}")
    return EXIT_OK if res.converged else EXIT_NOCONV


def cmd_simulate(args):
    truth = read_matrix(args.truth)
    data = simulate_gaussian(truth, args.n, args.seed)
    write_observations(_out(args, ".csv"), data)
    write_json(_out(args, ".json"), {"n": args.n, "seed": args.seed, "p": truth.shape[0]})
    print(f"{args.n} observations written")
    return EXIT_OK


def cmd_residuals(args):
    dates, tickers, prices = read_prices(args.prices_file)
    panel = log_returns(prices, dates, tickers, index_column=args.index)
    fit = index_residuals(panel)
    s, _ = sample_covariance(fit.residuals)
    write_observations(_out(args, "_residuals.csv"), fit.residuals, fit.tickers)
    write_matrix(_out(args, "_cov.csv"), s)
    summary = panel.summary()
    summary.update({
        "tickers": fit.tickers,
        "intercept": fit.intercept.tolist(),
        "slope": fit.slope.tolist(),
        "slope_stderr": fit.slope_stderr.tolist(),
    })
    write_json(_out(args, ".json"), summary)
    print(f"{panel.n} returns, {len(fit.tickers)} residual series, "
          f"{len(panel.dropped_dates)} incomplete date(s) dropped")
    return EXIT_OK


def cmd_heatmap(args):
    m = read_matrix(args.matrix_file)
    labels = args.labels.split(",") if args.labels else [str(i + 1) for i in range(m.shape[0])]
    paths = export_heatmap_data(m, labels, args.out)
    write_json(_out(args, ".json"), {"files": [str(p) for p in paths]})
    print("wrote " + ", ".join(str(p) for p in paths))
    return EXIT_OK


def cmd_bench(args):
    backends = _backend.available_backends() if args.backend == "all" else [args.backend]
    sizes = [int(v) for v in args.sizes.split(",")]
    rows = run_bench(args.family, sizes, args.reps, backends=backends, seed=args.seed,
                     bandwidth=args.bandwidth, clique_size=args.clique_size, overlap=args.overlap)
    write_csv(_out(args, ".csv"), rows)
    write_json(_out(args, ".json"), {"rows": [vars(r) for r in rows]})
    print(f"{'size':>6} {'p':>6} {'backend':>8} {'local_s':>11} {'dense_s':>11} {'rel_diff':>9}")
    for r in rows:
        print(f"{r.size:>6} {r.p:>6} {r.backend:>8} {r.local_median_s:>11.3e} "
              f"{r.dense_median_s:>11.3e} {r.max_rel_discrepancy:>9.1e}")
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="dscov", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--out", default=name, help="output path prefix")
        sp.set_defaults(func=fn)
        return sp

    sp = add("check-chordal", cmd_check_chordal, "test chordality; print PEO and clique tree")
    sp.add_argument("graph_file")
    sp = add("clique-tree", cmd_clique_tree, "build a clique tree")
    sp.add_argument("graph_file")
    sp = add("triangulate", cmd_triangulate, "add fill edges to make a graph chordal")
    sp.add_argument("graph_file")

    for name, fn, help_ in (
        ("local-inverse", cmd_local_inverse, "evaluate the local inverse formula"),
        ("local-logdet", cmd_local_logdet, "evaluate the local log-determinant"),
        ("complete", cmd_complete, "Markov completion of clique blocks"),
    ):
        sp = add(name, fn, help_)
        sp.add_argument("matrix_file")
        sp.add_argument("--graph", required=True)
        sp.add_argument("--tree", help="clique tree JSON (default: built from the graph)")

    sp = add("estimate", cmd_estimate, "doubly sparse maximum-likelihood estimate")
    sp.add_argument("input", nargs="?", help="covariance matrix or observation CSV")
    sp.add_argument("--kind", choices=("auto", "cov", "data"), default="auto")
    sp.add_argument("--graph")
    sp.add_argument("--tree")
    sp.add_argument("--sector", help="sector spec JSON (graph from observation header)")
    sp.add_argument("--simulate", type=int, metavar="N", help="simulate N draws from --truth")
    sp.add_argument("--truth")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--tol", type=float, default=1e-6)
    sp.add_argument("--max-outer", type=int, default=60)
    sp.add_argument("--max-inner", type=int, default=500)
    sp.add_argument("--gradient-mode", choices=("analytic", "fd"), default="analytic")
    sp.add_argument("--restarts", type=int, default=0)

    sp = add("simulate", cmd_simulate, "draw Gaussian observations")
    sp.add_argument("--truth", required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--seed", type=int, default=0)

    sp = add("residuals", cmd_residuals, "index-regression residuals from prices")
    sp.add_argument("prices_file")
    sp.add_argument("--index", required=True, help="ticker of the market index column")

    sp = add("heatmap", cmd_heatmap, "emit heatmap data (values and correlations)")
    sp.add_argument("matrix_file")
    sp.add_argument("--labels", help="comma-separated labels")

    sp = add("bench", cmd_bench, "time local inverse against dense inversion")
    sp.add_argument("--family", choices=FAMILIES, default="banded")
    sp.add_argument("--sizes", default="100,400,1600")
    sp.add_argument("--reps", type=int, default=5)
    sp.add_argument("--bandwidth", type=int, default=2)
    sp.add_argument("--clique-size", type=int, default=5)
    sp.add_argument("--overlap", type=int, default=2)
    sp.add_argument("--backend", choices=("all", "cython", "python"), default="all")
    sp.add_argument("--seed", type=int, default=0)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except SingularBlockError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SINGULAR
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
