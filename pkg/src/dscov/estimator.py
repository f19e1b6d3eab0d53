"""Constrained maximum-likelihood estimation of doubly sparse covariances.

The covariance is parameterised as ``M = R^T R`` with ``R`` upper
triangular in perfect-elimination order and nonzero only on the diagonal
and graph edges, so ``M`` is subordinate to the graph by construction.  The
second half of the double-sparsity constraint, ``inv(M)`` subordinate to the
graph, is imposed as ``C = M L(M) - I = 0`` with an augmented Lagrangian.
"""

import logging
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import optimize

from . import _backend
from .errors import InputError, InsufficientDataError, SingularBlockError
from .local import (
    SINGULAR_RTOL,
    as_symmetric,
    constraint_residual,
    local_inverse,
    local_logdet,
    tree_traversal,
)

__all__ = [
    "SparseCholesky",
    "EstimatorOptions",
    "EstimateResult",
    "sample_covariance",
    "simulate_gaussian",
    "realize",
    "objective",
    "objective_gradient",
    "objective_value",
    "estimate",
]

log = logging.getLogger(__name__)


def sample_covariance(data):
    """Maximum-likelihood sample covariance (divisor ``n``) and mean."""
    x = np.asarray(data, dtype=float)
    if x.ndim != 2:
        raise InputError(f"expected an n x p observation matrix, got shape {x.shape}")
    n = x.shape[0]
    if n < 2:
        raise InsufficientDataError(f"need at least 2 observations, got {n}")
    mu = x.mean(axis=0)
    xc = x - mu
    s = xc.T @ xc / n
    return 0.5 * (s + s.T), mu


def simulate_gaussian(v, n, seed):
    """Draw ``n`` zero-mean samples with covariance ``v`` from a seeded
    generator; same seed, same draws."""
    v = as_symmetric(v)
    try:
        low = np.linalg.cholesky(v)
    except np.linalg.LinAlgError:
        raise InputError("covariance for simulation is not positive definite") from None
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((int(n), v.shape[0]))
    return z @ low.T


class SparseCholesky:
    """Parameter map for upper-triangular factors on a chordal pattern.

    Rows and columns of ``R`` follow the perfect elimination ordering
    ``order`` (``order[k]`` is the vertex at position ``k``).  The parameter
    vector holds ``log R[k, k]`` for every ``k`` followed by the edge
    entries ``R[k, l]`` (``k < l``) in row-major order, so its length is
    ``p + len(graph.edges)``.
    """

    def __init__(self, graph):
        self.graph = graph
        self.p = graph.p
        self.order = np.asarray(graph.peo, dtype=np.int64)
        pos = np.empty(self.p, dtype=np.int64)
        pos[self.order] = np.arange(self.p)
        self.pos = pos
        rows, cols = [], []
        for i, j in graph.edges:
            a, b = sorted((pos[i], pos[j]))
            rows.append(a)
            cols.append(b)
        key = np.lexsort((cols, rows))
        self.rows = np.asarray(rows, dtype=np.int64)[key]
        self.cols = np.asarray(cols, dtype=np.int64)[key]
        self.n_params = self.p + len(self.rows)

    @property
    def pattern(self):
        """Allowed ``(k, l)`` positions of ``R`` in elimination order."""
        diag = [(k, k) for k in range(self.p)]
        return diag + list(zip(self.rows.tolist(), self.cols.tolist()))

    def factor_matrix(self, x):
        x = np.asarray(x, dtype=float)
        r = np.zeros((self.p, self.p))
        r[np.diag_indices(self.p)] = np.exp(x[: self.p])
        r[self.rows, self.cols] = x[self.p:]
        return r

    def to_original(self, mp):
        """Map a matrix in elimination order back to vertex labels."""
        return mp[np.ix_(self.pos, self.pos)]

    def to_eliminated(self, m):
        return m[np.ix_(self.order, self.order)]

    def from_matrix(self, m):
        """Parameters of the Cholesky factor of an SPD, pattern-subordinate
        ``m``.  With a perfect elimination ordering the factor has no fill."""
        m = as_symmetric(m)
        try:
            low = np.linalg.cholesky(self.to_eliminated(m))
        except np.linalg.LinAlgError:
            raise InputError("matrix is not positive definite") from None
        r = low.T
        x = np.empty(self.n_params)
        x[: self.p] = np.log(np.diag(r))
        x[self.p:] = r[self.rows, self.cols]
        return x

    def pullback(self, x, r, g):
        """Gradient in ``x`` of a function of ``M`` with matrix gradient
        ``g`` (``d f = trace(g^T dM)``, vertex labels)."""
        gp = self.to_eliminated(g)
        gr = r @ (gp + gp.T)
        out = np.empty(self.n_params)
        out[: self.p] = np.diag(gr) * np.diag(r)
        out[self.p:] = gr[self.rows, self.cols]
        return out


def realize(chol, x):
    """Return ``(R, M)``: the factor in elimination order and
    ``M = R^T R`` relabelled to the original vertices."""
    r = chol.factor_matrix(x)
    m = chol.to_original(r.T @ r)
    return r, 0.5 * (m + m.T)


def objective_value(m, s, tree, backend=None):
    """Negative log-likelihood surrogate ``trace(L(M) S) + log det M``,
    both terms from local formulas."""
    lm = local_inverse(m, tree, backend=backend)
    return float(np.sum(lm * s) + local_logdet(m, tree, backend=backend))


def objective(x, chol, s, tree, backend=None):
    """``trace(L(M(x)) S) + 2 sum_k log R_kk``."""
    _, m = realize(chol, x)
    lm = local_inverse(m, tree, backend=backend)
    return float(np.sum(lm * s) + 2.0 * np.sum(x[: chol.p]))


def objective_gradient(x, chol, s, tree, mode="analytic", fd_step=1e-6, backend=None):
    """Gradient of :func:`objective` in the parameter vector.

    ``mode="fd"`` uses central differences with step ``fd_step`` times
    ``max(1, |x_i|)``.
    """
    x = np.asarray(x, dtype=float)
    if mode == "fd":
        return _fd_gradient(lambda z: objective(z, chol, s, tree, backend), x, fd_step)
    if mode != "analytic":
        raise ValueError(f"unknown gradient mode {mode!r}")
    r, m = realize(chol, x)
    g = -_sandwich(m, s, tree, backend)
    grad = chol.pullback(x, r, g)
    grad[: chol.p] += 2.0
    return grad


def _fd_gradient(f, x, step):
    grad = np.empty_like(x)
    for i in range(x.size):
        h = step * max(1.0, abs(x[i]))
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        grad[i] = (f(xp) - f(xm)) / (2 * h)
    return grad


def _sandwich(m, xmat, tree, backend):
    k = _backend.get_kernels(backend)
    out, status = k.sandwich(
        np.ascontiguousarray(m), np.ascontiguousarray(xmat), *tree.blocks(), SINGULAR_RTOL
    )
    if np.any(status == 2):
        b = int(np.flatnonzero(status == 2)[0])
        raise SingularBlockError(tree.block_sets()[b])
    return out


@dataclass
class EstimatorOptions:
    """Tuning knobs for :func:`estimate`.

    An outer iterate is accepted when ``||C||_F`` does not increase, and the
    multipliers are then updated.  The penalty grows by ``penalty_growth``
    whenever an iterate is rejected or fails to shrink ``||C||_F`` by the
    factor ``shrink``.
    """

    constraint_tol: float = 1e-6
    penalty_init: float = 10.0
    penalty_growth: float = 10.0
    shrink: float = 0.25
    max_outer: int = 60
    max_inner: int = 500
    inner_gtol: float = 1e-9
    ftol: float = 1e-10
    penalty_max: float = 1e12
    gradient_mode: str = "analytic"
    fd_step: float = 1e-6
    newton_polish: bool = True
    polish_steps: int = 8
    restarts: int = 0
    seed: int = 0

    def __post_init__(self):
        for name in ("constraint_tol", "penalty_init", "inner_gtol", "fd_step", "shrink"):
            if not getattr(self, name) > 0:
                raise InputError(f"{name} must be positive")
        if not self.penalty_growth > 1:
            raise InputError("penalty_growth must exceed 1")
        if self.max_outer < 1 or self.max_inner < 1:
            raise InputError("iteration limits must be at least 1")
        if self.gradient_mode not in ("analytic", "fd"):
            raise InputError(f"unknown gradient mode {self.gradient_mode!r}")


@dataclass
class EstimateResult:
    m_hat: np.ndarray
    theta_hat: np.ndarray
    objective: float
    constraint_norm: float
    outer_iterations: int
    inner_iterations: int
    converged: bool
    trace: list = field(default_factory=list)
    message: str = ""

    def to_json(self):
        return {
            "m_hat": self.m_hat.tolist(),
            "theta_hat": self.theta_hat.tolist(),
            "objective": self.objective,
            "constraint_norm": self.constraint_norm,
            "outer_iterations": self.outer_iterations,
            "inner_iterations": self.inner_iterations,
            "converged": self.converged,
            "message": self.message,
            "trace": self.trace,
        }


class _Problem:
    """Augmented Lagrangian pieces for one (S, graph, tree) triple."""

    def __init__(self, s, chol, tree, backend):
        self.s = s
        self.chol = chol
        self.tree = tree
        self.backend = backend
        self.iu = np.triu_indices(chol.p)

    def constraint(self, x):
        _, m = realize(self.chol, x)
        c, _ = constraint_residual(m, self.tree, backend=self.backend)
        return c

    def lagrangian(self, x, lam, mu):
        """Value and gradient of ``f + lam.c + mu/2 |c|^2`` over the upper
        triangle of ``C``."""
        r, m = realize(self.chol, x)
        with np.errstate(over="raise", invalid="raise"):
            try:
                lm = local_inverse(m, self.tree, backend=self.backend)
            except (SingularBlockError, FloatingPointError):
                return np.inf, np.zeros_like(x)
        c = m @ lm
        c[np.diag_indices_from(c)] -= 1.0
        cu = c[self.iu]
        f = float(np.sum(lm * self.s) + 2.0 * np.sum(x[: self.chol.p]))
        val = f + float(lam @ cu) + 0.5 * mu * float(cu @ cu)
        w = np.zeros_like(c)
        w[self.iu] = lam + mu * cu
        # d/dM of trace(L S) + trace(W^T (M L - I))
        g = w @ lm - _sandwich(m, self.s + m @ w, self.tree, self.backend)
        grad = self.chol.pullback(x, r, g)
        grad[: self.chol.p] += 2.0
        return val, grad

    def lagrangian_fd(self, x, lam, mu, step):
        def fval(z):
            return self.lagrangian(z, lam, mu)[0]

        return fval(x), _fd_gradient(fval, x, step)


def _newton_polish(fun, x, args, max_steps):
    """Refine an inner minimiser with Newton steps on the analytic gradient.

    The Hessian comes from central differences of the gradient.  A step is
    taken only if it lowers the gradient norm, so this never undoes BFGS;
    it carries stationarity below the ~1e-8 floor that a function-value
    line search reaches.
    """
    f0, g = fun(x, *args)
    gnorm = np.linalg.norm(g)
    steps = 0
    for _ in range(max_steps):
        if not np.isfinite(gnorm) or gnorm <= 1e-14 * max(1.0, abs(f0)):
            break
        n = x.size
        h = np.empty((n, n))
        for i in range(n):
            d = 1e-6 * max(1.0, abs(x[i]))
            xp = x.copy()
            xm = x.copy()
            xp[i] += d
            xm[i] -= d
            h[i] = (fun(xp, *args)[1] - fun(xm, *args)[1]) / (2 * d)
        h = 0.5 * (h + h.T)
        w, q = np.linalg.eigh(h)
        if not np.all(np.isfinite(w)) or w.min() <= 1e-12 * max(abs(w).max(), 1.0):
            break
        step = -(q @ ((q.T @ g) / w))
        x_try = x + step
        f_try, g_try = fun(x_try, *args)
        g_try_norm = np.linalg.norm(g_try)
        if not (g_try_norm < gnorm and f_try <= f0 + 1e-12 * max(1.0, abs(f0))):
            break
        x, f0, g, gnorm = x_try, f_try, g_try, g_try_norm
        steps += 1
    return x, steps


def _ridge_factor(m, s, chol):
    p = chol.p
    eps = 1e-6 * max(np.trace(s) / max(p, 1), 1e-12)
    ridge = 0.0
    for _ in range(200):
        try:
            np.linalg.cholesky(m + ridge * np.eye(p))
            break
        except np.linalg.LinAlgError:
            ridge = eps if ridge == 0.0 else 2 * ridge
    return chol.from_matrix(m + ridge * np.eye(p))


def _feasible_point(s, chol, tree):
    """Block-diagonal start: ``S`` on the root clique and on each other
    clique's private vertices.  Every block sits inside a clique, so the
    matrix and its inverse are both subordinate to the graph."""
    m = np.zeros_like(s)
    for child, sep in tree_traversal(tree):
        block = [v for v in tree.cliques[child] if v not in sep]
        m[np.ix_(block, block)] = s[np.ix_(block, block)]
    return _ridge_factor(m, s, chol)


def _initial_point(s, chol):
    """Project ``S`` onto the pattern and add a growing ridge until SPD."""
    return _ridge_factor(np.where(chol.graph.mask(), s, 0.0), s, chol)


def _check_psd(s, tol=1e-10):
    w = np.linalg.eigvalsh(s) if s.size else np.zeros(0)
    scale = max(np.abs(s).max() if s.size else 0.0, 1.0)
    if w.size and w.min() < -tol * scale:
        raise InputError(f"sample covariance is not positive semidefinite (min eigenvalue {w.min():.3g})")


def estimate(s, graph, tree, opts=None, x0=None, backend=None):
    """Maximum-likelihood covariance subject to double sparsity.

    Parameters
    ----------
    s : (p, p) array
        Sample covariance (symmetric PSD).
    graph : ChordalGraph
    tree : CliqueTree
        A clique tree of ``graph``.
    opts : EstimatorOptions, optional
    x0 : array, optional
        Starting parameter vector; defaults to the ridge-projected ``S``.

    Returns
    -------
    EstimateResult
        ``converged`` is False (rather than an exception) when the
        constraint tolerance is not met within ``max_outer`` iterations.
    """
    opts = opts or EstimatorOptions()
    s = as_symmetric(s)
    if s.shape[0] != graph.p or tree.p != graph.p:
        raise InputError("sample covariance size does not match the graph and clique tree")
    _check_psd(s)
    chol = SparseCholesky(graph)
    prob = _Problem(s, chol, tree, backend)

    starts = [np.asarray(x0, dtype=float)] if x0 is not None else [_initial_point(s, chol)]
    x_feas = _feasible_point(s, chol, tree)
    starts.append(x_feas)
    if opts.restarts:
        rng = np.random.default_rng(opts.seed)
        for _ in range(opts.restarts):
            z = starts[0].copy()
            z[chol.p:] *= rng.uniform(-1.0, 1.0, size=z.size - chol.p)
            starts.append(z)

    # the feasible start is itself a candidate, so the answer is never
    # worse than it
    best = _as_result(prob, x_feas, opts, "feasible block-diagonal start")
    for k, start in enumerate(starts):
        res = _solve(prob, start, opts)
        log.debug("start %d: objective %.10g, |C| %.3g", k, res.objective, res.constraint_norm)
        if _better(res, best, opts.constraint_tol):
            best = res
    return best


def _better(a, b, tol):
    if a.converged != b.converged:
        return a.converged
    if a.converged:
        return a.objective < b.objective
    # among failures prefer feasible points by objective, then feasibility
    fa, fb = a.constraint_norm <= tol, b.constraint_norm <= tol
    if fa != fb:
        return fa
    if fa:
        return a.objective < b.objective
    return a.constraint_norm < b.constraint_norm


def _as_result(prob, x, opts, message):
    # a fallback point is feasible but not an optimum: never "converged"
    _, m = realize(prob.chol, x)
    theta = local_inverse(m, prob.tree, backend=prob.backend)
    _, cnorm = constraint_residual(m, prob.tree, backend=prob.backend)
    return EstimateResult(
        m_hat=m,
        theta_hat=theta,
        objective=objective(x, prob.chol, prob.s, prob.tree, prob.backend),
        constraint_norm=cnorm,
        outer_iterations=0,
        inner_iterations=0,
        converged=False,
        message=message,
    )


def _solve(prob, x, opts):
    chol = prob.chol
    lam = np.zeros(len(prob.iu[0]))
    mu = opts.penalty_init
    x_acc = x.copy()
    # iterates must not end up less feasible than the start
    c_acc = float(np.linalg.norm(prob.constraint(x_acc)))
    f_acc = objective(x_acc, chol, prob.s, prob.tree, prob.backend)
    trace = []
    inner_total = 0
    converged = False
    message = "maximum outer iterations reached"
    outer = 0
    for outer in range(1, opts.max_outer + 1):
        if opts.gradient_mode == "analytic":
            fun = prob.lagrangian
            args = (lam, mu)
        else:
            fun = prob.lagrangian_fd
            args = (lam, mu, opts.fd_step)
        sol = optimize.minimize(
            fun, x_acc, args=args, jac=True, method="BFGS",
            options={"maxiter": opts.max_inner, "gtol": opts.inner_gtol},
        )
        inner_total += int(sol.nit)
        x_new = sol.x
        if opts.newton_polish and opts.gradient_mode == "analytic":
            x_new, steps = _newton_polish(fun, x_new, args, opts.polish_steps)
            inner_total += steps
        c = prob.constraint(x_new)
        cnorm = float(np.linalg.norm(c))
        f_new = objective(x_new, chol, prob.s, prob.tree, prob.backend)
        accepted = cnorm <= c_acc
        trace.append({
            "outer": outer,
            "objective": f_new,
            "constraint_norm": cnorm,
            "penalty": mu,
            "inner_iterations": int(sol.nit),
            "accepted": bool(accepted),
        })
        log.debug("outer %d: f=%.10g |C|=%.3g mu=%.3g nit=%d", outer, f_new, cnorm, mu, sol.nit)
        if accepted:
            small_step = abs(f_new - f_acc) <= opts.ftol * (1.0 + abs(f_new))
            shrank = cnorm <= opts.shrink * c_acc
            x_acc, f_acc, c_acc = x_new, f_new, cnorm
            lam = lam + mu * c[prob.iu]
            if cnorm <= opts.constraint_tol and (small_step or cnorm <= 1e-3 * opts.constraint_tol):
                converged = True
                message = "constraint tolerance met"
                break
            if not shrank:
                mu *= opts.penalty_growth
        else:
            mu *= opts.penalty_growth
        if mu > opts.penalty_max:
            message = "penalty limit reached"
            break
    _, m = realize(chol, x_acc)
    theta = local_inverse(m, prob.tree, backend=prob.backend)
    return EstimateResult(
        m_hat=m,
        theta_hat=theta,
        objective=float(f_acc),
        constraint_norm=float(c_acc),
        outer_iterations=outer,
        inner_iterations=inner_total,
        converged=converged,
        trace=trace,
        message=message,
    )


def options_dict(opts):
    return asdict(opts)
