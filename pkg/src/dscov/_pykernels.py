"""Pure-numpy block kernels; the fallback when ``_kernels`` is not compiled.

Both backends share one calling convention.  Blocks are described by a flat
index array ``idx`` and offsets ``ptr`` (block ``b`` covers
``idx[ptr[b]:ptr[b + 1]]``) together with a per-block ``sign``.

Per-block status codes: 0 positive definite, 1 invertible but indefinite,
2 singular.
"""

import warnings

import numpy as np
from scipy import linalg

SPD, INDEFINITE, SINGULAR = 0, 1, 2


def _block_inverse(a, thresh_rel):
    """Return ``(inverse, logdet, status)`` for a small dense symmetric block."""
    n = a.shape[0]
    scale = np.abs(a).max() if n else 0.0
    if scale == 0.0:
        return None, 0.0, SINGULAR
    thresh = thresh_rel * scale
    try:
        low = np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        low = None
    if low is not None:
        d = np.diag(low) ** 2
        if d.min() >= thresh:
            linv = linalg.solve_triangular(low, np.eye(n), lower=True)
            inv = linv.T @ linv
            return inv, float(np.log(d).sum()), SPD
    with warnings.catch_warnings():
        # singularity is judged by our own relative pivot rule below
        warnings.simplefilter("ignore", linalg.LinAlgWarning)
        lu, piv = linalg.lu_factor(a, check_finite=False)
    if np.abs(np.diag(lu)).min() < thresh:
        return None, 0.0, SINGULAR
    inv = linalg.lu_solve((lu, piv), np.eye(n), check_finite=False)
    return 0.5 * (inv + inv.T), 0.0, INDEFINITE


def local_inverse(m, idx, ptr, sign, thresh_rel):
    p = m.shape[0]
    out = np.zeros((p, p))
    nb = len(ptr) - 1
    status = np.zeros(nb, dtype=np.int8)
    logdet = 0.0
    for b in range(nb):
        ix = idx[ptr[b]:ptr[b + 1]]
        if len(ix) == 0:
            continue
        inv, ld, st = _block_inverse(m[np.ix_(ix, ix)], thresh_rel)
        status[b] = st
        if st == SINGULAR:
            continue
        out[np.ix_(ix, ix)] += sign[b] * inv
        logdet += sign[b] * ld
    return out, logdet, status


def sandwich(m, x, idx, ptr, sign, thresh_rel):
    """Accumulate ``sign_b * scatter(inv(m_bb) @ x_bb @ inv(m_bb))``."""
    p = m.shape[0]
    out = np.zeros((p, p))
    nb = len(ptr) - 1
    status = np.zeros(nb, dtype=np.int8)
    for b in range(nb):
        ix = idx[ptr[b]:ptr[b + 1]]
        if len(ix) == 0:
            continue
        inv, _, st = _block_inverse(m[np.ix_(ix, ix)], thresh_rel)
        status[b] = st
        if st == SINGULAR:
            continue
        out[np.ix_(ix, ix)] += sign[b] * (inv @ x[np.ix_(ix, ix)] @ inv)
    return out, status
