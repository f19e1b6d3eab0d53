# cython: language_level=3
"""Compiled block kernels for the local inverse formula.

Same calling convention and status codes as ``_pykernels``.  Each block is
copied into a small dense workspace, factored (Cholesky, falling back to
Gauss-Jordan with partial pivoting), inverted and scatter-added into the
output in block order, so results are bit-stable across runs.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, log, sqrt
from libc.stdlib cimport free, malloc

cnp.import_array()

cdef enum:
    SPD = 0
    INDEFINITE = 1
    SINGULAR = 2


cdef int _chol_inv(double* a, Py_ssize_t n, double* work,
                   double thresh, double* logdet) noexcept nogil:
    # a: n*n row-major block, overwritten with its inverse on success.
    cdef Py_ssize_t i, j, k
    cdef double s, d
    logdet[0] = 0.0
    # lower Cholesky factor into work
    for i in range(n * n):
        work[i] = 0.0
    for j in range(n):
        d = a[j * n + j]
        for k in range(j):
            d -= work[j * n + k] * work[j * n + k]
        if d < thresh:
            return 1
        logdet[0] += log(d)
        d = sqrt(d)
        work[j * n + j] = d
        for i in range(j + 1, n):
            s = a[i * n + j]
            for k in range(j):
                s -= work[i * n + k] * work[j * n + k]
            work[i * n + j] = s / d
    # invert the lower factor in place (column by column)
    for j in range(n):
        work[j * n + j] = 1.0 / work[j * n + j]
        for i in range(j + 1, n):
            s = 0.0
            for k in range(j, i):
                s -= work[i * n + k] * work[k * n + j]
            work[i * n + j] = s / work[i * n + i]
    # inverse = Linv^T Linv
    for i in range(n):
        for j in range(i + 1):
            s = 0.0
            for k in range(i, n):
                s += work[k * n + i] * work[k * n + j]
            a[i * n + j] = s
            a[j * n + i] = s
    return 0


cdef int _gj_inv(double* a, Py_ssize_t n, double* work, double thresh) noexcept nogil:
    # Gauss-Jordan with partial pivoting on [a | I] stored in work (n x 2n).
    cdef Py_ssize_t i, j, k, piv, w = 2 * n
    cdef double best, t, f
    for i in range(n):
        for j in range(n):
            work[i * w + j] = a[i * n + j]
            work[i * w + n + j] = 1.0 if i == j else 0.0
    for k in range(n):
        piv = k
        best = fabs(work[k * w + k])
        for i in range(k + 1, n):
            if fabs(work[i * w + k]) > best:
                best = fabs(work[i * w + k])
                piv = i
        if best < thresh:
            return 2
        if piv != k:
            for j in range(w):
                t = work[k * w + j]
                work[k * w + j] = work[piv * w + j]
                work[piv * w + j] = t
        f = 1.0 / work[k * w + k]
        for j in range(w):
            work[k * w + j] *= f
        for i in range(n):
            if i != k:
                f = work[i * w + k]
                if f != 0.0:
                    for j in range(w):
                        work[i * w + j] -= f * work[k * w + j]
    for i in range(n):
        for j in range(i + 1):
            t = 0.5 * (work[i * w + n + j] + work[j * w + n + i])
            a[i * n + j] = t
            a[j * n + i] = t
    return 0


cdef int _invert_block(const double[:, ::1] m, const cnp.int64_t[::1] idx,
                       Py_ssize_t lo, Py_ssize_t n, double thresh_rel,
                       double* blk, double* work, double* logdet) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double scale = 0.0, v
    for i in range(n):
        for j in range(n):
            v = m[idx[lo + i], idx[lo + j]]
            blk[i * n + j] = v
            if fabs(v) > scale:
                scale = fabs(v)
    logdet[0] = 0.0
    if scale == 0.0:
        return SINGULAR
    if _chol_inv(blk, n, work, thresh_rel * scale, logdet) == 0:
        return SPD
    # a failed Cholesky leaves blk untouched
    logdet[0] = 0.0
    if _gj_inv(blk, n, work, thresh_rel * scale) == 0:
        return INDEFINITE
    return SINGULAR


cdef Py_ssize_t _max_block(const cnp.int64_t[::1] ptr):
    cdef Py_ssize_t b, nmax = 0
    for b in range(ptr.shape[0] - 1):
        if ptr[b + 1] - ptr[b] > nmax:
            nmax = ptr[b + 1] - ptr[b]
    return nmax


def local_inverse(const double[:, ::1] m, const cnp.int64_t[::1] idx,
                  const cnp.int64_t[::1] ptr, const double[::1] sign,
                  double thresh_rel):
    cdef Py_ssize_t p = m.shape[0]
    cdef Py_ssize_t nb = ptr.shape[0] - 1
    cdef Py_ssize_t nmax = _max_block(ptr)
    cdef Py_ssize_t b, i, j, n, lo
    cdef int st
    cdef double ld, total = 0.0, s
    out_arr = np.zeros((p, p), dtype=np.float64)
    status_arr = np.zeros(nb, dtype=np.int8)
    cdef double[:, ::1] out = out_arr
    cdef cnp.int8_t[::1] status = status_arr
    cdef double* blk = <double*> malloc(max(nmax * nmax, 1) * sizeof(double))
    cdef double* work = <double*> malloc(max(2 * nmax * nmax, 1) * sizeof(double))
    if blk == NULL or work == NULL:
        free(blk)
        free(work)
        raise MemoryError()
    try:
        with nogil:
            for b in range(nb):
                lo = ptr[b]
                n = ptr[b + 1] - lo
                if n == 0:
                    continue
                st = _invert_block(m, idx, lo, n, thresh_rel, blk, work, &ld)
                status[b] = st
                if st == SINGULAR:
                    continue
                s = sign[b]
                total += s * ld
                for i in range(n):
                    for j in range(n):
                        out[idx[lo + i], idx[lo + j]] += s * blk[i * n + j]
    finally:
        free(blk)
        free(work)
    return out_arr, total, status_arr


def sandwich(const double[:, ::1] m, const double[:, ::1] x,
             const cnp.int64_t[::1] idx, const cnp.int64_t[::1] ptr,
             const double[::1] sign, double thresh_rel):
    cdef Py_ssize_t p = m.shape[0]
    cdef Py_ssize_t nb = ptr.shape[0] - 1
    cdef Py_ssize_t nmax = _max_block(ptr)
    cdef Py_ssize_t b, i, j, k, n, lo
    cdef int st
    cdef double ld, s, acc
    out_arr = np.zeros((p, p), dtype=np.float64)
    status_arr = np.zeros(nb, dtype=np.int8)
    cdef double[:, ::1] out = out_arr
    cdef cnp.int8_t[::1] status = status_arr
    cdef Py_ssize_t sz = max(nmax * nmax, 1)
    cdef double* blk = <double*> malloc(sz * sizeof(double))
    cdef double* work = <double*> malloc(2 * sz * sizeof(double))
    cdef double* tmp = <double*> malloc(sz * sizeof(double))
    if blk == NULL or work == NULL or tmp == NULL:
        free(blk)
        free(work)
        free(tmp)
        raise MemoryError()
    try:
        with nogil:
            for b in range(nb):
                lo = ptr[b]
                n = ptr[b + 1] - lo
                if n == 0:
                    continue
                st = _invert_block(m, idx, lo, n, thresh_rel, blk, work, &ld)
                status[b] = st
                if st == SINGULAR:
                    continue
                # tmp = x_bb @ K
                for i in range(n):
                    for j in range(n):
                        acc = 0.0
                        for k in range(n):
                            acc += x[idx[lo + i], idx[lo + k]] * blk[k * n + j]
                        tmp[i * n + j] = acc
                s = sign[b]
                for i in range(n):
                    for j in range(n):
                        acc = 0.0
                        for k in range(n):
                            acc += blk[i * n + k] * tmp[k * n + j]
                        out[idx[lo + i], idx[lo + j]] += s * acc
    finally:
        free(blk)
        free(work)
        free(tmp)
    return out_arr, status_arr
