# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels. Same contracts as ``_pykernels``.

Reductions run in a fixed sequential order so results are reproducible
bit for bit between runs.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, INFINITY

cnp.import_array()


def pairwise_distance(const double[:, ::1] Z, const double[:, ::1] C, double eps):
    cdef Py_ssize_t m = Z.shape[0], n = C.shape[0], d = Z.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double s, t
    out = np.empty((m, n))
    cdef double[:, ::1] D = out
    for i in range(m):
        for j in range(n):
            s = 0.0
            for k in range(d):
                t = Z[i, k] - C[j, k]
                s += t * t
            D[i, j] = sqrt(s + eps)
    return out


def pairwise_distance_backward(const double[:, ::1] G, const double[:, ::1] Z,
                               const double[:, ::1] C, const double[:, ::1] D):
    cdef Py_ssize_t m = Z.shape[0], n = C.shape[0], d = Z.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double w, t
    gz = np.zeros((m, d))
    gc = np.zeros((n, d))
    cdef double[:, ::1] gZ = gz
    cdef double[:, ::1] gC = gc
    for i in range(m):
        for j in range(n):
            w = G[i, j] / D[i, j]
            if w == 0.0:
                continue
            for k in range(d):
                t = w * (Z[i, k] - C[j, k])
                gZ[i, k] += t
                gC[j, k] -= t
    return gz, gc


def repel(const double[:, ::1] Z, const cnp.int64_t[::1] labels, double tol):
    cdef Py_ssize_t m = Z.shape[0], d = Z.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double s, c, loss = 0.0
    cdef int skipped = 0
    norms_arr = np.empty(m)
    U_arr = np.zeros((m, d))
    grad_arr = np.zeros((m, d))
    cdef double[::1] norms = norms_arr
    cdef double[:, ::1] U = U_arr
    cdef double[:, ::1] grad = grad_arr
    for i in range(m):
        s = 0.0
        for k in range(d):
            s += Z[i, k] * Z[i, k]
        norms[i] = sqrt(s)
        if norms[i] > tol:
            for k in range(d):
                U[i, k] = Z[i, k] / norms[i]
        else:
            skipped += 1
    for i in range(m):
        if norms[i] <= tol:
            continue
        for j in range(i + 1, m):
            if norms[j] <= tol or labels[i] == labels[j]:
                continue
            c = 0.0
            for k in range(d):
                c += U[i, k] * U[j, k]
            loss += c
            for k in range(d):
                grad[i, k] += U[j, k] - c * U[i, k]
                grad[j, k] += U[i, k] - c * U[j, k]
    # rows were accumulated unscaled; apply 1/|z_i| once per row
    for i in range(m):
        if norms[i] > tol:
            s = 1.0 / norms[i]
            for k in range(d):
                grad[i, k] *= s
    return loss, grad_arr, skipped


def class_sums(const double[:, ::1] Z, const cnp.int64_t[::1] labels, Py_ssize_t n_classes):
    cdef Py_ssize_t m = Z.shape[0], d = Z.shape[1]
    cdef Py_ssize_t i, k, c
    sums_arr = np.zeros((n_classes, d))
    counts_arr = np.zeros(n_classes, dtype=np.int64)
    cdef double[:, ::1] sums = sums_arr
    cdef cnp.int64_t[::1] counts = counts_arr
    for i in range(m):
        c = labels[i]
        counts[c] += 1
        for k in range(d):
            sums[c, k] += Z[i, k]
    return sums_arr, counts_arr


def tau_b_counts(const double[::1] a, const double[::1] b):
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t i, j
    cdef long conc = 0, disc = 0, ta = 0, tb = 0
    cdef double da, db
    for i in range(n):
        for j in range(i + 1, n):
            da = a[i] - a[j]
            db = b[i] - b[j]
            if da == 0.0:
                ta += 1
            if db == 0.0:
                tb += 1
            if (da > 0.0 and db > 0.0) or (da < 0.0 and db < 0.0):
                conc += 1
            elif (da > 0.0 and db < 0.0) or (da < 0.0 and db > 0.0):
                disc += 1
    return conc, disc, ta, tb


def average_linkage(const double[:, ::1] D):
    cdef Py_ssize_t n = D.shape[0]
    cdef Py_ssize_t i, j, step, p = 0, q = 0, lo, hi, blo, bhi
    cdef double h, best
    dist_arr = np.array(D, dtype=np.float64)
    cdef double[:, ::1] dist = dist_arr
    ids_arr = np.arange(n, dtype=np.int64)
    sizes_arr = np.ones(n, dtype=np.int64)
    alive_arr = np.ones(n, dtype=np.uint8)
    cdef cnp.int64_t[::1] ids = ids_arr
    cdef cnp.int64_t[::1] sizes = sizes_arr
    cdef unsigned char[::1] alive = alive_arr
    out_arr = np.zeros((n - 1, 4))
    cdef double[:, ::1] out = out_arr
    for step in range(n - 1):
        best = INFINITY
        blo = -1
        bhi = -1
        for i in range(n):
            if not alive[i]:
                continue
            for j in range(i + 1, n):
                if not alive[j]:
                    continue
                h = dist[i, j]
                lo = ids[i] if ids[i] < ids[j] else ids[j]
                hi = ids[j] if ids[i] < ids[j] else ids[i]
                if (blo < 0 or h < best or (h == best and (lo < blo or (lo == blo and hi < bhi)))):
                    best = h
                    blo = lo
                    bhi = hi
                    p = i
                    q = j
        for j in range(n):
            if alive[j] and j != p and j != q:
                h = (sizes[p] * dist[p, j] + sizes[q] * dist[q, j]) / (sizes[p] + sizes[q])
                dist[p, j] = h
                dist[j, p] = h
        out[step, 0] = blo
        out[step, 1] = bhi
        out[step, 2] = best
        out[step, 3] = sizes[p] + sizes[q]
        ids[p] = n + step
        sizes[p] = sizes[p] + sizes[q]
        alive[q] = 0
    return out_arr
