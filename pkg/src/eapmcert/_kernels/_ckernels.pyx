# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled sparse SDP operator kernels; same contracts as ``_fallback``."""

import numpy as np

cimport numpy as cnp

ctypedef cnp.int64_t idx_t


def apply_constraints(const double complex[::1] x_flat, const idx_t[::1] con, const idx_t[::1] idx_cr,
                      const double complex[::1] val, Py_ssize_t m):
    cdef double[::1] out = np.zeros(m)
    cdef Py_ssize_t e, nnz = con.shape[0]
    cdef double complex t
    for e in range(nnz):
        t = val[e] * x_flat[idx_cr[e]]
        out[con[e]] += t.real
    return np.asarray(out)


def adjoint_constraints(const double[::1] y, const idx_t[::1] con, const idx_t[::1] idx_rc,
                        const double complex[::1] val, Py_ssize_t size):
    cdef double complex[::1] out = np.zeros(size, dtype=np.complex128)
    cdef Py_ssize_t e, nnz = con.shape[0]
    for e in range(nnz):
        out[idx_rc[e]] += val[e] * y[con[e]]
    return np.asarray(out)


def schur_complement(const double complex[::1] w_flat, const idx_t[::1] blk_ptr, const idx_t[::1] offsets,
                     const idx_t[::1] sizes, const idx_t[::1] con, const idx_t[::1] row, const idx_t[::1] col,
                     const double complex[::1] val, Py_ssize_t m):
    cdef double[:, ::1] h = np.zeros((m, m))
    cdef Py_ssize_t b, e, f, lo, hi, n, off, ie, jf
    cdef idx_t re, ce
    cdef double complex ve, t
    cdef double s
    # term(e, f) == term(f, e), so only f >= e is visited
    for b in range(offsets.shape[0]):
        lo = blk_ptr[b]
        hi = blk_ptr[b + 1]
        n = sizes[b]
        off = offsets[b]
        for e in range(lo, hi):
            re = row[e]
            ce = col[e]
            ve = val[e]
            ie = con[e]
            for f in range(e, hi):
                t = ve * val[f] * w_flat[off + ce * n + row[f]] * w_flat[off + col[f] * n + re]
                s = t.real
                jf = con[f]
                if f == e:
                    h[ie, jf] += s
                else:
                    h[ie, jf] += s
                    h[jf, ie] += s
    return np.asarray(h)


def schur_shared(const double complex[:, ::1] kmat, Py_ssize_t n, const idx_t[::1] con, const idx_t[::1] row,
                 const idx_t[::1] col, const double complex[::1] val, Py_ssize_t m):
    # entries sorted by (row, col) keep the inner loop inside a few rows of kmat;
    # only h[ie, jf] is written, the transpose is added at the end
    cdef double[:, ::1] h = np.zeros((m, m))
    cdef double[::1] dg = np.zeros(m)
    cdef Py_ssize_t e, f, ie, nnz = con.shape[0]
    cdef idx_t re, cen
    cdef double complex ve
    for e in range(nnz):
        re = row[e]
        cen = col[e] * n
        ve = val[e]
        ie = con[e]
        dg[ie] += (ve * ve * kmat[cen + re, cen + re]).real
        for f in range(e + 1, nnz):
            h[ie, con[f]] += (ve * val[f] * kmat[cen + row[f], col[f] * n + re]).real
    out = np.asarray(h)
    out += out.T
    out[np.diag_indices(m)] += np.asarray(dg)
    return out
