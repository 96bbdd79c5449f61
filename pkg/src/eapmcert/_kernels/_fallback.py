"""Pure numpy versions of the sparse SDP operator kernels.

The functions act on block-diagonal Hermitian matrices stored as one
flat complex vector.  A constraint entry ``e`` contributes ``val[e]`` at
position ``(row[e], col[e])`` of block ``b`` to constraint ``con[e]``, so that
``<A_i, X> = sum_{e in i} val[e] * X_b[col[e], row[e]]``.
"""

import numpy as np


def apply_constraints(x_flat, con, idx_cr, val, m):
    """``out[i] = Re <A_i, X>``."""
    return np.bincount(con, weights=(val * x_flat[idx_cr]).real, minlength=m)


def adjoint_constraints(y, con, idx_rc, val, size):
    """Flat ``sum_i y_i A_i``."""
    t = val * y[con]
    return np.bincount(idx_rc, weights=t.real, minlength=size) + 1j * np.bincount(idx_rc, weights=t.imag, minlength=size)


def schur_complement(w_flat, blk_ptr, offsets, sizes, con, row, col, val, m):
    """``H[i, j] = Re sum_b tr(A_i^b W_b A_j^b W_b)`` for block-diagonal ``W``."""
    h = np.zeros(m * m)
    for b in range(len(offsets)):
        lo, hi = blk_ptr[b], blk_ptr[b + 1]
        if lo == hi:
            continue
        n = sizes[b]
        wb = w_flat[offsets[b]:offsets[b] + n * n].reshape(n, n)
        r, c, v, k = row[lo:hi], col[lo:hi], val[lo:hi], con[lo:hi]
        g = wb[np.ix_(c, r)]
        t = (v[:, None] * v[None, :]) * g * g.T
        h += np.bincount((k[:, None] * m + k[None, :]).ravel(), weights=t.real.ravel(), minlength=m * m)
    return h.reshape(m, m)


def schur_shared(kmat, n, con, row, col, val, m):
    """Schur complement for blocks that share one constraint pattern.

    ``kmat[q*n + r, s*n + p] = sum_b W_b[q, r] W_b[s, p]`` carries all blocks,
    and ``(con, row, col, val)`` lists the pattern of a single block.
    """
    g = kmat[np.add.outer(col * n, row), np.add.outer(row, col * n)]
    t = (val[:, None] * val[None, :]) * g
    h = np.bincount((con[:, None] * m + con[None, :]).ravel(), weights=t.real.ravel(), minlength=m * m)
    return h.reshape(m, m)
