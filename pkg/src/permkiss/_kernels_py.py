"""Pure-numpy fallback lane for the compiled kernels in _kernels.pyx.

Same signatures and semantics; used when the extension is unavailable or
when PERMKISS_BACKEND=python is set.
"""

import numpy as np


def lap_solve(cost):
    """Optimal assignment minimizing sum_i cost[i, p(i)].

    Shortest-augmenting-path algorithm with dual potentials, O(n^3), with
    the per-row scan vectorized over columns.  Returns (col_of_row, objective).
    """
    c = np.ascontiguousarray(cost, dtype=np.float64)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ValueError("cost must be a square matrix")
    if not np.isfinite(c).all():
        raise ValueError("cost must be finite")
    n = c.shape[0]
    u = np.zeros(n)
    v = np.zeros(n)
    path = np.full(n, -1, dtype=np.int64)
    row4col = np.full(n, -1, dtype=np.int64)
    col4row = np.full(n, -1, dtype=np.int64)

    for cur_row in range(n):
        shortest = np.full(n, np.inf)
        remaining = np.ones(n, dtype=bool)
        scanned_rows = np.zeros(n, dtype=bool)
        min_val = 0.0
        i = cur_row
        sink = -1
        while sink == -1:
            scanned_rows[i] = True
            rem = np.nonzero(remaining)[0]
            reduced = min_val + c[i, rem] - u[i] - v[rem]
            upd = reduced < shortest[rem]
            hit = rem[upd]
            shortest[hit] = reduced[upd]
            path[hit] = i
            s_rem = shortest[rem]
            lowest = s_rem.min()
            ties = rem[s_rem == lowest]
            free = ties[row4col[ties] == -1]
            j = int(free[0]) if free.size else int(ties[0])
            min_val = lowest
            if row4col[j] == -1:
                sink = j
            else:
                i = int(row4col[j])
            remaining[j] = False
        u[cur_row] += min_val
        other = scanned_rows.copy()
        other[cur_row] = False
        idx = np.nonzero(other)[0]
        u[idx] += min_val - shortest[col4row[idx]]
        scanned_cols = np.nonzero(~remaining)[0]
        v[scanned_cols] -= min_val - shortest[scanned_cols]
        j = sink
        while True:
            i = int(path[j])
            row4col[j] = i
            col4row[i], j = j, col4row[i]
            if i == cur_row:
                break

    obj = float(c[np.arange(n), col4row].sum())
    return col4row, obj


def _starts(seg_ptr):
    return np.ascontiguousarray(seg_ptr[:-1], dtype=np.intp)


def segment_softmax(logits, seg_ptr):
    """Stable softmax within each contiguous segment of logits."""
    logits = np.asarray(logits, dtype=np.float64)
    seg_ptr = np.asarray(seg_ptr, dtype=np.int64)
    if logits.size == 0:
        return np.empty(0)
    starts = _starts(seg_ptr)
    lengths = np.diff(seg_ptr)
    mx = np.maximum.reduceat(logits, starts)
    z = np.exp(logits - np.repeat(mx, lengths))
    tot = np.add.reduceat(z, starts)
    return z / np.repeat(tot, lengths)


def segment_softmax_grad(probs, gout, seg_ptr):
    """Backward of segment_softmax: p * (g - <p, g>_segment)."""
    probs = np.asarray(probs, dtype=np.float64)
    gout = np.asarray(gout, dtype=np.float64)
    seg_ptr = np.asarray(seg_ptr, dtype=np.int64)
    if probs.size == 0:
        return np.empty(0)
    starts = _starts(seg_ptr)
    dots = np.add.reduceat(probs * gout, starts)
    return probs * (gout - np.repeat(dots, np.diff(seg_ptr)))


def entry_dots(V, W, rows, cols):
    """Per-entry inner products <V[rows[e]], W[cols[e]]>."""
    V = np.asarray(V, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    return np.einsum("em,em->e", V[rows], W[cols])


def scatter_rows_add(out, dst, coeff, src, src_idx):
    """out[dst[e], :] += coeff[e] * src[src_idx[e], :] for every entry e."""
    np.add.at(out, np.asarray(dst), np.asarray(coeff)[:, None] * np.asarray(src)[src_idx])
    return out
