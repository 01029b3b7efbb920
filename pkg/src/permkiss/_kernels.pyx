# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: dense LAP solver and segmented softmax primitives."""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, INFINITY

cnp.import_array()


def lap_solve(cost):
    """Optimal assignment minimizing sum_i cost[i, p(i)].

    Shortest-augmenting-path algorithm with dual potentials, O(n^3).
    Returns (col_of_row, objective).
    """
    c_arr = np.ascontiguousarray(cost, dtype=np.float64)
    if c_arr.ndim != 2 or c_arr.shape[0] != c_arr.shape[1]:
        raise ValueError("cost must be a square matrix")
    if not np.isfinite(c_arr).all():
        raise ValueError("cost must be finite")
    cdef double[:, ::1] C = c_arr
    cdef Py_ssize_t n = C.shape[0]

    u_arr = np.zeros(n)
    v_arr = np.zeros(n)
    shortest_arr = np.empty(n)
    path_arr = np.full(n, -1, dtype=np.int64)
    row4col_arr = np.full(n, -1, dtype=np.int64)
    col4row_arr = np.full(n, -1, dtype=np.int64)
    remaining_arr = np.empty(n, dtype=np.int64)
    sr_arr = np.zeros(n, dtype=np.uint8)
    sc_arr = np.zeros(n, dtype=np.uint8)

    cdef double[::1] u = u_arr
    cdef double[::1] v = v_arr
    cdef double[::1] shortest = shortest_arr
    cdef long long[::1] path = path_arr
    cdef long long[::1] row4col = row4col_arr
    cdef long long[::1] col4row = col4row_arr
    cdef long long[::1] remaining = remaining_arr
    cdef unsigned char[::1] sr = sr_arr
    cdef unsigned char[::1] sc = sc_arr

    cdef Py_ssize_t cur_row, i, j, it, idx, num_remaining, sink, tmp
    cdef double min_val, lowest, r, obj

    for cur_row in range(n):
        for j in range(n):
            shortest[j] = INFINITY
            sr[j] = 0
            sc[j] = 0
            remaining[j] = j
        num_remaining = n
        min_val = 0.0
        sink = -1
        i = cur_row
        while sink == -1:
            sr[i] = 1
            idx = -1
            lowest = INFINITY
            for it in range(num_remaining):
                j = remaining[it]
                r = min_val + C[i, j] - u[i] - v[j]
                if r < shortest[j]:
                    shortest[j] = r
                    path[j] = i
                if shortest[j] < lowest or (shortest[j] == lowest and row4col[j] == -1):
                    lowest = shortest[j]
                    idx = it
            min_val = lowest
            j = remaining[idx]
            if row4col[j] == -1:
                sink = j
            else:
                i = row4col[j]
            sc[j] = 1
            num_remaining -= 1
            remaining[idx] = remaining[num_remaining]
        u[cur_row] += min_val
        for i in range(n):
            if sr[i] and i != cur_row:
                u[i] += min_val - shortest[col4row[i]]
        for j in range(n):
            if sc[j]:
                v[j] -= min_val - shortest[j]
        j = sink
        while True:
            i = path[j]
            row4col[j] = i
            tmp = col4row[i]
            col4row[i] = j
            j = tmp
            if i == cur_row:
                break

    obj = 0.0
    for i in range(n):
        obj += C[i, col4row[i]]
    return col4row_arr, obj


def segment_softmax(logits, seg_ptr):
    """Stable softmax within each contiguous segment of logits."""
    l_arr = np.ascontiguousarray(logits, dtype=np.float64)
    p_arr = np.ascontiguousarray(seg_ptr, dtype=np.int64)
    out_arr = np.empty_like(l_arr)
    cdef double[::1] l = l_arr
    cdef long long[::1] ptr = p_arr
    cdef double[::1] out = out_arr
    cdef Py_ssize_t s, a, b, e, nseg = ptr.shape[0] - 1
    cdef double mx, tot
    for s in range(nseg):
        a = ptr[s]
        b = ptr[s + 1]
        mx = -INFINITY
        for e in range(a, b):
            if l[e] > mx:
                mx = l[e]
        tot = 0.0
        for e in range(a, b):
            out[e] = exp(l[e] - mx)
            tot += out[e]
        for e in range(a, b):
            out[e] /= tot
    return out_arr


def segment_softmax_grad(probs, gout, seg_ptr):
    """Backward of segment_softmax: p * (g - <p, g>_segment)."""
    p_arr = np.ascontiguousarray(probs, dtype=np.float64)
    g_arr = np.ascontiguousarray(gout, dtype=np.float64)
    ptr_arr = np.ascontiguousarray(seg_ptr, dtype=np.int64)
    out_arr = np.empty_like(p_arr)
    cdef double[::1] p = p_arr
    cdef double[::1] g = g_arr
    cdef long long[::1] ptr = ptr_arr
    cdef double[::1] out = out_arr
    cdef Py_ssize_t s, a, b, e, nseg = ptr.shape[0] - 1
    cdef double dot
    for s in range(nseg):
        a = ptr[s]
        b = ptr[s + 1]
        dot = 0.0
        for e in range(a, b):
            dot += p[e] * g[e]
        for e in range(a, b):
            out[e] = p[e] * (g[e] - dot)
    return out_arr


def entry_dots(V, W, rows, cols):
    """Per-entry inner products <V[rows[e]], W[cols[e]]>."""
    v_arr = np.ascontiguousarray(V, dtype=np.float64)
    w_arr = np.ascontiguousarray(W, dtype=np.float64)
    r_arr = np.ascontiguousarray(rows, dtype=np.int64)
    c_arr = np.ascontiguousarray(cols, dtype=np.int64)
    cdef double[:, ::1] v = v_arr
    cdef double[:, ::1] w = w_arr
    cdef long long[::1] ri = r_arr
    cdef long long[::1] ci = c_arr
    cdef Py_ssize_t e, k, ne = ri.shape[0], m = v.shape[1]
    out_arr = np.empty(ne)
    cdef double[::1] out = out_arr
    cdef double acc
    for e in range(ne):
        acc = 0.0
        for k in range(m):
            acc += v[ri[e], k] * w[ci[e], k]
        out[e] = acc
    return out_arr


def scatter_rows_add(out, dst, coeff, src, src_idx):
    """out[dst[e], :] += coeff[e] * src[src_idx[e], :] for every entry e."""
    o_arr = out
    if not (isinstance(o_arr, np.ndarray) and o_arr.dtype == np.float64
            and o_arr.flags["C_CONTIGUOUS"]):
        raise ValueError("out must be a C-contiguous float64 array")
    d_arr = np.ascontiguousarray(dst, dtype=np.int64)
    k_arr = np.ascontiguousarray(coeff, dtype=np.float64)
    s_arr = np.ascontiguousarray(src, dtype=np.float64)
    i_arr = np.ascontiguousarray(src_idx, dtype=np.int64)
    cdef double[:, ::1] o = o_arr
    cdef long long[::1] d = d_arr
    cdef double[::1] c = k_arr
    cdef double[:, ::1] s = s_arr
    cdef long long[::1] si = i_arr
    cdef Py_ssize_t e, k, ne = d.shape[0], m = o.shape[1]
    for e in range(ne):
        for k in range(m):
            o[d[e], k] += c[e] * s[si[e], k]
    return o_arr
