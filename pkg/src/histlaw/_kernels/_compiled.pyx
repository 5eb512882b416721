# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled backend: same integer contract as reference.py, same float order.

Decisions here are integer-only (node indices, CSR edge ids); the one float
computation (backward sampling targets) uses the same multiply-then-add order
as the numpy fallback, and the build disables FP contraction, so both
backends return bit-identical arrays for identical inputs.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


cdef inline Py_ssize_t _bisect_right(const double[::1] a, Py_ssize_t lo,
                                     Py_ssize_t hi, double v) nogil:
    cdef Py_ssize_t mid
    while lo < hi:
        mid = (lo + hi) // 2
        if a[mid] > v:
            hi = mid
        else:
            lo = mid + 1
    return lo


def _concat(arrays, dtype):
    """Concatenate per-step arrays; returns (flat, int64 offsets)."""
    offsets = np.zeros(len(arrays) + 1, dtype=np.int64)
    for i, a in enumerate(arrays):
        offsets[i + 1] = offsets[i] + len(a)
    if arrays:
        flat = np.ascontiguousarray(np.concatenate([np.asarray(a) for a in arrays]),
                                    dtype=dtype)
    else:
        flat = np.zeros(0, dtype=dtype)
    return flat, offsets


def enumerate_paths(indptr_steps, dst_steps, Py_ssize_t n_roots, Py_ssize_t n_paths):
    cdef Py_ssize_t T = len(indptr_steps)
    if n_roots == 0 or n_paths == 0:
        return (np.zeros((0, T + 1), dtype=np.int32),
                np.zeros((0, T), dtype=np.int64))

    ip_all, ip_off = _concat(indptr_steps, np.int64)
    dst_all, dst_off = _concat(dst_steps, np.int32)
    paths_arr = np.empty((n_paths, T + 1), dtype=np.int32)
    edges_arr = np.empty((n_paths, T), dtype=np.int64)

    cdef const cnp.int64_t[::1] ip = ip_all
    cdef const cnp.int64_t[::1] ipo = ip_off
    cdef const cnp.int32_t[::1] dst = dst_all
    cdef const cnp.int64_t[::1] dsto = dst_off
    cdef cnp.int32_t[:, ::1] P = paths_arr
    cdef cnp.int64_t[:, ::1] E = edges_arr

    scratch_node = np.zeros(T + 1, dtype=np.int64)
    scratch_cur = np.zeros(T, dtype=np.int64)
    scratch_lim = np.zeros(T, dtype=np.int64)
    scratch_eid = np.zeros(T, dtype=np.int64)
    cdef cnp.int64_t[::1] node = scratch_node
    cdef cnp.int64_t[::1] cur = scratch_cur
    cdef cnp.int64_t[::1] lim = scratch_lim
    cdef cnp.int64_t[::1] eid = scratch_eid

    cdef Py_ssize_t row = 0, lvl, t
    cdef cnp.int64_t root, e, nd
    with nogil:
        for root in range(n_roots):
            lvl = 0
            node[0] = root
            cur[0] = ip[ipo[0] + root]
            lim[0] = ip[ipo[0] + root + 1]
            while lvl >= 0:
                if cur[lvl] < lim[lvl]:
                    e = cur[lvl]
                    cur[lvl] += 1
                    nd = dst[dsto[lvl] + e]
                    node[lvl + 1] = nd
                    eid[lvl] = e
                    if lvl + 1 == T:
                        for t in range(T + 1):
                            P[row, t] = <cnp.int32_t> node[t]
                        for t in range(T):
                            E[row, t] = eid[t]
                        row += 1
                    else:
                        lvl += 1
                        cur[lvl] = ip[ipo[lvl] + nd]
                        lim[lvl] = ip[ipo[lvl] + nd + 1]
                else:
                    lvl -= 1
    if row != n_paths:
        raise AssertionError(f"path count mismatch: {row} != {n_paths}")
    return paths_arr, edges_arr


def sample_paths(final_cum, in_indptr_steps, in_src_steps, in_eid_steps,
                 in_wcum_steps, uniforms):
    U_arr = np.ascontiguousarray(uniforms, dtype=np.float64)
    cdef Py_ssize_t n = U_arr.shape[0]
    cdef Py_ssize_t cols = U_arr.shape[1]
    cdef Py_ssize_t T = len(in_indptr_steps)
    if cols != T + 1:
        raise ValueError("uniforms must have T+1 columns")

    fc_arr = np.ascontiguousarray(final_cum, dtype=np.float64)
    ip_all, ip_off = _concat(in_indptr_steps, np.int64)
    src_all, src_off = _concat(in_src_steps, np.int32)
    eid_all, eid_off = _concat(in_eid_steps, np.int64)
    wc_all, wc_off = _concat(in_wcum_steps, np.float64)
    paths_arr = np.zeros((n, T + 1), dtype=np.int32)
    edges_arr = np.zeros((n, T), dtype=np.int64)

    cdef const cnp.float64_t[::1] fc = fc_arr
    cdef const cnp.float64_t[:, ::1] U = U_arr
    cdef const cnp.int64_t[::1] ip = ip_all
    cdef const cnp.int64_t[::1] ipo = ip_off
    cdef const cnp.int32_t[::1] src = src_all
    cdef const cnp.int64_t[::1] srco = src_off
    cdef const cnp.int64_t[::1] eids = eid_all
    cdef const cnp.int64_t[::1] eido = eid_off
    cdef const cnp.float64_t[::1] wc = wc_all
    cdef const cnp.int64_t[::1] wco = wc_off
    cdef cnp.int32_t[:, ::1] P = paths_arr
    cdef cnp.int64_t[:, ::1] E = edges_arr

    cdef Py_ssize_t nf = fc.shape[0]
    cdef double total = fc[nf - 1]
    cdef Py_ssize_t i, t, back, idx, pick
    cdef cnp.int64_t nd, start, end
    cdef double base, seg, v
    cdef bint empty_seg = False

    with nogil:
        for i in range(n):
            idx = _bisect_right(fc, 0, nf, U[i, 0] * total)
            if idx > nf - 1:
                idx = nf - 1
            P[i, T] = <cnp.int32_t> idx
        for back in range(1, T + 1):
            t = T - back
            for i in range(n):
                nd = P[i, t + 1]
                start = ip[ipo[t] + nd]
                end = ip[ipo[t] + nd + 1]
                if end == start:
                    empty_seg = True
                    break
                base = wc[wco[t] + start - 1] if start > 0 else 0.0
                seg = wc[wco[t] + end - 1] - base
                v = base + U[i, back] * seg
                pick = _bisect_right(wc, wco[t], wco[t + 1], v) - wco[t]
                if pick > end - 1:
                    pick = end - 1
                P[i, t] = src[srco[t] + pick]
                E[i, t] = eids[eido[t] + pick]
            if empty_seg:
                break
    if empty_seg:
        raise AssertionError("sampled node without in-edges")
    return paths_arr, edges_arr
