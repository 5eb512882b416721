"""Pure numpy backend for path enumeration and backward sampling.

Contract shared with the compiled backend:

* ``enumerate_paths(indptr_steps, dst_steps, n_roots, n_paths)`` returns
  ``(paths, edges)`` where ``paths`` is int32 of shape (n_paths, T+1) holding
  per-slice node indices in lexicographic (depth-first, canonical) order and
  ``edges`` is int64 of shape (n_paths, T) holding the CSR edge index taken at
  each step.

* ``sample_paths(final_cum, in_indptr_steps, in_src_steps, in_eid_steps,
  in_wcum_steps, uniforms)`` returns the same shapes for ``uniforms`` of shape
  (n, T+1): column 0 draws the final node from the cumulative Born weights,
  column t draws the predecessor at backward step t.  Ties resolve to the
  next segment entry (searchsorted side='right'), i.e. by canonical order.

Only integer decisions are made here; amplitudes are evaluated by the caller.
"""

from __future__ import annotations

import numpy as np


def enumerate_paths(indptr_steps, dst_steps, n_roots: int, n_paths: int):
    T = len(indptr_steps)
    if n_roots == 0 or n_paths == 0:
        return (np.zeros((0, T + 1), dtype=np.int32), np.zeros((0, T), dtype=np.int64))
    paths = np.arange(n_roots, dtype=np.int32).reshape(-1, 1)
    edges = np.zeros((n_roots, 0), dtype=np.int64)
    for t in range(T):
        indptr = indptr_steps[t]
        nodes = paths[:, -1].astype(np.int64)
        starts = indptr[nodes]
        counts = indptr[nodes + 1] - starts
        total = int(counts.sum())
        parents = np.repeat(np.arange(len(nodes)), counts)
        # global edge ids: starts[parent] + offset within the parent's block
        block_base = np.cumsum(counts) - counts
        offsets = np.arange(total, dtype=np.int64) - np.repeat(block_base, counts)
        eids = np.repeat(starts, counts) + offsets
        new_nodes = dst_steps[t][eids].astype(np.int32)
        paths = np.concatenate([paths[parents], new_nodes.reshape(-1, 1)], axis=1)
        edges = np.concatenate([edges[parents], eids.reshape(-1, 1)], axis=1)
    if paths.shape[0] != n_paths:
        raise AssertionError(f"path count mismatch: {paths.shape[0]} != {n_paths}")
    return paths, edges


def sample_paths(final_cum, in_indptr_steps, in_src_steps, in_eid_steps,
                 in_wcum_steps, uniforms):
    n, cols = uniforms.shape
    T = len(in_indptr_steps)
    if cols != T + 1:
        raise ValueError("uniforms must have T+1 columns")
    paths = np.zeros((n, T + 1), dtype=np.int32)
    edges = np.zeros((n, T), dtype=np.int64)
    total = final_cum[-1]
    idx = np.searchsorted(final_cum, uniforms[:, 0] * total, side="right")
    paths[:, T] = np.minimum(idx, len(final_cum) - 1)
    for back, t in enumerate(range(T - 1, -1, -1), start=1):
        indptr = in_indptr_steps[t]
        wcum = in_wcum_steps[t]
        nodes = paths[:, t + 1].astype(np.int64)
        start = indptr[nodes]
        end = indptr[nodes + 1]
        if np.any(end == start):
            raise AssertionError("sampled node without in-edges")
        base = np.where(start > 0, wcum[start - 1], 0.0)
        seg_total = wcum[end - 1] - base
        targets = base + uniforms[:, back] * seg_total
        pick = np.searchsorted(wcum, targets, side="right")
        pick = np.minimum(pick, end - 1)
        paths[:, t] = in_src_steps[t][pick]
        edges[:, t] = in_eid_steps[t][pick]
    return paths, edges
