import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st

from histlaw import _kernels, histories
from histlaw._kernels import reference
from histlaw import scenarios as sc

HAVE_COMPILED = "compiled" in _kernels.available_backends()
needs_compiled = pytest.mark.skipif(not HAVE_COMPILED,
                                    reason="compiled backend not built")
compiled = _kernels.get_backend("compiled") if HAVE_COMPILED else None


@st.composite
def forward_graphs(draw):
    """Layered CSR graphs as compile_scenario emits them: int64 indptr over
    sources, int32 destinations sorted within each source block, dead ends
    allowed."""
    T = draw(st.integers(1, 3))
    widths = [draw(st.integers(1, 4)) for _ in range(T + 1)]
    indptrs, dsts = [], []
    for t in range(T):
        ptr, dst = [0], []
        for _ in range(widths[t]):
            deg = draw(st.integers(0, widths[t + 1]))
            targets = draw(st.lists(st.integers(0, widths[t + 1] - 1),
                                    min_size=deg, max_size=deg, unique=True))
            dst.extend(sorted(targets))
            ptr.append(len(dst))
        indptrs.append(np.asarray(ptr, dtype=np.int64))
        dsts.append(np.asarray(dst, dtype=np.int32))
    return widths, indptrs, dsts


@st.composite
def backward_graphs(draw):
    """Inbound-edge tables in the sampler's layout, every node reachable.

    Weights come from a small grid so cumulative ties actually occur and the
    right-side tie-breaking rule gets exercised.
    """
    T = draw(st.integers(1, 3))
    widths = [draw(st.integers(1, 4)) for _ in range(T + 1)]
    in_indptrs, in_srcs, in_eids, in_wcums = [], [], [], []
    for t in range(T):
        ptr, srcs, eids, w = [0], [], [], []
        for _ in range(widths[t + 1]):
            deg = draw(st.integers(1, widths[t]))
            chosen = sorted(draw(st.lists(st.integers(0, widths[t] - 1),
                                          min_size=deg, max_size=deg, unique=True)))
            for s in chosen:
                srcs.append(s)
                eids.append(draw(st.integers(0, 10_000)))
                w.append(draw(st.sampled_from([0.25, 0.5, 1.0, 1.5])))
            ptr.append(len(srcs))
        in_indptrs.append(np.asarray(ptr, dtype=np.int64))
        in_srcs.append(np.asarray(srcs, dtype=np.int32))
        in_eids.append(np.asarray(eids, dtype=np.int64))
        in_wcums.append(np.cumsum(np.asarray(w, dtype=np.float64)))
    final_w = [draw(st.sampled_from([0.25, 0.5, 1.0])) for _ in range(widths[-1])]
    final_cum = np.cumsum(np.asarray(final_w, dtype=np.float64))
    n = draw(st.integers(1, 8))
    u_val = st.one_of(st.floats(0.0, 1.0, exclude_max=True),
                      st.sampled_from([0.0, 0.125, 0.25, 0.5]))
    uniforms = np.asarray(
        [[draw(u_val) for _ in range(T + 1)] for _ in range(n)], dtype=np.float64)
    return widths, in_indptrs, in_srcs, in_eids, in_wcums, final_cum, uniforms


def complete_path_count(widths, indptrs, dsts):
    counts = np.ones(widths[0], dtype=np.int64)
    for t, (ptr, dst) in enumerate(zip(indptrs, dsts)):
        nxt = np.zeros(widths[t + 1], dtype=np.int64)
        for s in range(widths[t]):
            for e in range(ptr[s], ptr[s + 1]):
                nxt[dst[e]] += counts[s]
        counts = nxt
    return int(counts.sum())


class TestReferenceContract:
    @given(forward_graphs())
    def test_rows_come_out_lexicographically_sorted(self, g):
        widths, indptrs, dsts = g
        n = complete_path_count(widths, indptrs, dsts)
        paths, edges = reference.enumerate_paths(indptrs, dsts, widths[0], n)
        assert paths.shape == (n, len(indptrs) + 1)
        assert edges.shape == (n, len(indptrs))
        rows = [tuple(r) for r in paths]
        assert rows == sorted(rows)
        assert len(set(rows)) == n

    @given(forward_graphs())
    def test_edges_and_nodes_agree(self, g):
        widths, indptrs, dsts = g
        n = complete_path_count(widths, indptrs, dsts)
        paths, edges = reference.enumerate_paths(indptrs, dsts, widths[0], n)
        for t in range(len(indptrs)):
            assert np.array_equal(paths[:, t + 1], dsts[t][edges[:, t]])
            lo = indptrs[t][paths[:, t]]
            hi = indptrs[t][paths[:, t] + 1]
            assert np.all((edges[:, t] >= lo) & (edges[:, t] < hi))

    @given(backward_graphs())
    def test_samples_are_real_paths(self, g):
        widths, in_ptr, in_src, in_eid, in_w, final_cum, uniforms = g
        paths, edges = reference.sample_paths(final_cum, in_ptr, in_src,
                                              in_eid, in_w, uniforms)
        T = len(in_ptr)
        assert paths.dtype == np.int32 and edges.dtype == np.int64
        for t in range(T):
            for i in range(paths.shape[0]):
                node = paths[i, t + 1]
                lo, hi = in_ptr[t][node], in_ptr[t][node + 1]
                assert paths[i, t] in in_src[t][lo:hi]
                assert edges[i, t] in in_eid[t][lo:hi]

    def test_sampling_into_a_dead_end_is_an_error(self):
        final_cum = np.asarray([1.0])
        in_ptr = [np.asarray([0, 0], dtype=np.int64)]
        empty_i = np.asarray([], dtype=np.int64)
        uniforms = np.zeros((1, 2))
        with pytest.raises(AssertionError, match="without in-edges"):
            reference.sample_paths(final_cum, in_ptr,
                                   [empty_i.astype(np.int32)], [empty_i],
                                   [np.asarray([], dtype=np.float64)], uniforms)


@needs_compiled
class TestCompiledMatchesReference:
    @given(forward_graphs())
    def test_enumerate_bit_identical(self, g):
        widths, indptrs, dsts = g
        n = complete_path_count(widths, indptrs, dsts)
        pr, er = reference.enumerate_paths(indptrs, dsts, widths[0], n)
        pc, ec = compiled.enumerate_paths(indptrs, dsts, widths[0], n)
        assert pc.dtype == pr.dtype and ec.dtype == er.dtype
        assert np.array_equal(pc, pr)
        assert np.array_equal(ec, er)

    @given(backward_graphs())
    def test_sample_bit_identical(self, g):
        widths, in_ptr, in_src, in_eid, in_w, final_cum, uniforms = g
        pr, er = reference.sample_paths(final_cum, in_ptr, in_src, in_eid,
                                        in_w, uniforms)
        pc, ec = compiled.sample_paths(final_cum, in_ptr, in_src, in_eid,
                                       in_w, uniforms)
        assert pc.dtype == pr.dtype and ec.dtype == er.dtype
        assert np.array_equal(pc, pr)
        assert np.array_equal(ec, er)

    def test_dead_end_raises_in_both(self):
        final_cum = np.asarray([1.0])
        in_ptr = [np.asarray([0, 0], dtype=np.int64)]
        args = (final_cum, in_ptr,
                [np.asarray([], dtype=np.int32)],
                [np.asarray([], dtype=np.int64)],
                [np.asarray([], dtype=np.float64)],
                np.zeros((1, 2)))
        with pytest.raises(AssertionError):
            compiled.sample_paths(*args)

    def test_builders_agree_end_to_end(self, builder_scenarios):
        for name, s in builder_scenarios.items():
            a = histories.enumerate_histories(s, backend="python")
            b = histories.enumerate_histories(s, backend="compiled")
            assert [h.slices for h in a] == [h.slices for h in b], name
            assert [h.feynman_amplitude for h in a] == \
                   [h.feynman_amplitude for h in b], name
            assert [h.probability for h in a] == [h.probability for h in b], name

    def test_sampling_agrees_end_to_end(self):
        s = sc.mach_zehnder(phase_diff=0.8)
        a = histories.sample_histories(s, seed=9, count=3000, backend="python")
        b = histories.sample_histories(s, seed=9, count=3000, backend="compiled")
        assert [h.slices for h in a] == [h.slices for h in b]
        assert [h.probability for h in a] == [h.probability for h in b]


class TestSelection:
    def test_module_pass_through_and_names(self):
        assert _kernels.get_backend(reference) is reference
        assert _kernels.get_backend("python") is reference
        assert _kernels.backend_name("python") == "python"
        assert _kernels.backend_name() in _kernels.available_backends()

    def test_unknown_backend_is_an_import_error(self):
        with pytest.raises(ImportError, match="bogus"):
            _kernels.get_backend("bogus")

    def _probe(self, value):
        env = {**os.environ, "HISTLAW_BACKEND": value}
        return subprocess.run(
            [sys.executable, "-c",
             "import histlaw._kernels as k; print(k.backend_name())"],
            env=env, capture_output=True, text=True)

    def test_env_forcing_python(self):
        out = self._probe("python")
        assert out.returncode == 0 and out.stdout.strip() == "python"

    @needs_compiled
    def test_env_forcing_compiled(self):
        out = self._probe("compiled")
        assert out.returncode == 0 and out.stdout.strip() == "compiled"

    def test_env_forcing_unknown_fails_loudly(self):
        out = self._probe("bogus")
        assert out.returncode != 0
        assert "bogus" in out.stderr
