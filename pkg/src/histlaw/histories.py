"""The history probability law, enumeration, sampling, and coarse-graining.

A history is one configuration per slice.  Its probability is

    P(H) = |F(H)|^2 * prod_{alpha=1..T} I(d_{H,alpha}),

the squared Feynman amplitude times the interference factors of every slice
along the way (slice 0 is boundary data and carries no factor).  Summed over
all histories ending at a final configuration this reproduces the Born
probability exactly; ``marginal_consistency`` checks that identity on any
enumerable scenario.

``sample_histories`` draws exact samples backward in time: the final
configuration from Born weights, then each predecessor with weight
proportional to (its field probability) x (squared step magnitude).  The
per-slice normalizers cancel against the interference factors, so the draw
probability of a history is exactly P(H) on norm-preserving scenarios.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import engine
from ._kernels import get_backend
from .model import (
    Distribution,
    EngineLimits,
    EnumerationOverflowError,
    History,
    InvalidBinningError,
    NonUnitaryScenarioError,
    NORM_DRIFT_TOL,
    PROBABILITY_ATOL,
    Scenario,
    state_sort_key,
)

__all__ = [
    "MarginalReport",
    "count_paths",
    "enumerate_histories",
    "marginal_consistency",
    "sample_histories",
    "coarse_grain",
    "end_time_interference_factor",
    "GENERATOR_IDENTITY",
    "SAMPLE_BATCH",
]

SAMPLE_BATCH = 65536
GENERATOR_IDENTITY = (
    "numpy.random.PCG64(SeedSequence((seed, batch_index))), "
    f"batch size {SAMPLE_BATCH}, batches concatenated in index order"
)


def _resolve_graph(scenario_or_graph, limits: EngineLimits | None):
    if isinstance(scenario_or_graph, engine.ScenarioGraph):
        return scenario_or_graph
    return engine.compile_scenario(scenario_or_graph, limits=limits)


def count_paths(scenario_or_graph, limits: EngineLimits | None = None) -> int:
    """Number of in-support paths through the compiled graph.

    Saturates at ``limits.max_histories + 1``: any return value above the cap
    means "more than the cap", exact values are only guaranteed at or below
    it.  (Per-layer clamping keeps the int64 accumulator safe for caps up to
    about 3e9.)
    """
    limits = limits or EngineLimits.from_env()
    graph = _resolve_graph(scenario_or_graph, limits)
    bound = limits.max_histories + 1
    counts = np.ones(len(graph.layers[0]), dtype=np.int64)
    for j, step in enumerate(graph.steps):
        nxt = np.zeros(len(graph.layers[j + 1]), dtype=np.int64)
        np.add.at(nxt, step.dst, counts[step.src])
        np.minimum(nxt, bound, out=nxt)
        counts = nxt
    return min(int(counts.sum()), bound)


def _path_quantities(graph, paths: np.ndarray, edges: np.ndarray):
    """Feynman amplitude, interference product, probability per path row.

    All three arrays are accumulated in slice order with plain elementwise
    double arithmetic, so the History invariant p = |F|^2 * prod(I) holds
    bit for bit.
    """
    feyn = graph.init_amp[paths[:, 0]].copy()
    for t in range(len(graph.steps)):
        feyn *= graph.steps[t].amp[edges[:, t]]
    iprod = np.ones(paths.shape[0], dtype=np.float64)
    for g in range(1, len(graph.layers)):
        iprod *= graph.ifactors[g][paths[:, g]]
    prob = (feyn.real ** 2 + feyn.imag ** 2) * iprod
    return feyn, iprod, prob


def _histories_from_paths(graph, paths: np.ndarray, edges: np.ndarray) -> list[History]:
    feyn, iprod, prob = _path_quantities(graph, paths, edges)
    out = []
    for i in range(paths.shape[0]):
        out.append(History(
            slices=graph.distributions_along(paths[i]),
            feynman_amplitude=complex(feyn[i]),
            interference_product=float(iprod[i]),
            probability=float(prob[i]),
        ))
    return out


def enumerate_histories(scenario: Scenario, limits: EngineLimits | None = None,
                        backend: str | None = None, graph=None) -> list[History]:
    """Every in-support history exactly once, in lexicographic graph order."""
    limits = limits or EngineLimits.from_env()
    graph = graph or engine.compile_scenario(scenario, limits=limits)
    n = count_paths(graph, limits=limits)
    if n > limits.max_histories:
        raise EnumerationOverflowError(
            f"at least {n} histories exceed the cap {limits.max_histories}", count=n)
    kb = get_backend(backend)
    paths, edges = kb.enumerate_paths(
        [s.indptr for s in graph.steps], [s.dst for s in graph.steps],
        len(graph.layers[0]), n)
    return _histories_from_paths(graph, paths, edges)


@dataclass(frozen=True)
class MarginalReport:
    """Per-final-state comparison of history sums against Born probabilities.

    ``per_state`` maps each reachable final state key to
    ``(history_sum, born_probability)``.  For second-order scenarios the keys
    are the final adjacent-slice pairs, the states the law actually addresses.
    """

    per_state: Mapping
    max_abs_error: float
    total_probability: float
    history_count: int

    @property
    def ok(self) -> bool:
        return self.max_abs_error <= PROBABILITY_ATOL


def marginal_consistency(scenario: Scenario,
                         limits: EngineLimits | None = None,
                         backend: str | None = None) -> MarginalReport:
    """Check sum_{H ending at d} P(H) == |psi(d, T)|^2 for every final d."""
    limits = limits or EngineLimits.from_env()
    graph = engine.compile_scenario(scenario, limits=limits)
    n = count_paths(graph, limits=limits)
    if n > limits.max_histories:
        raise EnumerationOverflowError(
            f"at least {n} histories exceed the cap {limits.max_histories}", count=n)
    kb = get_backend(backend)
    paths, edges = kb.enumerate_paths(
        [s.indptr for s in graph.steps], [s.dst for s in graph.steps],
        len(graph.layers[0]), n)
    _, _, prob = _path_quantities(graph, paths, edges)
    born = engine.final_born_vector(graph)
    sums = np.zeros_like(born)
    if n:
        np.add.at(sums, paths[:, -1], prob)
    per_state = {key: (float(sums[i]), float(born[i]))
                 for i, key in enumerate(graph.layers[-1])}
    err = float(np.max(np.abs(sums - born))) if len(born) else 0.0
    return MarginalReport(per_state=per_state,
                          max_abs_error=err,
                          total_probability=math.fsum(prob.tolist()),
                          history_count=int(n))


def _backward_tables(graph):
    """Per-step inbound-edge tables for ancestral sampling.

    Edges are regrouped by destination (stable, so sources stay in canonical
    order within each destination); weights are field probability at the
    source times the squared step magnitude, cumulated globally per step.
    """
    in_indptr, in_src, in_eid, in_wcum = [], [], [], []
    for t, step in enumerate(graph.steps):
        n_dst = len(graph.layers[t + 1])
        order = np.argsort(step.dst, kind="stable").astype(np.int64)
        src = step.src[order]
        field = graph.fields[t]
        w = (field.real ** 2 + field.imag ** 2)[src] * \
            (step.amp.real ** 2 + step.amp.imag ** 2)[order]
        counts = np.bincount(step.dst, minlength=n_dst)
        indptr = np.zeros(n_dst + 1, dtype=np.int64)
        np.cumsum(counts, out=indptr[1:])
        in_indptr.append(indptr)
        in_src.append(src)
        in_eid.append(order)
        in_wcum.append(np.cumsum(w))
    return in_indptr, in_src, in_eid, in_wcum


def sample_histories(scenario: Scenario, seed: int, count: int,
                     limits: EngineLimits | None = None,
                     backend: str | None = None, graph=None) -> list[History]:
    """Exact backward ancestral samples; q(H) = P(H) on norm-preserving scenarios.

    Refuses scenarios whose total final probability differs from 1 (histories
    then carry total mass != 1 and the draw would be silently renormalized).
    Deterministic in (scenario, seed): batches of 65536 use independent
    generators seeded with (seed, batch_index) and concatenate in order.
    """
    if count < 0:
        raise ValueError("count must be >= 0")
    if seed < 0:
        raise ValueError("seed must be >= 0")
    limits = limits or EngineLimits.from_env()
    graph = graph or engine.compile_scenario(scenario, limits=limits)
    born = engine.final_born_vector(graph)
    total = math.fsum(born.tolist())
    if abs(total - 1.0) > NORM_DRIFT_TOL:
        raise NonUnitaryScenarioError(
            f"total final probability {total!r} differs from 1; sampling would "
            "draw from the renormalized law, not P(H)")
    tables = _backward_tables(graph)
    final_cum = np.cumsum(born)
    kb = get_backend(backend)
    n_cols = len(graph.steps) + 1
    out: list[History] = []
    for batch_index in range(0, (count + SAMPLE_BATCH - 1) // SAMPLE_BATCH):
        n = min(SAMPLE_BATCH, count - batch_index * SAMPLE_BATCH)
        rng = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence((seed, batch_index))))
        uniforms = rng.random((n, n_cols))
        paths, edges = kb.sample_paths(final_cum, *tables, uniforms)
        out.extend(_histories_from_paths(graph, paths, edges))
    return out


def coarse_grain(histories: Iterable[History],
                 binning: Sequence[Sequence[int]]):
    """Group histories into families by binned site occupancy.

    ``binning`` must partition the site index set; each configuration maps to
    per-bin occupancy totals (tags kept verbatim), each history to the slice
    sequence of those coarse configurations.  Returns ``(family, probability)``
    pairs in canonical order; family probability is the sum over members, so
    totals are preserved and refining a binning refines families additively.
    """
    histories = list(histories)
    bins = [tuple(int(i) for i in b) for b in binning]
    flat = [i for b in bins for i in b]
    if len(set(flat)) != len(flat):
        raise InvalidBinningError("bins overlap")
    if histories:
        site_count = len(histories[0].slices[0].occupancy)
        if sorted(flat) != list(range(site_count)):
            raise InvalidBinningError(
                f"bins must partition all {site_count} site indices")
    families: dict[tuple, float] = {}
    for h in histories:
        label = tuple(
            Distribution(tuple(sum(d.occupancy[i] for i in b) for b in bins), d.tags)
            for d in h.slices)
        families[label] = families.get(label, 0.0) + h.probability
    return sorted(families.items(),
                  key=lambda kv: tuple(state_sort_key(d) for d in kv[0]))


def end_time_interference_factor(scenario: Scenario, history,
                                 upto_slice: int | None = None,
                                 limits: EngineLimits | None = None,
                                 graph=None) -> float:
    """Whole-history interference ratio at one slice — the wrong rule, on purpose.

    Groups every in-support partial history by where it stands at
    ``upto_slice`` (default: the final slice) and returns
    |sum F|^2 / sum |F|^2 over those sharing the given history's state there.
    Unlike the per-slice factors this has no memory of where interference
    happened, so it both resurrects cancelled branches (the three-route merge
    reports 1/3 for a branch whose true probability is 0) and double-counts
    (a partial merge reports its factor again at every later slice).
    """
    limits = limits or EngineLimits.from_env()
    graph = graph or engine.compile_scenario(scenario, limits=limits)
    slices = tuple(getattr(history, "slices", history))
    T = scenario.slice_count
    if len(slices) != T + 1:
        raise ValueError(f"history must have {T + 1} slices, got {len(slices)}")
    s = T if upto_slice is None else upto_slice
    lo = 1 if graph.order == 1 else 2
    if not (lo <= s <= T):
        raise ValueError(f"upto_slice must lie in {lo}..{T}")
    g = s if graph.order == 1 else s - 1
    key = slices[s] if graph.order == 1 else (slices[s - 1], slices[s])
    idx = graph.index[g].get(key)
    if idx is None:
        return 1.0
    steps = graph.steps[:g]
    sub = engine.ScenarioGraph(scenario=scenario, order=graph.order,
                               layers=graph.layers[:g + 1], index=graph.index[:g + 1],
                               steps=steps, init_amp=graph.init_amp)
    n = count_paths(sub, limits=limits)
    if n > limits.max_histories:
        raise EnumerationOverflowError(
            f"at least {n} partial histories exceed the cap {limits.max_histories}",
            count=n)
    kb = get_backend(None)
    paths, edges = kb.enumerate_paths(
        [st.indptr for st in steps], [st.dst for st in steps],
        len(graph.layers[0]), n)
    mask = paths[:, -1] == idx
    feyn = graph.init_amp[paths[mask, 0]].copy()
    for t in range(len(steps)):
        feyn *= steps[t].amp[edges[mask, t]]
    from .interference import interference_ratio
    return interference_ratio(complex(f) for f in feyn)
