"""Amplitude propagation over the reachable-state graph.

A scenario is compiled once into a layered graph: one canonically ordered
node list per slice (every distribution reachable through kernel support from
the initial terms, whether or not its amplitude survives cancellation) and
per-step CSR edge arrays.  Forward propagation, per-target interference data,
path counting, enumeration and sampling all run on those arrays.

Second-order scenarios are compiled by pair augmentation: graph nodes are
ordered pairs of adjacent-slice distributions, the boundary is the pair-term
field, and one augmented step consumes one original transition.  Everything
downstream is order-agnostic; histories are projected back to distribution
sequences at the end.

Determinism: all sums accumulate in canonical (sorted-key) predecessor order,
single-threaded, so results are independent of thread counts and repeatable
bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Mapping, Sequence

import numpy as np

from .model import (
    Distribution,
    EngineLimits,
    EnumerationOverflowError,
    Kernel,
    PRUNE_SQ_THRESHOLD,
    Scenario,
    VANISHING_DENOMINATOR,
    state_sort_key,
)

__all__ = [
    "AmplitudeField",
    "ScenarioGraph",
    "compile_scenario",
    "propagate",
    "history_amplitude",
    "born_probability",
]


@dataclass(frozen=True)
class AmplitudeField:
    """Sparse amplitude assignment at one slice.

    Keys are distributions (first order) or ordered distribution pairs
    (second order; ``slice_index`` then names the *later* slice of the pair).
    Entries whose squared magnitude falls below the pruning threshold are not
    stored.
    """

    slice_index: int
    entries: Mapping[object, complex]

    def amplitude(self, key) -> complex:
        return self.entries.get(key, 0j)

    def norm_sq(self) -> float:
        return float(sum((a.real * a.real + a.imag * a.imag) for a in self.entries.values()))

    def __len__(self) -> int:
        return len(self.entries)


@dataclass
class StepArrays:
    """Edges of one step in CSR layout, sorted by (source, destination)."""

    indptr: np.ndarray   # int64 [n_src + 1]
    src: np.ndarray      # int32 [n_edges]
    dst: np.ndarray      # int32 [n_edges]
    amp: np.ndarray      # complex128 [n_edges]


@dataclass
class ScenarioGraph:
    """Compiled scenario: layered reachable-state graph plus derived fields."""

    scenario: Scenario
    order: int
    layers: list[tuple]            # per slice, canonically sorted state keys
    index: list[dict]              # per slice, key -> position
    steps: list[StepArrays]
    init_amp: np.ndarray
    fields: list[np.ndarray] = dc_field(default_factory=list)
    denoms: list[np.ndarray | None] = dc_field(default_factory=list)
    ifactors: list[np.ndarray | None] = dc_field(default_factory=list)
    absorbing: list[tuple[int, object]] = dc_field(default_factory=list)

    @property
    def n_steps(self) -> int:
        return len(self.steps)

    def distributions_along(self, nodes: Sequence[int]) -> tuple[Distribution, ...]:
        """Project a node-index path back to a distribution-per-slice tuple."""
        keys = [self.layers[j][n] for j, n in enumerate(nodes)]
        if self.order == 1:
            return tuple(keys)
        first = keys[0]
        return (first[0],) + tuple(k[1] for k in keys)

    def slice_label(self, graph_slice: int) -> int:
        """Original slice index named by public fields at a graph layer."""
        return graph_slice if self.order == 1 else graph_slice + 1


def _initial_vector(scenario: Scenario) -> tuple[list, np.ndarray]:
    if scenario.kernel.order == 1:
        raw: dict = {}
        for d, a in scenario.initial.terms:
            raw[d] = raw.get(d, 0j) + a
    else:
        raw = {}
        for pair, a in scenario.initial.pair_terms:
            raw[pair] = raw.get(pair, 0j) + a
    keys = sorted(raw, key=state_sort_key)
    amps = np.array([raw[k] for k in keys], dtype=np.complex128)
    return keys, amps


def _successors(kernel: Kernel, order: int, graph_step: int, key):
    # One augmented step k consumes the original transition at slice index k
    # (second order: pair (d_{k-1}, d_k) -> (d_k, d_{k+1})).
    if order == 1:
        return kernel.successors(graph_step, key)
    prev, cur = key
    return [((cur, dest), amp) for dest, amp in kernel.successors(graph_step + 1, cur, prev=prev)]


def compile_scenario(scenario: Scenario, limits: EngineLimits | None = None) -> ScenarioGraph:
    """Build the layered reachable graph and all per-slice derived arrays."""
    limits = limits or EngineLimits.from_env()
    order = scenario.kernel.order
    n_graph_steps = scenario.slice_count if order == 1 else scenario.slice_count - 1

    keys0, amps0 = _initial_vector(scenario)
    if len(keys0) > limits.max_states_per_slice:
        raise EnumerationOverflowError(
            f"{len(keys0)} initial states exceed the cap {limits.max_states_per_slice}",
            slice_index=0, count=len(keys0))
    layers: list[tuple] = [tuple(keys0)]
    index: list[dict] = [{k: i for i, k in enumerate(keys0)}]
    steps: list[StepArrays] = []
    absorbing: list[tuple[int, object]] = []

    for j in range(n_graph_steps):
        per_src: list[dict] = []
        next_keys: set = set()
        for key in layers[j]:
            merged: dict = {}
            for dest, amp in _successors(scenario.kernel, order, j, key):
                merged[dest] = merged.get(dest, 0j) + amp
            if not merged:
                absorbing.append((j if order == 1 else j + 1, key))
            per_src.append(merged)
            next_keys.update(merged)
        ordered = sorted(next_keys, key=state_sort_key)
        if len(ordered) > limits.max_states_per_slice:
            raise EnumerationOverflowError(
                f"{len(ordered)} reachable states at slice {j + 1} exceed the cap "
                f"{limits.max_states_per_slice}", slice_index=j + 1, count=len(ordered))
        nidx = {k: i for i, k in enumerate(ordered)}
        src_list, dst_list, amp_list = [], [], []
        indptr = np.zeros(len(layers[j]) + 1, dtype=np.int64)
        for i, merged in enumerate(per_src):
            dests = sorted(merged, key=state_sort_key)
            indptr[i + 1] = indptr[i] + len(dests)
            for dest in dests:
                src_list.append(i)
                dst_list.append(nidx[dest])
                amp_list.append(merged[dest])
        steps.append(StepArrays(
            indptr=indptr,
            src=np.asarray(src_list, dtype=np.int32),
            dst=np.asarray(dst_list, dtype=np.int32),
            amp=np.asarray(amp_list, dtype=np.complex128),
        ))
        layers.append(tuple(ordered))
        index.append(nidx)

    graph = ScenarioGraph(scenario=scenario, order=order, layers=layers,
                          index=index, steps=steps, init_amp=amps0,
                          absorbing=absorbing)
    _compute_fields(graph)
    return graph


def _compute_fields(graph: ScenarioGraph) -> None:
    """Forward recursion plus interference data in one pass.

    At each target the same ordered contribution list feeds both the field sum
    (numerator) and the squared-magnitude sum (denominator), so the factor
    |sum|^2 / sum|.|^2 is computed from a single accumulation order: canonical
    predecessor order (np.add.at applies edge contributions in array order,
    and edges are sorted so a target's sources arrive ascending).
    """
    fields = [graph.init_amp.copy()]
    denoms: list[np.ndarray | None] = [None]
    ifactors: list[np.ndarray | None] = [None]
    for j, step in enumerate(graph.steps):
        cur = fields[j]
        contrib = cur[step.src] * step.amp
        nxt = np.zeros(len(graph.layers[j + 1]), dtype=np.complex128)
        np.add.at(nxt, step.dst, contrib)
        den = np.zeros(len(graph.layers[j + 1]), dtype=np.float64)
        np.add.at(den, step.dst, contrib.real ** 2 + contrib.imag ** 2)
        num = nxt.real ** 2 + nxt.imag ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            fac = np.where(den < VANISHING_DENOMINATOR, 1.0, num / np.where(den == 0, 1.0, den))
        fields.append(nxt)
        denoms.append(den)
        ifactors.append(fac)
    graph.fields = fields
    graph.denoms = denoms
    graph.ifactors = ifactors


def _field_view(graph: ScenarioGraph, graph_slice: int) -> AmplitudeField:
    vec = graph.fields[graph_slice]
    keys = graph.layers[graph_slice]
    entries = {}
    for k, a in zip(keys, vec):
        if a.real * a.real + a.imag * a.imag >= PRUNE_SQ_THRESHOLD:
            entries[k] = complex(a)
    return AmplitudeField(slice_index=graph.slice_label(graph_slice), entries=entries)


def propagate(scenario: Scenario, upto_slice: int | None = None,
              limits: EngineLimits | None = None) -> list[AmplitudeField]:
    """Amplitude fields for slices 0..upto_slice (pairs start at slice 1).

    ``entries[j+1](d') = sum_d entries[j](d) * step(j, d, d')`` with slice 0
    equal to the initial condition; entries below the pruning threshold are
    dropped from the returned views.
    """
    T = scenario.slice_count
    if upto_slice is None:
        upto_slice = T
    if not (0 <= upto_slice <= T):
        raise ValueError(f"upto_slice must lie in 0..{T}")
    graph = compile_scenario(scenario, limits=limits)
    if scenario.kernel.order == 1:
        return [_field_view(graph, j) for j in range(upto_slice + 1)]
    last = max(upto_slice - 1, 0)
    return [_field_view(graph, j) for j in range(last + 1)]


def history_amplitude(scenario: Scenario, history) -> complex:
    """Feynman amplitude of one history: boundary amplitude times step product.

    Accepts a History or a plain distribution sequence of length T+1.  Returns
    0 for out-of-support histories.  Evaluated directly against the kernel, so
    it is independent of the compiled-graph machinery.
    """
    slices = tuple(getattr(history, "slices", history))
    T = scenario.slice_count
    if len(slices) != T + 1:
        raise ValueError(f"history must have {T + 1} slices, got {len(slices)}")
    kernel = scenario.kernel
    if kernel.order == 1:
        amp = 0j
        for d, a in scenario.initial.terms:
            if d == slices[0]:
                amp += a
        for j in range(T):
            if amp == 0:
                return 0j
            amp *= kernel.step(j, slices[j], slices[j + 1])
    else:
        amp = 0j
        for (a0, a1), a in scenario.initial.pair_terms:
            if a0 == slices[0] and a1 == slices[1]:
                amp += a
        for j in range(1, T):
            if amp == 0:
                return 0j
            amp *= kernel.step(j, slices[j], slices[j + 1], prev=slices[j - 1])
    return amp


def final_born_vector(graph: ScenarioGraph) -> np.ndarray:
    last = graph.fields[-1]
    return last.real ** 2 + last.imag ** 2


def born_probability(scenario: Scenario, final: Distribution,
                     limits: EngineLimits | None = None) -> float:
    """|psi(final, T)|^2 from forward propagation.

    For second-order scenarios the final-slice amplitude is the pair field
    summed over the predecessor element (canonical order), i.e. the full
    path-sum amplitude ending at ``final``.
    """
    graph = compile_scenario(scenario, limits=limits)
    if graph.order == 1:
        idx = graph.index[-1].get(final)
        if idx is None:
            return 0.0
        a = graph.fields[-1][idx]
        return float(a.real * a.real + a.imag * a.imag)
    total = 0j
    for key, i in graph.index[-1].items():
        if key[1] == final:
            total += graph.fields[-1][i]
    return float(total.real * total.real + total.imag * total.imag)
