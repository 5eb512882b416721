"""Interference factors: per-slice constructive/destructive interference.

The factor for a target configuration at slice t is

    I = |sum_n c_n|^2 / sum_n |c_n|^2,

where c_n runs over the contributions psi(d_n at t-1) * step(d_n -> target),
one per predecessor configuration.  I < 1 means destructive interference
(histories through the target are penalized), I > 1 constructive, I = 1 no
interference (e.g. a single contributor).  A vanishing denominator means no
history reaches the target at all; the factor is then defined as the neutral
value 1 so that products over histories stay well formed.

For second-order dynamics the same ratio applies to ordered pairs of
adjacent-slice configurations, with contributions indexed by the pair's
predecessor.
"""

from __future__ import annotations

from typing import Iterable

from .model import (
    Distribution,
    EngineLimits,
    Kernel,
    Scenario,
    VANISHING_DENOMINATOR,
    state_sort_key,
)

__all__ = [
    "interference_ratio",
    "interference_terms",
    "interference_factor",
    "pair_interference_factor",
    "interference_map",
]


def interference_ratio(contributions: Iterable[complex]) -> float:
    """|sum|^2 / sum of squared magnitudes, neutral 1.0 on a vanishing denominator.

    Accumulates in the order given; callers wanting bit-stable results pass
    contributions in canonical predecessor order.
    """
    total = 0j
    den = 0.0
    for c in contributions:
        c = complex(c)
        total += c
        den += c.real * c.real + c.imag * c.imag
    if den < VANISHING_DENOMINATOR:
        return 1.0
    return (total.real * total.real + total.imag * total.imag) / den


def interference_terms(prev_field, kernel: Kernel, slice_index: int, target):
    """Ordered contribution list feeding the factor for ``target`` at ``slice_index``.

    Returns ``[(predecessor_key, contribution), ...]`` in canonical predecessor
    order.  ``prev_field`` must be the amplitude field at ``slice_index - 1``
    (a pair field for second-order kernels, where ``target`` is an ordered
    pair and predecessors are the pairs one slice earlier).
    """
    if slice_index < 1:
        raise ValueError("interference factors exist only at slices >= 1")
    out = []
    if kernel.order == 1:
        for key in sorted(prev_field.entries, key=state_sort_key):
            amp = prev_field.entries[key]
            step = kernel.step(slice_index - 1, key, target)
            if step != 0:
                out.append((key, amp * step))
    else:
        t_first, t_second = target
        for key in sorted(prev_field.entries, key=state_sort_key):
            if key[1] != t_first:
                continue
            amp = prev_field.entries[key]
            step = kernel.step(slice_index - 1, t_first, t_second, prev=key[0])
            if step != 0:
                out.append((key, amp * step))
    return out


def interference_factor(prev_field, kernel: Kernel, slice_index: int,
                        target: Distribution) -> float:
    """Factor for a single configuration from the field one slice earlier."""
    terms = interference_terms(prev_field, kernel, slice_index, target)
    return interference_ratio(c for _, c in terms)


def pair_interference_factor(prev_pair_field, kernel: Kernel, slice_index: int,
                             target_pair) -> float:
    """Factor for an adjacent-slice pair under a second-order kernel.

    ``slice_index`` names the later slice of the target pair; ``prev_pair_field``
    holds amplitudes for pairs occupying slices (slice_index-2, slice_index-1).
    For kernels that ignore the predecessor this reduces to the first-order
    factor of the pair's earlier element at its own slice.
    """
    if kernel.order != 2:
        raise ValueError("pair_interference_factor needs a second-order kernel")
    terms = interference_terms(prev_pair_field, kernel, slice_index, target_pair)
    return interference_ratio(c for _, c in terms)


def interference_map(scenario: Scenario, slice_index: int | None = None,
                     limits: EngineLimits | None = None,
                     graph=None) -> dict:
    """Factors for every reachable state, at one slice or all of them.

    Returns ``{slice_index: {state_key: factor}}``; pass ``slice_index`` to
    restrict to one slice (still nested, for a uniform shape).  First slices
    carry no factor: slice 0 for first-order scenarios, slices 0 and 1 for
    second-order ones (the boundary pair).
    """
    from . import engine

    if graph is None:
        graph = engine.compile_scenario(scenario, limits=limits)
    out: dict[int, dict] = {}
    for g in range(1, len(graph.layers)):
        label = graph.slice_label(g)
        if slice_index is not None and label != slice_index:
            continue
        fac = graph.ifactors[g]
        out[label] = {key: float(fac[i]) for i, key in enumerate(graph.layers[g])}
    if slice_index is not None and not out:
        raise ValueError(f"no interference factors at slice {slice_index}")
    return out
