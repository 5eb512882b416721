"""Core domain types for lattice amplitude dynamics.

A system configuration at one time slice is a :class:`Distribution`: particle
counts per lattice site plus a tuple of discrete environment tags (detector
memories, markers, sink flags).  Two configurations can contribute to the same
interference sum only when they are *equal as whole distributions*; that single
rule is what the rest of the package builds on.

A :class:`Kernel` supplies per-slice transition amplitudes.  First-order
kernels map a distribution to weighted successors; second-order kernels also
see the predecessor distribution, which the engine handles by running the same
first-order machinery over ordered distribution pairs.

Everything here is immutable and hashable (except :class:`Scenario`, which
carries callables and metadata and is compared by identity).
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

# Tolerances shared across the package.  Absolute unless stated otherwise.
PROBABILITY_ATOL = 1e-10        # probability comparisons
NORM_DRIFT_TOL = 1e-9           # unitarity: max per-slice norm drift
HISTORY_INVARIANT_RTOL = 1e-12  # probability == |F|^2 * interference product
PRUNE_SQ_THRESHOLD = 1e-30      # squared magnitude below which field entries are dropped
VANISHING_DENOMINATOR = 1e-30   # interference denominator treated as 0/0 -> neutral 1.0

DEFAULT_STATE_CAP = 1_000_000
DEFAULT_HISTORY_CAP = 1_000_000
MAX_STATES_ENV = "HISTLAW_MAX_STATES"


class HistLawError(Exception):
    """Base class for package errors."""


class UnitarityError(HistLawError):
    """A kernel declared unitary violates its contract (e.g. absorbing states)."""


class EnumerationOverflowError(HistLawError):
    """Reachable states or history count exceeded the configured cap."""

    def __init__(self, message: str, slice_index: int | None = None,
                 count: int | None = None):
        super().__init__(message)
        self.slice_index = slice_index
        self.count = count


class InvalidBinningError(HistLawError):
    """Coarse-graining bins do not partition the site index set."""


class NonUnitaryScenarioError(HistLawError):
    """Operation requires a norm-preserving scenario."""


@dataclass(frozen=True)
class EngineLimits:
    """Caps guarding against runaway enumeration."""

    max_states_per_slice: int = DEFAULT_STATE_CAP
    max_histories: int = DEFAULT_HISTORY_CAP

    @staticmethod
    def from_env() -> "EngineLimits":
        # One env knob overrides both caps; read at call time so the CLI
        # contract (env var consulted per run) holds.
        raw = os.environ.get(MAX_STATES_ENV)
        if raw is None:
            return EngineLimits()
        cap = int(raw)
        if cap < 1:
            raise ValueError(f"{MAX_STATES_ENV} must be a positive integer")
        return EngineLimits(max_states_per_slice=cap, max_histories=cap)


def _as_int_tuple(values: Iterable[int], what: str) -> tuple[int, ...]:
    out = []
    for v in values:
        iv = int(v)
        if iv != v or iv < 0:
            raise ValueError(f"{what} entries must be non-negative integers, got {v!r}")
        out.append(iv)
    return tuple(out)


@dataclass(frozen=True)
class Distribution:
    """Occupancy per site plus discrete environment tags.

    Equality and hashing cover the full configuration; the interference
    machinery never compares anything finer.
    """

    occupancy: tuple[int, ...]
    tags: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "occupancy", _as_int_tuple(self.occupancy, "occupancy"))
        object.__setattr__(self, "tags", _as_int_tuple(self.tags, "tags"))

    @property
    def key(self) -> tuple[tuple[int, ...], tuple[int, ...]]:
        """Canonical ordering key; all deterministic orderings derive from it."""
        return (self.occupancy, self.tags)

    @property
    def particle_count(self) -> int:
        return sum(self.occupancy)

    def compact(self) -> str:
        occ = ".".join(str(n) for n in self.occupancy)
        if self.tags:
            return occ + "t" + ".".join(str(t) for t in self.tags)
        return occ

    def __repr__(self) -> str:  # compact, readable in assertion diffs
        return f"D[{self.compact()}]"


# A state key is a Distribution (first order) or an ordered pair of them
# (second order, pair augmentation).
StateKey = "Distribution | tuple[Distribution, Distribution]"


def state_sort_key(key):
    if isinstance(key, Distribution):
        return key.key
    return (key[0].key, key[1].key)


def state_compact(key) -> str:
    if isinstance(key, Distribution):
        return key.compact()
    return key[0].compact() + "|" + key[1].compact()


@dataclass(frozen=True)
class SliceGrid:
    """Uniform time lattice: slice_count steps, slices numbered 0..slice_count."""

    slice_count: int
    dt: float = 1.0

    def __post_init__(self):
        if self.slice_count < 1:
            raise ValueError("slice_count must be >= 1")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError("dt must be positive and finite")


@dataclass(frozen=True)
class Kernel:
    """Per-slice transition amplitudes.

    ``transitions`` signature by order:

    * order 1: ``transitions(slice_index, d) -> iterable of (successor, amplitude)``
    * order 2: ``transitions(slice_index, d_prev, d) -> iterable of (successor, amplitude)``

    The returned support must be finite; entries with amplitude exactly 0 are
    ignored.  ``unitary`` is a declaration, checked by :func:`validate_kernel`.
    """

    transitions: Callable
    order: int = 1
    unitary: bool = False
    name: str = ""

    def __post_init__(self):
        if self.order not in (1, 2):
            raise ValueError("kernel order must be 1 or 2")

    def successors(self, slice_index: int, d: Distribution,
                   prev: Distribution | None = None) -> list[tuple[Distribution, complex]]:
        if self.order == 1:
            raw = self.transitions(slice_index, d)
        else:
            if prev is None:
                raise ValueError("second-order kernel needs the predecessor distribution")
            raw = self.transitions(slice_index, prev, d)
        out = []
        for dest, amp in raw:
            a = complex(amp)
            if not (math.isfinite(a.real) and math.isfinite(a.imag)):
                raise ValueError(f"non-finite step amplitude {a!r} from {d!r} at slice {slice_index}")
            if a != 0:
                out.append((dest, a))
        return out

    def step(self, slice_index: int, d: Distribution, dest: Distribution,
             prev: Distribution | None = None) -> complex:
        """Aggregate amplitude of d -> dest (duplicate support entries sum)."""
        total = 0j
        for cand, amp in self.successors(slice_index, d, prev):
            if cand == dest:
                total += amp
        return total


@dataclass(frozen=True)
class InitialCondition:
    """Slice-0 boundary data.

    ``terms`` feeds first-order scenarios; ``pair_terms`` (amplitudes on
    ordered pairs occupying slices 0 and 1) feeds second-order ones.
    """

    terms: tuple[tuple[Distribution, complex], ...] = ()
    pair_terms: tuple[tuple[tuple[Distribution, Distribution], complex], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple((d, complex(a)) for d, a in self.terms))
        object.__setattr__(self, "pair_terms",
                           tuple(((p[0], p[1]), complex(a)) for p, a in self.pair_terms))
        for _, a in self.terms + self.pair_terms:
            if not (math.isfinite(a.real) and math.isfinite(a.imag)):
                raise ValueError(f"non-finite initial amplitude {a!r}")
        if not self.terms and not self.pair_terms:
            raise ValueError("initial condition needs at least one term")

    def norm_sq(self) -> float:
        return sum(abs(a) ** 2 for _, a in self.terms) + \
            sum(abs(a) ** 2 for _, a in self.pair_terms)


@dataclass(frozen=True)
class History:
    """One fine-grained history: a distribution per slice, with its law data.

    Invariant: ``probability == |feynman_amplitude|^2 * interference_product``
    to 1e-12 relative.
    """

    slices: tuple[Distribution, ...]
    feynman_amplitude: complex
    interference_product: float
    probability: float

    def __post_init__(self):
        object.__setattr__(self, "slices", tuple(self.slices))
        f = self.feynman_amplitude
        expected = (f.real * f.real + f.imag * f.imag) * self.interference_product
        scale = max(abs(expected), abs(self.probability), 1e-300)
        if abs(expected - self.probability) > HISTORY_INVARIANT_RTOL * scale:
            raise ValueError(
                f"history law violated: p={self.probability!r} vs |F|^2*I={expected!r}")

    @property
    def final(self) -> Distribution:
        return self.slices[-1]

    def __len__(self) -> int:
        return len(self.slices)


@dataclass(eq=False)
class Scenario:
    """A runnable experiment: grid + kernel + boundary + bookkeeping.

    ``labels`` maps human names to site indices or tag positions,
    e.g. ``{"screen:X": ("site", 3), "idler-counter": ("tag", 0)}``.
    ``meta`` carries builder echo data (name, params, screen states) used by
    the CLI and the profile helpers; it never affects the dynamics.
    """

    grid: SliceGrid
    kernel: Kernel
    initial: InitialCondition
    site_count: int
    labels: Mapping[str, tuple[str, int]] = field(default_factory=dict)
    meta: Mapping[str, object] = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.site_count < 1:
            raise ValueError("site_count must be >= 1")
        dists: list[Distribution] = [d for d, _ in self.initial.terms]
        for (a, b), _ in self.initial.pair_terms:
            dists.extend((a, b))
        for d in dists:
            if len(d.occupancy) != self.site_count:
                raise ValueError(
                    f"occupancy length {len(d.occupancy)} != site_count {self.site_count}")
        if self.kernel.order == 2 and not self.initial.pair_terms:
            raise ValueError("second-order scenario needs pair_terms")
        if self.kernel.order == 1 and not self.initial.terms:
            raise ValueError("first-order scenario needs terms")
        for name, (kind, idx) in self.labels.items():
            if kind not in ("site", "tag"):
                raise ValueError(f"label {name!r}: kind must be 'site' or 'tag'")
            if kind == "site" and not (0 <= idx < self.site_count):
                raise ValueError(f"label {name!r}: site index {idx} out of range")
        if self.kernel.unitary:
            norm = self.initial.norm_sq()
            if abs(norm - 1.0) > NORM_DRIFT_TOL:
                raise ValueError(
                    f"unitary scenario needs a normalized initial condition, |.|^2={norm!r}")

    @property
    def slice_count(self) -> int:
        return self.grid.slice_count


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of :func:`validate_kernel`."""

    is_unitary: bool
    max_norm_drift: float
    slice_norms: tuple[float, ...]
    absorbing: tuple[tuple[int, object], ...] = ()


def validate_kernel(kernel: Kernel, probe: InitialCondition, grid: SliceGrid,
                    site_count: int | None = None,
                    limits: EngineLimits | None = None) -> ValidationReport:
    """Propagate ``probe`` through ``kernel`` and report norm drift.

    ``is_unitary`` iff the max per-slice drift of the propagated field norm is
    below 1e-9.  Reachable states with empty support before the final slice
    are recorded as absorbing; that is an error only if the kernel *declares*
    itself unitary.
    """
    from . import engine  # local import: engine depends on this module

    if site_count is None:
        sample = probe.terms[0][0] if probe.terms else probe.pair_terms[0][0][0]
        site_count = len(sample.occupancy)
    scenario = Scenario(grid=grid, kernel=Kernel(kernel.transitions, kernel.order,
                                                 unitary=False, name=kernel.name),
                        initial=probe, site_count=site_count, name="validation-probe")
    graph = engine.compile_scenario(scenario, limits=limits)
    # fsum is exactly rounded, so permutation kernels (which only reorder the
    # per-entry magnitudes) report drift exactly 0.
    norms = tuple(math.fsum((f.real ** 2 + f.imag ** 2).tolist()) for f in graph.fields)
    drift = max(abs(n - norms[0]) for n in norms)
    absorbing = tuple((j, key) for j, key in graph.absorbing)
    if kernel.unitary and absorbing:
        j, key = absorbing[0]
        raise UnitarityError(
            f"kernel declared unitary but {state_compact(key)} has empty support at slice {j}"
            " (absorbing states need explicit sinks)")
    return ValidationReport(is_unitary=drift < NORM_DRIFT_TOL,
                            max_norm_drift=drift,
                            slice_norms=norms,
                            absorbing=absorbing)
