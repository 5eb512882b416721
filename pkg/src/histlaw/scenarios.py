"""Builders for the worked experiments, plus small analytic side calculations.

Every builder returns a plain :class:`~histlaw.model.Scenario`.  Builders whose
physics conserves total probability declare their kernel unitary; the toy
merge diagrams (routes converging on one point with unit amplitudes) do not
conserve norm by construction and are declared non-unitary, which the
validation report confirms.  All builders accept ``extra_slices`` to pad the
horizon with identity steps, which changes nothing except adding neutral
interference factors.

Two-port splitters follow one convention throughout: transmission amplitude
1/sqrt(2), reflection i/sqrt(2).  With it the Mach-Zehnder cross port X obeys
P(X) = cos^2(phase_diff / 2), i.e. the fringe offset of the splitter pair is
zero.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.constants import hbar
from scipy.stats import unitary_group

from .model import (
    Distribution,
    EngineLimits,
    InitialCondition,
    Kernel,
    Scenario,
    SliceGrid,
)

__all__ = [
    "HALF_RESULTANT_PHASE",
    "RecoilReport",
    "available_scenarios",
    "build_scenario",
    "scenario_builder",
    "mach_zehnder",
    "three_history",
    "backward_history",
    "dielectric",
    "which_way",
    "two_photon",
    "epr",
    "delayed_interference",
    "random_unitary",
    "second_order_equivalent",
    "apparatus_recoil",
    "coarse_grained_amplitude",
    "fringe_visibility",
    "screen_profile",
]

# Relative phase at which two equal branches of magnitude 1/sqrt(2) sum to a
# resultant of half the pre-split magnitude: |1 + e^{i theta}|/2 = 1/2, i.e.
# the merge's interference factor is exactly 1/4.
HALF_RESULTANT_PHASE = math.acos(-0.75)

_REGISTRY: dict[str, Callable[..., Scenario]] = {}


def scenario_builder(name: str):
    """Register a builder under a stable CLI-visible name."""
    def deco(fn):
        fn.scenario_name = name
        _REGISTRY[name] = fn
        return fn
    return deco


def available_scenarios() -> dict[str, Callable[..., Scenario]]:
    """Name -> builder, in registration order."""
    return dict(_REGISTRY)


def build_scenario(name: str, **params) -> Scenario:
    """Look up a builder by name and call it; unknown names raise KeyError."""
    try:
        fn = _REGISTRY[name]
    except KeyError:
        known = ", ".join(sorted(_REGISTRY))
        raise KeyError(f"unknown scenario {name!r}; available: {known}") from None
    return fn(**params)


def _padded(transitions, base_steps: int):
    """Wrap a step map so slices past the builder's horizon are identity."""
    def step(j, d):
        if j >= base_steps:
            return ((d, 1.0),)
        return transitions(j, d)
    return step


def _check_extra(extra_slices: int) -> int:
    extra = int(extra_slices)
    if extra < 0:
        raise ValueError("extra_slices must be >= 0")
    return extra


def _one_at(site: int, site_count: int, tags=()) -> Distribution:
    occ = [0] * site_count
    occ[site] = 1
    return Distribution(tuple(occ), tuple(tags))


@scenario_builder("mach_zehnder")
def mach_zehnder(phase_diff: float = 0.0, extra_port: bool = True,
                 extra_slices: int = 0) -> Scenario:
    """Two-route interferometer, full (both output ports) or bare merge.

    Sites: source 0, arms A=1 / B=2, outputs X=3 / Y=4.  Arm B picks up
    ``phase_diff`` in flight.  With ``extra_port`` the routes recombine on a
    second splitter and the kernel is unitary with P(X) = cos^2(phase_diff/2)
    (zero fringe offset under this splitter convention).  Without it the
    routes simply converge on X with unit amplitudes, giving the textbook
    merge of two branch amplitudes 1/sqrt(2) and e^{i phase_diff}/sqrt(2):
    exactly out of phase at phase_diff = pi, and a half-magnitude resultant
    (interference factor 1/4) at phase_diff = HALF_RESULTANT_PHASE.  That
    variant does not conserve norm; the lost weight is the interference.
    """
    extra = _check_extra(extra_slices)
    phi = float(phase_diff)
    n_sites = 5
    S, A, B, X, Y = range(n_sites)
    dS, dA, dB = (_one_at(s, n_sites) for s in (S, A, B))
    dX, dY = _one_at(X, n_sites), _one_at(Y, n_sites)
    rt = 1 / math.sqrt(2.0)
    bphase = cmath.exp(1j * phi)

    if extra_port:
        table = [
            {dS: ((dA, rt), (dB, 1j * rt))},
            {dA: ((dA, 1.0),), dB: ((dB, bphase),)},
            {dA: ((dX, 1j * rt), (dY, rt)), dB: ((dX, rt), (dY, 1j * rt))},
        ]
    else:
        table = [
            {dS: ((dA, rt), (dB, rt))},
            {dA: ((dA, 1.0),), dB: ((dB, bphase),)},
            {dA: ((dX, 1.0),), dB: ((dX, 1.0),)},
        ]

    def transitions(j, d):
        return table[j].get(d, ())

    base = len(table)
    return Scenario(
        grid=SliceGrid(base + extra),
        kernel=Kernel(_padded(transitions, base), unitary=bool(extra_port),
                      name="mach_zehnder"),
        initial=InitialCondition(terms=((dS, 1.0),)),
        site_count=n_sites,
        labels={"screen:X": ("site", X), "screen:Y": ("site", Y)},
        meta={"scenario": "mach_zehnder", "base_slices": base,
              "merge_slice": 3,
              "params": {"phase_diff": phi, "extra_port": bool(extra_port),
                         "extra_slices": extra},
              "screens": [("site", X, "screen:X"), ("site", Y, "screen:Y")]},
        name="mach_zehnder",
    )


@scenario_builder("three_history")
def three_history(extra_slices: int = 0) -> Scenario:
    """Three routes: two cancel at X, the third meets their descendant at Y.

    Route amplitudes are (1/sqrt(3), -1/sqrt(3), 1/sqrt(3)).  A and B merge
    at X one slice before everything converges at Y, so the per-slice law
    kills histories A and B at X, while a whole-history ratio taken at the
    final slice would report 1/3 and wrongly revive them.  Canonical history
    slice sequences are stored under ``meta["histories"]``.
    """
    extra = _check_extra(extra_slices)
    n_sites = 6
    S, RA, RB, RC, X, Y = range(n_sites)
    dS, dA, dB, dC = (_one_at(s, n_sites) for s in (S, RA, RB, RC))
    dX, dY = _one_at(X, n_sites), _one_at(Y, n_sites)
    a = 1 / math.sqrt(3.0)
    table = [
        {dS: ((dA, a), (dB, -a), (dC, a))},
        {dA: ((dX, 1.0),), dB: ((dX, 1.0),), dC: ((dC, 1.0),)},
        {dX: ((dY, 1.0),), dC: ((dY, 1.0),)},
    ]

    def transitions(j, d):
        return table[j].get(d, ())

    base = len(table)
    return Scenario(
        grid=SliceGrid(base + extra),
        kernel=Kernel(_padded(transitions, base), unitary=False,
                      name="three_history"),
        initial=InitialCondition(terms=((dS, 1.0),)),
        site_count=n_sites,
        labels={"merge:X": ("site", X), "screen:Y": ("site", Y)},
        meta={"scenario": "three_history", "base_slices": base,
              "params": {"extra_slices": extra},
              "histories": {"A": (dS, dA, dX, dY), "B": (dS, dB, dX, dY),
                            "C": (dS, dC, dC, dY)},
              "screens": [("site", Y, "screen:Y")]},
        name="three_history",
    )


@scenario_builder("backward_history")
def backward_history(relative_phase: float = 0.0, extra_slices: int = 0) -> Scenario:
    """Pair production viewed forward: interference only where occupancies match.

    Route A keeps one particle moving from site 0 to site 2.  Route B
    momentarily holds three particles (the original plus a created pair)
    before an annihilation leaves one particle at site 2.  At the middle
    slice the two routes hold different particle numbers, so neither gets an
    interference factor; at the final slice they reach the same configuration
    and interfere like any two ordinary routes.
    """
    extra = _check_extra(extra_slices)
    n_sites = 3
    d0 = _one_at(0, n_sites)
    d_mid_a = _one_at(1, n_sites)
    d_mid_b = Distribution((1, 1, 1))
    d_end = _one_at(2, n_sites)
    rt = 1 / math.sqrt(2.0)
    b = rt * cmath.exp(1j * float(relative_phase))
    table = [
        {d0: ((d_mid_a, rt), (d_mid_b, b))},
        {d_mid_a: ((d_end, 1.0),), d_mid_b: ((d_end, 1.0),)},
    ]

    def transitions(j, d):
        return table[j].get(d, ())

    base = len(table)
    return Scenario(
        grid=SliceGrid(base + extra),
        kernel=Kernel(_padded(transitions, base), unitary=False,
                      name="backward_history"),
        initial=InitialCondition(terms=((d0, 1.0),)),
        site_count=n_sites,
        labels={"end": ("site", 2)},
        meta={"scenario": "backward_history", "base_slices": base,
              "params": {"relative_phase": float(relative_phase),
                         "extra_slices": extra},
              "mid_states": (d_mid_a, d_mid_b)},
        name="backward_history",
    )


def _quarter_turn(q: int) -> complex:
    """Exact i**q for integer q (no trig rounding)."""
    return (1.0 + 0j, 1j, -1.0 + 0j, -1j)[q % 4]


@scenario_builder("dielectric")
def dielectric(quarter_waves: int = 1, blocker_schedule: Sequence[bool] | str = "",
               observe_route: bool = False, extra_slices: int = 0) -> Scenario:
    """Thin sheet with calibrated surfaces and a switchable absorbing layer.

    The sheet is ``quarter_waves`` quarter-wavelengths thick: each in-medium
    slice multiplies by i**quarter_waves, so the bottom-surface round trip
    carries (-1)**quarter_waves.  Surface amplitudes are calibrated so the
    top-surface reflection and the bottom-surface route leave the sheet with
    equal magnitude; for odd ``quarter_waves`` they are then exactly out of
    phase and the total reflection cancels.  The cancelled weight is lost,
    not redirected, so the kernel is intentionally non-unitary.

    ``blocker_schedule`` gives the absorbing layer's state per slice (length
    4; default all off).  The layer sits at the top of the sheet: when on it
    absorbs whatever crosses it that slice, into an explicit sink site.  The
    photon crosses going in at step 0 and coming back up at step 2, so the
    schedule (off, off, on, off) absorbs exactly the returning bottom route
    and the surviving top reflection propagates freely.  ``observe_route``
    writes the bottom bounce into a tag, splitting the final configurations
    and restoring reflection without any blocking.
    """
    extra = _check_extra(extra_slices)
    q = int(quarter_waves)
    if q < 1:
        raise ValueError("quarter_waves must be a positive integer")
    base = 4
    if isinstance(blocker_schedule, str):
        sched_src = [c for c in blocker_schedule.replace(",", "") if c.strip()]
        schedule = tuple(c not in ("0", "f", "F") for c in sched_src)
    else:
        schedule = tuple(bool(x) for x in blocker_schedule)
    if not schedule:
        schedule = (False,) * base
    if len(schedule) != base:
        raise ValueError(f"blocker_schedule must cover {base} slices, got {len(schedule)}")

    n_sites = 12
    (S, W, R1, R2, R3, M, U, TH, TH2, TH3, M2, SINK) = range(n_sites)
    p = _quarter_turn(q)
    s_a = 0.25
    c_a = math.sqrt(1.0 - s_a * s_a)
    # Calibration: the bottom route crosses the top surface twice (c_a each
    # way), so equal out-of-sheet magnitudes need s_b = s_a / c_a**2.
    s_b = s_a / (c_a * c_a)
    c_b = math.sqrt(1.0 - s_b * s_b)
    mark = (1,) if observe_route else (0,)

    def one(site, tags=(0,)):
        return _one_at(site, n_sites, tags)

    def transitions(j, d):
        site = d.occupancy.index(1)
        tags = d.tags
        if site == S:
            if schedule[0]:
                return ((one(W), 1j * s_a), (one(SINK), c_a))
            return ((one(W), 1j * s_a), (one(M), c_a))
        if site == W:
            # reflected at the top surface, above the absorbing layer: the
            # blocker state never touches this route
            return ((one(R1), 1.0),)
        if site == M:
            return ((one(U, mark), 1j * s_b * p), (one(TH, tags), c_b * p))
        if site == U:
            if schedule[2]:
                return ((one(SINK, tags), p),)
            return ((one(R2, tags), c_a * p), (one(M2, tags), 1j * s_a * p))
        if site == R1:
            return ((one(R2, tags), 1.0),)
        if site == R2:
            return ((one(R3, tags), 1.0),)
        if site == TH:
            return ((one(TH2, tags), 1.0),)
        if site == TH2:
            return ((one(TH3, tags), 1.0),)
        return ((d, 1.0),)  # sink, residue, and final sites hold still

    return Scenario(
        grid=SliceGrid(base + extra),
        kernel=Kernel(_padded(transitions, base), unitary=False, name="dielectric"),
        initial=InitialCondition(terms=((one(S), 1.0),)),
        site_count=n_sites,
        labels={"reflected": ("site", R3), "through": ("site", TH3),
                "sink:blocker": ("site", SINK), "bottom-bounce": ("tag", 0)},
        meta={"scenario": "dielectric", "base_slices": base,
              "params": {"quarter_waves": q,
                         "blocker_schedule": "".join("1" if b else "0" for b in schedule),
                         "observe_route": bool(observe_route),
                         "extra_slices": extra},
              "return_slice": 2, "reflected_site": R3, "sink_site": SINK,
              "screens": [("site", R3, "reflected"), ("site", TH3, "through"),
                          ("site", SINK, "sink:blocker")]},
        name="dielectric",
    )


@scenario_builder("which_way")
def which_way(idler_blocked: bool = False, screen_sites: int = 8,
              extra_slices: int = 0) -> Scenario:
    """Two-route screen experiment with an idler marking (or not) the route.

    Each route's down converter sends an idler to a shared coincidence
    counter, written as tag value 1.  Blocking route A's idler sends it to a
    distinct absorber (tag value 2) instead, so the final configurations of
    the two routes differ in the tag and can never interfere: the screen
    profile flattens and each route carries probability 1/2.  Unblocked, the
    routes share every final configuration and the screen shows full-contrast
    fringes.  The kernel is unitary in both settings: route phases
    2*pi*k/screen_sites make the two spreading columns exactly orthogonal.
    """
    extra = _check_extra(extra_slices)
    K = int(screen_sites)
    if K < 2:
        raise ValueError("screen_sites must be >= 2")
    n_sites = 3 + K
    S, A, B = 0, 1, 2
    rt = 1 / math.sqrt(2.0)
    spread = 1 / math.sqrt(K)
    tag_a = (2,) if idler_blocked else (1,)
    tag_b = (1,)
    dS = _one_at(S, n_sites, (0,))
    dA, dB = _one_at(A, n_sites, tag_a), _one_at(B, n_sites, tag_b)

    def transitions(j, d):
        if j == 0:
            return ((dA, rt), (dB, 1j * rt))
        site = d.occupancy.index(1)
        if site == A:
            return tuple((_one_at(3 + k, n_sites, d.tags), spread) for k in range(K))
        if site == B:
            return tuple(
                (_one_at(3 + k, n_sites, d.tags),
                 spread * cmath.exp(2j * math.pi * k / K))
                for k in range(K))
        return ((d, 1.0),)

    base = 2
    return Scenario(
        grid=SliceGrid(base + extra),
        kernel=Kernel(_padded(transitions, base), unitary=True, name="which_way"),
        initial=InitialCondition(terms=((dS, 1.0),)),
        site_count=n_sites,
        labels={"idler-counter": ("tag", 0),
                **{f"screen:{k}": ("site", 3 + k) for k in range(K)}},
        meta={"scenario": "which_way", "base_slices": base,
              "params": {"idler_blocked": bool(idler_blocked),
                         "screen_sites": K, "extra_slices": extra},
              "route_tags": {"A": tag_a[0], "B": tag_b[0]},
              "screens": [("site", 3 + k, f"screen:{k}") for k in range(K)]},
        name="which_way",
    )


@scenario_builder("two_photon")
def two_photon(relative_phase: float = 0.0, distinguishable: bool = False,
               extra_slices: int = 0) -> Scenario:
    """Two photons, one landing at X and one at Y, by two exchange routes.

    Unlabeled occupancy makes the parallel assignment (source 1 to X,
    source 2 to Y) and the crossed one end in the same configuration, so the
    final slice carries a genuine two-term interference factor: 2 at equal
    phases, 0 at opposite ones.  The assignments pass through different
    midpoint configurations, which keeps them distinct histories until the
    end.  ``distinguishable`` writes the assignment into a tag, after which
    the two never share a configuration and probabilities simply add.
    """
    extra = _check_extra(extra_slices)
    phi = float(relative_phase)
    n_sites = 8
    rt = 1 / math.sqrt(2.0)
    src = Distribution((1, 1, 0, 0, 0, 0, 0, 0), (0,))
    mid_par = Distribution((0, 0, 1, 1, 0, 0, 0, 0), (1,) if distinguishable else (0,))
    mid_cross = Distribution((0, 0, 0, 0, 1, 1, 0, 0), (2,) if distinguishable else (0,))
    fin_par = Distribution((0, 0, 0, 0, 0, 0, 1, 1), mid_par.tags)
    fin_cross = Distribution((0, 0, 0, 0, 0, 0, 1, 1), mid_cross.tags)
    table = [
        {src: ((mid_par, rt), (mid_cross, rt * cmath.exp(1j * phi)))},
        {mid_par: ((fin_par, 1.0),), mid_cross: ((fin_cross, 1.0),)},
    ]

    def transitions(j, d):
        return table[j].get(d, ())

    base = len(table)
    return Scenario(
        grid=SliceGrid(base + extra),
        kernel=Kernel(_padded(transitions, base), unitary=False, name="two_photon"),
        initial=InitialCondition(terms=((src, 1.0),)),
        site_count=n_sites,
        labels={"screen:X": ("site", 6), "screen:Y": ("site", 7)},
        meta={"scenario": "two_photon", "base_slices": base,
              "params": {"relative_phase": phi,
                         "distinguishable": bool(distinguishable),
                         "extra_slices": extra},
              "joint_final": (fin_par, fin_cross)},
        name="two_photon",
    )


@scenario_builder("epr")
def epr(extra_slices: int = 0) -> Scenario:
    """Polarization-entangled pair meeting aligned polaroids.

    The pair starts in an equal superposition of both-x and both-y
    polarizations (tags).  Each polaroid passes x into a pass site and
    absorbs y into a sink site, one photon per step, as a pure permutation.
    Only both-pass and both-absorbed configurations are reachable: the
    mismatch outcomes have probability exactly zero, and neither marginal
    factorizes the joint.
    """
    extra = _check_extra(extra_slices)
    n_sites = 6
    SRC1, SRC2, PASS1, SINK1, PASS2, SINK2 = range(n_sites)

    def pair(s1, s2, tags):
        occ = [0] * n_sites
        occ[s1] += 1
        occ[s2] += 1
        return Distribution(tuple(occ), tags)

    start_x = pair(SRC1, SRC2, (0, 0))
    start_y = pair(SRC1, SRC2, (1, 1))
    rt = 1 / math.sqrt(2.0)

    def transitions(j, d):
        occ = list(d.occupancy)
        if j == 0 and occ[SRC1]:
            dest = PASS1 if d.tags[0] == 0 else SINK1
            occ[SRC1] -= 1
            occ[dest] += 1
            return ((Distribution(tuple(occ), d.tags), 1.0),)
        if j == 1 and occ[SRC2]:
            dest = PASS2 if d.tags[1] == 0 else SINK2
            occ[SRC2] -= 1
            occ[dest] += 1
            return ((Distribution(tuple(occ), d.tags), 1.0),)
        return ((d, 1.0),)

    base = 2
    return Scenario(
        grid=SliceGrid(base + extra),
        kernel=Kernel(_padded(transitions, base), unitary=True, name="epr"),
        initial=InitialCondition(terms=((start_x, rt), (start_y, rt))),
        site_count=n_sites,
        labels={"pass:1": ("site", PASS1), "sink:1": ("site", SINK1),
                "pass:2": ("site", PASS2), "sink:2": ("site", SINK2),
                "polarization:1": ("tag", 0), "polarization:2": ("tag", 1)},
        meta={"scenario": "epr", "base_slices": base,
              "params": {"extra_slices": extra},
              "outcomes": {
                  "both_pass": pair(PASS1, PASS2, (0, 0)),
                  "both_absorbed": pair(SINK1, SINK2, (1, 1)),
                  "mismatch": (pair(PASS1, SINK2, (0, 1)),
                               pair(SINK1, PASS2, (1, 0)))}},
        name="epr",
    )


@scenario_builder("delayed_interference")
def delayed_interference(path_delta_slices: int = 2, atom_memory: bool = True,
                         screen_atoms: int = 4,
                         excited_phase_per_slice: float = 0.3,
                         extra_slices: int = 0) -> Scenario:
    """Routes of different length meeting a screen of absorbing atoms.

    Route B is ``path_delta_slices`` slices longer than route A, so the
    photon reaches the screen at two different times and the two routes never
    share a configuration while it is in flight.  With ``atom_memory`` the
    absorbing atom holds the excitation (tag = atom index + 1) and its phase
    advances by ``excited_phase_per_slice`` every slice it stays excited;
    once the late photon lands, both routes sit in identical configurations
    and interfere, with the fringe position shifted by the extra time route
    A's atom spent excited.  Without ``atom_memory`` the absorption also
    records its arrival slice in a second tag, the configurations never
    reconverge, and the screen profile is flat.  Unitary either way.
    """
    extra = _check_extra(extra_slices)
    delta = int(path_delta_slices)
    if delta < 0:
        raise ValueError("path_delta_slices must be >= 0")
    K = int(screen_atoms)
    if K < 2:
        raise ValueError("screen_atoms must be >= 2")
    omega = float(excited_phase_per_slice)
    rot = cmath.exp(1j * omega)
    # sites: source, arm A, then the delay line B_0..B_delta
    n_sites = 2 + delta + 1
    S, A = 0, 1
    B0 = 2
    rt = 1 / math.sqrt(2.0)
    spread = 1 / math.sqrt(K)

    def absorbed(atom_k: int, slice_now: int) -> Distribution:
        stamp = 0 if atom_memory else slice_now
        occ = (0,) * n_sites
        return Distribution(occ, (atom_k + 1, stamp))

    def transitions(j, d):
        if d.particle_count == 0:
            # excited atom holding the quantum; its phase keeps turning
            return ((d, rot),) if d.tags[0] else ((d, 1.0),)
        site = d.occupancy.index(1)
        if site == S:
            return ((_one_at(A, n_sites, d.tags), rt),
                    (_one_at(B0, n_sites, d.tags), 1j * rt))
        if site == A:
            return tuple((absorbed(k, j + 1), spread) for k in range(K))
        if site == B0 + delta:
            return tuple(
                (absorbed(k, j + 1), spread * cmath.exp(2j * math.pi * k / K))
                for k in range(K))
        return ((_one_at(site + 1, n_sites, d.tags), 1.0),)

    base = 2 + delta
    return Scenario(
        grid=SliceGrid(base + extra),
        kernel=Kernel(_padded(transitions, base), unitary=True,
                      name="delayed_interference"),
        initial=InitialCondition(terms=((_one_at(S, n_sites, (0, 0)), 1.0),)),
        site_count=n_sites,
        labels={"excited-atom": ("tag", 0), "arrival-stamp": ("tag", 1)},
        meta={"scenario": "delayed_interference", "base_slices": base,
              "params": {"path_delta_slices": delta, "atom_memory": bool(atom_memory),
                         "screen_atoms": K,
                         "excited_phase_per_slice": omega,
                         "extra_slices": extra},
              "screens": [("tag", 0, k + 1, f"atom:{k}") for k in range(K)]},
        name="delayed_interference",
    )


@scenario_builder("random_unitary")
def random_unitary(sites: int = 3, slices: int = 4, seed: int = 0,
                   extra_slices: int = 0) -> Scenario:
    """Single particle under independent Haar-random one-step unitaries.

    The initial condition is a seeded random normalized superposition over
    all site configurations.  Useful as a stress case: no structure, every
    state reachable, norm conserved to rounding.
    """
    extra = _check_extra(extra_slices)
    n_sites = int(sites)
    T = int(slices)
    if n_sites < 1 or T < 1:
        raise ValueError("sites and slices must be >= 1")
    if seed < 0:
        raise ValueError("seed must be >= 0")
    mats = [unitary_group.rvs(n_sites,
                              random_state=np.random.default_rng(
                                  np.random.SeedSequence((int(seed), j))))
            if n_sites > 1 else np.ones((1, 1), dtype=complex)
            for j in range(T)]
    rng = np.random.default_rng(np.random.SeedSequence((int(seed), T, 1)))
    vec = rng.normal(size=n_sites) + 1j * rng.normal(size=n_sites)
    vec = vec / np.linalg.norm(vec)
    basis = [_one_at(s, n_sites) for s in range(n_sites)]

    def transitions(j, d):
        s = d.occupancy.index(1)
        return tuple((basis[t], complex(mats[j][t, s])) for t in range(n_sites))

    return Scenario(
        grid=SliceGrid(T + extra),
        kernel=Kernel(_padded(transitions, T), unitary=True, name="random_unitary"),
        initial=InitialCondition(terms=tuple(
            (basis[s], complex(vec[s])) for s in range(n_sites))),
        site_count=n_sites,
        labels={},
        meta={"scenario": "random_unitary", "base_slices": T,
              "params": {"sites": n_sites, "slices": T, "seed": int(seed),
                         "extra_slices": extra}},
        name="random_unitary",
    )


def second_order_equivalent(scenario: Scenario) -> tuple[Scenario, Scenario]:
    """Recast a first-order scenario as a predecessor-blind second-order one.

    Returns ``(first, second)`` over a horizon extended by one identity step.
    The second-order kernel forwards every query to the first-order step map,
    ignoring the predecessor; its boundary pairs carry the original initial
    amplitude times the first step amplitude.  The two scenarios then have
    the same histories (as slice sequences) with the same probabilities: each
    adjacent-slice pair's interference factor collapses to the first-order
    factor of its earlier element, and the identity tail lets the pair chain
    pick up the final slice's factor.
    """
    if scenario.kernel.order != 1:
        raise ValueError("second_order_equivalent needs a first-order scenario")
    T = scenario.slice_count
    inner = scenario.kernel.transitions

    def first_transitions(j, d):
        if j >= T:
            return ((d, 1.0),)
        return inner(j, d)

    def second_transitions(j, prev, d):
        return first_transitions(j, d)

    pair_terms = []
    for d0, amp in scenario.initial.terms:
        for d1, step in scenario.kernel.successors(0, d0):
            pair_terms.append(((d0, d1), amp * step))
    if not pair_terms:
        raise ValueError("the first step absorbs every initial term, "
                         "so there are no boundary pairs to start from")

    first = Scenario(
        grid=SliceGrid(T + 1, scenario.grid.dt),
        kernel=Kernel(first_transitions, order=1, unitary=scenario.kernel.unitary,
                      name=scenario.kernel.name + "+tail"),
        initial=scenario.initial,
        site_count=scenario.site_count,
        labels=dict(scenario.labels),
        meta={**scenario.meta, "tail_slices": 1},
        name=scenario.name + "+tail",
    )
    second = Scenario(
        grid=SliceGrid(T + 1, scenario.grid.dt),
        kernel=Kernel(second_transitions, order=2, unitary=scenario.kernel.unitary,
                      name=scenario.kernel.name + "+pairs"),
        initial=InitialCondition(pair_terms=tuple(pair_terms)),
        site_count=scenario.site_count,
        labels=dict(scenario.labels),
        meta={**scenario.meta, "tail_slices": 1, "order": 2},
        name=scenario.name + "+pairs",
    )
    return first, second


@dataclass(frozen=True)
class RecoilReport:
    """Momentum bookkeeping for one photon bounce off an apparatus of given mass."""

    wavevector: float         # 1/m
    momentum: float           # kg m/s
    velocity: float           # m/s
    energy: float             # J
    angular_frequency: float  # rad/s


def apparatus_recoil(wavelength: float, mass: float) -> RecoilReport:
    """Recoil of an apparatus absorbing one photon's momentum, worst case.

    The velocity uses the elastic-bounce worst case (momentum transfer up to
    sqrt(2) times the photon momentum); the energy is the corresponding
    kinetic energy and the angular frequency its quantum equivalent E/hbar.
    """
    lam = float(wavelength)
    m = float(mass)
    if not (lam > 0 and m > 0):
        raise ValueError("wavelength and mass must be positive")
    k = 2 * math.pi / lam
    p = hbar * k
    v = math.sqrt(2.0) * p / m
    e = 0.5 * m * v * v
    w = e / hbar
    return RecoilReport(wavevector=k, momentum=p, velocity=v,
                        energy=e, angular_frequency=w)


def coarse_grained_amplitude(initial_terms: Iterable[tuple[float, float, float, float]],
                             alpha: float, beta: float) -> complex:
    """Screen amplitude for two route phases, summed over apparatus microstates.

    Each term (A, a, B, b) contributes A e^{ia} B e^{ib}; the routes only
    enter through the common factor (e^{i alpha} + e^{i beta}) / sqrt(2), so
    ratios of squared magnitudes between phase settings do not depend on the
    microstate terms at all.
    """
    terms = list(initial_terms)
    if not terms:
        raise ValueError("need at least one term")
    total = 0j
    for big_a, a, big_b, b in terms:
        total += big_a * cmath.exp(1j * a) * big_b * cmath.exp(1j * b)
    return (cmath.exp(1j * alpha) + cmath.exp(1j * beta)) / math.sqrt(2.0) * total


def fringe_visibility(values: Iterable[float]) -> float:
    """(max - min) / (max + min) over a profile; 0 for an all-zero profile."""
    vals = [float(v) for v in values]
    if not vals:
        raise ValueError("empty profile")
    hi, lo = max(vals), min(vals)
    if lo < 0:
        raise ValueError("probabilities must be non-negative")
    if hi + lo == 0:
        return 0.0
    return (hi - lo) / (hi + lo)


def screen_profile(scenario: Scenario,
                   limits: EngineLimits | None = None) -> list[tuple[str, float]]:
    """Born probability per labeled screen bucket at the final slice.

    Buckets come from ``meta["screens"]``: site entries collect every final
    configuration occupying that site, tag entries every configuration whose
    tag at the given position equals the given value.
    """
    from . import engine

    screens = scenario.meta.get("screens")
    if not screens:
        raise ValueError("scenario declares no screens")
    graph = engine.compile_scenario(scenario, limits=limits)
    born = engine.final_born_vector(graph)
    out = []
    for entry in screens:
        if entry[0] == "site":
            _, idx, label = entry
            total = sum(float(born[i]) for i, key in enumerate(graph.layers[-1])
                        if key.occupancy[idx] > 0)
        else:
            _, pos, val, label = entry
            total = sum(float(born[i]) for i, key in enumerate(graph.layers[-1])
                        if key.tags[pos] == val)
        out.append((label, total))
    return out
