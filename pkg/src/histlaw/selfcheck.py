"""Built-in acceptance battery.

Each check exercises one headline property of the history law on built-in
scenarios and returns a :class:`CheckResult` with the worst discrepancy it
saw.  The CLI ``self-check`` subcommand runs the whole battery; the test
suite calls the same functions so the shipped binary and the tests cannot
drift apart.

``quick=True`` shrinks the randomized populations and the sample count so the
battery finishes in a few seconds; tolerances are never loosened.
"""

from __future__ import annotations

import math
import time
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Iterable

from . import engine, histories, interference
from . import scenarios as sc
from .model import (
    Distribution,
    Kernel,
    NORM_DRIFT_TOL,
    PROBABILITY_ATOL,
    Scenario,
)

__all__ = ["CheckResult", "run_selfcheck", "perturbed", "CHECKS"]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    elapsed: float = 0.0

    def line(self) -> str:
        s = "ok  " if self.passed else "FAIL"
        return f"{s} {self.name}: {self.detail} [{self.elapsed:.2f}s]"


def perturbed(scenario: Scenario, epsilon: float = 1e-3) -> Scenario:
    """Copy of a scenario whose step amplitudes are scaled by (1 + epsilon).

    The marginal Born identity is immune to this (it holds for arbitrary
    kernels), but the total history probability of a unitary scenario drifts
    off 1, which the Born-consistency check must catch.
    """
    inner = scenario.kernel.transitions
    if scenario.kernel.order == 1:
        def wrapped(j, d):
            return tuple((dest, a * (1 + epsilon)) for dest, a in inner(j, d))
    else:
        def wrapped(j, prev, d):
            return tuple((dest, a * (1 + epsilon)) for dest, a in inner(j, prev, d))
    return Scenario(
        grid=scenario.grid,
        kernel=Kernel(wrapped, order=scenario.kernel.order,
                      unitary=scenario.kernel.unitary,
                      name=scenario.kernel.name + "~perturbed"),
        initial=scenario.initial,
        site_count=scenario.site_count,
        labels=dict(scenario.labels),
        meta=dict(scenario.meta),
        name=scenario.name + "~perturbed",
    )


def _born_population(count: int) -> Iterable[Scenario]:
    # Deterministic spread over 2..4 sites and 2..6 slices.
    for i in range(count):
        yield sc.random_unitary(sites=2 + i % 3, slices=2 + i % 5, seed=i)


def check_interference_values() -> CheckResult:
    """Exact factors: 0 for opposed equal branches, 1/4 at the half-resultant
    phase, and 1/3 for the end-time-only three-route ratio."""
    worst = 0.0
    X = Distribution((0, 0, 0, 1, 0))
    s = sc.mach_zehnder(phase_diff=math.pi, extra_port=False)
    fac = interference.interference_factor(engine.propagate(s)[2], s.kernel, 3, X)
    worst = max(worst, abs(fac - 0.0))
    s = sc.mach_zehnder(phase_diff=sc.HALF_RESULTANT_PHASE, extra_port=False)
    fac = interference.interference_factor(engine.propagate(s)[2], s.kernel, 3, X)
    worst = max(worst, abs(fac - 0.25))
    s3 = sc.three_history()
    end = histories.end_time_interference_factor(s3, s3.meta["histories"]["A"])
    worst = max(worst, abs(end - 1 / 3))
    return CheckResult("interference-values", worst < 1e-12,
                       f"max |I - expected| = {worst:.3e} (tol 1e-12)")


def check_born_consistency(quick: bool = False,
                           wrapper: Callable[[Scenario], Scenario] | None = None) -> CheckResult:
    """Sum of history probabilities per final distribution equals its Born
    weight, and the grand total is 1 for unitary kernels."""
    n = 8 if quick else 50
    worst_marg = 0.0
    worst_total = 0.0
    for scen in _born_population(n):
        if wrapper is not None:
            scen = wrapper(scen)
        rep = histories.marginal_consistency(scen)
        worst_marg = max(worst_marg, rep.max_abs_error)
        worst_total = max(worst_total, abs(rep.total_probability - 1.0))
    ok = worst_marg < PROBABILITY_ATOL and worst_total < NORM_DRIFT_TOL
    return CheckResult(
        "born-consistency", ok,
        f"{n} random unitary scenarios: max marginal error {worst_marg:.3e} "
        f"(tol 1e-10), max |total - 1| = {worst_total:.3e} (tol 1e-9)")


def check_three_history() -> CheckResult:
    """Routes killed at their merge stay dead; an end-time-only ratio would
    revive them at 1/3."""
    s = sc.three_history()
    by_slices = {h.slices: h for h in histories.enumerate_histories(s)}
    named = s.meta["histories"]
    pa = by_slices[named["A"]].probability
    pb = by_slices[named["B"]].probability
    pc = by_slices[named["C"]].probability
    end_a = histories.end_time_interference_factor(s, named["A"])
    worst = max(abs(pa), abs(pb), abs(pc - 1 / 3), abs(end_a - 1 / 3))
    return CheckResult(
        "three-history", worst < 1e-12,
        f"P(A)={pa:.1e} P(B)={pb:.1e} P(C)-1/3={pc - 1/3:.1e} "
        f"end-time factor-1/3={end_a - 1/3:.1e} (tol 1e-12)")


def check_recoil() -> CheckResult:
    """Momentum bookkeeping for one 400 nm photon against a 0.1 kg apparatus."""
    r = sc.apparatus_recoil(400e-9, 0.1)
    expected = {
        "wavevector": 1.5707963267948966e7,
        "momentum": 1.6565176548537222e-27,
        "velocity": 2.3426696919989814e-26,
        "energy": 2.744049756498705e-53,
        "angular_frequency": 2.6020453418813228e-19,
    }
    worst = max(abs(getattr(r, k) / v - 1.0) for k, v in expected.items())
    return CheckResult("recoil-arithmetic", worst < 5e-3,
                       f"max relative deviation {worst:.3e} over 5 quantities (tol 5e-3)")


def check_fringe_law(n_phases: int = 32) -> CheckResult:
    """Interferometer port X follows cos^2(phase/2); offset of this splitter
    convention is zero."""
    X = Distribution((0, 0, 0, 1, 0))
    worst = 0.0
    for i in range(n_phases):
        phi = -math.pi + 2 * math.pi * (i + 0.5) / n_phases
        p = engine.born_probability(sc.mach_zehnder(phase_diff=phi), X)
        worst = max(worst, abs(p - math.cos(phi / 2) ** 2))
    return CheckResult("fringe-law", worst < 1e-10,
                       f"{n_phases} phases: max |P(X) - cos^2| = {worst:.3e} (tol 1e-10)")


def check_which_way() -> CheckResult:
    """Idler tags: visibility 1 when routes share the counter tag, 0 when the
    blocked idler marks route A, with route probabilities 1/2 each."""
    s_open = sc.which_way(idler_blocked=False)
    v_open = sc.fringe_visibility(p for _, p in sc.screen_profile(s_open))
    s_blk = sc.which_way(idler_blocked=True)
    v_blk = sc.fringe_visibility(p for _, p in sc.screen_profile(s_blk))
    tags = s_blk.meta["route_tags"]
    probs = Counter()
    for h in histories.enumerate_histories(s_blk):
        probs[h.final.tags[0]] += h.probability
    worst_route = max(abs(probs[tags["A"]] - 0.5), abs(probs[tags["B"]] - 0.5))
    ok = abs(v_open - 1) < 1e-9 and abs(v_blk) < 1e-9 and worst_route < 1e-9
    return CheckResult(
        "which-way", ok,
        f"visibility open {v_open!r}, blocked {v_blk:.3e}; "
        f"route prob err {worst_route:.3e} (tol 1e-9)")


def check_dielectric() -> CheckResult:
    """Quarter-wave antireflection, its destruction by a timed absorber, and
    its destruction by mere route observation."""
    t0 = time.perf_counter()
    worst_off = 0.0
    for q in (1, 3, 5, 7):
        prof = dict(sc.screen_profile(sc.dielectric(quarter_waves=q)))
        worst_off = max(worst_off, prof["reflected"])
    blocked = dict(sc.screen_profile(sc.dielectric(blocker_schedule="0010")))
    observed = dict(sc.screen_profile(sc.dielectric(observe_route=True)))
    elapsed = time.perf_counter() - t0
    ok = (worst_off < 1e-10 and blocked["reflected"] > 0.01
          and observed["reflected"] > 0.01 and elapsed < 5.0)
    return CheckResult(
        "dielectric", ok,
        f"off: max P(reflected) = {worst_off:.2e} (tol 1e-10); "
        f"blocker at return: {blocked['reflected']:.4f}; "
        f"observed: {observed['reflected']:.4f} (both > 0.01); {elapsed:.2f}s")


def check_sampler(quick: bool = False) -> CheckResult:
    """Ancestral sampler matches enumeration in TV distance and is
    reproducible under a fixed seed."""
    count = 20_000 if quick else 100_000
    tol = 0.05 if quick else 0.02
    s = sc.random_unitary(sites=3, slices=4, seed=2)
    exact = {h.slices: h.probability for h in histories.enumerate_histories(s)}
    run1 = histories.sample_histories(s, seed=42, count=count)
    run2 = histories.sample_histories(s, seed=42, count=count)
    same = all(a.slices == b.slices for a, b in zip(run1, run2))
    freq = Counter(h.slices for h in run1)
    tv = 0.5 * sum(abs(freq.get(k, 0) / count - p) for k, p in exact.items())
    tv += 0.5 * sum(freq[k] / count for k in freq if k not in exact)
    return CheckResult("sampler-convergence", tv < tol and same,
                       f"TV({count} samples) = {tv:.4f} (tol {tol}); "
                       f"seed-reproducible: {same}")


def check_second_order(quick: bool = False) -> CheckResult:
    """Predecessor-blind second-order kernels reproduce first-order history
    probabilities exactly (pair factors collapse to first-order ones)."""
    n = 5 if quick else 20
    worst = 0.0
    for i in range(n):
        base = sc.random_unitary(sites=2 + i % 2, slices=2 + i % 3, seed=100 + i)
        first, second = sc.second_order_equivalent(base)
        p1 = {h.slices: h.probability for h in histories.enumerate_histories(first)}
        p2 = {h.slices: h.probability for h in histories.enumerate_histories(second)}
        if set(p1) != set(p2):
            return CheckResult("second-order-reduction", False,
                               f"instance {i}: history sets differ")
        worst = max(worst, max(abs(p1[k] - p2[k]) for k in p1))
    return CheckResult("second-order-reduction", worst < 1e-10,
                       f"{n} instances: max |P1 - P2| = {worst:.3e} (tol 1e-10)")


def check_epr() -> CheckResult:
    """Aligned polaroids on the entangled pair: perfect correlation."""
    s = sc.epr()
    out = s.meta["outcomes"]
    pp = engine.born_probability(s, out["both_pass"])
    aa = engine.born_probability(s, out["both_absorbed"])
    mm = max(engine.born_probability(s, d) for d in out["mismatch"])
    worst = max(abs(pp - 0.5), abs(aa - 0.5), mm)
    return CheckResult("epr-correlations", worst < 1e-12,
                       f"P(pass,pass)-1/2 = {pp - 0.5:.1e}, "
                       f"P(sink,sink)-1/2 = {aa - 0.5:.1e}, "
                       f"P(mismatch) = {mm:.1e} (tol 1e-12)")


CHECKS: tuple[tuple[str, Callable[..., CheckResult]], ...] = (
    ("interference-values", check_interference_values),
    ("born-consistency", check_born_consistency),
    ("three-history", check_three_history),
    ("recoil-arithmetic", check_recoil),
    ("fringe-law", check_fringe_law),
    ("which-way", check_which_way),
    ("dielectric", check_dielectric),
    ("sampler-convergence", check_sampler),
    ("second-order-reduction", check_second_order),
    ("epr-correlations", check_epr),
)


def run_selfcheck(quick: bool = False,
                  wrapper: Callable[[Scenario], Scenario] | None = None) -> list[CheckResult]:
    """Run the whole battery; ``wrapper`` (tests only) mangles each randomized
    scenario before the Born-consistency check."""
    results = []
    for name, fn in CHECKS:
        t0 = time.perf_counter()
        kwargs = {}
        if fn in (check_born_consistency, check_sampler, check_second_order):
            kwargs["quick"] = quick
        if fn is check_born_consistency and wrapper is not None:
            kwargs["wrapper"] = wrapper
        try:
            res = fn(**kwargs)
        except Exception as exc:  # a crash is a failure, not an abort
            res = CheckResult(name, False, f"raised {type(exc).__name__}: {exc}")
        results.append(CheckResult(res.name, res.passed, res.detail,
                                   time.perf_counter() - t0))
    return results
