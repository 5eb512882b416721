"""Acceptance battery: ten numbered criteria, one printed pass/fail line each.

Each criterion delegates to the corresponding shipped self-check (the same
code ``histlaw self-check`` runs) and enforces the stated tolerance and, where
stated, the runtime bound.  Run with ``pytest tests/test_acceptance.py -s`` to
see the lines as they print.
"""

import time

import pytest

from histlaw import cli, selfcheck


def report(number: int, result, elapsed: float | None = None,
           bound: float | None = None) -> None:
    status = "PASS" if result.passed else "FAIL"
    timing = ""
    if elapsed is not None:
        timing = f" [{elapsed:.2f}s"
        timing += f" < {bound:g}s]" if bound is not None else "]"
    print(f"criterion {number} {status}: {result.detail}{timing}")
    assert result.passed, result.detail
    if elapsed is not None and bound is not None:
        assert elapsed < bound, f"criterion {number} took {elapsed:.2f}s (bound {bound}s)"


def timed(fn, *args, **kwargs):
    t0 = time.perf_counter()
    res = fn(*args, **kwargs)
    return res, time.perf_counter() - t0


class TestAcceptance:
    def test_criterion_01_interference_factor_exactness(self):
        res, dt = timed(selfcheck.check_interference_values)
        report(1, res, dt, 1.0)

    def test_criterion_02_born_consistency_on_random_unitaries(self):
        res, dt = timed(selfcheck.check_born_consistency)
        report(2, res, dt, 60.0)

    def test_criterion_03_three_history_correction(self):
        report(3, selfcheck.check_three_history())

    def test_criterion_04_recoil_arithmetic(self):
        report(4, selfcheck.check_recoil())

    def test_criterion_05_fringe_law(self):
        report(5, selfcheck.check_fringe_law(n_phases=32))

    def test_criterion_06_which_way_decoherence(self):
        report(6, selfcheck.check_which_way())

    def test_criterion_07_quarter_wave_dielectric(self):
        res, dt = timed(selfcheck.check_dielectric)
        report(7, res, dt, 5.0)

    def test_criterion_08_sampler_convergence_and_determinism(self, tmp_path):
        res = selfcheck.check_sampler()
        argv = ["run", "--scenario", "random_unitary", "--param", "seed=2",
                "--mode", "sample", "--seed", "42", "--count", "2000"]
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        assert cli.main([*argv, "--out", str(a)]) == 0
        assert cli.main([*argv, "--out", str(b)]) == 0
        identical = a.read_bytes() == b.read_bytes()
        res = selfcheck.CheckResult(
            res.name, res.passed and identical,
            res.detail + f"; CLI reruns byte-identical: {identical}")
        report(8, res)

    def test_criterion_09_second_order_reduction(self):
        report(9, selfcheck.check_second_order())

    def test_criterion_10_epr_correlations(self):
        report(10, selfcheck.check_epr())


class TestSelfCheckMachinery:
    def test_quick_battery_is_all_green(self):
        results = selfcheck.run_selfcheck(quick=True)
        assert len(results) == 10
        assert all(r.passed for r in results), \
            [r.line() for r in results if not r.passed]

    def test_perturbed_kernels_fail_the_born_total(self):
        results = selfcheck.run_selfcheck(quick=True, wrapper=selfcheck.perturbed)
        by_name = {r.name: r for r in results}
        assert not by_name["born-consistency"].passed
        others = [r for r in results if r.name != "born-consistency"]
        assert all(r.passed for r in others)

    def test_perturbation_breaks_totals_not_marginals(self):
        res = selfcheck.check_born_consistency(quick=True,
                                               wrapper=selfcheck.perturbed)
        assert not res.passed
        assert "max marginal error" in res.detail

    def test_a_crashing_check_reports_failure(self, monkeypatch):
        def boom(**kwargs):
            raise RuntimeError("synthetic crash")

        checks = tuple((name, boom if name == "epr-correlations" else fn)
                       for name, fn in selfcheck.CHECKS)
        monkeypatch.setattr(selfcheck, "CHECKS", checks)
        results = selfcheck.run_selfcheck(quick=True)
        by_name = {r.name: r for r in results}
        assert not by_name["epr-correlations"].passed
        assert "synthetic crash" in by_name["epr-correlations"].detail
