"""Command-line front end.

Subcommands: ``list`` (builders and parameters), ``run`` (enumerate, sample,
marginals or interference-map over one scenario) and ``self-check`` (the
built-in acceptance battery).

Output is deterministic for fixed inputs: floats are serialized with 17
significant digits, JSON keys are sorted, histories appear in enumeration
(or sample) order, and the sampler's generator identity is echoed in every
JSON summary.  Exit codes: 0 success, 2 unknown scenario/parameter or invalid
request, 3 enumeration overflow, 4 self-check failure.
"""

from __future__ import annotations

import argparse
import csv
import inspect
import io
import json
import math
import sys

from . import histories, interference, selfcheck
from . import scenarios as sc
from .model import (
    EngineLimits,
    EnumerationOverflowError,
    HISTORY_INVARIANT_RTOL,
    NORM_DRIFT_TOL,
    NonUnitaryScenarioError,
    PROBABILITY_ATOL,
    PRUNE_SQ_THRESHOLD,
    VANISHING_DENOMINATOR,
    state_compact,
)

__all__ = ["main"]


class _UsageError(Exception):
    """Bad scenario name, parameter, or flag combination (exit 2)."""


def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"non-finite value in output: {x!r}")
    return format(float(x), ".17g")


def _emit_json(obj) -> str:
    """Deterministic JSON: sorted keys, floats at 17 significant digits."""
    out = io.StringIO()

    def walk(o):
        if o is None or o is True or o is False:
            out.write(json.dumps(o))
        elif isinstance(o, bool):  # unreachable, kept for clarity
            out.write(json.dumps(o))
        elif isinstance(o, int):
            out.write(str(o))
        elif isinstance(o, float):
            out.write(_fmt_float(o))
        elif isinstance(o, str):
            out.write(json.dumps(o))
        elif isinstance(o, dict):
            out.write("{")
            for i, k in enumerate(sorted(o)):
                if i:
                    out.write(",")
                if not isinstance(k, str):
                    raise TypeError(f"JSON object keys must be strings, got {k!r}")
                out.write(json.dumps(k))
                out.write(":")
                walk(o[k])
            out.write("}")
        elif isinstance(o, (list, tuple)):
            out.write("[")
            for i, v in enumerate(o):
                if i:
                    out.write(",")
                walk(v)
            out.write("]")
        else:
            raise TypeError(f"cannot serialize {type(o).__name__}")

    walk(obj)
    out.write("\n")
    return out.getvalue()


def _emit_csv(header: list[str], rows: list[list]) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt_float(v) if isinstance(v, float) else v for v in row])
    return out.getvalue()


def _builder_params(fn) -> dict[str, inspect.Parameter]:
    return dict(inspect.signature(fn).parameters)


def _coerce(raw: str, default):
    if isinstance(default, bool):
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise _UsageError(f"expected a boolean, got {raw!r}")
    if isinstance(default, int):
        try:
            return int(raw)
        except ValueError:
            raise _UsageError(f"expected an integer, got {raw!r}") from None
    if isinstance(default, float):
        try:
            return float(raw)
        except ValueError:
            raise _UsageError(f"expected a number, got {raw!r}") from None
    return raw


def _gather_params(args) -> dict:
    params: dict = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            try:
                loaded = json.load(fh)
            except json.JSONDecodeError as exc:
                raise _UsageError(f"--config {args.config}: {exc}") from None
        if not isinstance(loaded, dict):
            raise _UsageError(f"--config {args.config}: expected a JSON object")
        params.update(loaded)
    for item in args.param or ():
        if "=" not in item:
            raise _UsageError(f"--param needs key=value, got {item!r}")
        key, raw = item.split("=", 1)
        params[key.strip()] = raw
    return params


def _build(args) -> tuple:
    try:
        fn = sc.available_scenarios()[args.scenario]
    except KeyError:
        known = ", ".join(sorted(sc.available_scenarios()))
        raise _UsageError(f"unknown scenario {args.scenario!r}; available: {known}") from None
    sig = _builder_params(fn)
    params = _gather_params(args)
    coerced = {}
    for key, value in params.items():
        if key not in sig:
            raise _UsageError(
                f"unknown parameter {key!r} for scenario {args.scenario!r}; "
                f"accepted: {', '.join(sig)}")
        default = sig[key].default
        coerced[key] = _coerce(value, default) if isinstance(value, str) else value
    if args.slices is not None:
        if "extra_slices" in coerced:
            raise _UsageError("--slices and --param extra_slices are mutually exclusive")
        probe = fn(**coerced)
        base = probe.meta["base_slices"]
        if args.slices < base:
            raise _UsageError(
                f"--slices {args.slices} is below the scenario's minimum {base}")
        coerced["extra_slices"] = args.slices - base
    try:
        scenario = fn(**coerced)
    except (TypeError, ValueError) as exc:
        raise _UsageError(f"cannot build scenario {args.scenario!r}: {exc}") from None
    return scenario, coerced


def _history_record(i: int, h) -> dict:
    return {
        "history_id": i,
        "slice_sequence": [d.compact() for d in h.slices],
        "feynman_re": h.feynman_amplitude.real,
        "feynman_im": h.feynman_amplitude.imag,
        "interference_product": h.interference_product,
        "probability": h.probability,
    }


def _history_row(i: int, h) -> list:
    return [i, "->".join(d.compact() for d in h.slices),
            h.feynman_amplitude.real, h.feynman_amplitude.imag,
            h.interference_product, h.probability]


_HISTORY_HEADER = ["history_id", "slice_sequence", "feynman_re", "feynman_im",
                   "interference_product", "probability"]


def _summary(scenario, mode: str, seed, limits: EngineLimits) -> dict:
    return {
        "format": "histlaw-result",
        "version": 1,
        "mode": mode,
        "seed": seed,
        "generator": histories.GENERATOR_IDENTITY,
        "scenario": {
            "name": scenario.meta.get("scenario", scenario.name),
            "params": dict(scenario.meta.get("params", {})),
            "slice_count": scenario.slice_count,
            "site_count": scenario.site_count,
            "kernel_order": scenario.kernel.order,
            "unitary_declared": scenario.kernel.unitary,
        },
        "tolerances": {
            "probability_atol": PROBABILITY_ATOL,
            "norm_drift_tol": NORM_DRIFT_TOL,
            "history_invariant_rtol": HISTORY_INVARIANT_RTOL,
            "prune_sq_threshold": PRUNE_SQ_THRESHOLD,
            "vanishing_denominator": VANISHING_DENOMINATOR,
        },
        "limits": {
            "max_states_per_slice": limits.max_states_per_slice,
            "max_histories": limits.max_histories,
        },
    }


def _run_enumerate(scenario, args, limits):
    hs = histories.enumerate_histories(scenario, limits=limits)
    rep = histories.marginal_consistency(scenario, limits=limits)
    doc = _summary(scenario, "enumerate", None, limits)
    doc["results"] = {"histories": [_history_record(i, h) for i, h in enumerate(hs)],
                      "history_count": len(hs)}
    doc["born_consistency"] = {
        "max_abs_error": rep.max_abs_error,
        "total_probability": rep.total_probability,
        "pass": bool(rep.ok),
    }
    rows = [_history_row(i, h) for i, h in enumerate(hs)]
    return doc, _HISTORY_HEADER, rows


def _run_sample(scenario, args, limits):
    hs = histories.sample_histories(scenario, seed=args.seed, count=args.count,
                                    limits=limits)
    doc = _summary(scenario, "sample", args.seed, limits)
    doc["results"] = {"histories": [_history_record(i, h) for i, h in enumerate(hs)],
                      "sample_count": len(hs)}
    rows = [_history_row(i, h) for i, h in enumerate(hs)]
    return doc, _HISTORY_HEADER, rows


def _run_marginals(scenario, args, limits):
    rep = histories.marginal_consistency(scenario, limits=limits)
    doc = _summary(scenario, "marginals", None, limits)
    finals = [{"state": state_compact(k),
               "born_probability": born,
               "history_probability_sum": hist_sum,
               "abs_error": abs(born - hist_sum)}
              for k, (born, hist_sum) in rep.per_state.items()]
    doc["results"] = {"finals": finals,
                      "max_abs_error": rep.max_abs_error,
                      "total_probability": rep.total_probability}
    rows = [[f["state"], f["born_probability"], f["history_probability_sum"],
             f["abs_error"]] for f in finals]
    return doc, ["state", "born_probability", "history_probability_sum", "abs_error"], rows


def _run_imap(scenario, args, limits):
    imap = interference.interference_map(scenario, limits=limits)
    doc = _summary(scenario, "imap", None, limits)
    factors = [{"slice": s, "state": state_compact(k), "interference_factor": v}
               for s in sorted(imap) for k, v in imap[s].items()]
    doc["results"] = {"factors": factors}
    rows = [[f["slice"], f["state"], f["interference_factor"]] for f in factors]
    return doc, ["slice_index", "state", "interference_factor"], rows


_MODES = {
    "enumerate": _run_enumerate,
    "sample": _run_sample,
    "marginals": _run_marginals,
    "imap": _run_imap,
}


def _cmd_list(args) -> int:
    for name, fn in sc.available_scenarios().items():
        params = ", ".join(
            f"{k}={p.default!r}" for k, p in _builder_params(fn).items())
        doc = (fn.__doc__ or "").strip().splitlines()
        summary = doc[0] if doc else ""
        print(f"{name}({params})")
        if summary:
            print(f"    {summary}")
    return 0


def _cmd_run(args) -> int:
    scenario, _ = _build(args)
    limits = EngineLimits.from_env()
    doc, header, rows = _MODES[args.mode](scenario, args, limits)
    text = _emit_json(doc) if args.format == "json" else _emit_csv(header, rows)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_self_check(args) -> int:
    results = selfcheck.run_selfcheck(quick=args.quick)
    for r in results:
        print(r.line())
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed"
          + (" (quick)" if args.quick else ""))
    return 4 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="histlaw",
        description="Enumerate, sample and interrogate per-slice interference histories.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_list = sub.add_parser("list", help="print scenario builders and their parameters")
    p_list.set_defaults(func=_cmd_list)

    p_run = sub.add_parser("run", help="run one scenario")
    p_run.add_argument("--scenario", required=True)
    p_run.add_argument("--param", action="append", metavar="KEY=VALUE",
                       help="override one builder parameter (repeatable)")
    p_run.add_argument("--config", metavar="PATH",
                       help="JSON file of builder parameters (overridden by --param)")
    p_run.add_argument("--mode", choices=sorted(_MODES), default="enumerate")
    p_run.add_argument("--slices", type=int, default=None,
                       help="total slice count (pads with identity steps)")
    p_run.add_argument("--seed", type=int, default=0, help="sampler seed (sample mode)")
    p_run.add_argument("--count", type=int, default=1000,
                       help="number of histories to draw (sample mode)")
    p_run.add_argument("--out", metavar="PATH", help="write results here instead of stdout")
    p_run.add_argument("--format", choices=("json", "csv"), default="json")
    p_run.set_defaults(func=_cmd_run)

    p_check = sub.add_parser("self-check", help="run the built-in acceptance battery")
    p_check.add_argument("--quick", action="store_true",
                         help="smaller populations, same tolerances")
    p_check.set_defaults(func=_cmd_self_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (_UsageError, ValueError, NonUnitaryScenarioError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except EnumerationOverflowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
