"""Time the compiled path kernels against the pure numpy fallback.

Both backends consume identical CSR arrays and emit identical integer
paths/edges (asserted here on every case), so the comparison is purely about
speed.  Usage::

    python benchmarks/bench_backends.py [--repeat N] [--samples N]
"""

import argparse
import time

import numpy as np

from histlaw import engine, histories
from histlaw import _kernels
from histlaw import scenarios as sc


def best_of(repeat, fn, *args):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def enumerate_case(scenario, repeat):
    graph = engine.compile_scenario(scenario)
    n = histories.count_paths(graph)
    indptrs = [s.indptr for s in graph.steps]
    dsts = [s.dst for s in graph.steps]
    rows = {}
    for name in _kernels.available_backends():
        kb = _kernels.get_backend(name)
        rows[name], out = best_of(repeat, kb.enumerate_paths,
                                  indptrs, dsts, len(graph.layers[0]), n)
        rows[name + "_result"] = out
    return n, rows


def sample_case(scenario, count, repeat):
    graph = engine.compile_scenario(scenario)
    tables = histories._backward_tables(graph)
    final_cum = np.cumsum(engine.final_born_vector(graph))
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(0)))
    uniforms = rng.random((count, len(graph.steps) + 1))
    rows = {}
    for name in _kernels.available_backends():
        kb = _kernels.get_backend(name)
        rows[name], out = best_of(repeat, kb.sample_paths,
                                  final_cum, *tables, uniforms)
        rows[name + "_result"] = out
    return rows


def check_equal(rows):
    names = [n for n in rows if not n.endswith("_result")]
    base = rows[names[0] + "_result"]
    for name in names[1:]:
        other = rows[name + "_result"]
        assert np.array_equal(base[0], other[0]) and np.array_equal(base[1], other[1]), \
            f"backend outputs differ: {names[0]} vs {name}"


def fmt_row(label, rows):
    names = sorted(n for n in rows if not n.endswith("_result"))
    cells = "  ".join(f"{n}: {rows[n] * 1e3:9.3f} ms" for n in names)
    speed = ""
    if "compiled" in names and "python" in names:
        speed = f"  (x{rows['python'] / rows['compiled']:.1f})"
    print(f"{label:<34} {cells}{speed}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5, help="best-of repetitions")
    ap.add_argument("--samples", type=int, default=200_000,
                    help="draw count for the sampling cases")
    args = ap.parse_args()

    print(f"backends: {', '.join(_kernels.available_backends())} "
          f"(default: {_kernels.backend_name()})\n")

    print("path enumeration")
    for sites, slices in ((3, 4), (3, 8), (4, 6), (4, 8)):
        s = sc.random_unitary(sites=sites, slices=slices, seed=0)
        n, rows = enumerate_case(s, args.repeat)
        check_equal(rows)
        fmt_row(f"  {sites} sites x {slices} slices ({n} paths)", rows)

    print("\nbackward ancestral sampling")
    for sites, slices in ((3, 4), (3, 6), (4, 6)):
        s = sc.random_unitary(sites=sites, slices=slices, seed=0)
        rows = sample_case(s, args.samples, args.repeat)
        check_equal(rows)
        fmt_row(f"  {sites} sites x {slices} slices ({args.samples} draws)", rows)


if __name__ == "__main__":
    main()
