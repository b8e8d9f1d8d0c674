"""Compiled vs pure-Python LDL^T inertia kernels on unit-square Neumann forms.

    python benchmarks/bench_inertia.py [--sizes 16 32 64] [--repeat 3] [--json]

Times the symbolic analysis and one numeric factorisation per backend and
checks that both report the same count.
"""
import argparse
import json
import sys
import time

from holderweyl.geometry import Rectangle, rasterize
from holderweyl.operators import assemble_neumann
from holderweyl.spectral import KERNELS, analyze, count_below_inertia


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def bench(n, repeat, lam=400.0):
    A = assemble_neumann(rasterize(Rectangle(1.0, 1.0), 1.0 / n)).matrix
    row = {"n": n, "unknowns": A.shape[0]}
    counts = {}
    for name, kernel in sorted(KERNELS.items()):
        t_sym, analysis = best_of(lambda: analyze(A, kernel=kernel), repeat)
        t_num, rec = best_of(lambda: count_below_inertia(A, lam, analysis=analysis, kernel=kernel), repeat)
        row[f"{name}_symbolic_s"] = t_sym
        row[f"{name}_numeric_s"] = t_num
        row["nnz_L"] = analysis.nnz_l
        counts[name] = rec.count
    if len(set(counts.values())) != 1:
        raise SystemExit(f"backends disagree at n={n}: {counts}")
    row["count"] = counts["python"]
    if "cython" in KERNELS:
        row["speedup_numeric"] = row["python_numeric_s"] / row["cython_numeric_s"]
    return row


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[16, 32, 64])
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--json", action="store_true", help="print rows as JSON")
    args = parser.parse_args(argv)
    if "cython" not in KERNELS:
        print("compiled kernel not built; timing the Python fallback only", file=sys.stderr)
    rows = [bench(n, args.repeat) for n in args.sizes]
    if args.json:
        print(json.dumps(rows, indent=2))
        return
    header = f"{'grid':>6} {'unknowns':>9} {'nnz(L)':>9} {'python':>10} {'cython':>10} {'speedup':>8}"
    print(header)
    for r in rows:
        cy = r.get("cython_numeric_s")
        print(
            f"{r['n']:>6} {r['unknowns']:>9} {r['nnz_L']:>9} {r['python_numeric_s']:>9.4f}s "
            + (f"{cy:>9.4f}s {r['speedup_numeric']:>7.1f}x" if cy else f"{'-':>10} {'-':>8}")
        )


if __name__ == "__main__":
    main()
