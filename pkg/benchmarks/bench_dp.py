"""Time the compiled DP kernel against the pure-Python one.

    python3 benchmarks/bench_dp.py [--chunks 60] [--profile 2] [--delta 0.25] [--repeat 3]

Both kernels must agree on r* and the chosen levels; the script exits
non-zero if they do not.
"""

import argparse
import sys
import time

from bolalab import traces
from bolalab.oracle import _compiled, offline_optimal


def best_of(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--chunks", type=int, default=60)
    ap.add_argument("--profile", type=int, default=2)
    ap.add_argument("--delta", type=float, default=0.25)
    ap.add_argument("--b-max", type=float, default=25.0)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    man = traces.reference_manifest(chunk_count=args.chunks, seed=42)
    trace = traces.gen_profile(args.profile)

    def run(backend):
        return offline_optimal(man, trace, 5.0, delta=args.delta, b_max=args.b_max, backend=backend)

    t_py, r_py = best_of(lambda: run("python"), args.repeat)
    print(f"python    {t_py:8.3f} s  r*={r_py.value:.6f}")
    if _compiled is None:
        print("compiled  (extension not built)")
        return 0
    t_c, r_c = best_of(lambda: run("compiled"), args.repeat)
    print(f"compiled  {t_c:8.3f} s  r*={r_c.value:.6f}")
    print(f"speed-up  {t_py / t_c:8.1f}x")
    if r_py.value != r_c.value or r_py.levels != r_c.levels:
        print("MISMATCH between kernels", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
