"""Time the compiled and pure-numpy kernels on the same blocks.

    python3 benchmarks/bench_kernels.py [--n 2000] [--block 256] [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from trimlstat import _backend
from trimlstat import distributions as D
from trimlstat import weights as W
from trimlstat.lstat import TrimSpec
from trimlstat.streams import replicate_block, study_key


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=2000)
    parser.add_argument("--block", type=int, default=256)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)

    trim = TrimSpec.from_limits(args.n, 0.25, 0.25)
    raw = replicate_block(study_key(1, "bench", args.n), args.n, 0, args.block)
    cases = {
        "uniform, J=1": (D.uniform(), np.ones((1, trim.size)), False),
        "normal, J=u": (D.normal(), W.reference_coefficients(W.polynomial([0, 1]), trim)[None, :], True),
        "cauchy, J=u^2": (D.cauchy(), W.reference_coefficients(W.polynomial([0, 0, 1]), trim)[None, :], True),
    }
    names = _backend.available()
    print(f"n={args.n}, block={args.block}, best of {args.repeat}; seconds per block")
    print(f"{'case':<16}" + "".join(f"{name:>12}" for name in names) + "     speedup")
    for label, (dist, coeffs, sort_middle) in cases.items():
        params = np.asarray(dist.params, dtype=float)
        times = {}
        for name in names:
            k = _backend.get(name)
            call = lambda: k.block_statistics(raw, dist.code, params, dist.loc, dist.scale, coeffs,
                                              trim.k, trim.m, sort_middle)
            call()
            times[name] = min(timeit.repeat(call, number=1, repeat=args.repeat))
        speed = times["python"] / times["compiled"] if "compiled" in times else float("nan")
        print(f"{label:<16}" + "".join(f"{times[n]:>12.4f}" for n in names) + f"{speed:>11.1f}x")


if __name__ == "__main__":
    main()
