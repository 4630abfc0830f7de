"""Head-to-head timing of the two tape-kernel routes.

The jet kernels (value + gradient + Hessian in one sweep) exist twice:
numba-jitted scalar loops and a vectorized numpy fallback, selected at
import time by FIBRESPLIT_DISABLE_NUMBA.  This script times both on the
same tapes and checks they agree while doing so.

Run from the repository root:

    python3 benchmarks/bench_kernels.py [--repeat 2000]
"""

import argparse
import time

import numpy as np

from fibresplit import _kernels
from fibresplit.exprs import VarContext, compile_field, parse

CASES = [
    ("affine", "2*a + 3*b - c + 0.5"),
    ("lagrangian", "0.5*a^2 + 0.5*b^2 + b^3/6 + b*a^2"),
    ("trig mix", "sin(a)*exp(b) + sqrt(a^2 + b^2 + 1)*cos(c)"),
    ("deep", "(a + b*c)^3 / (2 + abs(a^2 + 0.5)) + log(2 + c^2)"
             " - tan(b/4)*exp(0.3*a)"),
]


def timed(fn, args, repeat):
    fn(*args)  # warm-up: numba compiles here, caches thereafter
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn(*args)
    return (time.perf_counter() - t0) / repeat * 1e6


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=2000,
                    help="calls per measurement (default 2000)")
    args = ap.parse_args()

    ctx = VarContext([("base", ["a", "b", "c"])])
    rng = np.random.default_rng(0)
    print(f"numba route compiled in: {_kernels.NUMBA_ENABLED}")
    header = f"{'case':<12} {'ops':>4} {'fast us':>9} {'numpy us':>9} " \
             f"{'speedup':>8}"
    print(header)
    print("-" * len(header))
    for name, src in CASES:
        f = compile_field(parse(src), ctx, label=name)
        x = rng.uniform(0.2, 0.9, 3)
        call = (f.code, f.consts, f.nreg, f.arity, x, f.slit_eps)

        s1, v1, g1, h1 = _kernels._tape_jet_fast(*call)
        s2, v2, g2, h2 = _kernels._tape_jet_numpy(*call)
        assert s1 == s2 == -1
        assert np.allclose(v1, v2, atol=1e-13)
        assert np.allclose(g1, g2, atol=1e-13)
        assert np.allclose(h1, h2, atol=1e-13)

        t_fast = timed(_kernels._tape_jet_fast, call, args.repeat)
        t_np = timed(_kernels._tape_jet_numpy, call, args.repeat)
        print(f"{name:<12} {len(f.code):>4} {t_fast:>9.2f} {t_np:>9.2f} "
              f"{t_np / t_fast:>7.1f}x")


if __name__ == "__main__":
    main()
