"""Time the compiled and pure-Python simulation kernels on the same inputs.

Run with ``python benchmarks/bench_kernels.py``. Each case is repeated and
the best wall time is reported, along with the largest relative
difference between the two backends.
"""

import argparse
import timeit

import numpy as np

from covertsec import _pykernels
from covertsec.coding import encoder_from_decoder

try:
    from covertsec import _ckernels
except ImportError:
    _ckernels = None


def _inputs(N, coded, seed=0):
    # Fighter-sized plant (5 states, 4 inputs, 3 outputs) scaled to be stable.
    rng = np.random.default_rng(seed)
    n, m, p = 5, 4, 3
    A = rng.standard_normal((n, n))
    A *= 0.9 / np.max(np.abs(np.linalg.eigvals(A)))
    B, C = rng.standard_normal((n, m)), rng.standard_normal((p, n))
    args = (A, B, C, np.zeros(n), rng.standard_normal((N, m)), rng.standard_normal((N, m)),
            rng.standard_normal((N, p)), 1e-3 * rng.standard_normal((N, n)), 1e-3 * rng.standard_normal((N, p)))
    coding = None
    if coded:
        # Stable decoder pair so long horizons stay finite.
        Dd = 2 * np.eye(m) + 0.1 * rng.standard_normal((m, m))
        s = encoder_from_decoder(0.5 * np.eye(m), np.eye(m), 0.1 * np.eye(m), Dd)
        coding = tuple(np.ascontiguousarray(M) for M in s.matrices())
    return args, coding


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--horizons", type=int, nargs="+", default=[100, 1000, 10000])
    ap.add_argument("--repeat", type=int, default=5)
    opts = ap.parse_args(argv)
    if _ckernels is None:
        print("compiled kernel not built; run `pip install -e . --no-build-isolation` first")
        return 1
    print(f"{'case':<14}{'N':>7}{'python [ms]':>14}{'cython [ms]':>14}{'speedup':>10}{'rel diff':>12}")
    for coded in (False, True):
        for N in opts.horizons:
            args, coding = _inputs(N, coded)
            times = {}
            outs = {}
            for label, mod in (("python", _pykernels), ("cython", _ckernels)):
                fn = lambda mod=mod: mod.simulate_loop(*args, coding=coding)
                times[label] = min(timeit.repeat(fn, number=1, repeat=opts.repeat)) * 1e3
                outs[label] = fn()
            diff = max(
                float(np.max(np.abs(a - b)) / (1.0 + np.max(np.abs(a))))
                for a, b in zip(outs["python"], outs["cython"])
                if a is not None
            )
            case = "coded" if coded else "plain"
            print(f"{case:<14}{N:>7}{times['python']:>14.3f}{times['cython']:>14.3f}"
                  f"{times['python'] / times['cython']:>9.1f}x{diff:>12.1e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
