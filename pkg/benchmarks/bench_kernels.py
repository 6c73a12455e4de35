"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Both backends are imported directly, so the MCSORT_PURE_PYTHON switch is not
needed. Results are checked for agreement before timing.
"""

import argparse
import timeit

import numpy as np

from mcsort import _kernels_py

try:
    from mcsort import _kernels
except ImportError:
    _kernels = None


def cases(rng):
    n, m = 6, 2000
    X = rng.random((m, n))
    gamma = np.full(n, 3, dtype=np.int64)
    alpha, beta = np.zeros(n), np.ones(n)
    ref_u = rng.random(500)
    ref_cls = rng.integers(1, 5, 500).astype(np.int64)
    ref_cls[:4] = [1, 2, 3, 4]
    queries = rng.random(2000)
    w = rng.random(500)
    return {
        "encode_rows (2000x6, gamma 3, product)": lambda k: k.encode_rows(X, alpha, beta, gamma, k.FORM_PRODUCT),
        "encode_rows (2000x6, gamma 3, minimum)": lambda k: k.encode_rows(X, alpha, beta, gamma, k.FORM_MINIMUM),
        "supporter_mass (500 refs, 2000 queries)": lambda k: k.supporter_mass(ref_u, ref_cls, w, 4, queries),
        "m3_scores (500 refs, 2000 queries)": lambda k: k.m3_scores(ref_u, ref_cls, 4, queries),
        "m4_scores (500 refs, 2000 queries, K 7)": lambda k: k.m4_scores(ref_u, ref_cls, 4, queries, 7),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if _kernels is None:
        print("compiled kernels not built; run `pip install -e . --no-build-isolation` first")
        return 1
    print(f"{'kernel':<42}{'numpy ms':>10}{'cython ms':>11}{'speedup':>9}")
    for name, fn in cases(np.random.default_rng(args.seed)).items():
        a, b = np.asarray(fn(_kernels_py)), np.asarray(fn(_kernels))
        if not np.allclose(a, b, rtol=0, atol=1e-12):
            raise SystemExit(f"{name}: backends disagree (max diff {np.abs(a - b).max():.3e})")
        t_py = min(timeit.repeat(lambda: fn(_kernels_py), number=1, repeat=args.repeat)) * 1e3
        t_cy = min(timeit.repeat(lambda: fn(_kernels), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<42}{t_py:>10.2f}{t_cy:>11.2f}{t_py / t_cy:>8.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
