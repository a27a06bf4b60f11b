"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]

Prints a table of best-of-N wall times and the speedup; both backends are
checked to agree on every input first.
"""

import argparse
import timeit

import numpy as np

from ofk import _pykernels

try:
    from ofk import _ckernels
except ImportError:
    _ckernels = None


def decode_inputs(rng, n_frames=15000):
    # ~8 minutes of 32 ms frames with piano-like density
    frame = rng.random((n_frames, 88)) < 0.08
    frame = frame | np.roll(frame, 1, axis=0) | np.roll(frame, 2, axis=0)
    onset = frame & (rng.random((n_frames, 88)) < 0.2)
    return frame.astype(np.uint8), onset.astype(np.uint8)


def matching_inputs(rng, n=3000, degree=4):
    # random sparse graph; each left vertex sees a few nearby right vertices
    rows = []
    for u in range(n):
        k = int(rng.integers(0, degree + 1))
        rows.append(np.unique(np.clip(u + rng.integers(-8, 9, k), 0, n - 1)))
    indptr = np.concatenate(([0], np.cumsum([len(r) for r in rows]))).astype(np.int64)
    indices = np.concatenate(rows).astype(np.int64)
    return n, n, indptr, indices


def best_time(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    if _ckernels is None:
        raise SystemExit("compiled kernels not built; reinstall without OFK_NO_EXT")

    rng = np.random.default_rng(0)
    frame, onset = decode_inputs(rng)
    graph = matching_inputs(rng)

    cases = {
        "decode_runs (gated)": lambda m: m.decode_runs(frame, onset, True),
        "decode_runs (frames only)": lambda m: m.decode_runs(frame, frame, False),
        "max_bipartite_matching": lambda m: m.max_bipartite_matching(*graph),
    }
    print(f"{'kernel':<28}{'python ms':>12}{'cython ms':>12}{'speedup':>10}")
    for name, call in cases.items():
        py_out, c_out = call(_pykernels), call(_ckernels)
        if name.startswith("max"):
            same = (py_out >= 0).sum() == (c_out >= 0).sum()
        else:
            same = np.array_equal(py_out, c_out)
        if not same:
            raise SystemExit(f"{name}: backends disagree")
        t_py = best_time(lambda: call(_pykernels), args.repeat)
        t_c = best_time(lambda: call(_ckernels), args.repeat)
        print(f"{name:<28}{t_py * 1e3:>12.2f}{t_c * 1e3:>12.2f}{t_py / t_c:>9.1f}x")


if __name__ == "__main__":
    main()
