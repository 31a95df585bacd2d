"""Time the numba and numpy kernel backends on a typical local-training workload.

    python benchmarks/bench_kernels.py [--repeat 20]

Each case runs one client's local training (shuffled minibatch SGD) and a
forward pass over the evaluation set. The first numba call is excluded so
compilation time does not count.
"""

import argparse
import time

import numpy as np

from costfl import kernels

CASES = [
    # (label, samples, features, classes, hidden, batch, epochs)
    ("softmax, small shard", 22, 10, 10, 0, 10, 1),
    ("softmax, large shard", 500, 20, 10, 0, 20, 2),
    ("mlp-32, large shard", 500, 20, 10, 32, 20, 2),
    ("eval, 5000 rows", 5000, 20, 10, 0, 0, 0),
]


def _time(fn, repeat):
    fn()  # warm-up (numba compiles here)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'case':<24}{'numba (ms)':>12}{'numpy (ms)':>12}{'speedup':>10}")
    for label, n, d, L, h, batch, epochs in CASES:
        size = d * L + L if h == 0 else d * h + h + h * L + L
        w = rng.normal(scale=0.1, size=size)
        X = rng.normal(size=(n, d))
        y = rng.integers(0, L, size=n)
        order = np.stack([rng.permutation(n) for _ in range(max(epochs, 1))])
        times = []
        for name in ("numba", "numpy"):
            kern = kernels.get_backend(name)
            if batch:
                fn = lambda k=kern: k.sgd_epochs(w, X, y, order, 0.05, batch, L, h)  # noqa: E731
            else:
                fn = lambda k=kern: k.forward(w, X, y, L, h)  # noqa: E731
            times.append(_time(fn, args.repeat))
        print(f"{label:<24}{times[0] * 1e3:>12.3f}{times[1] * 1e3:>12.3f}{times[1] / times[0]:>9.1f}x")


if __name__ == "__main__":
    main()
