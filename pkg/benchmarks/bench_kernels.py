"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat N]

Prints one row per kernel with the best-of-N time of each backend and the
speed-up. Inputs are seeded so runs are comparable.
"""
import argparse
import timeit

import numpy as np

from lipread import hmm, kernels


def _cases(rng):
    h = hmm.random_hmm(3, 12, seed=1)
    pi, A, B = h.initial, h.transition, h.emission
    long_obs = rng.integers(0, 12, 20_000).astype(np.int64)

    lengths = rng.integers(15, 26, 400)
    offsets = np.zeros(len(lengths) + 1, dtype=np.int64)
    offsets[1:] = np.cumsum(lengths)
    packed = rng.integers(0, 12, int(offsets[-1])).astype(np.int64)

    mag = rng.random((240, 320)) * 100
    direction = rng.integers(0, 4, mag.shape).astype(np.int8)

    pts = rng.normal(size=(60 * 90, 2))
    cents = rng.normal(size=(3, 2))
    return {
        "forward (T=20000, Q=3)": lambda m: m.forward_loglik(pi, A, B, long_obs),
        "estep (400 seqs, Q=3)": lambda m: m.estep(pi, A, B, packed, offsets),
        "nonmax_suppress 240x320": lambda m: m.nonmax_suppress(mag, direction),
        "hysteresis 240x320": lambda m: m.hysteresis(mag, 30.0, 75.0),
        "kmeans_assign 5400x3": lambda m: m.kmeans_assign(pts, cents),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    backends = kernels.available_backends()
    names = sorted(backends, reverse=True)  # python first
    print(f"active backend: {kernels.BACKEND}")
    print(f"{'kernel':<26}" + "".join(f"{n:>12}" for n in names) + ("     speed-up" if len(names) > 1 else ""))
    for label, fn in _cases(np.random.default_rng(0)).items():
        times = []
        for n in names:
            mod = backends[n]
            fn(mod)  # warm up
            times.append(min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat)))
        row = f"{label:<26}" + "".join(f"{t * 1e3:>10.2f}ms" for t in times)
        if len(times) > 1:
            row += f"{times[0] / times[1]:>12.1f}x"
        print(row)


if __name__ == "__main__":
    main()
