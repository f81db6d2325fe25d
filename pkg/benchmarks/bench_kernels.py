"""Compare the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]

Prints the median wall time per call for each kernel and backend, plus the
speedup. Shapes match a training mini-batch (B=32, L=96, C=7, hidden=256).
"""

import argparse
import statistics
import time

import numpy as np

from dropoutts import kernels


def _time(fn, repeat):
    fn()
    samples = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - t0)
    return statistics.median(samples)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=50)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    B, L, C, d = 32, 96, 7, 256
    X = rng.normal(size=(B, L, C))
    A = np.abs(np.fft.rfft(X, axis=1))
    keys = rng.integers(0, 2 ** 63, B, dtype=np.uint64)
    rates = rng.uniform(0.05, 0.5, B)
    n_w = d * L * C
    W, G, M, V = rng.normal(size=n_w), rng.normal(size=n_w), np.zeros(n_w), np.zeros(n_w)

    cases = {
        "keep_mask": lambda be: be.keep_mask(keys, d, rates),
        "ols_detrend": lambda be: be.ols_detrend(X),
        "spectral_gate": lambda be: be.spectral_gate(A, 10.0, 1.0, 0.0, 1e-8),
        "adam_update": lambda be: be.adam_update(W, G, M, V, 1e-3, 0.9, 0.999, 1e-8, 0.1, 0.001),
    }
    backends = {"python": kernels.python_backend}
    if kernels.compiled_backend is not None:
        backends["cython"] = kernels.compiled_backend
    else:
        print("compiled extension not available; timing the numpy fallback only")

    print(f"{'kernel':<15}" + "".join(f"{name + ' (us)':>16}" for name in backends) + f"{'speedup':>10}")
    for name, fn in cases.items():
        times = {be: _time(lambda: fn(mod), args.repeat) for be, mod in backends.items()}
        row = f"{name:<15}" + "".join(f"{times[be] * 1e6:>16.1f}" for be in backends)
        if "cython" in times:
            row += f"{times['python'] / times['cython']:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
