"""Compare the compiled and numpy kernel backends on Monte Carlo-sized inputs.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from steindrift import kernels
from steindrift.basis import BasisSpec, modes


def cases(gen):
    B, M = 256, 4096
    eta = gen.standard_normal((B, 200))
    w = np.pi * (np.arange(1, 201) - 0.5)
    yield "inverse_quadratic_prefix 256x200 (gain curve)", lambda be: kernels.inverse_quadratic_prefix(eta, w, np.zeros(200), 3, backend=be)
    eta4 = gen.standard_normal((B, 20))
    yield "inverse_quadratic_prefix 256x20", lambda be: kernels.inverse_quadratic_prefix(eta4, w[:20], np.zeros(20), 3, backend=be)
    basis = BasisSpec(1.0, 1.0, 8)
    t = np.linspace(0, 1, M + 1)
    E = modes(basis, 8, t)
    r = gen.standard_normal((B, M + 1))
    V = gen.standard_normal((B, 8))
    wq = np.full(M + 1, 1 / M)
    yield "l2_losses 256 paths x 4097 points, n=8", lambda be: kernels.l2_losses(r, V, E, wq, backend=be)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    gen = np.random.default_rng(0)
    backends = kernels.available_backends()
    print(f"backends: {', '.join(backends)} (default {kernels.BACKEND})")
    for name, fn in cases(gen):
        times = {}
        for be in backends:
            fn(be)
            number = 20
            times[be] = min(timeit.repeat(lambda: fn(be), number=number, repeat=args.repeat)) / number
        ref = fn("python")
        agree = all(np.allclose(fn(be), ref, rtol=1e-11) for be in backends)
        cols = "  ".join(f"{be} {t * 1e3:8.3f} ms" for be, t in times.items())
        speed = f"  speedup {times['python'] / times['cython']:.2f}x" if "cython" in times else ""
        print(f"{name:45s} {cols}{speed}  agree={agree}")


if __name__ == "__main__":
    main()
