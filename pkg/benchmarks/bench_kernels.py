"""Compiled vs numpy kernels on the sizes the solver actually uses.

    python benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import math
import time

import numpy as np

from hopfield_mf import _backend
from hopfield_mf._pycore import KIND_H, KIND_S


def best_of(fn, repeat):
    best = math.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases():
    P, L = 8192, 250
    noise = np.random.default_rng(0).normal(0.0, 0.1, (P, L))
    x0 = np.zeros(P)
    drive = np.full(L, 0.5)
    f = np.random.default_rng(1).random(2048)
    return [
        ("normals 8192x250", lambda k: k.fill_normals(7, 0, P, 0, L)),
        ("uniforms 8192x250", lambda k: k.fill_uniforms(7, 0, P, 0, L)),
        ("euler H 8192x250", lambda k: k.euler_paths(x0, drive, noise, KIND_H, 1.0, 2.0, 1.0, 0.04)),
        ("euler S 8192x250", lambda k: k.euler_paths(x0, drive, noise, KIND_S, 1.0, 2.0, 2.0, 0.04)),
        ("gaussian_matvec N=2048", lambda k: k.gaussian_matvec(7, 2048, 1 / 2048, 2048**-0.5, f)),
    ]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    names = _backend.available()
    print(f"{'kernel':26s}" + "".join(f"{n:>12s}" for n in names) + "     speedup")
    for label, fn in cases():
        times = [best_of(lambda: fn(_backend.get(n)), args.repeat) for n in names]
        row = f"{label:26s}" + "".join(f"{t * 1e3:10.1f}ms" for t in times)
        if len(times) == 2:
            row += f"  {times[0] / times[1]:9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
