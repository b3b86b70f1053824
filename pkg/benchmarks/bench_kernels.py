"""Time the numpy and numba kernel backends on the same inputs.

    python3 benchmarks/bench_kernels.py [--sizes 64 128 256] [--repeat 5]

Prints the best-of-``repeat`` wall time per call and the speedup.  The
numba timings exclude compilation (one warm-up call per kernel).
"""

import argparse
import timeit

import numpy as np

from finsler_pohozaev import Ellipsoidal, Profile, StarDomain
from finsler_pohozaev import _kernels as K
from finsler_pohozaev.solver import PolarMesh


def cases(n, rng):
    a, pr = Ellipsoidal([[2.0, 0.3], [0.3, 1.0]]), Profile.power(3)
    kargs = (*a.kernel_args(), *pr.kernel_args())
    xi1, xi2 = rng.standard_normal((2, n + 1, n))
    mesh = PolarMesh(StarDomain.disk(1.0, n, n))
    u = rng.standard_normal(len(mesh.points))
    grid = rng.standard_normal((n + 1, n))
    return {
        "radial_derivative": (0, (grid, 1.0 / n)),
        "pointwise_stress": (1, (xi1, xi2, *kargs, 1e-10)),
        "p1_energy_gradient": (2, (mesh.tri, mesh.bx, mesh.by, mesh.area, u, *kargs)),
    }


def best(fn, args, repeat):
    fn(*args)
    number = max(1, int(0.2 / max(timeit.timeit(lambda: fn(*args), number=1), 1e-6)))
    return min(timeit.repeat(lambda: fn(*args), number=number, repeat=repeat)) / number


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[64, 128, 256])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = sorted(K.KERNELS)
    rng = np.random.default_rng(0)
    print(f"backends: {', '.join(backends)} (active: {K.BACKEND})")
    print(f"{'kernel':<20} {'n':>5} " + " ".join(f"{b + ' [ms]':>12}" for b in backends) + f" {'speedup':>8}")
    for n in args.sizes:
        for name, (slot, kargs) in cases(n, rng).items():
            times = {b: best(K.KERNELS[b][slot], kargs, args.repeat) for b in backends}
            speed = times["numpy"] / times["numba"] if "numba" in times else float("nan")
            print(f"{name:<20} {n:>5} " + " ".join(f"{1e3 * times[b]:>12.3f}" for b in backends) + f" {speed:>8.1f}")


if __name__ == "__main__":
    main()
