"""Compare the numba and numpy backends of the kernel sums.

    python3 benchmarks/bench_accel.py [--n 2048] [--repeat 3]

Times a KDE evaluation on 1024 points and the R(f'') quadrature on the
default 8192-interval grid for each kernel, after one warm-up call that
absorbs JIT compilation. Prints best-of timings, the speedup and the
largest relative disagreement between the two backends.
"""

import argparse
import time

import numpy as np

from seakde import _accel
from seakde.bandwidth import QuadratureConfig, bracket_integral
from seakde.kernels import KernelSpec

KERNELS = (KernelSpec.gaussian(0.32, 1.38), KernelSpec.gamma(3.0, 1.0),
           KernelSpec.weibull(0.27, 2.0))


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=2048, help="number of samples")
    ap.add_argument("--h", type=float, default=0.05, help="bandwidth")
    ap.add_argument("--repeat", type=int, default=3, help="timed repetitions")
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args(argv)

    if not _accel.USE_NUMBA:
        print("numba backend unavailable (not installed or SEAKDE_DISABLE_NUMBA set)")
        return 1
    x = np.random.default_rng(args.seed).rayleigh(0.3, args.n)
    xq = np.linspace(0.0, 1.5 * x.max(), 1024)
    q = QuadratureConfig()
    print(f"{'task':<28}{'numpy s':>10}{'numba s':>10}{'speedup':>9}{'max rel diff':>14}")
    for k in KERNELS:
        tasks = {
            "pdf": lambda be: _accel.kernel_sum(xq, x, args.h, k.code, k.a, k.b, 0, backend=be),
            "R(f'') quadrature": lambda be: np.array([bracket_integral(k, x, args.h, q, backend=be)]),
        }
        for name, fn in tasks.items():
            t_np, v_np = best_of(lambda: fn("numpy"), args.repeat)
            t_nb, v_nb = best_of(lambda: fn("numba"), args.repeat)
            scale = np.max(np.abs(v_np)) or 1.0
            diff = float(np.max(np.abs(v_np - v_nb)) / scale)
            label = f"{k.family.value} {name}"
            print(f"{label:<28}{t_np:>10.4f}{t_nb:>10.4f}{t_np / t_nb:>9.1f}{diff:>14.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
