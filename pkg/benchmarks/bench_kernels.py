"""Compare the numba and numpy kernel backends.

Usage::

    python3 benchmarks/bench_kernels.py [--points 20000] [--nodes 64] [--repeat 5]

Times each kernel on synthetic data with both backends, then times a full
Picard run in two subprocesses (one per value of AMALGAM_DISABLE_NUMBA), so
the end-to-end figure includes whichever backend the engine selects.
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from amalgam import _kernels

PICARD_SNIPPET = """
import time
from amalgam import *
from amalgam.inflation import perturbation_grid
g = perturbation_grid(128, 7)
prob = NlwProblem(3, 3, 1, g)
phi = build_perturbation(PerturbationSpec(128, 4.0), g)
picard_iterates(phi, prob, 7, 0.2)          # warm-up (compilation)
t = time.perf_counter()
picard_iterates(phi, prob, 7, 0.2)
print(time.perf_counter() - t)
"""


def _best(fn, repeat):
    fn()  # warm-up, includes numba compilation
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def kernel_table(points, nodes, repeat):
    rng = np.random.default_rng(0)
    H = rng.standard_normal((nodes, points)) + 1j * rng.standard_normal((nodes, points))
    tau = np.linspace(0, 1, nodes)
    w = np.full(nodes, 1.0 / nodes)
    a = np.abs(rng.standard_normal(points)) * 50
    comps = np.array([[0, 1, 2], [1, 2, 0], [2, 0, 1]], dtype=np.int64)
    phys = H[:3].copy()
    cases = {
        "modulate": lambda impl: impl.modulate(H, tau, a),
        "demodulate": lambda impl: impl.demodulate(H, H, tau, a, 1.0),
        "duhamel_accumulate": lambda impl: impl.duhamel_accumulate(
            np.zeros(points, complex), H, tau, w, 1.0, a),
        "nonlinear_sum": lambda impl: impl.nonlinear_sum(phys, comps, 2),
    }
    rows = []
    for name, call in cases.items():
        t_np = _best(lambda: call(_kernels.numpy_impl), repeat)
        t_nb = _best(lambda: call(_kernels.numba_impl), repeat) if _kernels.numba_impl else float("nan")
        rows.append((name, t_np, t_nb))
    return rows


def picard_time(disable):
    env = dict(os.environ, AMALGAM_DISABLE_NUMBA="1" if disable else "0")
    out = subprocess.run([sys.executable, "-c", PICARD_SNIPPET], env=env,
                         capture_output=True, text=True, check=True)
    return float(out.stdout.strip())


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=20000)
    ap.add_argument("--nodes", type=int, default=64)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    print(f"kernels on {args.nodes} x {args.points} complex samples (best of {args.repeat})")
    print(f"{'kernel':<20}{'numpy [ms]':>12}{'numba [ms]':>12}{'speed-up':>10}")
    for name, t_np, t_nb in kernel_table(args.points, args.nodes, args.repeat):
        print(f"{name:<20}{1e3 * t_np:>12.2f}{1e3 * t_nb:>12.2f}{t_np / t_nb:>10.2f}")
    t_np, t_nb = picard_time(True), picard_time(False)
    print(f"\npicard_iterates N=128 kmax=7: numpy {t_np:.2f} s, numba {t_nb:.2f} s, "
          f"speed-up {t_np / t_nb:.2f}")


if __name__ == "__main__":
    main()
