"""Benchmark the numba kernels against the pure-numpy fallback.

Times the conjugate-gradient solve on assembled continuity systems with a
two-level coefficient (the workload that dominates inversion runs) and the
signed-distance reinitialization. Run from the repository root:

    python3 benchmarks/bench_kernels.py [--sizes 32 64 128]

The selected default backend depends on DOPINV_PURE_NUMPY; this script
imports both implementations explicitly, so one invocation covers both.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from dopinv import kernels
from dopinv.elliptic import EllipticProblem, assemble
from dopinv.forward import contact_voltage
from dopinv.grid import GAMMA1, ScalarField, constant_trace, Trace, GAMMA0, make_grid


def _system(n: int):
    grid = make_grid(n)
    _, y = grid.cell_mesh()
    gamma = ScalarField(grid, np.where(y > 0.5, 5.192582403567252, 0.19258240356725232))
    profile = contact_voltage(grid, 0.5, 0.25, 1.0)
    problem = EllipticProblem(
        grid, gamma, Trace(grid, GAMMA0, -profile.trace.values), constant_trace(grid, GAMMA1, 0.0)
    )
    s = assemble(problem)
    return s.diag, s.face_x, s.face_y, s.rhs


def _time(fn, *args, repeat: int = 5):
    fn(*args)  # warm-up (and JIT compile for the numba path)
    best = float("inf")
    result = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, result


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", type=int, nargs="+", default=[32, 64, 128])
    parser.add_argument("--rtol", type=float, default=1e-10)
    args = parser.parse_args()

    have_numba = kernels.NUMBA_ENABLED
    print(f"numba available in this process: {have_numba}")
    print(f"{'n':>5} {'kernel':<22} {'numpy (s)':>12} {'numba (s)':>12} {'speedup':>9}")

    for n in args.sizes:
        diag, fx, fy, b = _system(n)
        max_iter = 200 * n + 5000

        t_np, (x_np, res_np, it_np) = _time(kernels.cg_stencil_numpy, diag, fx, fy, b, args.rtol, max_iter)
        if have_numba:
            t_nb, (x_nb, res_nb, it_nb) = _time(kernels.cg_stencil_numba, diag, fx, fy, b, args.rtol, max_iter)
            dev = float(np.max(np.abs(x_np - x_nb)))
            print(f"{n:>5} {'cg_stencil':<22} {t_np:>12.5f} {t_nb:>12.5f} {t_np / t_nb:>8.1f}x"
                  f"   (iters {it_np}/{it_nb}, max|dx|={dev:.2e})")
        else:
            print(f"{n:>5} {'cg_stencil':<22} {t_np:>12.5f} {'-':>12} {'-':>9}   (iters {it_np})")

        xs = (np.arange(n) + 0.5) / n
        xx, yy = np.meshgrid(xs, xs)
        phi = np.ascontiguousarray(0.3 - np.hypot(xx - 0.5, yy - 0.6))
        t_np, d_np = _time(kernels.reinit_numpy, phi, 1.0 / n)
        if have_numba:
            t_nb, d_nb = _time(kernels.reinit_numba, phi, 1.0 / n)
            dev = float(np.max(np.abs(d_np - d_nb)))
            print(f"{n:>5} {'signed_distance_reinit':<22} {t_np:>12.5f} {t_nb:>12.5f} {t_np / t_nb:>8.1f}x"
                  f"   (max|dd|={dev:.2e})")
        else:
            print(f"{n:>5} {'signed_distance_reinit':<22} {t_np:>12.5f} {'-':>12} {'-':>9}")


if __name__ == "__main__":
    main()
