"""Compare the numba and numpy kernel backends.

Times the coloured-noise recursion and the ensemble accumulation kernel on a
batch of trajectories, checks that both backends agree, and prints one line
per kernel.  Run with ``python3 benchmarks/bench_kernels.py``.
"""

from __future__ import annotations

import argparse
import math
import time

import numpy as np

from qsdphase import _kernels
from qsdphase.core import BathSpectrum, CouplingKind, SystemModel, TimeGrid
from qsdphase.ensemble import _initial_states
from qsdphase.noise import derive_seed, sample_noise_batch
from qsdphase.qsd import OOperatorSpec


def _best(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n-traj", type=int, default=64)
    p.add_argument("--n-theta", type=int, default=9)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)

    backends = _kernels.available_backends()
    model = SystemModel(1.0, 1.0, CouplingKind.DISSIPATIVE, 1.0)
    bath = BathSpectrum(1.0, 1.0, 0.0)
    grid = TimeGrid.from_dt(2.0 * math.pi, args.dt)
    ospec = OOperatorSpec.build(model, bath, grid)
    thetas = [math.pi * k / max(args.n_theta - 1, 1) for k in range(args.n_theta)]
    psi0 = _initial_states(thetas)
    seeds = [derive_seed(0, i) for i in range(args.n_traj)]
    w = np.random.default_rng(0).standard_normal((args.n_traj, len(grid))) + 0j
    print(f"backends: {', '.join(backends)}; n_traj={args.n_traj}, n_theta={args.n_theta}, "
          f"n_steps={grid.n_steps}")

    results = {}
    for b in backends:
        # warm-up compiles the numba kernels
        u = sample_noise_batch(bath, grid, seeds[:1], backend=b)
        _kernels.accumulate(model.operators(), u, ospec.half_values, grid.dt, psi0, backend=b)
        t_ou, z = _best(lambda: _kernels.ou_recursion(w, 0.99, 0.1, 1.0, backend=b), args.repeat)
        u = sample_noise_batch(bath, grid, seeds, backend=b)
        t_acc, acc = _best(lambda: _kernels.accumulate(model.operators(), u, ospec.half_values, grid.dt, psi0,
                                                       backend=b), args.repeat)
        results[b] = (z, acc)
        print(f"{b:>6}  ou_recursion {t_ou * 1e3:9.2f} ms   accumulate {t_acc * 1e3:9.2f} ms "
              f"({t_acc / args.n_traj * 1e3:.2f} ms/trajectory)")

    if len(results) == 2:
        (z1, a1), (z2, a2) = results.values()
        dz = float(np.abs(z1 - z2).max())
        da = max(float(np.abs(x - y).max() / max(np.abs(x).max(), 1.0))
                 for x, y in zip(a1[:5], a2[:5]) if np.size(x))
        print(f"max backend difference: ou_recursion {dz:.2e}, accumulate (relative) {da:.2e}")


if __name__ == "__main__":
    main()
