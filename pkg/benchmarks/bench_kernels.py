"""Compare the compiled and numpy path kernels on the same workload.

    python benchmarks/bench_kernels.py [--paths N] [--eps EPS] [--dim D]

Both kernels consume the same uniforms per jump, so the outputs are
checked for agreement before timings are reported.
"""
import argparse
import time

import numpy as np

from levyscale import _backend
from levyscale.scale import ScaleCalculus
from levyscale.sim import JumpProcessModel, simulate_paths


def timed(model, n, r, backend, repeats):
    best, batch = float("inf"), None
    for _ in range(repeats):
        t0 = time.perf_counter()
        batch = simulate_paths(model, np.zeros(model.d), np.zeros(model.d), r, n=n, seed=1, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best, batch


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--paths", type=int, default=2000)
    p.add_argument("--eps", type=float, default=1e-4)
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--radius", type=float, default=0.2)
    p.add_argument("--repeats", type=int, default=3)
    args = p.parse_args(argv)

    model = JumpProcessModel(args.dim, ScaleCalculus.from_id("power", 1.0), args.eps)
    print(f"family power beta=1, d={args.dim}, eps={args.eps}, r={args.radius}, paths={args.paths}")
    results = {}
    for name in sorted(_backend.KERNELS):
        secs, batch = timed(model, args.paths, args.radius, name, args.repeats)
        jumps = int(batch.jump_count.sum())
        results[name] = batch
        print(f"{name:>7}: {secs:8.3f} s  {jumps:>11d} jumps  {1e9 * secs / jumps:8.1f} ns/jump")
    if len(results) == 2:
        py, cy = results["python"], results["cython"]
        same = np.array_equal(py.jump_count, cy.jump_count) and np.allclose(py.exit_time, cy.exit_time, rtol=1e-12)
        print(f"outputs agree: {same}")
    else:
        print("compiled kernel not built; only the numpy kernel was timed")


if __name__ == "__main__":
    main()
