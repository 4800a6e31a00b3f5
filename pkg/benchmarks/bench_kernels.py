"""Time the product-identity kernel under the numba and numpy backends.

    python3 benchmarks/bench_kernels.py [--paths 10000] [--level 10] [--repeat 3]

Simulation is done once; only the kernel is timed.  The first numba call
includes JIT compilation (or cache load) and is reported separately.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from wrplab._kernels import product_residual
from wrplab.levy_mc import FactorSpec, McScenario, StepSpec, _kernel_inputs, simulate


def scenario(paths: int, level: int) -> McScenario:
    x = FactorSpec(sigma=1.0, rate=3.0, marks=(1.0, -0.5), probs=(0.5, 0.5),
                   steps=(StepSpec(0.5, (1.0, -1.0), (0.5, 0.5)),))
    y = FactorSpec(sigma=0.5, rate=2.0, marks=(2.0,), probs=(1.0,),
                   steps=(StepSpec(0.5, (1.0, 0.0), (0.5, 0.5)),))
    return McScenario(x, y, dt=2.0 ** -level, paths=paths, seed=7)


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--paths", type=int, default=10_000)
    ap.add_argument("--level", type=int, default=10)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    bundle = simulate(scenario(args.paths, args.level))
    inputs = _kernel_inputs(bundle, lambda x: x, lambda y: y * y, 1.0, 1.0)
    print(f"paths={bundle.n} cells={bundle.n_cells} events={inputs['ev_path'].size}")

    t0 = time.perf_counter()
    ref = product_residual(**inputs, backend="numba")
    print(f"numba first call (compile or cache load): {time.perf_counter() - t0:.3f}s")

    results = {}
    for backend in ("numba", "numpy"):
        best = np.inf
        for _ in range(args.repeat):
            t0 = time.perf_counter()
            out = product_residual(**inputs, backend=backend)
            best = min(best, time.perf_counter() - t0)
        results[backend] = best
        diff = max(float(np.max(np.abs(a - b))) for a, b in zip(out, ref))
        print(f"{backend:6s} best of {args.repeat}: {best:.4f}s  max |diff vs numba| = {diff:.2e}")
    print(f"speedup numba/numpy: {results['numpy'] / results['numba']:.1f}x")


if __name__ == "__main__":
    main()
