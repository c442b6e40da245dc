"""Time the compiled kernel against the pure-Python fallback.

    python benchmarks/bench_core.py [--steps N]

Both backends advance the same state with the same increments; the script
reports ns/step per system and the largest state difference.
"""
import argparse
import time

import numpy as np

from dichotomy import backend
from dichotomy._core_py import _SYSTEM_BY_CODE
from dichotomy.sde import NoiseSource, initial_state
from dichotomy.vector_fields import get_system


def _time(adv, code, system, steps, dW):
    w = initial_state(system, seed=0)
    x = np.ascontiguousarray(w.x.array())
    U = np.ascontiguousarray(w.v.array()[None, :])
    logacc = np.zeros(1)
    divacc = np.zeros(1)
    t0 = time.perf_counter()
    adv(code, 1.0, 1e-3, x, U, dW, 16, logacc, divacc)
    return time.perf_counter() - t0, x, U


def main(argv=None):
    p = argparse.ArgumentParser()
    p.add_argument("--steps", type=int, default=20000)
    args = p.parse_args(argv)
    try:
        cy = backend.get("cython")
    except ImportError:
        print("compiled extension not built; only the fallback is available")
        cy = None
    py = backend.get("python")
    print(f"{'system':<24}{'cython ns/step':>16}{'python ns/step':>16}{'speedup':>10}{'max diff':>12}")
    for code, sid in sorted(_SYSTEM_BY_CODE.items()):
        system = get_system(sid)
        dW = np.ascontiguousarray(NoiseSource(system.r, 1e-3, 0).draw(args.steps))
        tp, xp, Up = _time(py, code, system, args.steps, dW)
        if cy is None:
            print(f"{sid:<24}{'-':>16}{1e9 * tp / args.steps:>16.0f}")
            continue
        _time(cy, code, system, 1000, dW[:1000])          # warm-up
        tc, xc, Uc = _time(cy, code, system, args.steps, dW)
        diff = max(np.max(np.abs(xp - xc)), np.max(np.abs(Up - Uc)))
        print(f"{sid:<24}{1e9 * tc / args.steps:>16.0f}{1e9 * tp / args.steps:>16.0f}"
              f"{tp / tc:>10.0f}{diff:>12.2e}")


if __name__ == "__main__":
    main()
