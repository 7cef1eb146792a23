"""Time the numba kernels against their numpy twins.

    python3 benchmarks/bench_kernels.py [--repeat 3]

Each kernel is called once per backend before timing so the JIT compile
(or cache load) is excluded.  Results are checked for agreement.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from exchangelab.kernels import PentaBands, crank_nicolson_pentadiagonal, two_level_rk4
from exchangelab.rotor import AngularBasis, RotorModel, Sector, default_trap


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - start)
    return min(times), out


def rk4_case(backend):
    # eleven sites, two tones, the step count used by the Zeeman module
    det = 2 * np.pi * 60e3 * np.arange(-5, 6) * 0.4
    rabi = np.full(2, 2 * np.pi * 60e3)
    freqs = np.array([-2.0, 2.0]) * rabi[0]
    return lambda: two_level_rk4(det, rabi, freqs, np.zeros(2), np.pi / rabi[0], 4000, backend)


def cn_case(backend, steps):
    model = RotorModel(default_trap(), AngularBasis(Sector.FERMION_ODD, 512))
    bands: PentaBands = model.bands
    psi0 = np.zeros(bands.size, complex)
    psi0[0] = 1.0
    a = np.linspace(-4e-4, 4e-4, steps)
    return lambda: crank_nicolson_pentadiagonal(bands, a, np.zeros(steps), 1.25e-9, psi0, 100, backend)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--cn-steps", type=int, default=20000)
    args = ap.parse_args()

    cases = {
        "two_level_rk4": rk4_case,
        "crank_nicolson_pentadiagonal": lambda b: cn_case(b, args.cn_steps),
    }
    print(f"{'kernel':<30}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}{'max diff':>12}")
    for name, make in cases.items():
        results = {}
        for backend in ("numba", "numpy"):
            fn = make(backend)
            fn()
            results[backend] = best_of(fn, args.repeat)
        (tn, on), (tp, op) = results["numba"], results["numpy"]
        on, op = (on[0], op[0]) if isinstance(on, tuple) else (on, op)
        diff = float(np.max(np.abs(on - op)))
        print(f"{name:<30}{tn:>12.4f}{tp:>12.4f}{tp / tn:>10.1f}{diff:>12.1e}")


if __name__ == "__main__":
    main()
