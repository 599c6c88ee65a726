"""Time the RK4 kernels of every available backend.

    python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import timeit

import numpy as np

from pmlep.kernels import available_backends
from pmlep.model import SystemParams, build_liouvillian
from pmlep.sideband import SidebandParams, liouvillian_parts


def cases():
    psi = np.array([1.0, 1.0j, 0.0]) / np.sqrt(2.0)
    y0 = np.outer(psi, psi.conj()).reshape(9)
    L = build_liouvillian(SystemParams(0.3, 1.0)).m
    sp = SidebandParams.at_coupling(0.2, 1.0)
    L0, K1, K2, amps, freqs = liouvillian_parts(sp)
    n_const = 20_000
    # 10 / kappa at the step limit the sideband runs use
    n_mod = int(round(10.0 / sp.max_step))
    return {
        f"rk4_constant ({n_const} steps)": lambda m: m.rk4_constant(L, y0, 0.0005, n_const, 40),
        f"rk4_modulated ({n_mod} steps)": lambda m: m.rk4_modulated(L0, K1, K2, amps, freqs, y0, 0.0,
                                                                     sp.max_step, n_mod, 20),
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)
    backends = available_backends()
    print(f"{'kernel':34s} " + " ".join(f"{name:>10s}" for name in backends) + "    speedup")
    for label, fn in cases().items():
        times = {}
        for name, module in backends.items():
            times[name] = min(timeit.repeat(lambda: fn(module), number=1, repeat=args.repeat))
        speedup = times["python"] / times["cython"] if "cython" in times else float("nan")
        cells = " ".join(f"{times[name]:9.4f}s" for name in backends)
        print(f"{label:34s} {cells} {speedup:9.1f}x")


if __name__ == "__main__":
    main()
