"""Time the numba kernels against their numpy twins, then a full simulation per backend.

    python3 benchmarks/bench_kernels.py [--servers 50 200 1000] [--repeat 2000]

The end-to-end timing reruns this interpreter with GREENCORES_DISABLE_NUMBA=1
for the numpy side, since the backend is fixed at import.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from greencores import kernels as K
from greencores.power_model import default_params

E2E_SNIPPET = (
    "import time;"
    "from greencores.engine import SimConfig, run;"
    "from greencores.kernels import BACKEND;"
    "from greencores.traces import SynthSpec, synth_traces;"
    "vm, s = synth_traces(SynthSpec(), 0);"
    "run(SimConfig(), vm, s);"  # warm-up, includes JIT compile
    "t = time.perf_counter(); run(SimConfig(), vm, s);"
    "print(BACKEND, time.perf_counter() - t)"
)


def fleet(size, rng):
    r = np.full(size, 40, dtype=np.int64)
    n = np.full(size, 44, dtype=np.int64)
    awake = rng.integers(0, 5, size).astype(np.int64)
    m = np.array([rng.integers(0, 41 + a) for a in awake], dtype=np.int64)
    return m, awake, n, r


def bench_kernels(sizes, repeat):
    if not K.HAS_NUMBA:
        print("numba unavailable or disabled; only the numpy path can be timed")
    p = default_params()
    rng = np.random.default_rng(0)
    print(f"{'kernel':<22}{'servers':>8}{'numba us':>12}{'numpy us':>12}{'speedup':>10}")
    for size in sizes:
        m, awake, n, r = fleet(size, rng)
        cases = {
            "choose_ideal_point": lambda s: getattr(K, f"_choose_ideal_point_{s}")(m, awake, r, 2, 1.0, 0.5),
            "choose_best_fit": lambda s: getattr(K, f"_choose_best_fit_{s}")(m, awake, r, 2, False),
            "fleet_harvest_power": lambda s: getattr(K, f"_fleet_harvest_power_{s}")(
                m, awake, n, r, p.p_pin, p.p_act, p.p_slp, p.f_slope, p.f_offset, p.p_grid),
        }
        for name, call in cases.items():
            t_np = timeit.timeit(lambda: call("np"), number=repeat) / repeat * 1e6
            if K.HAS_NUMBA:
                call("nb")  # compile outside the timed loop
                t_nb = timeit.timeit(lambda: call("nb"), number=repeat) / repeat * 1e6
                print(f"{name:<22}{size:>8}{t_nb:>12.2f}{t_np:>12.2f}{t_np / t_nb:>9.1f}x")
            else:
                print(f"{name:<22}{size:>8}{'-':>12}{t_np:>12.2f}{'-':>10}")


def bench_end_to_end():
    print("\nfull default simulation (50 servers, ~2000 VMs, 24 h):")
    for disable in ("0", "1"):
        env = dict(os.environ, GREENCORES_DISABLE_NUMBA=disable)
        out = subprocess.run([sys.executable, "-c", E2E_SNIPPET], env=env, capture_output=True, text=True,
                             check=True).stdout.split()
        print(f"  {out[0]:<6} {float(out[1]):.3f} s")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--servers", type=int, nargs="+", default=[50, 200, 1000])
    ap.add_argument("--repeat", type=int, default=2000)
    ap.add_argument("--skip-e2e", action="store_true")
    args = ap.parse_args(argv)
    bench_kernels(args.servers, args.repeat)
    if not args.skip_e2e:
        bench_end_to_end()


if __name__ == "__main__":
    main()
