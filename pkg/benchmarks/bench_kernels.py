"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py --photons 20000 --repeat 3
"""
import argparse
import time

import numpy as np

from sivsim import _kernels
from sivsim import photons as P
from sivsim.rates import build_rate_matrix
from sivsim.structure import default_model


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--photons", type=int, default=20000, help="approximate photons per stream")
    ap.add_argument("--pump", type=float, default=1e8, help="pump rate, 1/s")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=17)
    args = ap.parse_args(argv)

    backends = {"python": _kernels.python_backend}
    if _kernels.compiled_backend is None:
        print("compiled extension not available; timing the Python kernels only")
    else:
        backends["cython"] = _kernels.compiled_backend

    rm = build_rate_matrix(default_model(), 4.0, args.pump)
    probe = P.simulate_stream(rm, 1e-5, seed=args.seed)
    duration = args.photons / max(len(probe) / 1e-5, 1.0)

    res = {}
    for name, kern in backends.items():
        t_kmc, stream = best_of(lambda: P.simulate_stream(rm, duration, seed=args.seed,
                                                          backend=kern), args.repeat)
        t_pair, counts = best_of(lambda: P.correlation_counts(stream, 0.1e-9, 50e-9,
                                                              backend=kern), args.repeat)
        res[name] = (t_kmc, t_pair, stream, counts)
        print(f"{name:>7}: kmc {t_kmc * 1e3:9.2f} ms ({len(stream)} photons)   "
              f"pair_counts {t_pair * 1e3:9.2f} ms")

    if "cython" in res:
        py, cy = res["python"], res["cython"]
        same = np.array_equal(py[2].arrival_times, cy[2].arrival_times) and np.array_equal(py[3], cy[3])
        print(f"speedup: kmc x{py[0] / cy[0]:.1f}, pair_counts x{py[1] / cy[1]:.1f}; "
              f"outputs identical: {same}")


if __name__ == "__main__":
    main()
