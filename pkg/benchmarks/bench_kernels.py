"""Time the compiled and pure-Python Oja kernels on the same inputs.

    python benchmarks/bench_kernels.py [--n 20000] [--d 20] [--repeat 3]
"""
import argparse
import timeit

import numpy as np

from privpca import _backend
from privpca._fallback import oja_rank1 as py_oja, private_oja_rank1 as py_private


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=20000)
    ap.add_argument("--d", type=int, default=20)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    x = rng.standard_normal((args.n, args.d))
    z = rng.standard_normal((args.n, args.d))
    etas = 1.0 / (10.0 + np.arange(1, args.n + 1))
    w0 = np.ones(args.d) / np.sqrt(args.d)

    cases = {"python": (py_oja, py_private)}
    if _backend.compiled is not None:
        cases["cython"] = (_backend.compiled.oja_rank1, _backend.compiled.private_oja_rank1)
    else:
        print("compiled kernels not built; timing the pure-Python backend only")

    results = {}
    for name, (oja, private) in cases.items():
        t_oja = min(timeit.repeat(lambda: oja(x, etas, w0.copy()), number=1, repeat=args.repeat))
        t_priv = min(
            timeit.repeat(lambda: private(x, etas, w0.copy(), 5.0, 0.1, z), number=1, repeat=args.repeat)
        )
        results[name] = (t_oja, t_priv)
        print(f"{name:>7}  oja {t_oja * 1e3:9.2f} ms   private_oja {t_priv * 1e3:9.2f} ms   (n={args.n}, d={args.d})")
    if "cython" in results:
        py, cy = results["python"], results["cython"]
        print(f"speedup  oja x{py[0] / cy[0]:.1f}   private_oja x{py[1] / cy[1]:.1f}")


if __name__ == "__main__":
    main()
