"""Compare the compiled and pure-Python Lindblad kernels.

    python3 benchmarks/bench_kernels.py [--sizes 200 450 900] [--repeat 20]

Times ``hermitian_product`` and ``sandwich`` on random sparse Hermitian
operators and reports the difference of each backend from the first one.
"""

import argparse
import time

import numpy as np
import scipy.sparse as sp

from oscswap import kernels


def _random_hermitian(n, density, rng):
    m = sp.random(n, n, density=density, random_state=rng, format="csr", dtype=np.float64)
    m = m + 1j * sp.random(n, n, density=density, random_state=rng, format="csr")
    return (m + m.conj().T).tocsr()


def _best(fn, repeat):
    fn()
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench(n, repeat, density=0.01, seed=0):
    rng = np.random.default_rng(seed)
    op = kernels.CSR(_random_hermitian(n, density, rng))
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    rho = np.ascontiguousarray(a + a.conj().T)
    rows = {}
    ref = {}
    for name, mod in kernels.BACKENDS.items():
        out = np.zeros((n, n), complex)
        work = np.zeros((n, n), complex)

        def hp():
            mod.hermitian_product(out, rho, op.indptr, op.indices, op.data, -1j, work)

        def sw():
            mod.sandwich(out, rho, op.indptr, op.indices, op.data, 1.0, work)

        t_hp = _best(hp, repeat)
        out[:] = 0
        hp()
        ref.setdefault("hp", out.copy())
        err = float(np.abs(out - ref["hp"]).max())
        t_sw = _best(sw, repeat)
        rows[name] = (t_hp, t_sw, err)
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[200, 450, 900])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)
    print(f"active backend: {kernels.BACKEND}; available: {', '.join(kernels.BACKENDS)}")
    print(f"{'n':>6} {'backend':>8} {'commutator (ms)':>16} {'sandwich (ms)':>14} {'max |diff|':>11}")
    for n in args.sizes:
        rows = bench(n, args.repeat)
        for name, (t_hp, t_sw, err) in rows.items():
            print(f"{n:>6} {name:>8} {t_hp * 1e3:>16.3f} {t_sw * 1e3:>14.3f} {err:>11.1e}")
        if "cython" in rows:
            print(f"{'':>6} {'speedup':>8} {rows['python'][0] / rows['cython'][0]:>16.2f}"
                  f" {rows['python'][1] / rows['cython'][1]:>14.2f}")


if __name__ == "__main__":
    main()
