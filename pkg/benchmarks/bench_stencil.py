"""Native versus numpy stencil kernels.

Usage: ``python benchmarks/bench_stencil.py [n ...]`` (default 32 48 64).
Prints the best-of-5 wall time per call for each backend and the speedup,
and checks that both backends agree.
"""

import sys
import timeit

import numpy as np

from landau import _backend as B
from landau import grid as G


def _inputs(n, seed=0):
    rng = np.random.default_rng(seed)
    f = rng.random((n,) * 3)
    a6 = rng.random((6,) + (n,) * 3)
    b3 = rng.normal(size=(3,) + (n,) * 3)
    inner = G.interior_mask((n,) * 3, G.VelocityGrid(n, 6.0).ball_mask())
    return f, a6, b3, inner, 12.0 / (n - 1)


def _best(fn, repeat=5):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def bench(n):
    f, a6, b3, inner, h = _inputs(n)
    inner8 = inner.view(np.uint8)
    cases = {
        "face_fluxes": (lambda: B.face_fluxes(f, a6, b3, h), lambda: B.python_face_fluxes(f, a6, b3, h)),
        "hessian_contract": (lambda: B.hessian_contract(f, a6, h), lambda: B.python_hessian_contract(f, a6, h)),
        "centred_flux_divergence": (lambda: B.centred_flux_divergence(f, a6, b3, inner8, h),
                                    lambda: B.python_centred_flux_divergence(f, a6, b3, inner, h)),
    }
    rows = []
    for name, (nat, py) in cases.items():
        x, y = nat(), py()
        if isinstance(x, (tuple, list)):
            err = max(float(np.abs(p - q).max()) for p, q in zip(x, y))
        else:
            err = float(np.abs(x - y).max())
        t_nat, t_py = _best(nat), _best(py)
        rows.append((name, n, t_nat, t_py, t_py / t_nat, err))
    return rows


def main(argv):
    sizes = [int(a) for a in argv] or [32, 48, 64]
    print(f"active backend: {B.BACKEND}")
    if B.BACKEND != "native":
        print("native extension not built; both columns time the numpy code")
    print(f"{'kernel':<26}{'n':>4}{'native [ms]':>13}{'numpy [ms]':>12}{'speedup':>9}{'max diff':>11}")
    for n in sizes:
        for name, n_, tn, tp, sp, err in bench(n):
            print(f"{name:<26}{n_:>4}{1e3 * tn:>13.2f}{1e3 * tp:>12.2f}{sp:>9.2f}{err:>11.1e}")


if __name__ == "__main__":
    main(sys.argv[1:])
