"""Compare compiled and numpy element kernels, and a full dual-field solve.

    python benchmarks/bench_kernels.py [--n 64] [--repeat 5]
"""
import argparse
import importlib
import time

import numpy as np

import dualsolver.spacetime as st
from dualsolver.spacetime import _kernels_py, kernels


def _best(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=64)
    ap.add_argument("--ncomp", type=int, default=2)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    try:
        compiled = importlib.import_module("dualsolver.spacetime._kernels")
    except ImportError:
        compiled = None
        print("compiled kernels unavailable; timing numpy fallback only")

    grid = st.SpaceTimeGrid(0.0, 1.0, 0.5, args.n, args.n)
    rng = np.random.default_rng(0)
    nel, nq, ns = grid.n_elements, grid.nq, args.ncomp
    ops, w = grid.shape_ops, grid.weights
    De = rng.standard_normal((nel, 4, ns))
    dL = rng.standard_normal((nel, nq, 3, ns))
    Hp = rng.standard_normal((nel, nq, 3 * ns, 3 * ns))
    cases = {
        "interpolate": lambda m: m.interpolate(ops, De),
        "element_gradient": lambda m: m.element_gradient(ops, w, dL),
        "element_hessian": lambda m: m.element_hessian(ops, w, Hp),
    }
    print(f"grid {args.n}x{args.n}, {nel} elements, {nq} points/element, {ns} components")
    print(f"{'kernel':<18}{'numpy [ms]':>12}{'compiled [ms]':>15}{'speedup':>10}")
    for name, fn in cases.items():
        tp = _best(lambda: fn(_kernels_py), args.repeat)
        if compiled is None:
            print(f"{name:<18}{tp * 1e3:>12.2f}{'-':>15}{'-':>10}")
            continue
        tc = _best(lambda: fn(compiled), args.repeat)
        print(f"{name:<18}{tp * 1e3:>12.2f}{tc * 1e3:>15.2f}{tp / tc:>10.1f}")

    sys = st.heat()
    pot = st.PdeAuxPotential.quadratic(lambda x, t: sys.U0(x), n=2)
    sgrid = st.SpaceTimeGrid(0.0, 1.0, 0.2, args.n, args.n)
    saved = kernels._impl
    try:
        for label, impl in (("numpy", _kernels_py), ("compiled", compiled)):
            if impl is None:
                continue
            kernels._impl = impl
            t = _best(lambda: st.solve_dual_field(sys, pot, sgrid), max(1, args.repeat // 2))
            print(f"heat solve {args.n}x{args.n} [{label}]: {t * 1e3:.1f} ms")
    finally:
        kernels._impl = saved


if __name__ == "__main__":
    main()
