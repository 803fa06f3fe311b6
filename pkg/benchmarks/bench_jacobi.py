"""Compare the compiled and pure-Python Jacobi kernels on composite Pauli charges.

Usage: python3 benchmarks/bench_jacobi.py [--copies 3 4 5] [--repeat 3]
"""

import argparse
import time

import numpy as np

from multicharge import jacobi
from multicharge.microcanonical import _SEED_WEIGHT, composite_average
from multicharge.operators import PAULI_X, PAULI_Z


def _seeded_stack(n):
    comp = composite_average([PAULI_X, PAULI_Z], n)
    mats = [q.matrix for q in comp.composite]
    _, v = np.linalg.eigh(sum((1 + _SEED_WEIGHT * j) * m for j, m in enumerate(mats)))
    return [v.conj().T @ m @ v for m in mats]


def _time(mats, backend, repeat):
    best, result = np.inf, None
    for _ in range(repeat):
        start = time.perf_counter()
        result = jacobi.joint_diagonalize_matrices(mats, backend=backend)
        best = min(best, time.perf_counter() - start)
    return best, result


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--copies", type=int, nargs="+", default=[3, 4, 5])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    backends = ["python"]
    try:
        jacobi._kernel("cython")
        backends.append("cython")
    except ImportError:
        print("compiled kernel not built; timing the Python fallback only")
    print(f"{'N':>3} {'dim':>5} {'sweeps':>6} " + " ".join(f"{b + ' s':>10}" for b in backends)
          + f" {'speedup':>8} {'d off':>9} {'d diag':>9}")
    for n in args.copies:
        mats = _seeded_stack(n)
        runs = {b: _time(mats, b, args.repeat) for b in backends}
        py_t, (_, py_a, hist) = runs["python"]
        line = f"{n:>3} {2**n:>5} {len(hist):>6} " + " ".join(f"{runs[b][0]:>10.4f}" for b in backends)
        if "cython" in runs:
            cy_t, (_, cy_a, cy_hist) = runs["cython"]
            diff = max(np.max(np.abs(np.sort(np.diagonal(a, axis1=-2, axis2=-1).real, axis=-1)
                                     - np.sort(np.diagonal(b, axis1=-2, axis2=-1).real, axis=-1)))
                       for a, b in zip(py_a, cy_a))
            line += f" {py_t / cy_t:>8.1f} {abs(hist[-1] - cy_hist[-1]) / hist[0]:>9.1e} {diff:>9.1e}"
        print(line)


if __name__ == "__main__":
    main()
