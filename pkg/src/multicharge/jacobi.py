"""Joint approximate diagonalization of Hermitian matrices by Jacobi sweeps.

The per-sweep kernel comes from the compiled extension when it is importable;
set ``MULTICHARGE_PURE_PYTHON=1`` to force the numpy fallback.
"""

from __future__ import annotations

import os

import numpy as np

from . import _jacobi_py

BACKEND = "python"
jacobi_sweep = _jacobi_py.jacobi_sweep

if not os.environ.get("MULTICHARGE_PURE_PYTHON"):
    try:
        from ._jacobi_ext import jacobi_sweep  # noqa: F811
    except ImportError:
        pass
    else:
        BACKEND = "cython"


def _kernel(backend):
    if backend is None:
        return jacobi_sweep
    if backend == "python":
        return _jacobi_py.jacobi_sweep
    if backend == "cython":
        from ._jacobi_ext import jacobi_sweep as ext

        return ext
    raise ValueError(f"unknown backend {backend!r}")


def off_diagonal_mass(stack: np.ndarray) -> float:
    """Summed squared Frobenius norm of the off-diagonal parts."""
    total = float(np.sum(np.abs(stack) ** 2))
    diag = float(np.sum(np.abs(np.diagonal(stack, axis1=1, axis2=2)) ** 2))
    return max(0.0, total - diag)


def joint_diagonalize_matrices(mats, sweeps_tol: float = 1e-12, max_sweeps: int = 500,
                               backend: str | None = None):
    """Rotate a set of Hermitian matrices towards a common eigenbasis.

    Returns
    -------
    basis : (n, n) unitary whose columns are the approximate common eigenvectors
    rotated : (k, n, n) stack ``basis^H M_j basis``
    history : off-diagonal mass before the first sweep and after each sweep
    """
    sweep = _kernel(backend)
    A = np.ascontiguousarray(np.array([np.asarray(m, dtype=complex) for m in mats]))
    n = A.shape[1]
    V = np.ascontiguousarray(np.eye(n, dtype=complex))
    scale = float(np.sum(np.abs(A) ** 2)) + 1e-300
    thresh = 1e-15 * scale
    history = [off_diagonal_mass(A)]
    for _ in range(max_sweeps):
        if n < 2 or sweep(A, V, thresh) == 0:
            break
        history.append(off_diagonal_mass(A))
        if history[-2] - history[-1] < sweeps_tol:
            break
    return V, A, history
