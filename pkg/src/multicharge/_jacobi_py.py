"""Pure-numpy Jacobi sweep for joint approximate diagonalization.

Reference implementation of the kernel in ``_jacobi_ext.pyx``; used whenever
the compiled extension is unavailable or ``MULTICHARGE_PURE_PYTHON`` is set.
"""

import numpy as np


def jacobi_sweep(A, V, thresh):
    """One cyclic sweep of complex Givens rotations over every index pair.

    ``A`` is a C-contiguous (k, n, n) stack of Hermitian matrices and ``V`` the
    accumulated (n, n) basis; both are updated in place. A pair is rotated only
    when the optimal rotation raises the summed squared diagonal gap by more
    than ``thresh``. Returns the number of rotations applied.
    """
    k, n, _ = A.shape
    rotations = 0
    for p in range(n - 1):
        for q in range(p + 1, n):
            app = A[:, p, p].real
            aqq = A[:, q, q].real
            apq = A[:, p, q]
            h = np.stack([app - aqq, 2.0 * apq.real, 2.0 * apq.imag])
            T = h @ h.T
            w, vec = np.linalg.eigh(T)
            gain = w[2] - T[0, 0]
            if not gain > thresh:
                continue
            x, y, z = vec[:, 2]
            if x < 0:
                x, y, z = -x, -y, -z
            c = np.sqrt(0.5 + 0.5 * x)
            s = 0.5 * (y - 1j * z) / c
            G = np.array([[c, -np.conj(s)], [s, c]])
            Gh = G.conj().T
            idx = [p, q]
            A[:, idx, :] = np.einsum("ij,kjm->kim", Gh, A[:, idx, :])
            A[:, :, idx] = A[:, :, idx] @ G
            V[:, idx] = V[:, idx] @ G
            rotations += 1
    return rotations
