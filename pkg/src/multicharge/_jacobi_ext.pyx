# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Jacobi sweep for joint approximate diagonalization.

Same update rule as ``_jacobi_py.jacobi_sweep``; the 3x3 eigenproblem that
fixes each Givens rotation is solved in place by cyclic Jacobi.
"""

from libc.math cimport sqrt, fabs


cdef void _sym3_top(double T[3][3], double out[3]) noexcept nogil:
    """Eigenvector of the largest eigenvalue of a symmetric 3x3 matrix."""
    cdef double a[3][3]
    cdef double v[3][3]
    cdef int i, j, p, q, r, sweep, best
    cdef double off, theta, t, c, s, tau, apq, arp, arq, vrp, vrq, scale
    for i in range(3):
        for j in range(3):
            a[i][j] = T[i][j]
            v[i][j] = 1.0 if i == j else 0.0
    scale = fabs(a[0][0]) + fabs(a[1][1]) + fabs(a[2][2]) + 1e-300
    for sweep in range(64):
        off = fabs(a[0][1]) + fabs(a[0][2]) + fabs(a[1][2])
        if off <= 1e-17 * scale:
            break
        for p in range(2):
            for q in range(p + 1, 3):
                apq = a[p][q]
                if fabs(apq) <= 1e-300:
                    continue
                theta = (a[q][q] - a[p][p]) / (2.0 * apq)
                if theta >= 0:
                    t = 1.0 / (theta + sqrt(theta * theta + 1.0))
                else:
                    t = -1.0 / (-theta + sqrt(theta * theta + 1.0))
                c = 1.0 / sqrt(t * t + 1.0)
                s = t * c
                tau = s / (1.0 + c)
                a[p][p] -= t * apq
                a[q][q] += t * apq
                a[p][q] = 0.0
                a[q][p] = 0.0
                for r in range(3):
                    if r != p and r != q:
                        arp = a[r][p]
                        arq = a[r][q]
                        a[r][p] = arp - s * (arq + tau * arp)
                        a[p][r] = a[r][p]
                        a[r][q] = arq + s * (arp - tau * arq)
                        a[q][r] = a[r][q]
                for r in range(3):
                    vrp = v[r][p]
                    vrq = v[r][q]
                    v[r][p] = vrp - s * (vrq + tau * vrp)
                    v[r][q] = vrq + s * (vrp - tau * vrq)
    best = 0
    for i in range(1, 3):
        if a[i][i] > a[best][best]:
            best = i
    for i in range(3):
        out[i] = v[i][best]
    # eigenvalue, stashed for the caller's gain test
    T[0][1] = a[best][best]


def jacobi_sweep(double complex[:, :, ::1] A, double complex[:, ::1] V, double thresh):
    """One cyclic sweep over all index pairs; returns the rotation count."""
    cdef Py_ssize_t k = A.shape[0]
    cdef Py_ssize_t n = A.shape[1]
    cdef Py_ssize_t p, q, m, r
    cdef double T[3][3]
    cdef double vec[3]
    cdef double h0, h1, h2, top, gain, x, y, z, c
    cdef double complex s, sc, ap, aq
    cdef int rotations = 0
    with nogil:
        for p in range(n - 1):
            for q in range(p + 1, n):
                for r in range(3):
                    T[r][0] = 0.0
                    T[r][1] = 0.0
                    T[r][2] = 0.0
                for m in range(k):
                    h0 = A[m, p, p].real - A[m, q, q].real
                    h1 = 2.0 * A[m, p, q].real
                    h2 = 2.0 * A[m, p, q].imag
                    T[0][0] += h0 * h0
                    T[0][1] += h0 * h1
                    T[0][2] += h0 * h2
                    T[1][1] += h1 * h1
                    T[1][2] += h1 * h2
                    T[2][2] += h2 * h2
                T[1][0] = T[0][1]
                T[2][0] = T[0][2]
                T[2][1] = T[1][2]
                gain = T[0][0]
                _sym3_top(T, vec)
                top = T[0][1]
                gain = top - gain
                if not gain > thresh:
                    continue
                x = vec[0]
                y = vec[1]
                z = vec[2]
                if x < 0:
                    x = -x
                    y = -y
                    z = -z
                c = sqrt(0.5 + 0.5 * x)
                s = 0.5 * (y - 1j * z) / c
                sc = s.conjugate()
                # rows: A[pq, :] <- G^H A[pq, :] with G = [[c, -s*], [s, c]]
                for m in range(k):
                    for r in range(n):
                        ap = A[m, p, r]
                        aq = A[m, q, r]
                        A[m, p, r] = c * ap + sc * aq
                        A[m, q, r] = -s * ap + c * aq
                    for r in range(n):
                        ap = A[m, r, p]
                        aq = A[m, r, q]
                        A[m, r, p] = c * ap + s * aq
                        A[m, r, q] = -sc * ap + c * aq
                for r in range(n):
                    ap = V[r, p]
                    aq = V[r, q]
                    V[r, p] = c * ap + s * aq
                    V[r, q] = -sc * ap + c * aq
                rotations += 1
    return rotations
