# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled stencil kernels; same contract as ``_stencil_py``."""

import numpy as np

cdef int _IDX[3][3]
_IDX[0][0] = 0; _IDX[1][1] = 1; _IDX[2][2] = 2
_IDX[0][1] = 3; _IDX[1][0] = 3
_IDX[0][2] = 4; _IDX[2][0] = 4
_IDX[1][2] = 5; _IDX[2][1] = 5


def face_fluxes(f_in, a6_in, b3_in, double h):
    """Fluxes ``F_i = A_ij G_j - B_i f`` on the faces normal to each axis."""
    cdef const double[:, :, ::1] f = np.ascontiguousarray(f_in, dtype=np.float64)
    cdef const double[:, :, :, ::1] a6 = np.ascontiguousarray(a6_in, dtype=np.float64)
    cdef const double[:, :, :, ::1] b3
    cdef bint has_b = b3_in is not None
    if has_b:
        b3 = np.ascontiguousarray(b3_in, dtype=np.float64)
    else:
        b3 = np.zeros((3, 1, 1, 1))
    cdef int n = f.shape[0]
    cdef double invh = 1.0 / h, inv2h = 0.5 / h
    # zero-padded copy of f and nodal centred gradients, both offset by one
    fpad = np.zeros((n + 2, n + 2, n + 2))
    fpad[1:-1, 1:-1, 1:-1] = f_in
    cdef double[:, :, ::1] fp = fpad
    grad = np.zeros((3, n + 2, n + 2, n + 2))
    cdef double[:, :, :, ::1] Gr = grad
    cdef int ax, j, m, p0, p1, p2, q0, q1, q2, c0, c1, c2, e0, e1, e2
    with nogil:
        for p0 in range(1, n + 1):
            for p1 in range(1, n + 1):
                for p2 in range(1, n + 1):
                    Gr[0, p0, p1, p2] = (fp[p0 + 1, p1, p2] - fp[p0 - 1, p1, p2]) * inv2h
                    Gr[1, p0, p1, p2] = (fp[p0, p1 + 1, p2] - fp[p0, p1 - 1, p2]) * inv2h
                    Gr[2, p0, p1, p2] = (fp[p0, p1, p2 + 1] - fp[p0, p1, p2 - 1]) * inv2h
    out = []
    cdef double[:, :, ::1] F
    cdef double g, acc, ff
    cdef int d0[3]
    for ax in range(3):
        shape = [n, n, n]
        shape[ax] = n + 1
        arr = np.empty(shape)
        F = arr
        d0[0] = 0; d0[1] = 0; d0[2] = 0
        d0[ax] = 1
        with nogil:
            for p0 in range(n + d0[0]):
                for p1 in range(n + d0[1]):
                    for p2 in range(n + d0[2]):
                        # face between lo node q = p - e_ax and hi node p (padded indices +1)
                        q0 = p0 - d0[0]; q1 = p1 - d0[1]; q2 = p2 - d0[2]
                        # coefficient indices clamped to the lattice
                        c0 = p0 if p0 < n else n - 1
                        c1 = p1 if p1 < n else n - 1
                        c2 = p2 if p2 < n else n - 1
                        e0 = q0 if q0 >= 0 else 0
                        e1 = q1 if q1 >= 0 else 0
                        e2 = q2 if q2 >= 0 else 0
                        acc = 0.0
                        for j in range(3):
                            if j == ax:
                                g = (fp[p0 + 1, p1 + 1, p2 + 1] - fp[q0 + 1, q1 + 1, q2 + 1]) * invh
                            else:
                                g = 0.5 * (Gr[j, p0 + 1, p1 + 1, p2 + 1] + Gr[j, q0 + 1, q1 + 1, q2 + 1])
                            m = _IDX[ax][j]
                            acc = acc + 0.5 * (a6[m, c0, c1, c2] + a6[m, e0, e1, e2]) * g
                        if has_b:
                            ff = 0.5 * (fp[p0 + 1, p1 + 1, p2 + 1] + fp[q0 + 1, q1 + 1, q2 + 1])
                            acc = acc - 0.5 * (b3[ax, c0, c1, c2] + b3[ax, e0, e1, e2]) * ff
                        F[p0, p1, p2] = acc
        out.append(arr)
    return out


def hessian_contract(f_in, a6_in, double h):
    """``sum_ij A_ij d_i d_j f`` with centred second differences."""
    cdef const double[:, :, :, ::1] a6 = np.ascontiguousarray(a6_in, dtype=np.float64)
    cdef int n = a6.shape[1]
    fpad = np.zeros((n + 2, n + 2, n + 2))
    fpad[1:-1, 1:-1, 1:-1] = f_in
    cdef const double[:, :, ::1] f = fpad
    res = np.empty((n, n, n))
    cdef double[:, :, ::1] out = res
    cdef double ih2 = 1.0 / (h * h), iq = 0.25 / (h * h)
    cdef int i, j, k, a, b, c
    cdef double v, acc
    with nogil:
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    a = i + 1; b = j + 1; c = k + 1
                    v = f[a, b, c]
                    acc = a6[0, i, j, k] * (f[a + 1, b, c] - 2.0 * v + f[a - 1, b, c]) * ih2
                    acc = acc + a6[1, i, j, k] * (f[a, b + 1, c] - 2.0 * v + f[a, b - 1, c]) * ih2
                    acc = acc + a6[2, i, j, k] * (f[a, b, c + 1] - 2.0 * v + f[a, b, c - 1]) * ih2
                    acc = acc + 2.0 * a6[3, i, j, k] * (
                        f[a + 1, b + 1, c] - f[a + 1, b - 1, c] - f[a - 1, b + 1, c] + f[a - 1, b - 1, c]) * iq
                    acc = acc + 2.0 * a6[4, i, j, k] * (
                        f[a + 1, b, c + 1] - f[a + 1, b, c - 1] - f[a - 1, b, c + 1] + f[a - 1, b, c - 1]) * iq
                    acc = acc + 2.0 * a6[5, i, j, k] * (
                        f[a, b + 1, c + 1] - f[a, b + 1, c - 1] - f[a, b - 1, c + 1] + f[a, b - 1, c - 1]) * iq
                    out[i, j, k] = acc
    return res


def centred_flux_divergence(f_in, a6_in, w3_in, inner_in, double h):
    """``sum_i D_i F_i`` with ``F_i = 1_inner (A_ij D_j f - W_i f)``; ``D`` fourth-order centred."""
    cdef const double[:, :, :, ::1] a6 = np.ascontiguousarray(a6_in, dtype=np.float64)
    cdef const double[:, :, :, ::1] w3 = np.ascontiguousarray(w3_in, dtype=np.float64)
    cdef const unsigned char[:, :, ::1] inner = np.ascontiguousarray(inner_in, dtype=np.uint8)
    cdef int n = a6.shape[1]
    # all node arrays are zero-padded by two layers
    fpad = np.zeros((n + 4, n + 4, n + 4))
    fpad[2:-2, 2:-2, 2:-2] = f_in
    cdef const double[:, :, ::1] f = fpad
    Fa = np.zeros((3, n + 4, n + 4, n + 4))
    cdef double[:, :, :, ::1] F = Fa
    res = np.empty((n, n, n))
    cdef double[:, :, ::1] out = res
    cdef double c = 1.0 / (12.0 * h)
    cdef int i, j, k, a, b, d
    cdef double g0, g1, g2, fv
    with nogil:
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    if not inner[i, j, k]:
                        continue
                    a = i + 2; b = j + 2; d = k + 2
                    g0 = (8.0 * (f[a + 1, b, d] - f[a - 1, b, d]) - (f[a + 2, b, d] - f[a - 2, b, d])) * c
                    g1 = (8.0 * (f[a, b + 1, d] - f[a, b - 1, d]) - (f[a, b + 2, d] - f[a, b - 2, d])) * c
                    g2 = (8.0 * (f[a, b, d + 1] - f[a, b, d - 1]) - (f[a, b, d + 2] - f[a, b, d - 2])) * c
                    fv = f[a, b, d]
                    F[0, a, b, d] = a6[0, i, j, k] * g0 + a6[3, i, j, k] * g1 + a6[4, i, j, k] * g2 - w3[0, i, j, k] * fv
                    F[1, a, b, d] = a6[3, i, j, k] * g0 + a6[1, i, j, k] * g1 + a6[5, i, j, k] * g2 - w3[1, i, j, k] * fv
                    F[2, a, b, d] = a6[4, i, j, k] * g0 + a6[5, i, j, k] * g1 + a6[2, i, j, k] * g2 - w3[2, i, j, k] * fv
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    a = i + 2; b = j + 2; d = k + 2
                    out[i, j, k] = (8.0 * (F[0, a + 1, b, d] - F[0, a - 1, b, d]) - (F[0, a + 2, b, d] - F[0, a - 2, b, d])
                                    + 8.0 * (F[1, a, b + 1, d] - F[1, a, b - 1, d]) - (F[1, a, b + 2, d] - F[1, a, b - 2, d])
                                    + 8.0 * (F[2, a, b, d + 1] - F[2, a, b, d - 1]) - (F[2, a, b, d + 2] - F[2, a, b, d - 2])) * c
    return res
