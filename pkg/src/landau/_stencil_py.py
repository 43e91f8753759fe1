"""Pure-numpy stencil kernels (fallback for the compiled extension).

Both functions treat values outside the lattice as zero.  Coefficients
``a6`` use the ``(11, 22, 33, 12, 13, 23)`` packing; outside the lattice they
are continued by their boundary value.
"""

import numpy as np

# (i, j) -> packed index
_IDX = {(0, 0): 0, (1, 1): 1, (2, 2): 2, (0, 1): 3, (1, 0): 3,
        (0, 2): 4, (2, 0): 4, (1, 2): 5, (2, 1): 5}


def _sl(ax, a, b):
    s = [slice(1, -1)] * 3
    s[ax] = slice(a, b)
    return tuple(s)


def face_fluxes(f, a6, b3, h):
    """Fluxes ``F_i = A_ij G_j - B_i f`` on the faces normal to each axis.

    Returns three arrays shaped ``(n+1, n, n)``, ``(n, n+1, n)``, ``(n, n, n+1)``;
    entry ``a`` along the face axis sits between nodes ``a-1`` and ``a``.
    """
    fp = np.pad(f, 1)
    ap = np.pad(a6, ((0, 0), (1, 1), (1, 1), (1, 1)), mode="edge")
    bp = None if b3 is None else np.pad(b3, ((0, 0), (1, 1), (1, 1), (1, 1)), mode="edge")
    out = []
    for ax in range(3):
        # centred differences at every padded node along ax, interior across
        cen = []
        for j in range(3):
            if j == ax:
                cen.append(None)
                continue
            s_plus = [slice(None)] * 3
            s_minus = [slice(None)] * 3
            for d in range(3):
                if d == ax:
                    continue
                s_plus[d] = slice(2, None) if d == j else slice(1, -1)
                s_minus[d] = slice(0, -2) if d == j else slice(1, -1)
            cen.append((fp[tuple(s_plus)] - fp[tuple(s_minus)]) / (2.0 * h))
        lo, hi = _sl(ax, 0, -1), _sl(ax, 1, None)
        grads = []
        for j in range(3):
            if j == ax:
                grads.append((fp[hi] - fp[lo]) / h)
            else:
                c = cen[j]
                clo = [slice(None)] * 3
                chi = [slice(None)] * 3
                clo[ax] = slice(0, -1)
                chi[ax] = slice(1, None)
                grads.append(0.5 * (c[tuple(clo)] + c[tuple(chi)]))
        F = None
        for j in range(3):
            k = _IDX[(ax, j)]
            coef = 0.5 * (ap[k][lo] + ap[k][hi])
            term = coef * grads[j]
            F = term if F is None else F + term
        if bp is not None:
            F = F - 0.5 * (bp[ax][lo] + bp[ax][hi]) * (0.5 * (fp[lo] + fp[hi]))
        out.append(F)
    return out


def hessian_contract(f, a6, h):
    """``sum_ij A_ij d_i d_j f`` with centred second differences."""
    fp = np.pad(f, 1)
    c = fp[1:-1, 1:-1, 1:-1]
    n = f.shape[0]

    def sh(di, dj, dk):
        return fp[1 + di:1 + di + n, 1 + dj:1 + dj + n, 1 + dk:1 + dk + n]

    unit = ((1, 0, 0), (0, 1, 0), (0, 0, 1))
    out = np.zeros_like(f)
    for i in range(3):
        e = unit[i]
        d2 = (sh(*e) - 2.0 * c + sh(*(-x for x in e))) / (h * h)
        out += a6[i] * d2
    for k, (i, j) in ((3, (0, 1)), (4, (0, 2)), (5, (1, 2))):
        ei, ej = np.array(unit[i]), np.array(unit[j])
        dij = (sh(*(ei + ej)) - sh(*(ei - ej)) - sh(*(ej - ei)) + sh(*(-ei - ej))) / (4.0 * h * h)
        out += 2.0 * a6[k] * dij
    return out



def _cdiff(x, ax, h):
    """Fourth-order centred difference along ``ax``; zero outside the lattice."""
    pad = [(0, 0)] * 3
    pad[ax] = (2, 2)
    xp = np.pad(x, pad)
    n = x.shape[ax]

    def sh(k):
        s = [slice(None)] * 3
        s[ax] = slice(2 + k, 2 + k + n)
        return xp[tuple(s)]

    return (8.0 * (sh(1) - sh(-1)) - (sh(2) - sh(-2))) / (12.0 * h)


def centred_gradient(f, inner, h):
    """Fourth-order centred gradient of ``f``, zeroed outside the boolean mask ``inner``."""
    return np.stack([np.where(inner, _cdiff(f, ax, h), 0.0) for ax in range(3)])


def centred_flux_divergence(f, a6, w3, inner, h):
    """``sum_i D_i F_i`` with ``F_i = 1_inner (A_ij D_j f - W_i f)``.

    ``D`` is the fourth-order centred difference, which is skew-adjoint and
    exact on quadratics.
    """
    gr = centred_gradient(f, inner, h)
    out = np.zeros_like(f)
    for i in range(3):
        F = a6[_IDX[(i, 0)]] * gr[0] + a6[_IDX[(i, 1)]] * gr[1] + a6[_IDX[(i, 2)]] * gr[2] - w3[i] * f
        out += _cdiff(np.where(inner, F, 0.0), i, h)
    return out
