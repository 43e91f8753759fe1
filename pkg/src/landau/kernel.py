"""Pointwise Landau kernels, exact and regularized.

The exact kernel is ``a(z) = (I - z z^T/|z|^2) |z|^(gamma+2)`` with divergence
``b(z) = -2 z |z|^gamma`` and double divergence ``c(z) = -2 (gamma+3) |z|^gamma``.

The regularized kernel multiplies the radial factor by a mollifier
``mu_eps(|z|)`` that equals ``|z|^-gamma`` near the origin, ``1`` on the
annulus ``eps <= |z| <= 1/eps`` and ``|z|^(-2-gamma)`` far away.  Both kernels
share the structure ``a = P(z) k(|z|)`` with ``P`` the projector orthogonal to
``z``, so that

    b_i = d_j a_ij = -2 z_i k(r) / r^2
    c   = d_i b_i  = -2 (k(r)/r^2 + k'(r)/r)

which is how every function below is evaluated.  All functions accept a single
3-vector or an array of shape ``(..., 3)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LN2 = np.log(2.0)


class KernelDomainError(ValueError):
    """Kernel evaluated where it is unbounded."""


class UnsupportedParameterError(ValueError):
    """Parameter outside the range a formula is valid for."""


@dataclass(frozen=True)
class KernelParams:
    """Interaction exponent and regularization scale.

    Parameters
    ----------
    gamma : float
        Interaction exponent in ``[-3, 1]``.
    epsilon : float
        Regularization scale in ``(0, 1)``; the three mollifier regions
        ``r <= eps/2``, ``eps <= r <= 1/eps`` and ``r >= 2/eps`` are disjoint.
    """

    gamma: float = 1.0
    epsilon: float = 0.05

    def __post_init__(self):
        if not -3.0 <= self.gamma <= 1.0:
            raise UnsupportedParameterError(f"gamma={self.gamma} outside [-3, 1]")
        if not 0.0 < self.epsilon < 1.0:
            raise UnsupportedParameterError(f"epsilon={self.epsilon} outside (0, 1)")


# --------------------------------------------------------------------------
# smooth step used to blend mollifier exponents


def _sigma(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    pos = s > 0
    out[pos] = np.exp(-1.0 / s[pos])
    return out


def smoothstep(s):
    """C-infinity step: 0 for ``s <= 0``, 1 for ``s >= 1``, monotone between."""
    s = np.asarray(s, dtype=float)
    a, b = _sigma(s), _sigma(1.0 - s)
    return a / (a + b)


def smoothstep_prime(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = (s > 0) & (s < 1)
    si = s[inside]
    a, b = np.exp(-1.0 / si), np.exp(-1.0 / (1.0 - si))
    da, db = a / si**2, b / (1.0 - si) ** 2
    out[inside] = (da * b + a * db) / (a + b) ** 2
    return out


def _mollifier_exponent(r, gamma, eps):
    """Exponent ``e(r)`` with ``mu_eps(r) = r**e(r)`` and its derivative."""
    r = np.asarray(r, dtype=float)
    e = np.zeros_like(r)
    de = np.zeros_like(r)

    inner = r <= 0.5 * eps
    e[inner] = -gamma

    lo = (r > 0.5 * eps) & (r < eps)
    s = np.log(2.0 * r[lo] / eps) / LN2
    e[lo] = -gamma * (1.0 - smoothstep(s))
    de[lo] = gamma * smoothstep_prime(s) / (r[lo] * LN2)

    hi = (r > 1.0 / eps) & (r < 2.0 / eps)
    s = np.log(r[hi] * eps) / LN2
    e[hi] = -(2.0 + gamma) * smoothstep(s)
    de[hi] = -(2.0 + gamma) * smoothstep_prime(s) / (r[hi] * LN2)

    outer = r >= 2.0 / eps
    e[outer] = -(2.0 + gamma)
    return e, de


def radial_profile(r, gamma, params: KernelParams | None = None):
    """Radial factor ``k(r)`` of the kernel and ``k'(r)``.

    ``params=None`` selects the exact kernel ``k = r**(2+gamma)``.  At ``r = 0``
    both entries are returned as 0 (the regularized profile is ``r**2`` there).
    """
    r = np.asarray(r, dtype=float)
    k = np.zeros_like(r)
    dk = np.zeros_like(r)
    pos = r > 0
    rp = r[pos]
    if params is None:
        q = 2.0 + gamma
        k[pos] = rp**q
        dk[pos] = q * rp ** (q - 1.0)
    else:
        e, de = _mollifier_exponent(rp, params.gamma, params.epsilon)
        q = 2.0 + params.gamma + e
        lr = np.log(rp)
        k[pos] = np.exp(q * lr)
        dk[pos] = k[pos] * (de * lr + q / rp)
    return k, dk


# --------------------------------------------------------------------------
# public pointwise evaluation


def _as_vectors(z):
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != 3:
        raise ValueError(f"expected 3-vectors, got shape {z.shape}")
    return z


def _projector_times(z, r, k):
    rr = np.where(r > 0, r, 1.0)
    zh = z / rr[..., None]
    eye = np.eye(3)
    P = eye - zh[..., :, None] * zh[..., None, :]
    m = P * k[..., None, None]
    m[r == 0] = 0.0
    return m


def eval_a(z, gamma):
    """Exact kernel matrix ``(I - zhat zhat^T) |z|^(gamma+2)``."""
    z = _as_vectors(z)
    r = np.linalg.norm(z, axis=-1)
    if np.any(r == 0) and gamma <= -2:
        raise KernelDomainError(f"a(0) is unbounded for gamma={gamma} <= -2")
    k, _ = radial_profile(r, gamma)
    return _projector_times(z, r, k)


def eval_b(z, gamma):
    """Exact divergence ``b(z) = -2 z |z|^gamma``."""
    z = _as_vectors(z)
    r = np.linalg.norm(z, axis=-1)
    if np.any(r == 0) and gamma < -1:
        raise KernelDomainError(f"b(0) is unbounded for gamma={gamma} < -1")
    rg = np.zeros_like(r)
    pos = r > 0
    rg[pos] = r[pos] ** gamma
    return -2.0 * z * rg[..., None]


def eval_c(z, gamma):
    """Exact double divergence ``c(z) = -2 (gamma+3) |z|^gamma``.

    Not defined for ``gamma = -3`` (the pointwise formula misses the Coulomb
    delta).  At ``z = 0`` returns the limit for ``gamma >= 0``.
    """
    if gamma <= -3:
        raise UnsupportedParameterError("c(z) is not a function for gamma = -3")
    z = _as_vectors(z)
    r = np.linalg.norm(z, axis=-1)
    zero = r == 0
    if np.any(zero) and gamma < 0:
        raise KernelDomainError(f"c(0) is unbounded for gamma={gamma} < 0")
    out = np.empty_like(r)
    out[~zero] = -2.0 * (gamma + 3.0) * r[~zero] ** gamma
    out[zero] = -6.0 if gamma == 0 else 0.0
    return out[()] if out.ndim == 0 else out


def eval_mollifier(r, params: KernelParams):
    """Mollifier ``mu_eps(r)``; at ``r = 0`` the limit of ``r**-gamma``."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("mollifier radius must be nonnegative")
    zero = r == 0
    if np.any(zero) and params.gamma > 0:
        raise KernelDomainError("mu_eps(0) is infinite for gamma > 0")
    out = np.empty_like(r)
    e, _ = _mollifier_exponent(r[~zero], params.gamma, params.epsilon)
    out[~zero] = r[~zero] ** e
    out[zero] = 1.0 if params.gamma == 0 else 0.0
    return out[()] if out.ndim == 0 else out


def eval_a_reg(z, params: KernelParams):
    """Regularized kernel ``a(z) mu_eps(|z|)``; bounded for fixed ``eps``."""
    z = _as_vectors(z)
    r = np.linalg.norm(z, axis=-1)
    k, _ = radial_profile(r, params.gamma, params)
    return _projector_times(z, r, k)


def eval_b_reg(z, params: KernelParams):
    """Divergence of the regularized kernel, ``-2 z k(r)/r^2``.

    Near the origin ``k(r) = r^2`` for every gamma, so ``b_reg(0) = 0``.
    """
    z = _as_vectors(z)
    r = np.linalg.norm(z, axis=-1)
    k, _ = radial_profile(r, params.gamma, params)
    ratio = np.ones_like(r)
    pos = r > 0
    ratio[pos] = k[pos] / r[pos] ** 2
    return -2.0 * z * ratio[..., None]


def eval_c_reg(z, params: KernelParams):
    """Double divergence of the regularized kernel; ``-6`` at the origin."""
    z = _as_vectors(z)
    r = np.linalg.norm(z, axis=-1)
    k, dk = radial_profile(r, params.gamma, params)
    out = np.full_like(r, -6.0)
    pos = r > 0
    rp = r[pos]
    out[pos] = -2.0 * (k[pos] / rp**2 + dk[pos] / rp)
    return out[()] if out.ndim == 0 else out


def tabulate(z, gamma, params: KernelParams | None = None):
    """Kernel components at many offsets, with the grid's origin convention.

    Returns ``(a6, b3, c)`` where ``a6`` holds the six independent entries
    ``(11, 22, 33, 12, 13, 23)`` along the first axis.  At ``z = 0`` the exact
    kernel uses ``a = b = 0`` and ``c = -6`` for ``gamma = 0``, else ``0``;
    the regularized kernel uses its smooth limit ``a = b = 0, c = -6``.
    """
    z = _as_vectors(z)
    r = np.linalg.norm(z, axis=-1)
    k, dk = radial_profile(r, gamma, params)
    pos = r > 0
    rr = np.where(pos, r, 1.0)
    zh = z / rr[..., None]
    a6 = np.empty((6,) + r.shape)
    for m, (i, j) in enumerate(SYM_PAIRS):
        a6[m] = ((1.0 if i == j else 0.0) - zh[..., i] * zh[..., j]) * k
    a6[:, ~pos] = 0.0
    ratio = np.where(pos, k / rr**2, 0.0)
    b3 = np.moveaxis(-2.0 * z * ratio[..., None], -1, 0)
    if params is None:
        if gamma <= -3:
            raise UnsupportedParameterError("c(z) is not a function for gamma = -3")
        c = np.where(pos, -2.0 * (gamma + 3.0) * rr**gamma, -6.0 if gamma == 0 else 0.0)
    else:
        ratio[~pos] = 1.0
        c = np.where(pos, -2.0 * (ratio + dk / rr), -6.0)
    return a6, b3, c


SYM_PAIRS = ((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2))
