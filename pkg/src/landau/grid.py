"""Uniform velocity lattice, fields on it, and the discrete operators.

Node coordinates are ``v_a = (a - (n-1)/2) h`` with ``h = 2R/(n-1)``, so the
lattice is exactly symmetric under ``v -> -v`` and the quarter turn about the
third axis is an index permutation.  Fields outside the lattice are zero.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

from . import kernel as K
from ._backend import centred_flux_divergence, centred_gradient, face_fluxes, hessian_contract

LNDF_MAGIC = b"LNDF"
LNDF_VERSION = 1


class GridMismatchError(ValueError):
    pass


def fft_workers() -> int:
    """Worker count for transforms, capped by ``LANDAU_THREADS``."""
    cap = os.environ.get("LANDAU_THREADS")
    ncpu = os.cpu_count() or 1
    if cap:
        return max(1, min(int(cap), ncpu))
    return ncpu


@dataclass(frozen=True)
class VelocityGrid:
    """Cubic lattice of ``n**3`` nodes covering ``[-R, R]^3``."""

    n: int
    radius: float

    def __post_init__(self):
        if self.n < 16 or self.n % 4:
            raise ValueError(f"n={self.n} must be a multiple of 4 and >= 16")
        if not self.radius > 0:
            raise ValueError("radius must be positive")

    @property
    def h(self) -> float:
        return 2.0 * self.radius / (self.n - 1)

    @property
    def cell_volume(self) -> float:
        return self.h**3

    @property
    def axis(self) -> np.ndarray:
        return (np.arange(self.n) - 0.5 * (self.n - 1)) * self.h

    def mesh(self) -> np.ndarray:
        """Node coordinates, shape ``(3, n, n, n)``."""
        return _mesh(self.n, self.radius)

    def speed2(self) -> np.ndarray:
        v = self.mesh()
        return v[0] ** 2 + v[1] ** 2 + v[2] ** 2

    def ball_mask(self, radius: float | None = None) -> np.ndarray:
        """Nodes with ``|v| <= radius`` (default: the lattice half-width)."""
        r = self.radius if radius is None else radius
        return self.speed2() <= r * r * (1.0 + 1e-12)


@lru_cache(maxsize=8)
def _mesh(n, radius):
    ax = (np.arange(n) - 0.5 * (n - 1)) * (2.0 * radius / (n - 1))
    v = np.stack(np.meshgrid(ax, ax, ax, indexing="ij"))
    v.setflags(write=False)
    return v


@dataclass
class ScalarField:
    """Nodal density on a grid; ``values[i, j, k]`` sits at ``(v_i, v_j, v_k)``."""

    grid: VelocityGrid
    values: np.ndarray
    positivity_tol: float = field(default=np.inf, repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        n = self.grid.n
        if self.values.shape != (n, n, n):
            raise GridMismatchError(f"values shape {self.values.shape} != {(n, n, n)}")
        if np.isfinite(self.positivity_tol) and self.values.min() < -self.positivity_tol:
            raise ValueError(f"field has values below -{self.positivity_tol}")

    def mass(self) -> float:
        return float(self.values.sum() * self.grid.cell_volume)

    def l1(self) -> float:
        return float(np.abs(self.values).sum() * self.grid.cell_volume)

    def copy(self) -> ScalarField:
        return ScalarField(self.grid, self.values.copy())

    def __add__(self, other):
        _check_same(self.grid, other.grid)
        return ScalarField(self.grid, self.values + other.values)

    def __sub__(self, other):
        _check_same(self.grid, other.grid)
        return ScalarField(self.grid, self.values - other.values)

    def __mul__(self, alpha):
        return ScalarField(self.grid, self.values * alpha)

    __rmul__ = __mul__


@dataclass
class CoefficientField:
    """Convolved coefficients on the grid.

    ``abar`` holds the six entries ``(11, 22, 33, 12, 13, 23)`` along axis 0,
    ``bbar`` the three drift components, ``cbar`` the reaction coefficient.
    Missing parts are ``None``.
    """

    grid: VelocityGrid
    abar: np.ndarray | None
    bbar: np.ndarray | None
    cbar: np.ndarray | None

    def matrix(self) -> np.ndarray:
        """``abar`` as full symmetric matrices, shape ``(n, n, n, 3, 3)``."""
        a = self.abar
        m = np.empty(a.shape[1:] + (3, 3))
        for c, (i, j) in enumerate(K.SYM_PAIRS):
            m[..., i, j] = a[c]
            m[..., j, i] = a[c]
        return m

    def scale(self) -> float:
        """Largest spectral radius of ``abar`` over the grid."""
        return float(sym_eig_extremes(self.abar)[1].max())

    def __add__(self, other):
        _check_same(self.grid, other.grid)
        return CoefficientField(
            self.grid,
            *(None if x is None else x + y for x, y in
              ((self.abar, other.abar), (self.bbar, other.bbar), (self.cbar, other.cbar)))
        )

    def __mul__(self, alpha):
        return CoefficientField(
            self.grid, *(None if x is None else x * alpha for x in (self.abar, self.bbar, self.cbar))
        )

    __rmul__ = __mul__


def sym_eig_extremes(a6: np.ndarray):
    """Smallest and largest eigenvalue of packed symmetric 3x3 matrices.

    ``a6`` has the entries ``(11, 22, 33, 12, 13, 23)`` along axis 0; uses the
    trigonometric closed form, vectorized over the remaining axes.
    """
    a11, a22, a33, a12, a13, a23 = a6
    q = (a11 + a22 + a33) / 3.0
    d1, d2, d3 = a11 - q, a22 - q, a33 - q
    p = np.sqrt((d1 * d1 + d2 * d2 + d3 * d3 + 2.0 * (a12 * a12 + a13 * a13 + a23 * a23)) / 6.0)
    safe = np.where(p > 0, p, 1.0)
    b11, b22, b33 = d1 / safe, d2 / safe, d3 / safe
    b12, b13, b23 = a12 / safe, a13 / safe, a23 / safe
    det = b11 * (b22 * b33 - b23 * b23) - b12 * (b12 * b33 - b23 * b13) + b13 * (b12 * b23 - b22 * b13)
    phi = np.arccos(np.clip(0.5 * det, -1.0, 1.0)) / 3.0
    lmax = np.where(p > 0, q + 2.0 * p * np.cos(phi), q)
    lmin = np.where(p > 0, q + 2.0 * p * np.cos(phi + 2.0 * np.pi / 3.0), q)
    return lmin, lmax


@dataclass
class PointMeasure:
    """Probability measure carried by finitely many weighted points."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        self.weights = np.asarray(self.weights, dtype=float).ravel()
        if self.points.shape[1] != 3 or len(self.points) != len(self.weights):
            raise ValueError("points must be (k, 3) with one weight per point")
        if np.any(self.weights <= 0):
            raise ValueError("weights must be positive")
        if abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {self.weights.sum()!r}, not 1")

    @classmethod
    def uniform(cls, points):
        points = np.atleast_2d(points)
        return cls(points, np.full(len(points), 1.0 / len(points)))

    def __len__(self):
        return len(self.weights)


def _check_same(g1: VelocityGrid, g2: VelocityGrid):
    if g1 != g2:
        raise GridMismatchError(f"{g1} != {g2}")


# --------------------------------------------------------------------------
# convolution with kernels tabulated at lattice offsets


def _offsets(n, h):
    """Offsets of a length-2n circular lattice, as a column for broadcasting."""
    m = np.arange(2 * n)
    return np.where(m < n, m, m - 2 * n) * h


@lru_cache(maxsize=6)
def _coefficient_spectra(n, radius, gamma, epsilon, parts):
    grid = VelocityGrid(n, radius)
    d = _offsets(n, grid.h)
    z = np.stack(np.meshgrid(d, d, d, indexing="ij"), axis=-1)
    params = None if epsilon is None else K.KernelParams(gamma, epsilon)
    a6, b3, c = K.tabulate(z, gamma, params)
    del z
    w = fft_workers()
    out = {}
    if "a" in parts:
        out["a"] = [sfft.rfftn(t, workers=w) for t in a6]
    if "b" in parts:
        out["b"] = [sfft.rfftn(t, workers=w) for t in b3]
    if "c" in parts:
        out["c"] = [sfft.rfftn(c, workers=w)]
    return out


@lru_cache(maxsize=8)
def _scalar_spectrum(n, radius, key):
    grid = VelocityGrid(n, radius)
    d = _offsets(n, grid.h)
    dx, dy, dz = np.ix_(d, d, d)
    r = np.sqrt(dx * dx + dy * dy + dz * dz)
    kind = key[0]
    if kind == "pow":
        p, self_value = key[1], key[2]
        table = np.empty_like(r)
        pos = r > 0
        table[pos] = r[pos] ** p
        table[~pos] = self_value
    elif kind == "radial_reg":
        gamma, eps = key[1], key[2]
        table, _ = K.radial_profile(r, gamma, K.KernelParams(gamma, eps))
    else:
        raise KeyError(kind)
    return sfft.rfftn(table, workers=fft_workers())


def _spectral_apply(values, spectra, n):
    N = 2 * n
    w = fft_workers()
    F = sfft.rfftn(values, s=(N, N, N), workers=w)
    return [sfft.irfftn(F * S, s=(N, N, N), workers=w)[:n, :n, :n] for S in spectra]


def convolve_scalar(f: ScalarField, key: tuple) -> np.ndarray:
    """``h^3 sum_w k(v - w) f(w)`` for a radial scalar kernel described by ``key``.

    ``("pow", p, self_value)`` is ``|z|**p`` with ``self_value`` at ``z = 0``;
    ``("radial_reg", gamma, eps)`` is ``|z|**(2+gamma) mu_eps(|z|)``.
    """
    g = f.grid
    spec = _scalar_spectrum(g.n, g.radius, key)
    return _spectral_apply(f.values, [spec], g.n)[0] * g.cell_volume


def convolve_coefficients(f: ScalarField, params: K.KernelParams, regularized: bool = True,
                          parts: str = "abc") -> CoefficientField:
    """Quadrature approximation of ``a * f``, ``b * f`` and ``c * f`` at every node.

    The kernel is tabulated at lattice offsets and applied as a circular
    convolution on a zero-padded ``(2n)^3`` lattice, which reproduces the
    direct ``h^3``-weighted double sum exactly (up to rounding).

    Parameters
    ----------
    f : ScalarField
    params : KernelParams
    regularized : bool
        Use the mollified kernel; ``False`` selects the exact kernel with
        exponent ``params.gamma``.
    parts : str
        Subset of ``"abc"`` to compute.
    """
    vals = f.values
    if not np.all(np.isfinite(vals)):
        raise ValueError("field contains non-finite values")
    g = f.grid
    eps = params.epsilon if regularized else None
    key = "".join(p for p in "abc" if p in parts)
    spectra = _coefficient_spectra(g.n, g.radius, params.gamma, eps, key)
    order = [s for p in key for s in spectra[p]]
    res = _spectral_apply(vals, order, g.n)
    hv = g.cell_volume
    abar = bbar = cbar = None
    pos = 0
    if "a" in key:
        abar = np.stack(res[0:6]) * hv
        pos = 6
    if "b" in key:
        bbar = np.stack(res[pos:pos + 3]) * hv
        pos += 3
    if "c" in key:
        cbar = res[pos] * hv
    return CoefficientField(g, abar, bbar, cbar)


def interior_mask(shape, mask=None, depth: int = 2) -> np.ndarray:
    """Active nodes whose axial neighbours up to ``depth`` steps away are all active."""
    act = np.ones(shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    p = np.pad(act, depth)
    inner = act.copy()
    for ax in range(3):
        for s in range(2 * depth + 1):
            sl = [slice(depth, -depth)] * 3
            sl[ax] = slice(s, s + act.shape[ax])
            inner &= p[tuple(sl)]
    return inner


def weak_coefficients(g: ScalarField, params: K.KernelParams, regularized: bool = True,
                      inner=None) -> CoefficientField:
    """Coefficients of the symmetric weak form.

    ``abar = a * g`` and ``bbar_i = sum_j a_ij * D_j g`` with fourth-order
    centred differences ``D``, both over the nodes in ``inner`` only.  Since
    ``div a = b`` the second field approximates ``b * g``; pairing it with
    ``abar`` makes the lattice operator antisymmetric in the two particles,
    which is what conserves momentum and energy exactly.
    """
    vals = g.values
    if not np.all(np.isfinite(vals)):
        raise ValueError("field contains non-finite values")
    grid = g.grid
    if inner is None:
        inner = interior_mask(vals.shape)
    gi = np.where(inner, vals, 0.0)
    eps = params.epsilon if regularized else None
    spec = _coefficient_spectra(grid.n, grid.radius, params.gamma, eps, "a")["a"]
    N = 2 * grid.n
    w = fft_workers()
    hv = grid.cell_volume
    abar = np.stack(_spectral_apply(gi, spec, grid.n)) * hv
    gr = centred_gradient(gi, inner, grid.h)
    gh = [sfft.rfftn(x, s=(N, N, N), workers=w) for x in gr]
    idx = ((0, 3, 4), (3, 1, 5), (4, 5, 2))
    bbar = np.stack([
        sfft.irfftn(sum(spec[idx[i][j]] * gh[j] for j in range(3)), s=(N, N, N), workers=w)[:grid.n, :grid.n, :grid.n]
        for i in range(3)]) * hv
    return CoefficientField(grid, abar, bbar, None)


def clear_caches():
    _coefficient_spectra.cache_clear()
    _scalar_spectrum.cache_clear()


# --------------------------------------------------------------------------
# stencils


def _padded_a6(abar, diffusion):
    a = abar
    if diffusion:
        a = a.copy()
        a[:3] += diffusion
    return a


def flux_divergence(abar, bbar, values, h, mask=None, diffusion=0.0):
    """Face-flux divergence with closed boundaries.

    Returns ``(L, blocked)`` where ``L[a] = sum_i (F_i(a+1/2) - F_i(a-1/2))/h``.
    Faces between an active and an inactive node (or the outside of the
    lattice) carry no flux; ``blocked`` is the mass per unit time those faces
    would have carried outwards with zero exterior values, a measure of how
    much the closed boundary matters.  Inactive nodes get ``L = 0``.
    """
    f = values if mask is None else np.where(mask, values, 0.0)
    a6 = _padded_a6(abar, diffusion)
    fl = face_fluxes(np.ascontiguousarray(f), np.ascontiguousarray(a6),
                     None if bbar is None else np.ascontiguousarray(bbar), h)
    act = np.ones(f.shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    blocked = 0.0
    for ax in range(3):
        pad = [(0, 0)] * 3
        pad[ax] = (1, 1)
        ap = np.pad(act, pad).astype(np.int8)
        lo = [slice(None)] * 3
        hi = [slice(None)] * 3
        lo[ax] = slice(0, -1)
        hi[ax] = slice(1, None)
        cross = ap[tuple(hi)] - ap[tuple(lo)]
        blocked += float((fl[ax] * cross).sum())
        fl[ax] = fl[ax] * (ap[tuple(hi)] & ap[tuple(lo)])
    L = (np.diff(fl[0], axis=0) + np.diff(fl[1], axis=1) + np.diff(fl[2], axis=2)) / h
    if mask is not None:
        L = np.where(act, L, 0.0)
    return L, blocked * h * h


def divergence_flux(coeffs: CoefficientField, f: ScalarField, mask=None,
                    diffusion: float = 0.0) -> ScalarField:
    """``div(abar grad f - bbar f)`` in conservative flux form.

    Face coefficients are arithmetic means of the adjacent nodes; the normal
    derivative is the compact difference across the face and the tangential
    ones are averages of the centred differences at the two nodes.  Faces on
    the boundary of the lattice (or of ``mask``) carry no flux, so the lattice
    sum of the output vanishes up to rounding.
    """
    _check_same(coeffs.grid, f.grid)
    L, _ = flux_divergence(coeffs.abar, coeffs.bbar, f.values, f.grid.h, mask, diffusion)
    return ScalarField(f.grid, L)


def neumann_laplacian(values, h, mask=None):
    """Compact 7-point Laplacian with no-flux faces at the edge of ``mask``."""
    act = np.ones(values.shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    f = np.where(act, values, 0.0)
    out = np.zeros_like(f)
    for ax in range(3):
        pad = [(0, 0)] * 3
        pad[ax] = (1, 1)
        fp, ap = np.pad(f, pad), np.pad(act, pad)
        lo = [slice(None)] * 3
        hi = [slice(None)] * 3
        lo[ax] = slice(0, -1)
        hi[ax] = slice(1, None)
        fl = (fp[tuple(hi)] - fp[tuple(lo)]) * (ap[tuple(hi)] & ap[tuple(lo)])
        out += np.diff(fl, axis=ax)
    return np.where(act, out, 0.0) / (h * h)


def weak_divergence(abar, bbar, values, h, inner, mask=None, diffusion=0.0):
    """``sum_i D_i 1_inner (abar_ij D_j f - bbar_i f)`` plus ``diffusion`` times the compact Laplacian.

    ``abar`` and ``bbar`` come from ``weak_coefficients``; only values on
    ``inner`` interact.  The lattice sum of the output vanishes to rounding.
    """
    inner = np.asarray(inner, dtype=bool)
    fi = np.ascontiguousarray(np.where(inner, values, 0.0))
    L = centred_flux_divergence(fi, np.ascontiguousarray(abar), np.ascontiguousarray(bbar),
                                np.ascontiguousarray(inner.view(np.uint8)), h)
    if diffusion:
        L = L + diffusion * neumann_laplacian(values, h, mask)
    if mask is not None:
        L = np.where(mask, L, 0.0)
    return L


def hessian_apply(coeffs: CoefficientField, f: ScalarField, diffusion: float = 0.0) -> ScalarField:
    """``abar_ij d_i d_j f`` with second differences (4-point cross stencil off-diagonal)."""
    _check_same(coeffs.grid, f.grid)
    a6 = _padded_a6(coeffs.abar, diffusion)
    H = hessian_contract(np.ascontiguousarray(f.values), np.ascontiguousarray(a6), f.grid.h)
    return ScalarField(f.grid, H)


def zeroth_apply(coeffs: CoefficientField, f: ScalarField) -> ScalarField:
    _check_same(coeffs.grid, f.grid)
    return ScalarField(f.grid, coeffs.cbar * f.values)


# --------------------------------------------------------------------------
# symmetry and quadrature


def rotate_quarter_turn_array(x: np.ndarray) -> np.ndarray:
    """Move the value at ``(i, j, k)`` to ``(n-1-j, i, k)`` (exact permutation)."""
    n = x.shape[0]
    if n % 2:
        raise ValueError("quarter turn needs an even number of nodes per axis")
    # out[p, q] = x[q, n-1-p]
    return np.ascontiguousarray(np.swapaxes(x, 0, 1)[::-1])


def rotate_quarter_turn(f: ScalarField) -> ScalarField:
    return ScalarField(f.grid, rotate_quarter_turn_array(f.values))


def rotate_coefficients(c: CoefficientField) -> CoefficientField:
    """Push coefficients through the quarter turn: ``A -> T A(T^-1 v) T^T``.

    With ``T e1 = e2, T e2 = -e1`` the entries map as
    ``A11 <- A22, A22 <- A11, A12 <- -A12, A13 <- -A23, A23 <- A13``.
    """
    rot = rotate_quarter_turn_array
    a = b = cc = None
    if c.abar is not None:
        A = c.abar
        a = np.stack([rot(A[1]), rot(A[0]), rot(A[2]), -rot(A[3]), -rot(A[5]), rot(A[4])])
    if c.bbar is not None:
        B = c.bbar
        b = np.stack([-rot(B[1]), rot(B[0]), rot(B[2])])
    if c.cbar is not None:
        cc = rot(c.cbar)
    return CoefficientField(c.grid, a, b, cc)


def integrate_weighted(f: ScalarField, weight) -> float:
    """``h^3 sum weight(v) f(v)``; ``weight`` is an array or a callable of ``v``."""
    w = weight(f.grid.mesh()) if callable(weight) else np.asarray(weight)
    if not np.all(np.isfinite(w)):
        raise ValueError("weight must be finite on the grid")
    return float(np.sum(w * f.values) * f.grid.cell_volume)


# --------------------------------------------------------------------------
# snapshots


def write_lndf(path, f: ScalarField, gamma: float, time: float) -> None:
    g = f.grid
    head = LNDF_MAGIC + struct.pack("<IIddd", LNDF_VERSION, g.n, g.radius, gamma, time)
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())


def read_lndf(path):
    """Returns ``(field, gamma, time)``."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != LNDF_MAGIC:
        raise ValueError(f"{path}: not an LNDF file")
    version, n, radius, gamma, time = struct.unpack_from("<IIddd", data, 4)
    if version != LNDF_VERSION:
        raise ValueError(f"{path}: unsupported LNDF version {version}")
    off = 4 + struct.calcsize("<IIddd")
    if len(data) != off + 8 * n**3:
        raise ValueError(f"{path}: truncated or oversized payload")
    vals = np.frombuffer(data, dtype="<f8", count=n**3, offset=off).reshape(n, n, n)
    return ScalarField(VelocityGrid(n, radius), vals.astype(float)), gamma, time
