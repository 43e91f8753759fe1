"""Monitored functionals: conserved quantities, moments, entropy, ellipticity,
the line functional, moment production, symmetry residuals and transport metrics.

All double integrals ``h^6 sum_v sum_w K(v - w) F(v) G(w)`` are evaluated as
``h^3 sum_v F(v) (K * G)(v)`` with one lattice convolution.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize

from . import grid as G
from .kernel import UnsupportedParameterError

CSV_HEADER = ("t", "mass", "p1", "p2", "p3", "energy", "entropy", "m2", "m4", "m6",
              "ellip_min", "ellip_axis", "line_fn", "transv_m", "axisym_dev",
              "min_f", "max_f", "leaked")

MAX_SUPPORT = 512


@dataclass
class DiagnosticsRecord:
    t: float
    mass: float
    momentum: np.ndarray
    energy: float
    entropy: float
    moments: dict
    ellipticity_min: float
    ellipticity_axis_min: float
    line_functional: float
    transverse_moment: float
    axisym_dev: float
    min_f: float
    max_f: float
    leaked_mass: float = 0.0

    def row(self):
        m = self.moments
        return (self.t, self.mass, *self.momentum, self.energy, self.entropy,
                m.get(2, math.nan), m.get(4, math.nan), m.get(6, math.nan),
                self.ellipticity_min, self.ellipticity_axis_min, self.line_functional,
                self.transverse_moment, self.axisym_dev, self.min_f, self.max_f, self.leaked_mass)


@dataclass
class MomentProduction:
    s: float
    term_I: float
    term_II: float
    term_III: float

    @property
    def total(self) -> float:
        return self.term_I + self.term_II + self.term_III


# --------------------------------------------------------------------------
# elementary functionals


def momentum(f: G.ScalarField) -> np.ndarray:
    v = f.grid.mesh()
    hv = f.grid.cell_volume
    return np.array([float((v[i] * f.values).sum() * hv) for i in range(3)])


def energy(f: G.ScalarField) -> float:
    return 0.5 * G.integrate_weighted(f, f.grid.speed2())


def entropy(f: G.ScalarField) -> float:
    """``int f log f`` with ``0 log 0 = 0``; nonpositive nodes are skipped."""
    x = f.values[f.values > 0]
    return float((x * np.log(x)).sum() * f.grid.cell_volume)


def moment(f: G.ScalarField, s: float) -> float:
    """``M_s = int (1 + |v|^2)^(s/2) |f|``."""
    w = (1.0 + f.grid.speed2()) ** (0.5 * s)
    return float((w * np.abs(f.values)).sum() * f.grid.cell_volume)


def axisym_deviation(f: G.ScalarField) -> float:
    """``||f - f o T||_1 / ||f||_1`` for the quarter turn ``T`` about the third axis."""
    d = np.abs(f.values - G.rotate_quarter_turn_array(f.values)).sum()
    return float(d / np.abs(f.values).sum())


def transverse_moment(f: G.ScalarField, axis: int = 0) -> float:
    """``1/4 int dist(v, axis)^2 f`` for a coordinate axis (0, 1 or 2)."""
    if axis not in (0, 1, 2):
        raise ValueError("axis must be 0, 1 or 2")
    v = f.grid.mesh()
    d2 = f.grid.speed2() - v[axis] ** 2
    return 0.25 * G.integrate_weighted(f, d2)


def line_functional(f: G.ScalarField, gamma: float) -> float:
    """``iint |v - w|^(2+gamma) f(v) f(w)`` by one convolution."""
    if gamma <= -2:
        raise UnsupportedParameterError("line functional needs gamma > -2")
    conv = G.convolve_scalar(f, ("pow", 2.0 + gamma, 0.0))
    return float((f.values * conv).sum() * f.grid.cell_volume)


def ellipticity(coeffs: G.CoefficientField, gamma: float, axis: int = 0, mask=None):
    """``(min_v lambda_min(abar)/(1+|v|^2)^(gamma/2), min_v e.abar e)`` over nodes."""
    a6 = coeffs.abar
    lmin, _ = G.sym_eig_extremes(a6)
    weight = (1.0 + coeffs.grid.speed2()) ** (0.5 * gamma)
    ratio = lmin / weight
    along = a6[axis]
    if mask is not None:
        ratio, along = ratio[mask], along[mask]
    return float(ratio.min()), float(along.min())


def compute_record(f: G.ScalarField, coeffs: G.CoefficientField | None = None, cfg=None, *,
                   t: float = 0.0, leaked_mass: float = 0.0, axis: int = 0,
                   moments=(2, 4, 6)) -> DiagnosticsRecord:
    """Every monitored quantity of ``f``.

    ``cfg`` is a ``SolverConfig`` (kernel and regularization); ``coeffs`` are
    reused when they include ``abar``, otherwise recomputed.
    """
    from .solver import SolverConfig

    cfg = SolverConfig() if cfg is None else cfg
    gamma = cfg.params.gamma
    if coeffs is None or coeffs.abar is None:
        coeffs = G.convolve_coefficients(f, cfg.params, regularized=cfg.regularized, parts="a")
    el_min, el_axis = ellipticity(coeffs, gamma, axis)
    return DiagnosticsRecord(
        t=float(t), mass=f.mass(), momentum=momentum(f), energy=energy(f), entropy=entropy(f),
        moments={s: moment(f, s) for s in moments},
        ellipticity_min=el_min, ellipticity_axis_min=el_axis,
        line_functional=line_functional(f, gamma) if gamma > -2 else math.nan,
        transverse_moment=transverse_moment(f, axis), axisym_dev=axisym_deviation(f),
        min_f=float(f.values.min()), max_f=float(f.values.max()), leaked_mass=float(leaked_mass))


class CsvWriter:
    """Appends records to a CSV file with the fixed header; 17 significant digits."""

    def __init__(self, path):
        self.path = path
        self._fh = open(path, "w", newline="")
        self._w = csv.writer(self._fh)
        self._w.writerow(CSV_HEADER)

    def write(self, rec: DiagnosticsRecord):
        self._w.writerow([f"{float(x):.17g}" for x in rec.row()])
        self._fh.flush()

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_csv(path):
    """Read a diagnostics CSV back as a dict of float arrays."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = tuple(rows[0])
    if header != CSV_HEADER:
        raise ValueError(f"unexpected header {header}")
    data = np.array([[float(x) for x in r] for r in rows[1:]]).reshape(-1, len(header))
    return {k: data[:, i] for i, k in enumerate(header)}


# --------------------------------------------------------------------------
# moment production


def moment_production(f: G.ScalarField, s: float, gamma: float, allow_s2: bool = False) -> MomentProduction:
    """The three terms of ``d/dt M_s`` for the exact kernel.

    With ``<v> = (1+|v|^2)^(1/2)``:

    * ``I   = 2s   iint |v-w|^(2+gamma) <v>^(s-2) f f``
    * ``II  = s(s-2) iint (|v|^2|w|^2 - (v.w)^2) |v-w|^gamma <v>^(s-4) f f``
    * ``III = -4s  iint |v-w|^gamma (v-w).v <v>^(s-2) f f``

    ``allow_s2`` admits ``s = 2``, where the sum must vanish.
    """
    if s < 2 or (s == 2 and not allow_s2):
        raise UnsupportedParameterError("moment production needs s > 2")
    if not 0 < gamma <= 1:
        raise UnsupportedParameterError("moment production is set up for 0 < gamma <= 1")
    grid = f.grid
    v = grid.mesh()
    r2 = grid.speed2()
    x = f.values
    hv = grid.cell_volume
    jp = 1.0 + r2
    key_a = ("pow", 2.0 + gamma, 0.0)
    key_g = ("pow", gamma, 0.0)

    k_a = G.convolve_scalar(f, key_a)
    term_I = 2.0 * s * float((x * jp ** (0.5 * (s - 2)) * k_a).sum() * hv)

    def conv(weight):
        return G.convolve_scalar(G.ScalarField(grid, weight * x), key_g)

    k0 = G.convolve_scalar(f, key_g)
    k_r2 = conv(r2)
    cross = np.zeros_like(x)
    for i in range(3):
        for j in range(3):
            if j < i:
                continue
            c = conv(v[i] * v[j])
            cross += (1.0 if i == j else 2.0) * v[i] * v[j] * c
    inner = r2 * k_r2 - cross
    term_II = s * (s - 2.0) * float((x * jp ** (0.5 * (s - 4)) * inner).sum() * hv)

    kv = [conv(v[i]) for i in range(3)]
    dot = r2 * k0 - sum(v[i] * kv[i] for i in range(3))
    term_III = -4.0 * s * float((x * jp ** (0.5 * (s - 2)) * dot).sum() * hv)
    return MomentProduction(float(s), term_I, term_II, term_III)


def moment_production_II_bound(f: G.ScalarField, s: float, gamma: float) -> float:
    """``s(s-2) iint |w|^2 |v-w|^gamma <v>^(s-2) f f``, an upper bound for term II."""
    grid = f.grid
    r2 = grid.speed2()
    k = G.convolve_scalar(G.ScalarField(grid, r2 * f.values), ("pow", gamma, 0.0))
    w = (1.0 + r2) ** (0.5 * (s - 2))
    return s * (s - 2.0) * float((f.values * w * k).sum() * grid.cell_volume)


# --------------------------------------------------------------------------
# symmetry


def equivariance_residual(g: G.ScalarField, f: G.ScalarField, cfg):
    """``||Q(g,f) o T - Q(g o T, f o T)||_1 / ||Q(g,f)||_1`` for the quarter turn.

    Returns ``(residual, relative)``; ``relative`` is False when ``Q(g, f)``
    vanishes and the absolute residual is returned instead.
    """
    from .solver import apply_Q

    if g.grid.n % 2:
        raise ValueError("quarter turn needs even n")
    q = apply_Q(g, f, cfg)
    q_rot = apply_Q(G.rotate_quarter_turn(g), G.rotate_quarter_turn(f), cfg)
    diff = np.abs(G.rotate_quarter_turn_array(q.values) - q_rot.values).sum()
    den = np.abs(q.values).sum()
    if den == 0:
        return float(diff * g.grid.cell_volume), False
    return float(diff / den), True


# --------------------------------------------------------------------------
# transport metrics


def _cost_matrix(x, y, p):
    d = np.sqrt(((x[:, None, :] - y[None, :, :]) ** 2).sum(axis=-1))
    return d**p


def wasserstein(P: G.PointMeasure, Q: G.PointMeasure, p: float = 2.0) -> float:
    """Exact ``W_p`` between two point measures.

    Equal-size clouds with uniform weights are matched by the assignment
    solver; other weights are solved as a transportation linear program.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    if len(P) > MAX_SUPPORT or len(Q) > MAX_SUPPORT:
        raise ValueError(f"supports larger than {MAX_SUPPORT} points; subsample first")
    C = _cost_matrix(P.points, Q.points, p)
    k = len(P)
    uniform = (len(P) == len(Q) and np.all(P.weights == P.weights[0])
               and np.all(Q.weights == Q.weights[0]))
    if uniform:
        rows, cols = optimize.linear_sum_assignment(C)
        total = 0.0
        for r, c in zip(rows, cols):
            total += C[r, c]
        cost = total / k
    else:
        cost = _transport_lp(P.weights, Q.weights, C)
    return float(max(cost, 0.0) ** (1.0 / p))


def _transport_lp(a, b, C):
    m, n = C.shape
    A_eq = np.zeros((m + n, m * n))
    for i in range(m):
        A_eq[i, i * n:(i + 1) * n] = 1.0
    for j in range(n):
        A_eq[m + j, j::n] = 1.0
    res = optimize.linprog(C.ravel(), A_eq=A_eq, b_eq=np.concatenate([a, b]),
                           bounds=(0, None), method="highs")
    if res.status != 0:
        raise RuntimeError(f"transport LP failed: {res.message}")
    return float(res.fun)


def matching_cost_bruteforce(P: G.PointMeasure, Q: G.PointMeasure, p: float = 2.0) -> float:
    """``W_p`` of equal-size uniform clouds by enumerating all matchings (small k only)."""
    C = _cost_matrix(P.points, Q.points, p)
    k = len(P)
    best = math.inf
    for perm in itertools.permutations(range(k)):
        total = 0.0
        for r in range(k):
            total += C[r, perm[r]]
        best = min(best, total)
    return float((best / k) ** (1.0 / p))


def subsample_field(f: G.ScalarField, k: int, seed: int = 0) -> G.PointMeasure:
    """``k`` equally weighted nodes drawn proportionally to node mass.

    Largest-remainder apportionment of ``k`` over the nodes with positive mass
    (ties broken by a seeded permutation); a node can appear several times.
    If ``k`` is at least the number of such nodes, all of them are returned
    with their exact normalized masses.
    """
    if k > MAX_SUPPORT:
        raise ValueError(f"k={k} exceeds {MAX_SUPPORT}")
    if k < 1:
        raise ValueError("k must be >= 1")
    vals = f.values.ravel()
    idx = np.flatnonzero(vals > 0)
    if idx.size == 0:
        raise ValueError("field has no positive mass")
    pts = f.grid.mesh().reshape(3, -1).T
    mass = vals[idx]
    share = mass / mass.sum()
    if k >= idx.size:
        w = share / share.sum()
        return G.PointMeasure(pts[idx], w / w.sum())
    quota = k * share
    counts = np.floor(quota).astype(int)
    left = k - counts.sum()
    if left:
        rng = np.random.default_rng(seed)
        tie = rng.permutation(idx.size)
        order = np.lexsort((tie, -(quota - counts)))
        counts[order[:left]] += 1
    chosen = np.repeat(idx, counts)
    return G.PointMeasure.uniform(pts[chosen])


# --------------------------------------------------------------------------
# singular integrals


@lru_cache(maxsize=32)
def cube_integral(alpha: float, h: float) -> float:
    """``int |z|^alpha dz`` over the cube of side ``h`` centred at 0, ``alpha > -3``.

    Six pyramids with apex at the centre give
    ``3 h^(3+alpha)/(3+alpha) * int_[-1/2,1/2]^2 (1/4 + y^2 + z^2)^(alpha/2)``.
    """
    if alpha <= -3:
        raise ValueError("alpha must exceed -3")
    face, _ = integrate.dblquad(lambda y, z: (0.25 + y * y + z * z) ** (0.5 * alpha),
                                -0.5, 0.5, -0.5, 0.5, epsabs=1e-13, epsrel=1e-12)
    return 3.0 * h ** (3.0 + alpha) / (3.0 + alpha) * face


def singular_integral_sup(f: G.ScalarField, alpha: float) -> float:
    """``max_v int |v - w|^alpha f(w) dw`` with the self cell integrated exactly."""
    if not -3 < alpha < 0:
        raise ValueError("alpha must lie in (-3, 0)")
    h = f.grid.h
    self_value = cube_integral(float(alpha), h) / h**3
    conv = G.convolve_scalar(f, ("pow", float(alpha), self_value))
    return float(conv.max())
