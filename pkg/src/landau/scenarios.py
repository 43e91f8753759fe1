"""Initial data on the lattice and the three convergence studies.

Every constructor returns a nonnegative field of lattice mass 1.  Point data
(Dirac masses) are represented by Gaussians whose width is at least ``h/2``.
"""

from __future__ import annotations

import json
import math
import warnings

import numpy as np
import scipy.fft as sfft

from . import diagnostics as D
from . import grid as G
from .solver import InstabilityError, SolverConfig, run_nonlinear


def _normalize(grid, values):
    values = np.where(values > 0, values, 0.0)
    total = values.sum() * grid.cell_volume
    if not total > 0:
        raise ValueError("field has no mass on the lattice")
    return G.ScalarField(grid, values / total)


def _gaussian(grid, center, cov_diag):
    v = grid.mesh()
    q = sum((v[i] - center[i]) ** 2 / cov_diag[i] for i in range(3))
    return np.exp(-0.5 * q) / math.sqrt((2 * math.pi) ** 3 * np.prod(cov_diag))


def maxwellian(T_temp: float, grid: G.VelocityGrid, center=(0.0, 0.0, 0.0), mass: float = 1.0) -> G.ScalarField:
    """Lattice samples of ``(2 pi T)^(-3/2) exp(-|v - u|^2 / 2T)``, normalized to ``mass``.

    Warns with the lost tail mass when ``R < 5 sqrt(T)``.
    """
    if not T_temp > 0:
        raise ValueError("temperature must be positive")
    raw = _gaussian(grid, center, (T_temp,) * 3)
    if grid.radius < 5.0 * math.sqrt(T_temp):
        tail = 1.0 - raw.sum() * grid.cell_volume
        warnings.warn(f"lattice half-width {grid.radius} < 5 sqrt(T); tail mass {tail:.3e}")
    f = _normalize(grid, raw)
    return f * mass if mass != 1.0 else f


def point_surrogate(point, grid: G.VelocityGrid, floor: float = 0.0) -> G.ScalarField:
    """Gaussian stand-in for a Dirac mass at ``point``, width ``max(h/2, floor)``."""
    w = max(0.5 * grid.h, floor)
    return _normalize(grid, _gaussian(grid, point, (w * w,) * 3))


def surrogate_width(grid: G.VelocityGrid, floor: float = 0.0) -> float:
    return max(0.5 * grid.h, floor)


def line_gaussian(axis: int, sigma_par: float, sigma_perp: float, grid: G.VelocityGrid) -> G.ScalarField:
    """Anisotropic Gaussian elongated along a coordinate axis."""
    if axis not in (0, 1, 2):
        raise ValueError("axis must be 0, 1 or 2")
    if sigma_perp < 0.5 * grid.h * (1.0 - 1e-12):
        raise ValueError(f"sigma_perp={sigma_perp} below resolution h/2={0.5 * grid.h}")
    cov = [sigma_perp**2] * 3
    cov[axis] = sigma_par**2
    return _normalize(grid, _gaussian(grid, (0.0, 0.0, 0.0), cov))


def multi_bump(centers, widths, weights, grid: G.VelocityGrid) -> G.ScalarField:
    """Mixture of isotropic Gaussians with the given weights (summing to 1)."""
    weights = np.asarray(weights, dtype=float)
    if np.any(weights <= 0) or abs(weights.sum() - 1.0) > 1e-12:
        raise ValueError("weights must be positive and sum to 1")
    if not len(centers) == len(widths) == len(weights):
        raise ValueError("centers, widths and weights differ in length")
    acc = np.zeros((grid.n,) * 3)
    for c, s, w in zip(centers, widths, weights):
        acc += w * _gaussian(grid, c, (s * s,) * 3)
    return _normalize(grid, acc)


TWO_BUMP = dict(centers=((1.0, 0.0, 0.0), (-1.0, 0.5, 0.0)), widths=(0.6, 0.7), weights=(0.6, 0.4))


def two_bump(grid: G.VelocityGrid) -> G.ScalarField:
    """The standard spread, non-symmetric test datum."""
    return multi_bump(TWO_BUMP["centers"], TWO_BUMP["widths"], TWO_BUMP["weights"], grid)


def wendland(r, width):
    """Unnormalized C2 Wendland bump ``(1 - r/w)^4 (4 r/w + 1)`` supported in ``r < w``."""
    x = np.asarray(r, dtype=float) / width
    return np.where(x < 1.0, (1.0 - x) ** 4 * (4.0 * x + 1.0), 0.0)


def mollified_cutoff(base, n_cut: float, moll_width: float, grid: G.VelocityGrid) -> G.ScalarField:
    """Restrict ``base`` to ``|v| <= n_cut``, renormalize, smooth with a radial bump.

    ``base`` is a ``PointMeasure`` or a ``ScalarField``.  Each point mass is
    replaced by the lattice-sampled bump of radius ``max(moll_width, h)``
    scaled to the point's weight, so mass is exact on the lattice.
    """
    width = max(moll_width, grid.h)
    if isinstance(base, G.PointMeasure):
        inside = np.linalg.norm(base.points, axis=1) <= n_cut
        alpha = float(base.weights[inside].sum())
        if not alpha > 0:
            raise ValueError(f"no mass inside |v| <= {n_cut}")
        v = grid.mesh()
        acc = np.zeros((grid.n,) * 3)
        for p, w in zip(base.points[inside], base.weights[inside]):
            r = np.sqrt(sum((v[i] - p[i]) ** 2 for i in range(3)))
            bump = wendland(r, width)
            s = bump.sum() * grid.cell_volume
            if not s > 0:
                raise ValueError(f"bump around {p} misses the lattice")
            acc += (w / alpha) * bump / s
        return G.ScalarField(grid, acc / (acc.sum() * grid.cell_volume))
    G._check_same(base.grid, grid)
    keep = np.where(grid.speed2() <= n_cut * n_cut, base.values, 0.0)
    alpha = keep.sum() * grid.cell_volume
    if not alpha > 0:
        raise ValueError(f"no mass inside |v| <= {n_cut}")
    kernel = G.ScalarField(grid, keep / alpha)
    d = G._offsets(grid.n, grid.h)
    dx, dy, dz = np.ix_(d, d, d)
    table = wendland(np.sqrt(dx * dx + dy * dy + dz * dz), width)
    table /= table.sum() * grid.cell_volume
    spec = sfft.rfftn(table)
    out = G._spectral_apply(kernel.values, [spec], grid.n)[0] * grid.cell_volume
    return _normalize(grid, out)


def matched_maxwellian(f: G.ScalarField) -> G.ScalarField:
    """Maxwellian with the mass, momentum and energy of ``f``."""
    m = f.mass()
    u = D.momentum(f) / m
    T = (2.0 / 3.0) * (D.energy(f) / m - 0.5 * float(u @ u))
    return maxwellian(T, f.grid, center=tuple(u), mass=m)


def l1_distance(f: G.ScalarField, g: G.ScalarField) -> float:
    G._check_same(f.grid, g.grid)
    return float(np.abs(f.values - g.values).sum() * f.grid.cell_volume)


# --------------------------------------------------------------------------
# studies


def _run(f0, cfg, trace=None):
    """Run and return (final field, aborted message or None)."""
    try:
        states = run_nonlinear(f0, cfg, trace)
    except InstabilityError as exc:
        return exc.state.f, str(exc)
    return states[-1].f, None


def _slope(t, y):
    t = np.asarray(t)
    y = np.asarray(y)
    A = np.vstack([t, np.ones_like(t)]).T
    return float(np.linalg.lstsq(A, y, rcond=None)[0][0])


def study_epsilon(f0: G.ScalarField, eps_list, cfg: SolverConfig, k: int = 256, seed: int = 0) -> dict:
    """Solutions for decreasing ``eps`` at a common horizon ``cfg.t_end``.

    Reports L1 and subsampled W2 distances between consecutive levels and the
    energy growth rate ``dE/dt`` per level (least-squares slope of ``E(t)``).
    """
    eps_list = [float(e) for e in eps_list]
    if len(eps_list) < 3:
        raise ValueError("need at least three epsilon levels")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be strictly decreasing")
    finals, slopes, aborted = [], [], None
    for eps in eps_list:
        c = cfg.with_(params=type(cfg.params)(cfg.params.gamma, eps), regularized=True, diffusion=None)
        ts, es = [], []

        def trace(state, _coeffs, ts=ts, es=es):
            ts.append(state.t)
            es.append(D.energy(state.f))

        fin, aborted = _run(f0, c, trace)
        if aborted:
            break
        finals.append(fin)
        slopes.append(_slope(ts, es))
    l1 = [l1_distance(a, b) for a, b in zip(finals, finals[1:])]
    w2 = [D.wasserstein(D.subsample_field(a, k, seed), D.subsample_field(b, k, seed), 2.0)
          for a, b in zip(finals, finals[1:])]
    ratios = [s2 / s1 if s1 != 0 else math.nan for s1, s2 in zip(slopes, slopes[1:])]
    return {
        "kind": "epsilon",
        "n": f0.grid.n,
        "radius": f0.grid.radius,
        "gamma": cfg.params.gamma,
        "horizon": cfg.t_end,
        "surrogate_width": surrogate_width(f0.grid),
        "eps": eps_list[:len(finals)],
        "l1_consecutive": l1,
        "w2_consecutive": w2,
        "energy_slope": slopes,
        "energy_slope_over_eps_mass": [s / (e * f0.mass()) for s, e in zip(slopes, eps_list)],
        "energy_slope_ratio": ratios,
        "subsample_k": k,
        "seed": seed,
        "aborted": aborted,
    }


def study_initial_cutoff(f0: G.PointMeasure, n_list, cfg: SolverConfig, grid: G.VelocityGrid,
                         moll_width: float, k: int = 256, seed: int = 0) -> dict:
    """Cutoff-and-mollify ``f0`` at radii ``n_list``, run each to ``cfg.t_end``.

    Reports the initial energies (against the cloud's own energy), and the
    distances between consecutive horizon solutions.
    """
    n_list = [float(x) for x in n_list]
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError("n_list must be increasing")
    cloud_energy = 0.5 * float((f0.weights * (f0.points**2).sum(axis=1)).sum())
    init_e, finals, aborted = [], [], None
    for nc in n_list:
        d0 = mollified_cutoff(f0, nc, moll_width, grid)
        init_e.append(D.energy(d0))
        fin, aborted = _run(d0, cfg)
        if aborted:
            break
        finals.append(fin)
    l1 = [l1_distance(a, b) for a, b in zip(finals, finals[1:])]
    w2 = [D.wasserstein(D.subsample_field(a, k, seed), D.subsample_field(b, k, seed), 2.0)
          for a, b in zip(finals, finals[1:])]
    return {
        "kind": "cutoff",
        "n": grid.n,
        "radius": grid.radius,
        "gamma": cfg.params.gamma,
        "horizon": cfg.t_end,
        "cutoffs": n_list[:len(finals)],
        "mollifier_width": max(moll_width, grid.h),
        "initial_energy": init_e,
        "cloud_energy": cloud_energy,
        "l1_consecutive": l1,
        "w2_consecutive": w2,
        "subsample_k": k,
        "seed": seed,
        "aborted": aborted,
    }


def study_relaxation(f0: G.ScalarField, cfg: SolverConfig, sample_every: float = 0.05) -> dict:
    """L1 distance to the matched Maxwellian along a run up to ``cfg.t_end``."""
    target = matched_maxwellian(f0)
    times, dist = [], []
    next_t = [0.0]

    def trace(state, _coeffs):
        if state.t >= next_t[0] - 1e-12 or state.t >= cfg.t_end * (1 - 1e-12):
            times.append(state.t)
            dist.append(l1_distance(state.f, target))
            next_t[0] = state.t + sample_every

    _, aborted = _run(f0, cfg, trace)
    d = np.asarray(dist)
    # first sample after which the trace never increases again
    settle = None
    for i in range(len(d)):
        if np.all(np.diff(d[i:]) <= 0):
            settle = times[i]
            break
    return {
        "kind": "relaxation",
        "n": f0.grid.n,
        "radius": f0.grid.radius,
        "gamma": cfg.params.gamma,
        "horizon": cfg.t_end,
        "surrogate_width": surrogate_width(f0.grid),
        "target_mass": target.mass(),
        "target_momentum": D.momentum(target).tolist(),
        "initial_momentum": D.momentum(f0).tolist(),
        "times": times,
        "l1_to_maxwellian": dist,
        "monotone_after": settle,
        "aborted": aborted,
    }


def write_report(path, report: dict) -> None:
    """Write a study report as indented JSON (key-value with nested lists)."""
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(type(x))
