"""Explicit time integration of the regularized Landau equation.

The right-hand side is ``Q(g, f) + eps_d * Laplacian(f)`` where ``Q`` uses
coefficients convolved from ``g``.  Three discrete forms are available:

``divergence``
    ``div(abar grad f - bbar f)`` as the centred lattice version of the
    symmetric weak form (see ``grid.weak_coefficients``).  Mass, momentum
    and energy are conserved to rounding and no flux leaves the active region.
``face-average``
    The same equation with face-averaged coefficients (``grid.divergence_flux``).
    Conserves mass but not momentum or energy.
``nondivergence``
    ``abar : D^2 f - cbar f`` with centred second differences.

The active region is either the whole lattice or the ball ``|v| <= R``;
nodes outside it are held at zero and no flux crosses its boundary, so the
leaked mass reported in ``TrajectoryState`` stays zero for the flux forms.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import grid as G
from .kernel import KernelParams

SCHEMES = ("explicit-euler", "heun")
FORMS = ("divergence", "face-average", "nondivergence")
ACTIVE = ("ball", "cube")


class InstabilityError(RuntimeError):
    """Raised when the iterate blows up; carries the state at detection."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class CFLViolationError(ValueError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    """Integration settings.

    Parameters
    ----------
    params : KernelParams
        Interaction exponent and regularization scale.
    dt_safety : float
        Fraction of the stability bound used as time step, in ``(0, 1]``.
    t_end : float
        Final time of ``run_nonlinear``.
    scheme : {"explicit-euler", "heun"}
    picard_iters : int
        Maximum number of fixed-point iterations.
    picard_tol : float
        L1 stopping tolerance between successive Picard iterates.
    form : {"divergence", "face-average", "nondivergence"}
    regularized : bool
        Mollified kernel (default) or the exact one.
    diffusion : float or None
        Added isotropic diffusion; ``None`` means ``epsilon`` for the
        regularized kernel and 0 for the exact kernel.
    active : {"ball", "cube"}
        Active region of the lattice.
    dt : float or None
        Forced time step.  Bypasses the stability bound and the positivity
        retries; meant for stability experiments.
    record_every : int
        Keep every k-th state in the returned trajectory (0: first and last).
    envelope_c0 : float
        Exponent of the Gaussian envelope ``C exp(-c0 |v|^2)``.
    positivity_rtol : float
        Tolerated ``-min f / max f`` before a step is retried with half the step.
    coefficient_hook : callable or None
        ``hook(g) -> CoefficientField`` replacing the convolution (test hook).
    max_steps : int or None
        Stop ``run_nonlinear`` after this many steps even before ``t_end``.
    """

    params: KernelParams = field(default_factory=KernelParams)
    dt_safety: float = 0.4
    t_end: float = 0.5
    scheme: str = "heun"
    picard_iters: int = 8
    picard_tol: float = 1e-8
    form: str = "divergence"
    regularized: bool = True
    diffusion: float | None = None
    active: str = "ball"
    dt: float | None = None
    record_every: int = 0
    envelope_c0: float = 0.25
    positivity_rtol: float = 1e-8
    coefficient_hook: Callable | None = None
    max_steps: int | None = None

    def __post_init__(self):
        if not 0.0 < self.dt_safety <= 1.0:
            raise ValueError(f"dt_safety={self.dt_safety} outside (0, 1]")
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.form not in FORMS:
            raise ValueError(f"form must be one of {FORMS}")
        if self.active not in ACTIVE:
            raise ValueError(f"active must be one of {ACTIVE}")
        if self.picard_iters < 0:
            raise ValueError("picard_iters must be >= 0")
        if not self.picard_tol > 0:
            raise ValueError("picard_tol must be positive")
        if self.dt is not None and not self.dt > 0:
            raise ValueError("forced dt must be positive")
        if self.diffusion is not None and self.diffusion < 0:
            raise ValueError("diffusion must be nonnegative")

    @property
    def eps_diffusion(self) -> float:
        if self.diffusion is not None:
            return float(self.diffusion)
        return self.params.epsilon if self.regularized else 0.0

    def with_(self, **kw) -> SolverConfig:
        return replace(self, **kw)


@dataclass
class TrajectoryState:
    t: float
    f: G.ScalarField
    leaked_mass: float = 0.0
    step_count: int = 0
    dt: float = 0.0
    envelope: float = math.nan
    positivity_violations: int = 0


# --------------------------------------------------------------------------
# operator assembly


def active_mask(grid: G.VelocityGrid, cfg: SolverConfig):
    return grid.ball_mask() if cfg.active == "ball" else None


def interior(grid: G.VelocityGrid, cfg: SolverConfig):
    return G.interior_mask((grid.n,) * 3, active_mask(grid, cfg))


def coefficients(g: G.ScalarField, cfg: SolverConfig) -> G.CoefficientField:
    """Coefficients of ``g`` needed by the configured form."""
    if cfg.coefficient_hook is not None:
        return cfg.coefficient_hook(g)
    if cfg.form == "divergence":
        return G.weak_coefficients(g, cfg.params, cfg.regularized, interior(g.grid, cfg))
    parts = "ab" if cfg.form == "face-average" else "ac"
    return G.convolve_coefficients(g, cfg.params, regularized=cfg.regularized, parts=parts)


def _check_density(g: G.ScalarField, tol=1e-8):
    mx = float(np.max(np.abs(g.values))) if g.values.size else 0.0
    if g.values.min() < -tol * max(mx, 1e-300):
        raise ValueError(f"negative density below tolerance: min={g.values.min():.3e}")


def _operator(coeffs, values, grid, cfg, mask, diffusion):
    """Discrete ``Q + diffusion * Laplacian`` applied to ``values``; returns (L, outflow)."""
    if cfg.form == "divergence":
        inner = G.interior_mask(values.shape, mask)
        return G.weak_divergence(coeffs.abar, coeffs.bbar, values, grid.h, inner, mask, diffusion), 0.0
    if cfg.form == "face-average":
        L, _ = G.flux_divergence(coeffs.abar, coeffs.bbar, values, grid.h, mask, diffusion)
        return L, 0.0
    f = values if mask is None else np.where(mask, values, 0.0)
    fs = G.ScalarField(grid, f)
    L = G.hessian_apply(coeffs, fs, diffusion).values
    if coeffs.cbar is not None:
        L = L - coeffs.cbar * f
    if mask is not None:
        L = np.where(mask, L, 0.0)
    return L, 0.0


def apply_Q(g: G.ScalarField, f: G.ScalarField, cfg: SolverConfig, coeffs=None) -> G.ScalarField:
    """Discrete collision operator ``Q(g, f)`` in the configured form (no added diffusion)."""
    G._check_same(g.grid, f.grid)
    _check_density(g)
    if coeffs is None:
        coeffs = coefficients(g, cfg)
    L, _ = _operator(coeffs, f.values, f.grid, cfg, active_mask(f.grid, cfg), 0.0)
    return G.ScalarField(f.grid, L)


# --------------------------------------------------------------------------
# step size


def max_eigenvalue(a6: np.ndarray, mask=None) -> float:
    """Largest eigenvalue over nodes of packed symmetric matrices."""
    if mask is not None:
        a6 = a6[:, mask]
    if a6.size == 0:
        return 0.0
    return float(G.sym_eig_extremes(a6)[1].max())


def _dt_bound(coeffs: G.CoefficientField, grid, cfg, safety, mask):
    h = grid.h
    eps = cfg.eps_diffusion
    rho = max_eigenvalue(coeffs.abar, mask) if coeffs.abar is not None else 0.0
    denom = 2.0 * 3.0 * (max(rho, 0.0) + eps)
    dt = safety * h * h / denom if denom > 0 else math.inf
    if cfg.form != "nondivergence" and coeffs.bbar is not None:
        bb = coeffs.bbar if mask is None else coeffs.bbar[:, mask]
        bmax = float(np.sqrt((bb * bb).sum(axis=0)).max()) if bb.size else 0.0
        if bmax > 0:
            dt = min(dt, safety * h / (2.0 * bmax))
    elif cfg.form == "nondivergence" and coeffs.cbar is not None:
        cc = coeffs.cbar if mask is None else coeffs.cbar[mask]
        cmax = float(np.abs(cc).max()) if cc.size else 0.0
        if cmax > 0:
            dt = min(dt, safety / cmax)
    return dt


def cfl_dt(g: G.ScalarField, cfg: SolverConfig, coeffs=None) -> float:
    """Largest stable explicit step for coefficients of ``g``, times ``dt_safety``.

    ``dt_safety * h^2 / (2 d (rho_max + eps))`` with ``d = 3``, further limited by
    ``dt_safety * h / (2 max |bbar|)`` in divergence form.
    """
    if coeffs is None:
        coeffs = coefficients(g, cfg)
    return _dt_bound(coeffs, g.grid, cfg, cfg.dt_safety, active_mask(g.grid, cfg))


# --------------------------------------------------------------------------
# single steps


def _advance(values, coeff_fn, dt, grid, cfg, mask, t=0.0):
    """One Euler or Heun step. ``coeff_fn(vals, t)`` returns coefficients."""
    eps = cfg.eps_diffusion
    c1 = coeff_fn(values, t)
    k1, out1 = _operator(c1, values, grid, cfg, mask, eps)
    if cfg.scheme == "explicit-euler":
        return values + dt * k1, dt * out1
    mid = values + dt * k1
    c2 = coeff_fn(mid, t + dt)
    k2, out2 = _operator(c2, mid, grid, cfg, mask, eps)
    return values + 0.5 * dt * (k1 + k2), 0.5 * dt * (out1 + out2)


def step_linear_frozen(f: G.ScalarField, g: G.ScalarField, dt: float, cfg: SolverConfig,
                       return_leak: bool = False):
    """Advance ``df/dt = Q(g, f) + eps_d Laplacian f`` by one step with coefficients of ``g``.

    Refuses steps above ``cfl_dt(g, cfg)``.  With ``return_leak`` also returns
    the mass that left the active region during the step.
    """
    G._check_same(f.grid, g.grid)
    _check_density(g)
    coeffs = coefficients(g, cfg)
    bound = cfl_dt(g, cfg, coeffs)
    if dt > bound * (1.0 + 1e-12):
        raise CFLViolationError(f"dt={dt:.6g} exceeds stability bound {bound:.6g}")
    mask = active_mask(f.grid, cfg)
    vals = f.values if mask is None else np.where(mask, f.values, 0.0)
    new, leak = _advance(vals, lambda v, t: coeffs, dt, f.grid, cfg, mask)
    out = G.ScalarField(f.grid, new)
    return (out, leak) if return_leak else out


# --------------------------------------------------------------------------
# nonlinear run


def envelope_constant(f: G.ScalarField, c0: float, mask=None) -> float:
    """Smallest ``C`` with ``f <= C exp(-c0 |v|^2)`` on the active nodes."""
    w = f.values * np.exp(c0 * f.grid.speed2())
    if mask is not None:
        w = w[mask]
    return float(w.max())


def run_nonlinear(f0: G.ScalarField, cfg: SolverConfig, callback=None):
    """Integrate ``df/dt = Q(f, f) + eps_d Laplacian f`` up to ``cfg.t_end``.

    Coefficients are recomputed from the current iterate at every stage.
    ``callback(state, coeffs)`` is called after every accepted step and once
    at the start.  Returns the states kept by ``cfg.record_every``.

    Raises
    ------
    InstabilityError
        If any ``|f|`` exceeds ``1e6`` times the initial maximum.
    """
    grid = f0.grid
    _check_density(f0)
    mask = active_mask(grid, cfg)
    vals = f0.values.copy() if mask is None else np.where(mask, f0.values, 0.0)
    fmax0 = float(np.abs(vals).max())
    limit = 1e6 * fmax0

    def coeff_fn(v, _t):
        return coefficients(G.ScalarField(grid, v), cfg)

    state = TrajectoryState(0.0, G.ScalarField(grid, vals), 0.0, 0, 0.0,
                            envelope_constant(G.ScalarField(grid, vals), cfg.envelope_c0, mask))
    coeffs = coeff_fn(vals, 0.0)
    if callback is not None:
        callback(state, coeffs)
    kept = [state]
    t, leaked, steps, violations = 0.0, 0.0, 0, 0
    spatial_undershoot = False
    while t < cfg.t_end * (1.0 - 1e-12):
        if cfg.dt is not None:
            dt = cfg.dt
        else:
            dt = _dt_bound(coeffs, grid, cfg, cfg.dt_safety, mask)
        dt = min(dt, cfg.t_end - t)
        pre = coeffs
        retried = False
        while True:
            new, leak = _advance(vals, lambda v, tt: pre if tt == t else coeff_fn(v, tt),
                                 dt, grid, cfg, mask, t)
            if not np.all(np.isfinite(new)) or np.abs(new).max() > limit:
                st = TrajectoryState(t + dt, G.ScalarField(grid, np.nan_to_num(new)), leaked + leak,
                                     steps + 1, dt, math.nan, violations)
                raise InstabilityError(
                    f"instability at step {steps + 1}, t={t + dt:.6g}: max|f|="
                    f"{np.nanmax(np.abs(new)):.3e} > 1e6 * initial max {fmax0:.3e} (dt={dt:.3e})", st)
            undershoot = -float(new.min()) / float(new.max())
            if undershoot <= cfg.positivity_rtol:
                break
            if retried:
                if undershoot > prev_undershoot / 1.5:
                    # halving did not help: the undershoot is spatial, stop retrying
                    spatial_undershoot = True
                    new, leak, dt = prev_new, prev_leak, 2.0 * dt
                violations += 1
                break
            if cfg.dt is not None or spatial_undershoot:
                violations += 1
                break
            prev_new, prev_leak, prev_undershoot = new, leak, undershoot
            dt *= 0.5
            retried = True
        vals = new
        t += dt
        leaked += leak
        steps += 1
        coeffs = coeff_fn(vals, t)
        fs = G.ScalarField(grid, vals)
        state = TrajectoryState(t, fs, leaked, steps, dt,
                                envelope_constant(fs, cfg.envelope_c0, mask), violations)
        if callback is not None:
            callback(state, coeffs)
        done = t >= cfg.t_end * (1.0 - 1e-12) or (cfg.max_steps is not None and steps >= cfg.max_steps)
        if done or (cfg.record_every and steps % cfg.record_every == 0):
            kept.append(state)
        if done:
            break
    if kept[-1] is not state:
        kept.append(state)
    return kept


# --------------------------------------------------------------------------
# Picard iteration


@dataclass
class PicardResult:
    field: G.ScalarField
    converged: bool
    iterations: int
    residuals: list


def picard_fixed_point(f0: G.ScalarField, horizon: float, cfg: SolverConfig,
                       n_steps: int | None = None) -> PicardResult:
    """Fixed point of ``g -> Psi(g)``, the solution map of the frozen-coefficient equation.

    ``g^0`` is ``f0`` held constant in time; ``g^{k+1}`` solves the linear
    equation on ``[0, horizon]`` with coefficients recomputed from ``g^k`` at
    every time level.  Stops when the L1 distance of successive iterates at
    the horizon is at most ``picard_tol``.
    """
    if cfg.picard_iters < 1:
        raise ValueError("picard_iters must be >= 1")
    grid = f0.grid
    _check_density(f0)
    mask = active_mask(grid, cfg)
    v0 = f0.values.copy() if mask is None else np.where(mask, f0.values, 0.0)
    if horizon <= 0:
        return PicardResult(G.ScalarField(grid, v0), True, 0, [])
    if n_steps is None:
        dt0 = cfg.dt if cfg.dt is not None else cfl_dt(G.ScalarField(grid, v0), cfg)
        n_steps = max(1, math.ceil(horizon / dt0))
    dt = horizon / n_steps
    hv = grid.cell_volume

    prev = [v0] * (n_steps + 1)
    residuals = []
    converged = False
    it = 0
    for it in range(1, cfg.picard_iters + 1):
        cache = {}

        def coeff_fn(_v, tt, _prev=prev, _cache=cache):
            m = int(round(tt / dt))
            if m not in _cache:
                gk = G.ScalarField(grid, _prev[m])
                c = coefficients(gk, cfg)
                if dt > _dt_bound(c, grid, cfg, 1.0, mask) * (1.0 + 1e-12):
                    raise CFLViolationError(f"Picard step dt={dt:.3g} unstable for iterate at t={tt:.3g}")
                _cache.clear()
                _cache[m] = c
            return _cache[m]

        traj = [v0]
        vals = v0
        for m in range(n_steps):
            vals, _ = _advance(vals, coeff_fn, dt, grid, cfg, mask, m * dt)
            traj.append(vals)
        r = float(np.abs(traj[-1] - prev[-1]).sum() * hv)
        residuals.append(r)
        prev = traj
        if r <= cfg.picard_tol:
            converged = True
            break
    if not converged:
        warnings.warn(f"Picard iteration did not reach tol {cfg.picard_tol} in {it} iterations "
                      f"(last residual {residuals[-1]:.3e})", RuntimeWarning)
    return PicardResult(G.ScalarField(grid, prev[-1]), converged, it, residuals)
