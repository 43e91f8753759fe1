"""Measurement routines shared by the verify suites and the test-suite.

Each function runs one experiment and returns the measured numbers; the
callers compare them against tolerances.
"""

from __future__ import annotations

import math

import numpy as np

from . import diagnostics as D
from . import grid as G
from . import kernel as K
from . import scenarios as S
from .solver import SolverConfig, apply_Q, coefficients, run_nonlinear, cfl_dt, _advance, active_mask

TWO_BUMP_R = 6.0


# --------------------------------------------------------------------------
# kernel


def _random_offsets(rng, count, rmin, rmax):
    d = rng.normal(size=(count, 3))
    d /= np.linalg.norm(d, axis=1)[:, None]
    r = np.exp(rng.uniform(np.log(rmin), np.log(rmax), size=count))
    return d * r[:, None]


def _fd_div_matrix(fa, z, step):
    """``d_j A_ij`` by centred differences of the matrix function ``fa``."""
    out = np.zeros(3)
    for j in range(3):
        e = np.zeros(3)
        e[j] = step
        out += (fa(z + e)[:, j] - fa(z - e)[:, j]) / (2 * step)
    return out


def _fd_div_vector(fb, z, step):
    out = 0.0
    for j in range(3):
        e = np.zeros(3)
        e[j] = step
        out += (fb(z + e)[j] - fb(z - e)[j]) / (2 * step)
    return out


def kernel_identities(samples=1000, seed=0, fd_step=1e-4):
    """Worst relative errors of the kernel identities over random ``(z, gamma)``.

    Returns a dict with the eigenstructure error, the ``a(z) z`` residual and
    the finite-difference errors of ``b = div a`` and ``c = div b`` for the
    exact and the regularized kernel.  Differences use the step ``fd_step |z|``.
    """
    rng = np.random.default_rng(seed)
    zs = _random_offsets(rng, samples, 0.05, 5.0)
    gammas = rng.uniform(-3.0, 1.0, size=samples)
    gammas[gammas <= -3.0 + 1e-9] = -2.999
    eig = az = bfd = cfd = 0.0
    for z, gm in zip(zs, gammas):
        r = float(np.linalg.norm(z))
        a = K.eval_a(z, gm)
        w = np.linalg.eigvalsh(a)
        target = np.array([0.0, r ** (gm + 2), r ** (gm + 2)])
        eig = max(eig, float(np.abs(w - target).max() / r ** (gm + 2)))
        az = max(az, float(np.linalg.norm(a @ z) / (np.linalg.norm(a, 2) * r)))
        step = fd_step * r
        b = K.eval_b(z, gm)
        bd = _fd_div_matrix(lambda x: K.eval_a(x, gm), z, step)
        bfd = max(bfd, float(np.linalg.norm(bd - b) / np.linalg.norm(b)))
        c = float(K.eval_c(z, gm))
        cd = _fd_div_vector(lambda x: K.eval_b(x, gm), z, step)
        # c vanishes as gamma -> -3; scale by the size of the summed terms instead
        cfd = max(cfd, abs(cd - c) / (2.0 * float(np.linalg.norm(b)) / r + abs(c)))
    # regularized kernel, radii covering both blending annuli
    breg = creg = 0.0
    eps_vals = rng.uniform(0.05, 0.5, size=samples // 4)
    for eps in eps_vals:
        gm = float(rng.uniform(-3.0, 1.0))
        p = K.KernelParams(gm, float(eps))
        z = _random_offsets(rng, 1, 0.3 * eps, 3.0 / eps)[0]
        r = float(np.linalg.norm(z))
        step = fd_step * r
        b = K.eval_b_reg(z, p)
        bd = _fd_div_matrix(lambda x: K.eval_a_reg(x, p), z, step)
        breg = max(breg, float(np.linalg.norm(bd - b) / np.linalg.norm(b)))
        c = float(K.eval_c_reg(z, p))
        cd = _fd_div_vector(lambda x: K.eval_b_reg(x, p), z, step)
        scale = 2.0 * float(np.linalg.norm(b)) / r + abs(c)
        creg = max(creg, abs(cd - c) / scale)
    return {"eigenstructure": eig, "a_z": az, "b_div_a": bfd, "c_div_b": cfd,
            "b_div_a_reg": breg, "c_div_b_reg": creg}


# --------------------------------------------------------------------------
# conservation


def two_bump_field(n, radius=TWO_BUMP_R):
    return S.two_bump(G.VelocityGrid(n, radius))


def mass_balance(n=32, steps=1000, cfg: SolverConfig | None = None):
    """Worst ``|M(t) - M(0) + leaked(t)| / M(0)`` over a divergence-form run."""
    cfg = cfg or SolverConfig()
    cfg = cfg.with_(form="divergence", max_steps=steps, t_end=1e9 if cfg.max_steps is None else cfg.t_end)
    f0 = two_bump_field(n)
    m0 = f0.mass()
    worst = [0.0, 0]

    def cb(state, _c):
        err = abs(state.f.mass() - m0 + state.leaked_mass) / m0
        worst[0] = max(worst[0], err)
        worst[1] = state.step_count

    run_nonlinear(f0, cfg, cb)
    return {"max_rel_error": worst[0], "steps": worst[1]}


def exact_drift(n, t_end, scheme="explicit-euler", dt_safety=0.9):
    """Momentum and energy drift along an exact-kernel run without diffusion.

    Momentum drift is ``max_t |P(t) - P(0)| / sqrt(2 E(0) M(0))``; energy drift
    is ``max_t |E(t) - E(0)| / E(0)``.
    """
    cfg = SolverConfig(K.KernelParams(1.0, 0.05), regularized=False, diffusion=0.0,
                       scheme=scheme, dt_safety=dt_safety, t_end=t_end)
    f0 = two_bump_field(n)
    m0, p0, e0 = f0.mass(), D.momentum(f0), D.energy(f0)
    out = {"momentum": 0.0, "energy": 0.0, "steps": 0}

    def cb(state, _c):
        p = D.momentum(state.f)
        e = D.energy(state.f)
        out["momentum"] = max(out["momentum"], float(np.linalg.norm(p - p0)) / math.sqrt(2 * e0 * m0))
        out["energy"] = max(out["energy"], abs(e - e0) / e0)
        out["steps"] = state.step_count

    run_nonlinear(f0, cfg, cb)
    return out


def energy_growth_constant(n=32, eps_list=(0.2, 0.1, 0.05), t_end=0.02, dt_safety=0.9):
    """``C = (dE/dt) / (eps M)`` per eps, from the least-squares slope of ``E(t)``."""
    f0 = two_bump_field(n)
    out = []
    for eps in eps_list:
        cfg = SolverConfig(K.KernelParams(1.0, eps), t_end=t_end, dt_safety=dt_safety)
        ts, es = [], []

        def cb(state, _c, ts=ts, es=es):
            ts.append(state.t)
            es.append(D.energy(state.f))

        run_nonlinear(f0, cfg, cb)
        slope = S._slope(ts, es)
        out.append(slope / (eps * f0.mass()))
    return out


def entropy_trace(f0, cfg):
    """Per-step entropy increments and the final state of a run."""
    hs, mins = [], []

    def cb(state, _c):
        hs.append(D.entropy(state.f))
        mins.append(float(state.f.values.min()))

    states = run_nonlinear(f0, cfg, cb)
    return np.diff(hs), np.array(mins), states[-1]


def maxwellian_residual(n, radius=6.0, params=None, form="divergence"):
    """``||Q(M, M)||_1 / ||M||_1`` for the unit Maxwellian."""
    params = params or K.KernelParams(1.0, 0.05)
    m = S.maxwellian(1.0, G.VelocityGrid(n, radius))
    q = apply_Q(m, m, SolverConfig(params, form=form))
    return q.l1() / m.l1()


# --------------------------------------------------------------------------
# symmetry


def random_pair(n, rng, radius=6.0):
    """Two random positive fields: smooth Gaussian mixtures times nodal noise."""
    grid = G.VelocityGrid(n, radius)
    out = []
    for _ in range(2):
        k = rng.integers(1, 4)
        centers = rng.uniform(-2, 2, size=(k, 3))
        widths = rng.uniform(0.6, 1.5, size=k)
        w = rng.uniform(0.2, 1.0, size=k)
        f = S.multi_bump(centers, widths, w / w.sum(), grid).values
        f = f * rng.uniform(0.5, 1.5, size=f.shape)
        out.append(G.ScalarField(grid, f / (f.sum() * grid.cell_volume)))
    return out


def equivariance_trials(n=16, trials=20, seed=0, cfg: SolverConfig | None = None):
    rng = np.random.default_rng(seed)
    base = cfg or SolverConfig()
    res = []
    for i in range(trials):
        g, f = random_pair(n, rng)
        form = "divergence" if i % 2 == 0 else "nondivergence"
        r, _ = D.equivariance_residual(g, f, base.with_(form=form))
        res.append(r)
    return res


def axisymmetric_field(n, radius=6.0):
    """Quarter-turn invariant, non-radial datum: four bumps around the third axis."""
    grid = G.VelocityGrid(n, radius)
    centers = [(1.2, 0.3, 0.4), (-0.3, 1.2, 0.4), (-1.2, -0.3, 0.4), (0.3, -1.2, 0.4)]
    return S.multi_bump(centers, [0.6] * 4, [0.25] * 4, grid)


def axisymmetry_run(f0, cfg):
    worst = [0.0]

    def cb(state, _c):
        worst[0] = max(worst[0], D.axisym_deviation(state.f))

    run_nonlinear(f0, cfg, cb)
    return worst[0]


# --------------------------------------------------------------------------
# line concentration


def line_rate(n=32, steps=5, radius=6.0, sigma_par=1.0, gamma=1.0):
    """Transverse-moment growth rate at ``t = 0+`` for a line Gaussian on the first axis.

    Forward difference over ``steps`` explicit Euler steps at the stability
    limit, exact kernel, no added diffusion.  Returns ``(rate, line_functional)``.
    """
    grid = G.VelocityGrid(n, radius)
    f0 = S.line_gaussian(0, sigma_par, 0.5 * grid.h, grid)
    cfg = SolverConfig(K.KernelParams(gamma, 0.05), regularized=False, diffusion=0.0,
                       scheme="explicit-euler", dt_safety=1.0, t_end=1e9, max_steps=steps)
    tm0 = D.transverse_moment(f0, 0)
    states = run_nonlinear(f0, cfg)
    last = states[-1]
    rate = (D.transverse_moment(last.f, 0) - tm0) / last.t
    return rate, D.line_functional(f0, gamma)


def line_ellipticity_history(n=32, t_end=0.5, radius=6.0, samples=11, gamma=1.0):
    """``(t, min_v e1.abar e1 / max scale)`` along an exact-kernel run from a line Gaussian."""
    grid = G.VelocityGrid(n, radius)
    f0 = S.line_gaussian(0, 1.0, 0.5 * grid.h, grid)
    cfg = SolverConfig(K.KernelParams(gamma, 0.05), regularized=False, diffusion=0.0,
                       scheme="explicit-euler", dt_safety=0.9, t_end=t_end)
    marks = list(np.linspace(0.0, t_end, samples))
    hist = []

    def cb(state, coeffs):
        if marks and state.t >= marks[0] - 1e-12:
            while marks and state.t >= marks[0] - 1e-12:
                marks.pop(0)
            a = G.convolve_coefficients(state.f, cfg.params, regularized=False, parts="a")
            _, along = D.ellipticity(a, gamma, 0)
            hist.append((state.t, along / a.scale()))

    run_nonlinear(f0, cfg, cb)
    return hist


# --------------------------------------------------------------------------
# moment production


def moment_rate_comparison(n=32, s=4.0, gamma=1.0, radius=6.0, dt_safety=0.5):
    """``I + II + III`` against a centred difference of ``M_s`` on an exact-kernel run.

    Two Heun steps from two-bump data; the production terms are taken at the
    middle state.  Returns ``(production, fd_rate)``.
    """
    f0 = two_bump_field(n, radius)
    cfg = SolverConfig(K.KernelParams(gamma, 0.05), regularized=False, diffusion=0.0,
                       scheme="heun", dt_safety=dt_safety)
    dt = cfl_dt(f0, cfg)
    mask = active_mask(f0.grid, cfg)
    grid = f0.grid

    def cf(v, _t):
        return coefficients(G.ScalarField(grid, v), cfg)

    v0 = np.where(mask, f0.values, 0.0)
    v1, _ = _advance(v0, cf, dt, grid, cfg, mask)
    v2, _ = _advance(v1, cf, dt, grid, cfg, mask)
    f1 = G.ScalarField(grid, v1)
    mp = D.moment_production(f1, s, gamma)
    fd = (D.moment(G.ScalarField(grid, v2), s) - D.moment(G.ScalarField(grid, v0), s)) / (2 * dt)
    return mp.total, fd


def II_bound_trials(n=16, trials=20, seed=0):
    """``(term_II, bound)`` on random positive fields with random ``s`` and ``gamma``."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(trials):
        g, _ = random_pair(n, rng)
        s = float(rng.uniform(2.1, 8.0))
        gm = float(rng.uniform(0.05, 1.0))
        mp = D.moment_production(g, s, gm)
        out.append((mp.term_II, D.moment_production_II_bound(g, s, gm)))
    return out


def s2_identity(n=32, gamma=1.0):
    """``(I + II + III, |I|)`` at ``s = 2`` for two-bump data."""
    f = two_bump_field(n)
    mp = D.moment_production(f, 2.0, gamma, allow_s2=True)
    return mp.total, abs(mp.term_I)
