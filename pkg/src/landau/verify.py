"""Property suites behind ``landau verify``.

Every check prints one line ``PASS|FAIL name measured=... tol=...``; tolerances
come from the ``verify.*`` config keys.
"""

from __future__ import annotations

import numpy as np

from . import checks as C
from . import diagnostics as D
from . import grid as G
from . import scenarios as S
from .solver import SolverConfig

SUITES = ("kernel", "conservation", "equivariance", "ellipticity", "lemma-line", "appendix-a")


class Report:
    def __init__(self, out=print):
        self.results = []
        self._out = out

    def check(self, name, ok, measured, tol):
        ok = bool(ok)
        self.results.append((name, ok))
        self._out(f"{'PASS' if ok else 'FAIL'} {name} measured={measured} tol={tol}")
        return ok

    @property
    def ok(self):
        return all(r[1] for r in self.results)


def _fmt(x):
    if isinstance(x, (list, tuple)):
        return "[" + ", ".join(_fmt(v) for v in x) + "]"
    return f"{x:.4g}"


def suite_kernel(cfg, rep: Report):
    res = C.kernel_identities(cfg["verify.samples"], cfg["seed"], cfg["verify.fd_step"])
    tol = cfg["verify.kernel_rtol"]
    rep.check("kernel.eigenstructure", res["eigenstructure"] <= tol, _fmt(res["eigenstructure"]), tol)
    rep.check("kernel.a_z_zero", res["a_z"] <= tol, _fmt(res["a_z"]), tol)
    ftol = cfg["verify.fd_rtol"]
    for key in ("b_div_a", "c_div_b", "b_div_a_reg", "c_div_b_reg"):
        rep.check(f"kernel.{key}", res[key] <= ftol, _fmt(res[key]), ftol)


def suite_conservation(cfg, rep: Report):
    sc = cfg.solver_config()
    mb = C.mass_balance(cfg["verify.mass_n"], cfg["verify.mass_steps"], sc)
    rep.check("conservation.mass", mb["max_rel_error"] <= cfg["verify.mass_rtol"],
              _fmt(mb["max_rel_error"]), cfg["verify.mass_rtol"])
    t_end = cfg["verify.drift_t_end"]
    coarse = C.exact_drift(cfg["verify.drift_n_coarse"], t_end)
    fine = C.exact_drift(cfg["verify.drift_n_fine"], t_end)
    tol = cfg["verify.drift_rtol"]
    lo, hi = cfg["verify.refine_lo"], cfg["verify.refine_hi"]
    for key in ("momentum", "energy"):
        rep.check(f"conservation.{key}_drift", fine[key] <= tol, _fmt(fine[key]), tol)
        ratio = coarse[key] / fine[key] if fine[key] > 0 else float("inf")
        rep.check(f"conservation.{key}_refinement", lo <= ratio <= hi, _fmt(ratio), f"[{lo}, {hi}]")
    n = cfg["verify.mass_n"]
    dh, mins, _ = C.entropy_trace(C.two_bump_field(n), sc.with_(t_end=t_end))
    worst = float(dh.max()) if dh.size else 0.0
    rep.check("conservation.entropy_monotone", worst <= cfg["verify.entropy_tol"], _fmt(worst),
              cfg["verify.entropy_tol"])
    dev = C.axisymmetry_run(C.axisymmetric_field(n), sc.with_(t_end=t_end))
    rep.check("conservation.axisymmetry", dev <= cfg["verify.axisym_tol"], _fmt(dev), cfg["verify.axisym_tol"])


def suite_equivariance(cfg, rep: Report):
    res = C.equivariance_trials(cfg["verify.equiv_n"], cfg["verify.equiv_trials"], cfg["seed"],
                                cfg.solver_config())
    tol = cfg["verify.equiv_tol"]
    rep.check("equivariance.quarter_turn", max(res) <= tol, _fmt(max(res)), tol)


def suite_ellipticity(cfg, rep: Report):
    grid = G.VelocityGrid(cfg["verify.ellip_n"], cfg["grid.radius"])
    sc = cfg.solver_config()
    three = S.multi_bump([(1, 0, 0), (-1, 0, 0), (0, 1.5, 0)], [0.5] * 3, [1 / 3] * 3, grid)
    coeffs = G.convolve_coefficients(three, sc.params, regularized=sc.regularized, parts="a")
    emin, _ = D.ellipticity(coeffs, sc.params.gamma)
    rep.check("ellipticity.three_bumps_positive", emin > 0, _fmt(emin), "> 0")
    line = S.line_gaussian(0, 1.0, 0.5 * grid.h, grid)
    coeffs = G.convolve_coefficients(line, sc.params, regularized=sc.regularized, parts="a")
    _, along = D.ellipticity(coeffs, sc.params.gamma, 0)
    frac = along / coeffs.scale()
    tol = cfg["verify.ellip_axis_frac"]
    rep.check("ellipticity.line_axis_degenerate", frac <= tol, _fmt(frac), tol)


def suite_lemma_line(cfg, rep: Report):
    rate, lf = C.line_rate(cfg["verify.line_n"], cfg["verify.line_steps"], cfg["grid.radius"],
                           gamma=cfg["kernel.gamma"])
    target = cfg["verify.line_factor"] * lf
    err = abs(rate - target) / abs(target)
    rep.check("lemma-line.rate_law", err <= cfg["verify.line_rtol"],
              f"rate={rate:.5g} target={target:.5g} rel_err={err:.3g}", cfg["verify.line_rtol"])


def suite_appendix_a(cfg, rep: Report):
    n = cfg["verify.appendix_n"]
    s = cfg["verify.appendix_s"]
    prod, fd = C.moment_rate_comparison(n, s, cfg["kernel.gamma"], cfg["grid.radius"])
    err = abs(prod - fd) / abs(fd)
    rep.check("appendix-a.production_vs_fd", err <= cfg["verify.appendix_rtol"],
              f"I+II+III={prod:.6g} fd={fd:.6g} rel_err={err:.3g}", cfg["verify.appendix_rtol"])
    pairs = C.II_bound_trials(16, 20, cfg["seed"])
    slack = cfg["verify.appendix_slack"]
    worst = max(ii - b for ii, b in pairs)
    rep.check("appendix-a.II_bound", all(ii <= b + slack for ii, b in pairs), _fmt(worst), slack)
    total, scale = C.s2_identity(n, cfg["kernel.gamma"])
    rel = abs(total) / scale
    rep.check("appendix-a.s2_identity", rel <= cfg["verify.appendix_s2_tol"], _fmt(rel),
              cfg["verify.appendix_s2_tol"])


_RUNNERS = {
    "kernel": suite_kernel,
    "conservation": suite_conservation,
    "equivariance": suite_equivariance,
    "ellipticity": suite_ellipticity,
    "lemma-line": suite_lemma_line,
    "appendix-a": suite_appendix_a,
}


def run_suite(name, cfg, out=print) -> Report:
    if name != "all" and name not in _RUNNERS:
        raise KeyError(name)
    rep = Report(out)
    for key in (SUITES if name == "all" else (name,)):
        _RUNNERS[key](cfg, rep)
    return rep


def default_solver_config() -> SolverConfig:
    return SolverConfig()


__all__ = ["SUITES", "run_suite", "Report", "np"]
