"""Command line entry point ``landau``.

Exit codes: 0 success, 1 configuration or input error, 2 numerical
instability (or, for ``verify``, a failed check).
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from . import config as CF
from . import diagnostics as D
from . import grid as G
from . import kernel as K
from . import scenarios as S
from .solver import InstabilityError, run_nonlinear


def build_initial(cfg: CF.RunConfig) -> G.ScalarField:
    grid = G.VelocityGrid(cfg["grid.n"], cfg["grid.radius"])
    name = cfg["scenario.name"]
    if name == "maxwellian":
        return S.maxwellian(cfg["scenario.temperature"], grid)
    if name == "two_bump":
        return S.two_bump(grid)
    if name == "multi_bump":
        return S.multi_bump(cfg["scenario.centers"], cfg["scenario.widths"], cfg["scenario.weights"], grid)
    if name == "line_gaussian":
        sp = cfg["scenario.sigma_perp"]
        return S.line_gaussian(cfg["scenario.axis"], cfg["scenario.sigma_par"],
                               0.5 * grid.h if sp is None else sp, grid)
    if name == "point":
        return S.point_surrogate(cfg["scenario.point"], grid, cfg["scenario.floor"])
    if name == "mollified_cutoff":
        pm = G.PointMeasure(cfg["study.points"], cfg["study.point_weights"])
        return S.mollified_cutoff(pm, cfg["scenario.cutoff"], cfg["scenario.moll_width"], grid)
    raise CF.ConfigError(f"unknown scenario.name: {name}")


def cmd_run(cfg: CF.RunConfig) -> int:
    f0 = build_initial(cfg)
    sc = cfg.solver_config()
    outdir = cfg["output.dir"]
    os.makedirs(outdir, exist_ok=True)
    prefix = os.path.join(outdir, cfg["output.prefix"])
    every, snap = cfg["output.every"], cfg["output.snapshot_every"]
    axis = cfg["diag.axis"]
    last = {}

    with D.CsvWriter(prefix + ".csv") as writer:
        def emit(state, coeffs):
            writer.write(D.compute_record(state.f, coeffs, sc, t=state.t, leaked_mass=state.leaked_mass,
                                          axis=axis))
            last["written"] = state.step_count

        def callback(state, coeffs):
            last["state"], last["coeffs"] = state, coeffs
            if state.step_count % every == 0:
                emit(state, coeffs)
            if state.step_count == 0 or (snap and state.step_count % snap == 0):
                G.write_lndf(f"{prefix}_{state.step_count:07d}.lndf", state.f, sc.params.gamma, state.t)

        try:
            run_nonlinear(f0, sc, callback)
        except InstabilityError as exc:
            print(f"instability: {exc}", file=sys.stderr)
            return 2
        st = last["state"]
        if last.get("written") != st.step_count:
            emit(st, last["coeffs"])
        G.write_lndf(f"{prefix}_final.lndf", st.f, sc.params.gamma, st.t)
    print(f"finished t={st.t:.6g} steps={st.step_count} leaked={st.leaked_mass:.3e} "
          f"positivity_violations={st.positivity_violations} envelope={st.envelope:.6g}")
    return 0


def cmd_verify(suite: str, cfg: CF.RunConfig) -> int:
    from .verify import SUITES, run_suite

    if suite != "all" and suite not in SUITES:
        print(f"unknown suite {suite!r}; choose from {', '.join(SUITES + ('all',))}", file=sys.stderr)
        return 1
    rep = run_suite(suite, cfg)
    n_fail = sum(1 for _, ok in rep.results if not ok)
    print(f"{len(rep.results) - n_fail}/{len(rep.results)} checks passed")
    return 0 if rep.ok else 2


def cmd_study(kind: str, cfg: CF.RunConfig) -> int:
    sc = cfg.solver_config()
    grid = G.VelocityGrid(cfg["grid.n"], cfg["grid.radius"])
    if kind == "epsilon":
        report = S.study_epsilon(build_initial(cfg), cfg["study.eps_list"], sc, cfg["study.k"], cfg["seed"])
    elif kind == "cutoff":
        pm = G.PointMeasure(cfg["study.points"], cfg["study.point_weights"])
        report = S.study_initial_cutoff(pm, cfg["study.cutoffs"], sc, grid, cfg["scenario.moll_width"],
                                        cfg["study.k"], cfg["seed"])
    elif kind == "relaxation":
        report = S.study_relaxation(build_initial(cfg), sc, cfg["study.sample_every"])
    else:
        print(f"unknown study kind {kind!r}; choose epsilon, cutoff or relaxation", file=sys.stderr)
        return 1
    os.makedirs(cfg["output.dir"], exist_ok=True)
    path = os.path.join(cfg["output.dir"], f"{cfg['output.prefix']}_study_{kind}.json")
    S.write_report(path, report)
    print(f"report written to {path}")
    return 2 if report.get("aborted") else 0


TABLE_HEADER = ("z1", "z2", "z3", "a11", "a12", "a13", "a22", "a23", "a33", "b1", "b2", "b3", "c",
                "ae11", "ae12", "ae13", "ae22", "ae23", "ae33", "be1", "be2", "be3", "ce", "mu_eps")
_UPPER = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))


def _safe(fn, *args):
    try:
        return np.asarray(fn(*args), dtype=float)
    except (K.KernelDomainError, K.UnsupportedParameterError):
        return None


def read_offsets(path):
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.reader(fh):
            if not rec or rec[0].strip().startswith("#"):
                continue
            try:
                vals = [float(x) for x in rec[:3]]
            except ValueError:
                if not rows:
                    continue  # header
                raise
            if len(vals) != 3:
                raise ValueError(f"offset row needs three numbers: {rec}")
            rows.append(vals)
    return np.array(rows, dtype=float).reshape(-1, 3)


def cmd_kernel_table(cfg: CF.RunConfig, offsets_path: str, out=None) -> int:
    out = out or sys.stdout
    p = cfg.kernel_params()
    try:
        zs = read_offsets(offsets_path)
    except (OSError, ValueError) as exc:
        print(f"cannot read offsets: {exc}", file=sys.stderr)
        return 1
    w = csv.writer(out)
    w.writerow(TABLE_HEADER)
    nan3 = [float("nan")] * 3
    for z in zs:
        a = _safe(K.eval_a, z, p.gamma)
        b = _safe(K.eval_b, z, p.gamma)
        c = _safe(K.eval_c, z, p.gamma)
        ae = K.eval_a_reg(z, p)
        be = K.eval_b_reg(z, p)
        ce = K.eval_c_reg(z, p)
        mu = _safe(K.eval_mollifier, float(np.linalg.norm(z)), p)
        row = list(z)
        row += [a[i, j] for i, j in _UPPER] if a is not None else [float("nan")] * 6
        row += list(b) if b is not None else nan3
        row += [float(c)] if c is not None else [float("nan")]
        row += [ae[i, j] for i, j in _UPPER] + list(be) + [float(ce)]
        row += [float(mu)] if mu is not None else [float("nan")]
        w.writerow([f"{float(x):.17g}" for x in row])
    return 0


def _parser():
    ap = argparse.ArgumentParser(prog="landau", description="Landau equation numerical laboratory")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="integrate one scenario")
    r.add_argument("config")
    v = sub.add_parser("verify", help="run a property suite")
    v.add_argument("suite")
    v.add_argument("--set", action="append", default=[], metavar="KEY=VAL")
    v.add_argument("--config", default=None)
    s = sub.add_parser("study", help="run a convergence study")
    s.add_argument("kind")
    s.add_argument("config")
    k = sub.add_parser("kernel-table", help="tabulate kernels at offsets")
    k.add_argument("config")
    k.add_argument("offsets")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(CF.load(args.config))
        if args.command == "verify":
            return cmd_verify(args.suite, CF.load(args.config, args.set))
        if args.command == "study":
            return cmd_study(args.kind, CF.load(args.config))
        if args.command == "kernel-table":
            return cmd_kernel_table(CF.load(args.config), args.offsets)
    except CF.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, K.UnsupportedParameterError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 1
    return 1


if __name__ == "__main__":
    sys.exit(main())
