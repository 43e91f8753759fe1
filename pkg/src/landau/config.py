"""Flat ``section.key = value`` run configuration.

Blank lines and ``#`` comments are ignored.  Every key must be known; values
are parsed by the type of the key's default.  Vectors are written as
comma-separated numbers and lists of vectors separate items with ``;``.
"""

from __future__ import annotations

from dataclasses import dataclass

from .kernel import KernelParams
from .solver import SolverConfig


class ConfigError(ValueError):
    pass


def _floats(text):
    return tuple(float(x) for x in text.split(",") if x.strip())


def _vectors(text):
    return tuple(_floats(item) for item in text.split(";") if item.strip())


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_float(text):
    t = text.strip().lower()
    return None if t in ("", "none", "auto") else float(t)


# key -> (parser, default)
SCHEMA = {
    "grid.n": (int, 32),
    "grid.radius": (float, 6.0),
    "kernel.gamma": (float, 1.0),
    "kernel.epsilon": (float, 0.05),
    "solver.epsilon": (float, None),
    "solver.dt_safety": (float, 0.4),
    "solver.t_end": (float, 0.1),
    "solver.scheme": (str, "heun"),
    "solver.picard_iters": (int, 8),
    "solver.picard_tol": (float, 1e-8),
    "solver.form": (str, "divergence"),
    "solver.regularized": (_bool, True),
    "solver.diffusion": (_opt_float, None),
    "solver.active": (str, "ball"),
    "solver.dt": (_opt_float, None),
    "solver.envelope_c0": (float, 0.25),
    "solver.positivity_rtol": (float, 1e-8),
    "scenario.name": (str, "two_bump"),
    "scenario.temperature": (float, 1.0),
    "scenario.centers": (_vectors, ((1.0, 0.0, 0.0), (-1.0, 0.5, 0.0))),
    "scenario.widths": (_floats, (0.6, 0.7)),
    "scenario.weights": (_floats, (0.6, 0.4)),
    "scenario.axis": (int, 0),
    "scenario.sigma_par": (float, 1.0),
    "scenario.sigma_perp": (_opt_float, None),
    "scenario.point": (_floats, (0.0, 0.0, 0.0)),
    "scenario.floor": (float, 0.0),
    "scenario.cutoff": (float, 4.0),
    "scenario.moll_width": (float, 0.8),
    "output.dir": (str, "landau_out"),
    "output.every": (int, 10),
    "output.snapshot_every": (int, 0),
    "output.prefix": (str, "run"),
    "diag.axis": (int, 0),
    "seed": (int, 0),
    "study.eps_list": (_floats, (0.2, 0.1, 0.05)),
    "study.cutoffs": (_floats, (2.0, 3.0, 4.0)),
    "study.points": (_vectors, ((0.5, 0.0, 0.0), (-1.0, 1.0, 0.0), (0.0, -2.0, 1.0),
                                (3.0, 0.0, 0.0), (0.0, 3.5, 0.0))),
    "study.point_weights": (_floats, (0.4, 0.25, 0.2, 0.1, 0.05)),
    "study.k": (int, 256),
    "study.sample_every": (float, 0.05),
    # verify-suite settings and tolerances
    "verify.samples": (int, 1000),
    "verify.kernel_rtol": (float, 1e-6),
    "verify.fd_step": (float, 1e-4),
    "verify.fd_rtol": (float, 1e-5),
    "verify.mass_n": (int, 16),
    "verify.mass_steps": (int, 1000),
    "verify.mass_rtol": (float, 1e-10),
    "verify.drift_n_coarse": (int, 16),
    "verify.drift_n_fine": (int, 32),
    "verify.drift_t_end": (float, 0.02),
    "verify.drift_rtol": (float, 1e-3),
    "verify.refine_lo": (float, 2.5),
    "verify.refine_hi": (float, 6.0),
    "verify.entropy_tol": (float, 1e-8),
    "verify.axisym_tol": (float, 1e-10),
    "verify.equiv_trials": (int, 20),
    "verify.equiv_n": (int, 16),
    "verify.equiv_tol": (float, 1e-12),
    "verify.ellip_n": (int, 32),
    "verify.ellip_axis_frac": (float, 1e-2),
    "verify.line_n": (int, 32),
    "verify.line_steps": (int, 5),
    "verify.line_factor": (float, 2.0),
    "verify.line_rtol": (float, 0.10),
    "verify.appendix_n": (int, 48),
    "verify.appendix_s": (float, 4.0),
    "verify.appendix_rtol": (float, 0.05),
    "verify.appendix_slack": (float, 1e-10),
    "verify.appendix_s2_tol": (float, 1e-10),
}


@dataclass
class RunConfig:
    values: dict

    def __getitem__(self, key):
        return self.values[key]

    def kernel_params(self) -> KernelParams:
        return KernelParams(self["kernel.gamma"], self.epsilon)

    @property
    def epsilon(self) -> float:
        se = self.values.get("solver.epsilon")
        return self["kernel.epsilon"] if se is None else se

    def solver_config(self) -> SolverConfig:
        return SolverConfig(
            params=self.kernel_params(),
            dt_safety=self["solver.dt_safety"],
            t_end=self["solver.t_end"],
            scheme=self["solver.scheme"],
            picard_iters=self["solver.picard_iters"],
            picard_tol=self["solver.picard_tol"],
            form=self["solver.form"],
            regularized=self["solver.regularized"],
            diffusion=self["solver.diffusion"],
            active=self["solver.active"],
            dt=self["solver.dt"],
            envelope_c0=self["solver.envelope_c0"],
            positivity_rtol=self["solver.positivity_rtol"],
        )


def parse_lines(lines, base: dict | None = None) -> dict:
    out = dict(base or {})
    for num, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {num}: expected key=value, got {raw.strip()!r}")
        key, val = (x.strip() for x in line.split("=", 1))
        set_value(out, key, val)
    return out


def set_value(values: dict, key: str, text: str):
    if key not in SCHEMA:
        raise ConfigError(f"unknown config key: {key}")
    parser = SCHEMA[key][0]
    try:
        values[key] = parser(text)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {text!r} ({exc})") from None


def load(path=None, overrides=()) -> RunConfig:
    """Defaults, then the file (if any), then ``key=value`` overrides; validated."""
    values = {k: d for k, (_, d) in SCHEMA.items()}
    if path is not None:
        try:
            with open(path) as fh:
                values = parse_lines(fh, values)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must be key=value, got {item!r}")
        k, v = item.split("=", 1)
        set_value(values, k.strip(), v.strip())
    cfg = RunConfig(values)
    validate(cfg)
    return cfg


def validate(cfg: RunConfig):
    try:
        cfg.solver_config()
        from .grid import VelocityGrid

        VelocityGrid(cfg["grid.n"], cfg["grid.radius"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if cfg["output.every"] < 1:
        raise ConfigError("output.every must be >= 1")
    if cfg["diag.axis"] not in (0, 1, 2):
        raise ConfigError("diag.axis must be 0, 1 or 2")
