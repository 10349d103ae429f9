"""Command-line front end: ``ductwave <command> --config run.json``.

Commands: analyze, spectrum, solve, validate, decompose, growth. Numeric
tables are written as CSV with one header line and 17 significant digits;
structured reports as JSON. Every run also writes manifest.json with the
configuration, tool version and wall times.

Exit codes: 0 ok, 1 validation failure, 2 configuration error, 3 refusal
because the profile is not certified stable.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .dispersion import boundary_N, build_table, eval_N
from .errors import DuctwaveError, InstabilityError, ProfileError
from .kernels import kernel, line_kernel
from .oracle import growth_probe, solve_reference
from .profile import profile_from_spec, profile_to_spec, validate, y_quadrature
from .solution import (
    AnalyticFamily,
    GaussianPacket,
    GridSampled,
    XGrid,
    cut_component_density,
    full_field,
    transport_decomposition,
    y_average,
)
from .spectrum import analyze_spectrum

COMMANDS = ("analyze", "spectrum", "solve", "validate", "decompose", "growth")
EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_UNSTABLE = 0, 1, 2, 3

DEFAULT_TOLERANCES = {
    "memory": 1e-4,
    "oracle": 1e-3,
    "contour": 1e-6,
    "plemelj": 1e-5,
    "initial": 1e-6,
}


class ConfigError(ValueError):
    """Invalid run configuration; ``path`` names the offending field."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path


def _pow2(n):
    return isinstance(n, int) and n >= 2 and (n & (n - 1)) == 0


@dataclass
class RunConfig:
    profile: dict
    x_n: int = 1024
    x_extent: float = 40.0
    x_center: float = 0.0
    n_y: int = 64
    Q: int = 513
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    data: dict = field(default_factory=lambda: {"u0": {"amplitude": 1.0, "sigma": 1.0, "k0": 2.0, "shape": "cos"}})
    times: list = field(default_factory=lambda: [0.5, 1.0, 2.0])
    out: str = "out"
    T: float = 50.0
    samples: int = 32
    lambdas: list = field(default_factory=list)

    @classmethod
    def from_dict(cls, raw, base_dir="."):
        if not isinstance(raw, dict):
            raise ConfigError("$", "configuration must be a JSON object")
        if "profile" not in raw:
            raise ConfigError("profile", "missing")
        known = {"profile", "x", "n_y", "Q", "tolerances", "data", "times", "out", "growth", "decompose"}
        for key in raw:
            if key not in known:
                raise ConfigError(key, "unknown field")
        cfg = cls(profile=raw["profile"])
        x = raw.get("x", {})
        if not isinstance(x, dict):
            raise ConfigError("x", "must be an object")
        cfg.x_n = x.get("n", cfg.x_n)
        cfg.x_extent = x.get("extent", cfg.x_extent)
        cfg.x_center = x.get("center", cfg.x_center)
        cfg.n_y = raw.get("n_y", cfg.n_y)
        cfg.Q = raw.get("Q", cfg.Q)
        tol = dict(DEFAULT_TOLERANCES)
        for key, val in raw.get("tolerances", {}).items():
            if key not in tol:
                raise ConfigError(f"tolerances.{key}", "unknown tolerance")
            tol[key] = val
        cfg.tolerances = tol
        if "data" in raw:
            cfg.data = raw["data"]
        if isinstance(cfg.data, dict) and "file" in cfg.data:
            cfg.data = dict(cfg.data, file=os.path.join(base_dir, cfg.data["file"]))
        cfg.times = raw.get("times", cfg.times)
        cfg.out = raw.get("out", cfg.out)
        growth = raw.get("growth", {})
        cfg.T = growth.get("T", cfg.T)
        cfg.samples = growth.get("samples", cfg.samples)
        cfg.lambdas = raw.get("decompose", {}).get("lambdas", [])
        cfg.check()
        return cfg

    def check(self):
        if not _pow2(self.x_n):
            raise ConfigError("x.n", f"grid size must be a power of two, got {self.x_n!r}")
        if not _pow2(self.n_y):
            raise ConfigError("n_y", f"y-node count must be a power of two, got {self.n_y!r}")
        if not isinstance(self.Q, int) or self.Q < 3:
            raise ConfigError("Q", "cut grid needs an integer >= 3")
        if not isinstance(self.x_extent, (int, float)) or self.x_extent <= 0:
            raise ConfigError("x.extent", "must be positive")
        for key, val in self.tolerances.items():
            if not isinstance(val, (int, float)) or val <= 0:
                raise ConfigError(f"tolerances.{key}", "must be positive")
        if not isinstance(self.times, list) or any(not isinstance(t, (int, float)) for t in self.times):
            raise ConfigError("times", "must be a list of numbers")
        if any(t < 0 for t in self.times) or any(b < a for a, b in zip(self.times, self.times[1:])):
            raise ConfigError("times", "must be non-negative and ascending")
        if not isinstance(self.T, (int, float)) or self.T <= 8:
            raise ConfigError("growth.T", "must exceed 8")
        try:
            profile_from_spec(self.profile)
        except (ProfileError, KeyError, TypeError, ValueError) as exc:
            raise ConfigError("profile", str(exc)) from None

    def to_dict(self):
        return asdict(self)


# ----------------------------------------------------------------------------
# building blocks


def _grid(cfg):
    return XGrid(cfg.x_n, float(cfg.x_extent), float(cfg.x_center))


def _packet(spec, path, extent):
    if spec is None:
        return None
    if not isinstance(spec, dict):
        raise ConfigError(path, "packet must be an object")
    allowed = {"amplitude", "x0", "sigma", "k0", "shape"}
    for key in spec:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}", "unknown packet field")
    try:
        return GaussianPacket(extent=extent, **spec)
    except DuctwaveError as exc:
        raise ConfigError(path, str(exc)) from None


def _data(cfg, grid):
    spec = cfg.data
    if not isinstance(spec, dict):
        raise ConfigError("data", "must be an object")
    if "file" in spec:
        try:
            with np.load(spec["file"]) as f:
                y, u0 = f["y"], f["u0"]
                u1 = f["u1"] if "u1" in f else np.zeros_like(u0)
        except (OSError, KeyError) as exc:
            raise ConfigError("data.file", str(exc)) from None
        try:
            return GridSampled(grid, y, u0, u1)
        except DuctwaveError as exc:
            raise ConfigError("data.file", str(exc)) from None
    for key in spec:
        if key not in ("u0", "u1"):
            raise ConfigError(f"data.{key}", "unknown data field")
    return AnalyticFamily(_packet(spec.get("u0"), "data.u0", grid.extent), _packet(spec.get("u1"), "data.u1", grid.extent))


def _source(profile, cfg):
    return profile if profile.kind == "pl" else build_table(profile, cfg.Q)


def _fmt_t(t):
    return f"{t:g}"


def _write_atomic(path, text):
    folder = os.path.dirname(path) or "."
    os.makedirs(folder, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-")
    with os.fdopen(fd, "w") as f:
        f.write(text)
    os.replace(tmp, path)


def write_csv(path, header, columns):
    cols = [np.asarray(c, dtype=float).ravel() for c in columns]
    lines = [",".join(header)]
    for row in zip(*cols):
        lines.append(",".join("%.17g" % v for v in row))
    _write_atomic(path, "\n".join(lines) + "\n")


def write_json(path, obj):
    _write_atomic(path, json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


# ----------------------------------------------------------------------------
# commands


def cmd_analyze(cfg, out):
    profile = profile_from_spec(cfg.profile)
    report = validate(profile)
    lam, N, dN = build_table(profile, cfg.Q).rows()
    write_csv(os.path.join(out, "dispersion.csv"), ["lambda", "re_N", "im_N", "re_Nprime", "im_Nprime"],
              [lam, N.real, N.imag, dN.real, dN.imag])
    write_json(os.path.join(out, "analysis.json"), {
        "kind": report.kind,
        "direction": report.direction,
        "m_range": list(report.m_range),
        "violations": list(report.violations),
        "accepted": report.accepted,
    })
    return EXIT_OK


def cmd_spectrum(cfg, out):
    profile = profile_from_spec(cfg.profile)
    spec = analyze_spectrum(profile)
    write_json(os.path.join(out, "spectrum.json"), spec.to_dict())
    return EXIT_OK


def _stable_spectrum(profile):
    spec = analyze_spectrum(profile)
    if not spec.stable:
        raise InstabilityError(f"profile is {spec.verdict}; refusing the quasi-explicit solution", spec.complex_roots)
    return spec


def cmd_solve(cfg, out):
    if not cfg.times:
        return EXIT_OK
    profile = profile_from_spec(cfg.profile)
    spec = _stable_spectrum(profile)
    grid = _grid(cfg)
    data = _data(cfg, grid)
    _travel_warning(spec, grid, cfg.times)
    snaps = full_field(spec, _source(profile, cfg), data, grid, cfg.times, n_y=cfg.n_y, tol=cfg.tolerances["memory"])
    for s in snaps:
        tag = _fmt_t(s.t)
        write_csv(os.path.join(out, f"mean_t{tag}.csv"), ["x", "a_u", "p"], [s.x, s.a_u, s.p])
        X = np.repeat(s.x, s.y.size)
        Y = np.tile(s.y, s.x.size)
        write_csv(os.path.join(out, f"field_t{tag}.csv"), ["x", "y", "u"], [X, Y, s.u.ravel()])
    return EXIT_OK


def _travel_warning(spec, grid, times):
    speed = max(abs(spec.lambda_minus or 0.0), abs(spec.lambda_plus or 0.0))
    if times and speed * max(times) > 0.5 * grid.extent:
        print(f"warning: travel distance {speed * max(times):.3g} exceeds half the periodic cell "
              f"{0.5 * grid.extent:.3g}; the solution wraps around", file=sys.stderr)


def cmd_decompose(cfg, out):
    profile = profile_from_spec(cfg.profile)
    spec = _stable_spectrum(profile)
    grid = _grid(cfg)
    data = _data(cfg, grid)
    if not cfg.times:
        return EXIT_OK
    source = _source(profile, cfg)
    parts = transport_decomposition(spec, source, data, grid, cfg.times, n_y=cfg.n_y)
    for d in parts:
        for name, values in d.components.items():
            write_csv(os.path.join(out, f"component_{name}_t{_fmt_t(d.t)}.csv"), ["x", name], [d.x, values])
            if name == "a_p":
                continue
            for lam in cfg.lambdas:
                dens = cut_component_density(spec, source, data, grid, float(lam), d.t, name)
                write_csv(os.path.join(out, f"component_{name}_lambda{_fmt_t(lam)}_t{_fmt_t(d.t)}.csv"),
                          ["x", name], [d.x, dens])
    return EXIT_OK


def cmd_growth(cfg, out):
    profile = profile_from_spec(cfg.profile)
    grid = None
    data = _data(cfg, _grid(cfg))
    rep = growth_probe(profile, data, T=float(cfg.T), samples=cfg.samples, grid=grid)
    last = "norm_full_over_1pt_pow4" if rep.full_power == 4 else "norm_full_over_1pt_cubed"
    first = "norm_mean_over_1pt" if rep.mean_power == 1 else "norm_mean_over_1pt_sq"
    write_csv(os.path.join(out, "norms.csv"), ["t", "norm_mean", "norm_full", first, last],
              [rep.times, rep.norm_mean, rep.norm_full, rep.normalized_mean, rep.normalized_full])
    write_json(os.path.join(out, "growth.json"), {
        "slope_mean": rep.slope_mean,
        "slope_full": rep.slope_full,
        "exp_rate_mean": rep.rate_mean,
        "exp_rate_full": rep.rate_full,
        "fit_window": list(rep.fit_window),
    })
    return EXIT_OK


def _rel(a, b):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


def validation_checks(cfg):
    """Run the check suite; returns a list of dicts with name, value, tol, passed."""
    tol = cfg.tolerances
    profile = profile_from_spec(cfg.profile)
    spec = _stable_spectrum(profile)
    source = _source(profile, cfg)
    grid = _grid(cfg)
    data = _data(cfg, grid)
    checks = []

    def add(name, value, limit):
        checks.append({"name": name, "value": float(value), "tol": float(limit), "passed": bool(value <= limit)})

    # contour deformation: pole + cut assembly against the line contour
    ys = (-0.8, 0.1, 0.7)
    worst = 0.0
    for kt in (0.5, 3.0):
        for ell in (0, 1):
            for y in ys:
                ref = line_kernel(profile, ell, kt, y)
                val = kernel(spec, source, ell, kt, np.array([y]))[0]
                worst = max(worst, abs(val - ref) / max(1.0, abs(ref)))
    add("contour_deformation", worst, tol["contour"])
    # boundary values as limits from above
    if profile.kind != "pl":
        a, b = profile.m_minus, profile.m_plus
        lam = a + (b - a) * np.array([0.3, 0.6])
        off = eval_N(profile, lam + 1e-7j)
        on = boundary_N(profile, lam, 1)
        add("plemelj_limit", np.max(np.abs(off - on)), tol["plemelj"])
    # t = 0 consistency
    y, w = y_quadrature(profile, cfg.n_y)
    u0, u1 = data.samples(grid, y)
    s0 = full_field(spec, source, data, grid, 0.0, n_y=cfg.n_y, tol=tol["memory"])
    add("initial_mean", np.max(np.abs(s0.a_u - y_average(u0, w))), tol["initial"])
    add("initial_field", np.max(np.abs(s0.u - u0)), tol["initial"])
    # oracle equivalence
    times = [t for t in cfg.times if t > 0]
    if times:
        ours = full_field(spec, source, data, grid, times, n_y=cfg.n_y, tol=tol["memory"])
        refs = solve_reference(profile, data, grid, times, n_y=cfg.n_y)
        for s, r in zip(ours, refs):
            add(f"oracle_mean_t{_fmt_t(s.t)}", _rel(s.a_u, r.a_u), tol["oracle"])
            add(f"oracle_field_t{_fmt_t(s.t)}", _rel(s.u, r.u), tol["oracle"])
    return checks


def cmd_validate(cfg, out):
    checks = validation_checks(cfg)
    ok = all(c["passed"] for c in checks)
    write_json(os.path.join(out, "validate.json"), {"passed": ok, "checks": checks})
    for c in checks:
        print(f"{'PASS' if c['passed'] else 'FAIL'} {c['name']}: {c['value']:.3e} (tol {c['tol']:.1e})")
    return EXIT_OK if ok else EXIT_FAIL


_HANDLERS = {
    "analyze": cmd_analyze,
    "spectrum": cmd_spectrum,
    "solve": cmd_solve,
    "validate": cmd_validate,
    "decompose": cmd_decompose,
    "growth": cmd_growth,
}


def run(command, cfg):
    """Execute one command; returns the exit status."""
    if command not in _HANDLERS:
        raise ConfigError("command", f"unknown command {command!r}")
    out = cfg.out
    os.makedirs(out, exist_ok=True)
    start = time.perf_counter()
    try:
        status = _HANDLERS[command](cfg, out)
    except InstabilityError as exc:
        roots = ", ".join(f"{z.real:.12g}{z.imag:+.12g}j" for z in exc.roots) or "none isolated"
        print(f"refused: {exc} (complex roots: {roots})", file=sys.stderr)
        status = EXIT_UNSTABLE
    except DuctwaveError as exc:
        print(f"error: {exc}", file=sys.stderr)
        status = EXIT_FAIL
    wall = time.perf_counter() - start
    write_json(os.path.join(out, "manifest.json"), {
        "command": command,
        "version": __version__,
        "config": cfg.to_dict(),
        "profile": profile_to_spec(profile_from_spec(cfg.profile)),
        "status": status,
        "wall_seconds": wall,
    })
    return status


def _parse_times(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError("--times", f"cannot parse {text!r}") from None


def main(argv=None):
    parser = argparse.ArgumentParser(prog="ductwave", description="Mean-field acoustics in a sheared duct flow.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--out", help="output directory (overrides the config)")
    parser.add_argument("--times", help="comma-separated output times (overrides the config)")
    parser.add_argument("--tmax", type=float, help="final time of the growth probe")
    args = parser.parse_args(argv)
    try:
        with open(args.config) as f:
            raw = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.out is not None:
            raw["out"] = args.out
        if args.times is not None:
            raw["times"] = _parse_times(args.times)
        if args.tmax is not None:
            raw.setdefault("growth", {})["T"] = args.tmax
        cfg = RunConfig.from_dict(raw, base_dir=os.path.dirname(os.path.abspath(args.config)))
        return run(args.command, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
