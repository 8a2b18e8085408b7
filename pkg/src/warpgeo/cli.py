"""Command-line front end.

Each subcommand builds a config from (lowest to highest precedence) built-in
defaults, an optional JSON ``--config`` file and explicit flags, runs one
experiment, writes its report and prints a PASS/FAIL line per audit.

Exit codes: 0 success, 2 an audit failed, 3 numerical non-convergence,
4 bad configuration.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConvergenceError, DomainError, WarpGeoError

EXIT_OK, EXIT_AUDIT, EXIT_CONVERGENCE, EXIT_CONFIG = 0, 2, 3, 4

COMMON_DEFAULTS = {"out": None, "threads": None, "grid": None, "quad_order": 32, "tol": None}
WARP_DEFAULTS = {"family": "ads", "m": 0.1, "kappa": 0.2}

DEFAULTS = {
    "curvature": {"family": "schwarzschild", "m": 1.0, "kappa": 0.0, "r": [2.0], "n": 3},
    "sphere": {**WARP_DEFAULTS, "r": 1.0, "grid": "96x192", "tol": 1e-6, "csv": None},
    "nonrigid": {**WARP_DEFAULTS, "r": 1.0, "eps": [0.02], "grid": "96x192", "tol": 1e-12,
                 "n_nodes": 64, "max_iter": 100},
    "flow": {"m": 0.5, "r0": 2.0, "u0": 0.9, "tmax": 200.0, "dt": 0.01, "mode": "round",
             "delta": 0.0, "n_lat": 32, "record_every": 10, "summary": None},
    "kernel": {"family": "ads", "m": 0.1, "kappa": 0.1, "r": 1.0, "grid": "24x48", "tol": 100.0},
    "sec11": {**WARP_DEFAULTS, "eps": [0.02, 0.01, 0.005], "tol": 1e-13, "n_nodes": 64},
}

# audit thresholds that are not user tolerances
CONTRACTION_MAX = 0.5
ISOMETRY_MAX = 1e-7
C_DRIFT_MAX = 1e-8
LIMIT_GAP_MAX = 0.02
MASS_REL_MAX = 0.05
MASS_ZERO_MAX = 1e-8


class ConfigError(Exception):
    pass


# -- serialization ------------------------------------------------------------

def _to_plain(obj):
    if isinstance(obj, dict):
        return {str(k): _to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _to_plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _fmt_float(x):
    if not math.isfinite(x):
        return "null"
    return format(x, ".17g")


def dumps(obj, indent=2):
    """JSON with every float written to 17 significant digits and sorted keys."""

    def enc(o, level):
        pad, inner = " " * (indent * level), " " * (indent * (level + 1))
        if isinstance(o, dict):
            if not o:
                return "{}"
            items = [f"{inner}{json.dumps(k)}: {enc(o[k], level + 1)}" for k in sorted(o)]
            return "{\n" + ",\n".join(items) + "\n" + pad + "}"
        if isinstance(o, list):
            if not o:
                return "[]"
            if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in o):
                return "[" + ", ".join(enc(v, level) for v in o) + "]"
            return "[\n" + ",\n".join(inner + enc(v, level + 1) for v in o) + "\n" + pad + "]"
        if isinstance(o, bool) or o is None or isinstance(o, (str, int)):
            return json.dumps(o)
        return _fmt_float(o)

    return enc(_to_plain(obj), 0) + "\n"


def provenance():
    from .flow import BACKEND

    return {"package": "warpgeo", "version": __version__, "flow_backend": BACKEND, "numpy": np.__version__}


# -- argument parsing -------------------------------------------------------------

def _float_list(text):
    try:
        vals = [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _add_common(p):
    p.add_argument("--config", help="JSON config file; explicit flags override it")
    p.add_argument("--out", help="output path for the report")
    p.add_argument("--threads", type=int, help="worker thread cap (default: $WARPGEO_THREADS)")
    p.add_argument("--grid", help="latitude x longitude counts, e.g. 24x48")
    p.add_argument("--quad-order", dest="quad_order", type=int)
    p.add_argument("--tol", type=float)


def _add_warp(p):
    p.add_argument("--family", help="euclidean | spaceform | ads | schwarzschild")
    p.add_argument("--m", type=float)
    p.add_argument("--kappa", type=float)


def build_parser():
    parser = argparse.ArgumentParser(prog="warpgeo", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    kw = {"argument_default": argparse.SUPPRESS}

    p = sub.add_parser("curvature", help="ambient curvature components at given radii", **kw)
    _add_common(p)
    _add_warp(p)
    p.add_argument("--r", type=_float_list, help="radius or comma-separated radii")
    p.add_argument("--n", type=int, help="ambient dimension")

    p = sub.add_parser("sphere", help="geodesic-sphere geometry and shape-operator checks", **kw)
    _add_common(p)
    _add_warp(p)
    p.add_argument("--r", type=float)
    p.add_argument("--csv", help="also dump the surface as CSV")

    p = sub.add_parser("nonrigid", help="build an isometric but differently curved sphere", **kw)
    _add_common(p)
    _add_warp(p)
    p.add_argument("--r", type=float)
    p.add_argument("--eps", type=_float_list, help="perturbation size(s); the first one is reported")
    p.add_argument("--n-nodes", dest="n_nodes", type=int)
    p.add_argument("--max-iter", dest="max_iter", type=int)

    p = sub.add_parser("flow", help="outward geodesic flow and the mass quantity", **kw)
    _add_common(p)
    p.add_argument("--m", type=float)
    p.add_argument("--r0", type=float)
    p.add_argument("--u0", type=float)
    p.add_argument("--tmax", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--mode", choices=["round", "axisymmetric"])
    p.add_argument("--delta", type=float, help="P2 deformation of the initial sphere")
    p.add_argument("--n-lat", dest="n_lat", type=int)
    p.add_argument("--record-every", dest="record_every", type=int)
    p.add_argument("--summary", help="JSON summary path (default: next to the trace CSV)")

    p = sub.add_parser("kernel", help="kernel of the linearized isometry operator", **kw)
    _add_common(p)
    _add_warp(p)
    p.add_argument("--r", type=float)

    p = sub.add_parser("sec11", help="second-order coefficient of the mass integral", **kw)
    _add_common(p)
    _add_warp(p)
    p.add_argument("--eps", type=_float_list)
    p.add_argument("--n-nodes", dest="n_nodes", type=int)
    return parser


def _load_file(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    data = dict(data)
    warp = data.pop("warp", None)
    if warp is not None:
        if not isinstance(warp, dict):
            raise ConfigError("'warp' must be an object")
        data.update(warp)
    data = {k.replace("-", "_"): v for k, v in data.items()}
    for key in ("eps", "r"):
        if key in data and not isinstance(data[key], list):
            data[key] = [data[key]]
    return data


def resolve_config(ns):
    """Merge defaults, config file and flags into one validated dict."""
    cmd = ns.command
    cfg = {**COMMON_DEFAULTS, **DEFAULTS[cmd]}
    flags = {k: v for k, v in vars(ns).items() if k != "command"}
    path = flags.pop("config", None)
    if path is not None:
        file_cfg = _load_file(path)
        file_cfg.pop("command", None)
        unknown = set(file_cfg) - set(cfg)
        if unknown:
            raise ConfigError(f"unknown config keys for {cmd}: {sorted(unknown)}")
        cfg.update(file_cfg)
    cfg.update(flags)
    if cmd in ("sphere", "nonrigid", "kernel") and isinstance(cfg.get("r"), list):
        cfg["r"] = cfg["r"][0]
    if cfg["threads"] is None and os.environ.get("WARPGEO_THREADS"):
        try:
            cfg["threads"] = int(os.environ["WARPGEO_THREADS"])
        except ValueError as exc:
            raise ConfigError("WARPGEO_THREADS must be an integer") from exc
    _validate(cmd, cfg)
    return cfg


def _positive(cfg, *keys):
    for k in keys:
        v = cfg.get(k)
        vals = v if isinstance(v, list) else [v]
        for x in vals:
            if not isinstance(x, (int, float)) or isinstance(x, bool) or not (x > 0 and math.isfinite(x)):
                raise ConfigError(f"{k} must be positive, got {v!r}")


def _validate(cmd, cfg):
    _positive(cfg, "quad_order")
    if cfg["threads"] is not None:
        _positive(cfg, "threads")
    if cfg["tol"] is not None:
        _positive(cfg, "tol")
    if cfg.get("grid") is not None:
        from .grid import SphereGrid

        try:
            grid = SphereGrid.parse(cfg["grid"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if grid.n_lat % 2 or grid.n_lon % 2:
            raise ConfigError("grid dimensions must be even")
    if "family" in cfg or cmd == "flow":
        cfg["warp"] = _warp_from(cmd, cfg)
    positive = {
        "curvature": ("r",), "sphere": ("r",), "nonrigid": ("r", "eps", "n_nodes", "max_iter"),
        "flow": ("r0", "u0", "tmax", "dt", "n_lat", "record_every"), "kernel": ("r",),
        "sec11": ("eps", "n_nodes"),
    }[cmd]
    _positive(cfg, *positive)
    out = cfg.get("out")
    if out is not None:
        parent = Path(out).resolve().parent
        if not parent.is_dir() or not os.access(parent, os.W_OK):
            raise ConfigError(f"output directory {parent} is not writable")


def _warp_from(cmd, cfg):
    from .metric import WarpFunction

    if cmd == "flow":
        spec = {"family": "schwarzschild", "m": cfg["m"]}
    else:
        spec = {"family": cfg["family"], "m": cfg.get("m", 0.0), "kappa": cfg.get("kappa", 0.0)}
        if "n" in cfg:
            spec["n"] = cfg["n"]
    try:
        w = WarpFunction.from_config(spec)
        for key in ("r", "r0"):
            if key in cfg:
                w.check_domain(np.asarray(cfg[key], dtype=float))
    except (ValueError, TypeError) as exc:  # DomainError is a ValueError
        raise ConfigError(f"bad warp spec {spec}: {exc}") from exc
    return w


# -- reporting --------------------------------------------------------------------

class Report:
    def __init__(self, cmd, cfg):
        self.cmd = cmd
        self.cfg = cfg
        self.audits = []

    def audit(self, name, passed, value, limit):
        passed = bool(passed)
        self.audits.append({"name": name, "passed": passed, "value": value, "limit": limit})
        print(f"{'PASS' if passed else 'FAIL'} {name}: {_fmt_float(float(value))} (limit {_fmt_float(float(limit))})")

    @property
    def ok(self):
        return all(a["passed"] for a in self.audits)

    def document(self, body):
        cfg = {k: v for k, v in self.cfg.items() if k != "warp"}
        if "warp" in self.cfg:
            cfg["warp"] = self.cfg["warp"].to_config()
        return {"command": self.cmd, "config": cfg, "provenance": provenance(),
                "audits": self.audits, **body}

    def emit(self, body, path=None):
        text = dumps(self.document(body))
        if path is None:
            sys.stdout.write(text)
        else:
            Path(path).write_text(text)


def _grid(cfg):
    from .grid import SphereGrid

    return SphereGrid.parse(cfg["grid"])


# -- subcommands -------------------------------------------------------------------

def cmd_curvature(cfg, rep):
    from .metric import ambient_curvature

    w = cfg["warp"]
    r = np.asarray(cfg["r"], dtype=float)
    ac = ambient_curvature(w, r)
    for i, ri in enumerate(r):
        print(f"r={_fmt_float(ri)}  R1212={_fmt_float(ac.R_radial[i])}  "
              f"R2323={_fmt_float(ac.R_tangential[i])}  scalar={_fmt_float(ac.scalar[i])}")
    body = {"r": r, "R1212": ac.R_radial, "R2323": ac.R_tangential, "scalar": ac.scalar}
    if cfg["out"] is not None:
        rep.emit(body, cfg["out"])


def cmd_sphere(cfg, rep):
    from .metric import warp_eval
    from .surface import (area_integral, curvatures, darboux_shape, geodesic_sphere,
                          support_identity_residual, write_surface_csv)

    w, r, grid = cfg["warp"], cfg["r"], _grid(cfg)
    emb = geodesic_sphere(w, r, grid)
    f = float(warp_eval(w, np.asarray(r))[0])
    U, _ = grid.mesh()
    exact = np.zeros((2, 2) + grid.shape)
    exact[0, 0] = f * r
    exact[1, 1] = f * r * np.cos(U) ** 2
    scale = np.max(np.abs(exact))
    errs = {}
    for name, h in (("parametric", emb.h), ("darboux", darboux_shape(emb))):
        errs[name] = float(np.max(np.abs(h - exact)) / scale)
        rep.audit(f"shape_{name}", errs[name] <= cfg["tol"], errs[name], cfg["tol"])
    cr = curvatures(emb)
    area = area_integral(emb, np.ones(grid.shape))
    body = {
        "shape_relative_error": errs,
        "support_identity_residual": support_identity_residual(emb),
        "gauss_residual": float(np.max(np.abs(cr.gauss_residual))),
        "mean_curvature": [float(np.min(cr.H)), float(np.max(cr.H))],
        "area": area,
        "area_relative_error": area / (4 * np.pi * r * r) - 1,
    }
    if cfg["csv"] is not None:
        write_surface_csv(emb, cfg["csv"])
    rep.emit(body, cfg["out"])


def cmd_nonrigid(cfg, rep):
    from .nonrigid import (ConstructionParams, build_surface, curvature_deviation_report,
                           fixed_point_solve, isometry_residual, mass_expansion)

    w, grid = cfg["warp"], _grid(cfg)
    eps = cfg["eps"][0]
    params = ConstructionParams(w, cfg["r"], eps, quad_order=cfg["quad_order"], tol=cfg["tol"],
                                max_iter=cfg["max_iter"], n_nodes=cfg["n_nodes"])
    h, diag = fixed_point_solve(params)
    surf = build_surface(params, h, grid)
    iso = isometry_residual(surf, params.r)
    lat = np.linspace(-1.2, 1.2, 9)
    table = curvature_deviation_report(params, h, lat)
    rep.audit("contraction_ratio", diag.lipschitz_ratio < CONTRACTION_MAX, diag.lipschitz_ratio, CONTRACTION_MAX)
    rep.audit("isometry_residual", iso <= ISOMETRY_MAX, iso, ISOMETRY_MAX)
    mass_fit = None
    if params.r == 1.0 and 1 - w.m + w.kappa > 0:
        eps_list = cfg["eps"] if len(cfg["eps"]) > 1 else [eps, eps / 2, eps / 4]
        fit = mass_expansion(w, eps_list, quad_order=cfg["quad_order"], n_nodes=cfg["n_nodes"])
        mass_fit = {"eps": fit.eps, "values": fit.values, "coefficient": fit.coefficient,
                 "target": fit.target, "relative_error": fit.relative_error}
    body = {
        "params": {"warp": w.to_config(), "r": params.r, "eps": eps, "n_nodes": params.n_nodes},
        "iterations": diag.iterations,
        "lipschitz_ratio": diag.lipschitz_ratio,
        "picard_residual": diag.residual,
        "posthoc_residual": diag.posthoc_residual,
        "isometry_residual": iso,
        "curvature_table": table.rows(),
        "sec11_fit": mass_fit,
    }
    rep.emit(body, cfg["out"])


def cmd_flow(cfg, rep):
    from .errors import FitError
    from .flow import asymptotic_fit, convexity_audit, flow_init, monotonicity_audit, run_flow

    w = cfg["warp"]
    state = flow_init(w, cfg["r0"], u0=cfg["u0"], mode=cfg["mode"], delta=cfg["delta"], n_lat=cfg["n_lat"])
    trace = run_flow(state, cfg["dt"], cfg["tmax"], record_every=cfg["record_every"])
    mono = monotonicity_audit(trace.Q, trace.truncation)
    conv = convexity_audit(trace)
    drift = float(np.max(trace.C_drift))
    rep.audit("monotonicity", mono.passed, mono.value, mono.tolerance)
    rep.audit("convexity", conv.passed, conv.value, conv.tolerance)
    rep.audit("C_drift", drift <= C_DRIFT_MAX, drift, C_DRIFT_MAX)
    try:
        fit = asymptotic_fit(trace.t, trace.u_mean, trace.Q, w.m, r0=cfg["r0"])
        m0, gap = fit.m0, fit.limit_gap
        rep.audit("limit_gap", gap <= LIMIT_GAP_MAX, gap, LIMIT_GAP_MAX)
    except FitError as exc:
        print(f"note: asymptotic fit skipped ({exc})")
        m0 = gap = None
    body = {
        "m0_fit": m0,
        "Q_final": float(trace.Q[-1]),
        "limit_gap": gap,
        "monotonicity_max_increment": mono.value,
        "truncation_estimate": trace.truncation,
        "min_lambda": conv.value,
        "C_drift": drift,
    }
    out = cfg["out"]
    if out is None:
        rep.emit(body)
        return
    out = Path(out)
    with open(out, "w") as fh:
        fh.write("t,r,lambda,u_min,u_max,Q\n")
        for row in trace.rows():
            fh.write(",".join(_fmt_float(float(x)) for x in row) + "\n")
    summary = cfg["summary"] or out.with_suffix(".json")
    rep.emit(body, summary)


def cmd_kernel(cfg, rep):
    from .linearized import (assemble_operator, kernel_dimension, operator_residuals, rotation_fields,
                             span_projections, sphere_frame)
    from .surface import geodesic_sphere

    w, r, grid = cfg["warp"], cfg["r"], _grid(cfg)
    emb = geodesic_sphere(w, r, grid)
    op = assemble_operator(emb)
    kr = kernel_dimension(op, gap_factor=cfg["tol"])
    rot = rotation_fields(emb)
    exact = assemble_operator(emb, check=False, tangents=sphere_frame(r, grid))
    residuals = operator_residuals(exact, rot)
    proj = span_projections(kr.vectors, rot)
    rep.audit("kernel_dim", kr.count == 6, kr.count, 6)
    rep.audit("gap_ratio", kr.gap_ratio >= cfg["tol"], kr.gap_ratio, cfg["tol"])
    body = {
        "singular_tail": kr.tail,
        "kernel_dim": kr.count,
        "gap_ratio": kr.gap_ratio,
        "rotation_residuals": residuals,
        "rotation_projection": float(np.min(proj)),
        "rotation_projections": proj,
    }
    rep.emit(body, cfg["out"])


def cmd_mass_coefficient(cfg, rep):
    from .nonrigid import mass_expansion

    w = cfg["warp"]
    fit = mass_expansion(w, cfg["eps"], quad_order=cfg["quad_order"], tol=cfg["tol"], n_nodes=cfg["n_nodes"])
    if fit.target == 0:
        rep.audit("coefficient_zero", abs(fit.coefficient) <= MASS_ZERO_MAX, abs(fit.coefficient), MASS_ZERO_MAX)
    else:
        rep.audit("coefficient", fit.relative_error <= MASS_REL_MAX, fit.relative_error, MASS_REL_MAX)
    print(f"coefficient={_fmt_float(fit.coefficient)} target={_fmt_float(fit.target)}")
    body = {"eps": fit.eps, "values": fit.values, "coefficient": fit.coefficient, "target": fit.target,
            "relative_error": fit.relative_error}
    rep.emit(body, cfg["out"])


COMMANDS = {
    "curvature": cmd_curvature, "sphere": cmd_sphere, "nonrigid": cmd_nonrigid,
    "flow": cmd_flow, "kernel": cmd_kernel, "sec11": cmd_mass_coefficient,
}


def _thread_limit(n):
    if n is None:
        return _NullContext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=int(n))


class _NullContext:
    def __enter__(self):
        return self

    def __exit__(self, *exc):
        return False


def run(argv=None):
    """Parse ``argv``, run the experiment and return the exit code."""
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with code 2
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        cfg = resolve_config(ns)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    rep = Report(ns.command, cfg)
    try:
        with _thread_limit(cfg["threads"]):
            COMMANDS[ns.command](cfg, rep)
    except ConvergenceError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (DomainError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except WarpGeoError as exc:  # geometric failure during the run, e.g. loss of convexity
        print(f"FAIL {type(exc).__name__}: {exc}")
        return EXIT_AUDIT
    return EXIT_OK if rep.ok else EXIT_AUDIT


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
