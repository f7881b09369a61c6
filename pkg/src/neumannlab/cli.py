"""Command-line front end.

Every run is described by a ``RunConfig``: a JSON document given with
``--config`` whose fields can be overridden by flags. Data go to files under
``--out``; diagnostics go to standard error.

Exit codes: 0 success, 1 an acceptance check failed, 2 configuration error,
3 solver failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import geodesic as geo
from .acceptance import CRITERIA, UNIT_DISK, disk_u
from .action import Constant, Linear, ProblemData, SolverParams, minimize_value, momentum, zero
from .errors import ConfigError, LabError
from .frontlab import (
    bowing_depth,
    contours_to_text,
    extract_zero_level,
    evaluate_grid,
    front_measurement,
    leave_time,
    potential_field,
)
from .geometry import DomainGeometry, DomainKind
from .hamiltonian import RotationalDrift, drift_quadratic, quadratic, scaled_quadratic
from .probe import fit_exponent, one_sided_second_difference, pde_residual, report_to_text, \
    second_difference, semiconcavity_report
from .reflected_flow import flow, mode_diagnostics
from .skorokhod import integrate, path_to_text, residuals

log = logging.getLogger("neumannlab")

COMMANDS = ("solve", "skorokhod", "flow", "probe", "disk-example", "two-holes", "front", "check")


@dataclass
class RunConfig:
    command: str
    domain: dict = field(default_factory=lambda: {"kind": "exterior_disks", "centers": [[0.0, 0.0]],
                                                  "radii": [1.0]})
    model: dict = field(default_factory=lambda: {"name": "scaled_quadratic"})
    g: str = "zero"
    u0: str = "linear:1,0:2"
    solver: dict = field(default_factory=dict)
    out: str = "out"
    seed: int = 42
    jobs: int = 1
    options: dict = field(default_factory=dict)


# -- parsing helpers ------------------------------------------------------------

def parse_vector(text) -> np.ndarray:
    if isinstance(text, (list, tuple)):
        return np.asarray(text, dtype=float)
    try:
        return np.array([float(s) for s in str(text).split(",")])
    except ValueError as exc:
        raise ConfigError(f"cannot parse vector {text!r}") from exc


def parse_points(text) -> list:
    if isinstance(text, (list, tuple)):
        return [np.asarray(p, dtype=float) for p in text]
    return [parse_vector(p) for p in str(text).split(";") if p.strip()]


def parse_field(spec: str):
    """zero | constant:c | linear:a1,a2:b"""
    parts = str(spec).split(":")
    kind = parts[0]
    try:
        if kind == "zero" and len(parts) == 1:
            return zero()
        if kind == "constant" and len(parts) == 2:
            return Constant(float(parts[1]))
        if kind == "linear" and len(parts) in (2, 3):
            return Linear(parse_vector(parts[1]), float(parts[2]) if len(parts) == 3 else 0.0)
    except (ValueError, ConfigError) as exc:
        raise ConfigError(f"bad field spec {spec!r}") from exc
    raise ConfigError(f"unknown field spec {spec!r}; use zero, constant:c or linear:a1,a2:b")


def build_domain(spec: dict) -> DomainGeometry:
    kind = spec.get("kind")
    try:
        if kind == DomainKind.EXTERIOR_DISKS.value:
            return DomainGeometry.exterior_disks(spec["centers"], spec["radii"], spec.get("tube_radius"))
        if kind == DomainKind.HALF_SPACE.value:
            return DomainGeometry.half_space(spec["normal"], spec.get("offset", 0.0), spec.get("tube_radius", 1.0))
        if kind == DomainKind.BOUNDED_BALL.value:
            return DomainGeometry.bounded_ball(spec["center"], spec["radius"], spec.get("tube_radius"))
        if kind == DomainKind.FREE_SPACE.value:
            return DomainGeometry.free_space()
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"invalid domain {spec}: {exc}") from exc
    raise ConfigError(f"unknown domain kind {kind!r}")


def build_model(spec: dict):
    name = spec.get("name")
    if name == "quadratic":
        return quadratic()
    if name == "scaled_quadratic":
        return scaled_quadratic()
    if name == "drift_quadratic":
        drift = spec.get("drift", [0.0, 0.0])
        if isinstance(drift, dict) and "omega" in drift:
            return drift_quadratic(RotationalDrift(float(drift["omega"])))
        return drift_quadratic(np.asarray(drift, dtype=float))
    raise ConfigError(f"unknown model {name!r}")


def build_params(cfg: RunConfig) -> SolverParams:
    allowed = set(SolverParams.__dataclass_fields__)
    unknown = set(cfg.solver) - allowed
    if unknown:
        raise ConfigError(f"unknown solver fields {sorted(unknown)}")
    try:
        return SolverParams(**{**cfg.solver, "seed": cfg.seed})
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def build_problem(cfg: RunConfig) -> ProblemData:
    return ProblemData(build_model(cfg.model), build_domain(cfg.domain), parse_field(cfg.g), parse_field(cfg.u0))


def named_control(spec: str):
    """constant:v1,v2 | slide (cos s, -1) | rotate:omega (cos ws, sin ws)"""
    parts = str(spec).split(":")
    if parts[0] == "constant" and len(parts) == 2:
        v = parse_vector(parts[1])
        return lambda s: v
    if parts[0] == "slide":
        return lambda s: np.array([np.cos(s), -1.0])
    if parts[0] == "rotate" and len(parts) == 2:
        w = float(parts[1])
        return lambda s: np.array([np.cos(w * s), np.sin(w * s)])
    raise ConfigError(f"unknown control {spec!r}")


# -- output ---------------------------------------------------------------------

def _write(cfg: RunConfig, name: str, text: str) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(text)
    log.info("wrote %s", path)
    return path


def _record(pairs) -> str:
    lines = []
    for key, value in pairs:
        if isinstance(value, float):
            value = f"{value:.17g}"
        elif isinstance(value, np.ndarray):
            value = ",".join(f"{v:.17g}" for v in value)
        lines.append(f"{key}\t{value}")
    return "\n".join(lines) + "\n"


# -- commands -------------------------------------------------------------------

def _opt(cfg: RunConfig, key: str, default=None, required=False):
    value = cfg.options.get(key, default)
    if required and value is None:
        raise ConfigError(f"{cfg.command} needs --{key.replace('_', '-')}")
    return value


def cmd_solve(cfg: RunConfig) -> int:
    data = build_problem(cfg)
    x = parse_vector(_opt(cfg, "x", required=True))
    t = float(_opt(cfg, "t", required=True))
    est = minimize_value(data, x, t, build_params(cfg))
    path = momentum(data, est.path)
    _write(cfg, "path.tsv", path_to_text(path))
    _write(cfg, "value.txt", _record([
        ("value", est.value), ("x", x), ("t", t), ("restarts_used", est.restarts_used),
        ("final_gradient_norm", est.final_gradient_norm), ("improved_on_zero_control", est.improved),
        ("restart_values", np.asarray(est.restart_values)),
        ("near_optimal_restarts", ",".join(map(str, est.near_optimal_restarts))),
        ("path_file", "path.tsv"),
    ]))
    log.info("u(%s, %g) ~= %.10f", x.tolist(), t, est.value)
    return 0


def cmd_skorokhod(cfg: RunConfig) -> int:
    dom = build_domain(cfg.domain)
    x0 = parse_vector(_opt(cfg, "x0", required=True))
    control = named_control(_opt(cfg, "control", "constant:1,0"))
    path = integrate(dom, x0, control, float(_opt(cfg, "dt", 1e-3)), float(_opt(cfg, "T", 1.0)))
    r = residuals(dom, path)
    _write(cfg, "path.tsv", path_to_text(path))
    _write(cfg, "residuals.txt", _record(list(asdict(r).items())))
    log.info("feasibility %.3g, min l %.3g, consistency %.3g", r.max_feasibility, r.min_l, r.max_consistency)
    return 0


def cmd_flow(cfg: RunConfig) -> int:
    data = build_problem(cfg)
    path = flow(data, parse_vector(_opt(cfg, "x0", required=True)), parse_vector(_opt(cfg, "p0", required=True)),
                float(_opt(cfg, "dt", 1e-3)), float(_opt(cfg, "T", 1.0)), float(_opt(cfg, "eps_l", 1e-6)))
    diag = mode_diagnostics(data, path)
    _write(cfg, "path.tsv", path_to_text(path))
    _write(cfg, "diagnostics.txt", _record(list(asdict(diag).items()) + [("switches", path.meta["switches"])]))
    log.info("final eta %s, p %s", path.eta[-1].tolist(), path.p[-1].tolist())
    return 0


def _value_source(cfg: RunConfig):
    source = _opt(cfg, "source", "disk")
    if source == "disk":
        return disk_u, 0.0
    if source == "solver":
        data = build_problem(cfg)
        params = build_params(cfg)

        def u(x, t):
            x = np.asarray(x, dtype=float)
            if x.ndim == 1:
                return minimize_value(data, x, t, params).value
            return np.array([minimize_value(data, p, t, params).value for p in x.reshape(-1, 2)]).reshape(x.shape[:-1])
        return u, 10 * params.tol
    raise ConfigError(f"unknown value source {source!r}; use disk or solver")


def cmd_probe(cfg: RunConfig) -> int:
    u, floor = _value_source(cfg)
    dom = build_domain(cfg.domain)
    points = parse_points(_opt(cfg, "points", "1,0;2,0"))
    directions = parse_points(_opt(cfg, "directions", "1,0"))
    hs = np.geomspace(float(_opt(cfg, "hmax", 1e-2)), float(_opt(cfg, "hmin", 1e-4)), int(_opt(cfg, "n", 9)))
    rows = semiconcavity_report(u, dom, parse_field(cfg.g), points, directions, float(_opt(cfg, "t", 1.0)),
                                hs, sigma_coupled=bool(_opt(cfg, "sigma_coupled", False)), noise_floor=floor)
    _write(cfg, "probe.tsv", report_to_text(rows))
    for row in rows:
        if row.fit is not None:
            log.info("%s %s slope %.4f coefficient %.4g (%s)", row.point.tolist(), row.location,
                     row.fit.slope, row.fit.coefficient, row.claim)
    return 0


def cmd_disk_example(cfg: RunConfig) -> int:
    checks = _opt(cfg, "check", "all")
    checks = {"table", "residual", "exponents"} if checks == "all" else {checks}
    if checks - {"table", "residual", "exponents"}:
        raise ConfigError(f"unknown disk-example check {checks}")
    t = float(_opt(cfg, "t", 1.0))
    if "table" in checks:
        pot = geo.LeftwardPotential(UNIT_DISK)
        r = np.linspace(1.0, 3.0, 21)
        phi = np.linspace(-np.pi, np.pi, 24, endpoint=False)
        lines = ["r\tphi\tt\tu\tpotential_form"]
        for ri in r:
            for pi in phi:
                x = ri * np.array([np.cos(pi), np.sin(pi)])
                lines.append(f"{ri:.17g}\t{pi:.17g}\t{t:.17g}\t{float(geo.disk_solution(ri, pi, t)):.17g}\t"
                             f"{2.0 - t + float(pot(x)):.17g}")
        _write(cfg, "disk_table.tsv", "\n".join(lines) + "\n")
    summary = []
    if "residual" in checks:
        rng = np.random.default_rng(cfg.seed)
        pts = rng.uniform(-3, 3, (6000, 2))
        pts = pts[geo.disk_seam_distance(pts) > 1e-2][:2000]
        resid = pde_residual(disk_u, scaled_quadratic(), pts, t, 1e-4)
        summary.append(("max_residual", resid))
        print(f"max residual {resid:.3e}", file=sys.stderr)
    if "exponents" in checks:
        hs = np.geomspace(1e-2, 1e-4, 9)
        dom = build_domain({"kind": "exterior_disks", "centers": [[0, 0]], "radii": [1]})
        fb = fit_exponent(hs, [one_sided_second_difference(disk_u, [1, 0], [1, 0], h, t, dom) for h in hs])
        x = 2.0 * np.array([np.cos(0.3), np.sin(0.3)])
        fi = fit_exponent(hs, [second_difference(disk_u, x, x, h, t) for h in hs])
        summary += [("boundary_slope", fb.slope), ("boundary_coefficient", fb.coefficient),
                    ("interior_slope", fi.slope), ("interior_coefficient", fi.coefficient)]
        print(f"boundary slope {fb.slope:.4f}, interior slope {fi.slope:.4f}", file=sys.stderr)
    if summary:
        _write(cfg, "disk_checks.txt", _record(summary))
    return 0


def _two_holes_row(args):
    h, resolution, front = args
    rep = geo.two_holes(h)
    D2 = float("nan")
    if front:
        disks = geo.two_hole_disks(h)
        pot = geo.LeftwardPotential(disks)
        _, _, D2 = front_measurement(disks, rep.geodesic_t2, ((-2.0, 6.0), (-3.0, 5.0)), resolution,
                                     potential=pot)
    return rep, D2


def cmd_two_holes(cfg: RunConfig) -> int:
    hs = [float(v) for v in parse_vector(_opt(cfg, "h", "0.5,1.0,1.5"))]
    resolution = tuple(int(v) for v in parse_vector(_opt(cfg, "resolution", "400,400")))
    front = not bool(_opt(cfg, "no_front", False))
    jobs = [(h, resolution, front) for h in hs]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(cfg.jobs) as pool:
            results = list(pool.map(_two_holes_row, jobs))
    else:
        results = [_two_holes_row(j) for j in jobs]
    lines = [geo.TwoHolesReport.HEADER]
    meas = ["h\tgeodesic_t2\tcross_check_agrees\tD2_measured"]
    for rep, D2 in results:
        lines.append(rep.row())
        meas.append(f"{rep.h:.17g}\t{rep.geodesic_t2:.17g}\t{str(rep.cross_check_agrees).lower()}\t{D2:.17g}")
        log.info("h=%g theta0=%.6f t2=%.6f geodesic t2=%.6f D2=%.4f", rep.h, rep.theta0, rep.t2,
                 rep.geodesic_t2, D2)
        if not rep.cross_check_agrees:
            log.warning("h=%g: the geodesic leave time disagrees with the two-trajectory formula", rep.h)
    _write(cfg, "two_holes.tsv", "\n".join(lines) + "\n")
    _write(cfg, "two_holes_front.tsv", "\n".join(meas) + "\n")
    return 0


def cmd_front(cfg: RunConfig) -> int:
    dom = build_domain(cfg.domain)
    if dom.kind != DomainKind.EXTERIOR_DISKS:
        raise ConfigError("front needs an exterior_disks domain")
    disks = [(c, r) for c, r in zip(dom.centers, dom.radii)]
    t = _opt(cfg, "t")
    if t is None:
        t = leave_time(disks, int(_opt(cfg, "circle", 0)))
    t = float(t)
    bbox = parse_vector(_opt(cfg, "bbox", "-3,3,-3,3"))
    if len(bbox) != 4:
        raise ConfigError("bbox needs x0,x1,y0,y1")
    resolution = tuple(int(v) for v in parse_vector(_opt(cfg, "resolution", "400,400")))
    fld = evaluate_grid(potential_field(disks), dom, ((bbox[0], bbox[1]), (bbox[2], bbox[3])), resolution, t,
                        boundary_samples=20_000)
    contours = extract_zero_level(fld)
    depth = bowing_depth(contours, t)
    _write(cfg, "field.tsv", fld.to_text())
    _write(cfg, "contours.txt", contours_to_text(contours))
    _write(cfg, "front.txt", _record([("t", t), ("bowing_depth", depth), ("polylines", len(contours))]))
    log.info("t=%.6f bowing depth %.6f", t, depth)
    return 0


def cmd_check(cfg: RunConfig) -> int:
    which = _opt(cfg, "criterion")
    numbers = sorted(CRITERIA) if which in (None, "all") else [int(which)]
    if any(n not in CRITERIA for n in numbers):
        raise ConfigError(f"no criterion {which}")
    ok = True
    for n in numbers:
        res = CRITERIA[n]()
        print(res.summary())
        ok &= res.passed
    return 0 if ok else 1


HANDLERS = {
    "solve": cmd_solve, "skorokhod": cmd_skorokhod, "flow": cmd_flow, "probe": cmd_probe,
    "disk-example": cmd_disk_example, "two-holes": cmd_two_holes, "front": cmd_front, "check": cmd_check,
}


# -- argument parsing -----------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int)
    common.add_argument("--jobs", type=int)
    common.add_argument("--domain", help='JSON domain, e.g. {"kind": "half_space", "normal": [0, -1]}')
    common.add_argument("--model", help="quadratic | scaled_quadratic | drift_quadratic")
    common.add_argument("--g", help="zero | constant:c | linear:a1,a2:b")
    common.add_argument("--u0", help="zero | constant:c | linear:a1,a2:b")
    common.add_argument("--nodes", type=int)
    common.add_argument("--substeps", type=int)
    common.add_argument("--restarts", type=int)
    common.add_argument("--max-iter", type=int)
    common.add_argument("--v-max", type=float)
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="neumannlab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", parents=[common], help="estimate u(x, t) by the variational solver")
    s.add_argument("--x")
    s.add_argument("--t", type=float)

    s = sub.add_parser("skorokhod", parents=[common], help="reflected path for a named control")
    s.add_argument("--x0")
    s.add_argument("--control", help="constant:v1,v2 | slide | rotate:omega")
    s.add_argument("--dt", type=float)
    s.add_argument("--T", type=float)

    s = sub.add_parser("flow", parents=[common], help="reflected Hamiltonian flow from (x0, p0)")
    s.add_argument("--x0")
    s.add_argument("--p0")
    s.add_argument("--dt", type=float)
    s.add_argument("--T", type=float)
    s.add_argument("--eps-l", type=float)

    s = sub.add_parser("probe", parents=[common], help="semiconcavity report")
    s.add_argument("--source", choices=["disk", "solver"])
    s.add_argument("--points", help="x,y;x,y;...")
    s.add_argument("--directions", help="e1,e2;...")
    s.add_argument("--t", type=float)
    s.add_argument("--hmax", type=float)
    s.add_argument("--hmin", type=float)
    s.add_argument("--n", type=int)
    s.add_argument("--sigma-coupled", action="store_true", default=None)

    s = sub.add_parser("disk-example", parents=[common], help="closed-form exterior disk reproduction")
    s.add_argument("--check", choices=["table", "residual", "exponents", "all"])
    s.add_argument("--t", type=float)

    s = sub.add_parser("two-holes", parents=[common], help="two-holes report sweep and fronts")
    s.add_argument("--h", help="comma separated offsets in (0, 2)")
    s.add_argument("--resolution", help="nx,ny")
    s.add_argument("--no-front", action="store_true", default=None)

    s = sub.add_parser("front", parents=[common], help="grid, zero level set and bowing depth")
    s.add_argument("--t", type=float, help="time (default: leave time of --circle)")
    s.add_argument("--circle", type=int)
    s.add_argument("--bbox", help="x0,x1,y0,y1")
    s.add_argument("--resolution", help="nx,ny")

    s = sub.add_parser("check", parents=[common], help="run acceptance criteria")
    s.add_argument("--criterion", help="1-9 or all")
    return p


_GLOBAL = {"config", "out", "seed", "jobs", "domain", "model", "g", "u0", "nodes", "substeps", "restarts",
           "max_iter", "v_max", "verbose", "command"}
_SOLVER_FLAGS = {"nodes": "nodes", "substeps": "substeps", "restarts": "restarts", "max_iter": "max_iter",
                 "v_max": "v_max"}


def load_config(args: argparse.Namespace) -> RunConfig:
    doc = {}
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
    known = set(RunConfig.__dataclass_fields__)
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown config fields {sorted(unknown)}")
    doc = {**doc, "command": args.command}
    cfg = RunConfig(**doc)
    cfg.solver = dict(cfg.solver)
    cfg.options = dict(cfg.options)
    if args.out is not None:
        cfg.out = args.out
    if args.seed is not None:
        cfg.seed = args.seed
    if args.jobs is not None:
        cfg.jobs = args.jobs
    if args.domain is not None:
        try:
            cfg.domain = json.loads(args.domain)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"--domain is not JSON: {exc}") from exc
    if args.model is not None:
        cfg.model = {"name": args.model}
    if args.g is not None:
        cfg.g = args.g
    if args.u0 is not None:
        cfg.u0 = args.u0
    for flag, key in _SOLVER_FLAGS.items():
        if getattr(args, flag) is not None:
            cfg.solver[key] = getattr(args, flag)
    for key, value in vars(args).items():
        if key not in _GLOBAL and value is not None:
            cfg.options[key] = value
    return cfg


def run(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 2
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = load_config(args)
        return HANDLERS[cfg.command](cfg)
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return 2
    except LabError as exc:
        log.error("solver failure: %s: %s", type(exc).__name__, exc)
        return 3


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
