"""Command-line entry point: ``artifact {vanishing,cgo,scatter,inverse,grating}``.

Exit codes: 0 pass, 1 verified disagreement, 2 inconclusive, 64 and up for
usage, input and output problems.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

SCHEMA_VERSION = "1"

EXIT_OK = 0
EXIT_DISAGREE = 1
EXIT_INCONCLUSIVE = 2
EXIT_USAGE = 64
EXIT_DATAERR = 65
EXIT_NOINPUT = 66
EXIT_SOFTWARE = 70
EXIT_CANTCREAT = 73

log = logging.getLogger("artifact")


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------- config plumbing


def _load_json(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise CliError(f"no such file: {path}", EXIT_NOINPUT)
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: malformed JSON ({exc})", EXIT_DATAERR) from exc


def _parse_override(item: str):
    key, sep, raw = item.partition("=")
    if not sep or not key:
        raise CliError(f"override {item!r} is not key=value", EXIT_USAGE)
    try:
        val = json.loads(raw)
    except json.JSONDecodeError:
        val = raw
    return key, val


def build_config(args, defaults: dict) -> dict:
    cfg = dict(defaults)
    cfg.update(_load_json(args.config))
    for item in args.set or []:
        key, val = _parse_override(item)
        cfg[key] = val
    unknown = set(cfg) - set(defaults)
    if unknown:
        raise CliError(f"unknown config keys: {', '.join(sorted(unknown))}", EXIT_DATAERR)
    return cfg


def _complex(v) -> complex:
    if isinstance(v, (list, tuple)):
        return complex(v[0], v[1] if len(v) > 1 else 0.0)
    return complex(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


class Output:
    def __init__(self, out_dir: str):
        self.dir = Path(out_dir)
        try:
            self.dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise CliError(f"cannot create {out_dir}: {exc}", EXIT_CANTCREAT) from exc

    def write_json(self, name: str, payload: dict) -> Path:
        body = {"schema_version": SCHEMA_VERSION, **payload}
        return self._write(name, json.dumps(_jsonable(body), indent=2, sort_keys=True) + "\n")

    def write_csv(self, name: str, header: list[str], rows: list[list]) -> Path:
        lines = [",".join(header)]
        for r in rows:
            lines.append(",".join(_cell(c) for c in r))
        return self._write(name, "\n".join(lines) + "\n")

    def write_text(self, name: str, text: str) -> Path:
        return self._write(name, text)

    def _write(self, name: str, text: str) -> Path:
        p = self.dir / name
        try:
            p.write_text(text)
        except OSError as exc:
            raise CliError(f"cannot write {p}: {exc}", EXIT_CANTCREAT) from exc
        return p


def _cell(c) -> str:
    if isinstance(c, float):
        return repr(c)
    s = str(c)
    if "," in s or '"' in s:
        s = '"' + s.replace('"', '""') + '"'
    return s


# ---------------------------------------------------------------- vanishing

VANISHING_DEFAULTS = {"lam": 1.0, "q_max": 8, "irrational": None}


def cmd_vanishing(args) -> int:
    from .vanishing import IRRATIONAL_SPOTS, case_table, check_case

    cfg = build_config(args, VANISHING_DEFAULTS)
    if not cfg["lam"] > 0 or int(cfg["q_max"]) < 2:
        raise CliError("lam must be positive and q_max at least 2", EXIT_DATAERR)
    spots = IRRATIONAL_SPOTS if cfg["irrational"] is None else tuple(float(a) for a in cfg["irrational"])
    results = [check_case(c) for c in case_table(float(cfg["lam"]), int(cfg["q_max"]), spots)]
    rows = [r.row() for r in results]
    header = list(rows[0])
    out = Output(args.out)
    out.write_csv("vanishing_matrix.csv", header, [[r[h] for h in header] for r in rows])
    failed = [r for r in rows if r["estimated"] == "failed"]
    disagree = [r for r in rows if not r["agree"] and r["estimated"] != "failed"]
    out.write_json(
        "vanishing_report.json",
        {"command": "vanishing", "config": cfg, "cases": len(rows), "disagreements": disagree, "inconclusive": failed},
    )
    print(f"vanishing: {len(rows)} cases, {len(disagree)} disagreements, {len(failed)} inconclusive")
    if disagree:
        return EXIT_DISAGREE
    return EXIT_INCONCLUSIVE if failed else EXIT_OK


# ---------------------------------------------------------------- cgo

CGO_DEFAULTS = {
    "lam": 1.0,
    "alpha": math.sqrt(2) / 6,
    "eta_minus": 0.5,
    "eta_plus": 0.8,
    "u0": 1.0,
    "s_grid": None,
    "h": 1.0,
    "slope_tol": 0.15,
    "exact_s": [100.0, 1000.0, 10000.0],
    "exact_ell_max": 6,
}


def cmd_cgo(args) -> int:
    from . import cgo
    from .lines import IRRATIONAL, impedance
    from .vanishing import CornerConfig, construct_eigenfunction

    cfg = build_config(args, CGO_DEFAULTS)
    tol_scale = args.tol_scale
    alpha = float(cfg["alpha"])
    corner = CornerConfig(
        impedance(_complex(cfg["eta_minus"])),
        impedance(_complex(cfg["eta_plus"])),
        alpha,
        float(cfg["lam"]),
        _complex(cfg["u0"]),
        angle_class=IRRATIONAL,
    )
    u, _ = construct_eigenfunction(corner)
    W = cgo.SectorW(0.0, corner.theta0)
    s_grid = cgo.S_GRID if cfg["s_grid"] is None else tuple(float(s) for s in cfg["s_grid"])
    h = float(cfg["h"])
    try:
        rep = cgo.verify_corner_expansions(
            u,
            W,
            (corner.cond_minus.eta, corner.cond_plus.eta),
            s_grid=s_grid,
            h=h,
            slope_tol=float(cfg["slope_tol"]) * tol_scale,
        )
    except ValueError as exc:
        raise CliError(str(exc), EXIT_DATAERR) from exc

    exact = []
    worst = 0.0
    for s in cfg["exact_s"]:
        z = complex(cgo.zeta(W.theta_M))
        for ell in range(int(cfg["exact_ell_max"]) + 1):
            for weight in (False, True):
                q = cgo.line_integral_quad(ell, s, h, z, weight)
                e = cgo.line_integral_exact(ell, s, h, z, weight)
                err = abs(q - e) / abs(e)
                worst = max(worst, err)
                exact.append({"s": s, "ell": ell, "sqrt_weight": weight, "quad": q, "exact": e, "rel_err": err})
        # the closed form covers the whole sector; truncate where the tail is negligible
        hs = cgo.sector_radius_for(W, s)
        qs = cgo.sector_integral_quad(W, s, hs)
        es = cgo.sector_integral_exact(W, s)
        err = abs(qs - es) / abs(es)
        worst = max(worst, err)
        exact.append({"s": s, "sector": True, "h": hs, "quad": qs, "exact": es, "rel_err": err, "s2_times_quad": s * s * qs})
    exact_ok = worst <= 1e-8 * tol_scale
    out = Output(args.out)
    out.write_json(
        "cgo_report.json",
        {
            "command": "cgo",
            "config": cfg,
            "slopes": rep.to_json(),
            "exactness": exact,
            "exactness_worst": worst,
            "green_closure": rep.green_closure,
        },
    )
    inconclusive = [c for c in rep.checks if c.slope is None]
    for c in rep.checks:
        print(f"cgo: {c.name} slope {c.slope if c.slope is None else round(c.slope, 3)} (expected {c.expected}) {'ok' if c.passed else 'FAIL'}")
    print(f"cgo: closed-form exactness worst relative error {worst:.2e}")
    if inconclusive:
        return EXIT_INCONCLUSIVE
    return EXIT_OK if rep.passed and exact_ok else EXIT_DISAGREE


# ---------------------------------------------------------------- scatter

SCATTER_DEFAULTS = {
    "obstacle": None,
    "k": 2.0,
    "incident_angle": 0.0,
    "point_source": None,
    "M": 256,
    "mesh": {},
    "self_convergence": False,
    "mie": True,
}


def _obstacle_from(spec, base: Path | None = None):
    from .scatter import GeometryError, PolygonalObstacle

    if spec is None:
        raise CliError("an obstacle is required (config key 'obstacle' or --obstacle)", EXIT_USAGE)
    data = spec
    if isinstance(spec, str):
        data = _load_json(spec)
    try:
        return PolygonalObstacle.from_json(data)
    except (GeometryError, KeyError, TypeError, ValueError) as exc:
        raise CliError(f"invalid obstacle: {exc}", EXIT_DATAERR) from exc


def _mesh_from(d: dict):
    from .scatter import MeshConfig

    try:
        return MeshConfig(**d)
    except (TypeError, ValueError) as exc:
        raise CliError(f"invalid mesh settings: {exc}", EXIT_DATAERR) from exc


def cmd_scatter(args) -> int:
    from .scatter import Disk, PlaneWave, PointSource, SolverError, mie_far_field, solve_forward

    cfg = build_config(args, SCATTER_DEFAULTS)
    if args.obstacle:
        cfg["obstacle"] = args.obstacle
    if args.k is not None:
        cfg["k"] = args.k
    if args.angle is not None:
        cfg["incident_angle"] = args.angle
    if args.point_source is not None:
        cfg["point_source"] = list(args.point_source)
    ob = _obstacle_from(cfg["obstacle"])
    k = float(cfg["k"])
    try:
        if cfg["point_source"] is not None:
            inc = PointSource(k, tuple(cfg["point_source"]))
        else:
            inc = PlaneWave.from_angle(k, float(cfg["incident_angle"]))
    except (TypeError, ValueError) as exc:
        raise CliError(f"invalid incident field: {exc}", EXIT_DATAERR) from exc
    mesh = _mesh_from(cfg["mesh"])
    M = int(cfg["M"])
    try:
        sol = solve_forward(ob, inc, mesh, workers=args.workers)
    except SolverError as exc:
        print(f"scatter: {exc}", file=sys.stderr)
        return EXIT_DISAGREE
    except ValueError as exc:
        raise CliError(str(exc), EXIT_DATAERR) from exc
    ff = sol.far_field(M)
    out = Output(args.out)
    out.write_text("far_field.csv", ff.to_csv())
    diag = {
        "command": "scatter",
        "config": {key: val for key, val in cfg.items() if key != "obstacle"},
        "obstacle": ob.to_json(),
        "incident": inc.to_json(),
        "nodes": sol.disc.n_nodes,
        "formulation": sol.formulation,
        "condition_estimate": sol.condition,
        "boundary_residual": sol.boundary_residual(),
        "far_field_l2": ff.l2_norm(),
    }
    status = EXIT_OK
    tol = 1e-6 * args.tol_scale
    if diag["boundary_residual"] > tol:
        status = EXIT_DISAGREE
    comps = ob.components
    if cfg["mie"] and len(comps) == 1 and isinstance(comps[0], Disk) and isinstance(inc, PlaneWave):
        d = comps[0]
        if d.center == (0.0, 0.0):
            ang = math.atan2(inc.d[1], inc.d[0])
            ref = mie_far_field(k, d.radius, d.condition, ang, ff.angles)
            err = float(np.linalg.norm(ff.values - ref) / np.linalg.norm(ref))
            diag["mie_relative_l2"] = err
            if err > 1e-4 * args.tol_scale:
                status = EXIT_DISAGREE
    if cfg["self_convergence"]:
        fine = solve_forward(ob, inc, mesh.doubled(), workers=args.workers).far_field(M)
        sc = float(np.linalg.norm(ff.values - fine.values) / np.linalg.norm(fine.values))
        diag["self_convergence"] = sc
        if sc > 1e-5 * args.tol_scale:
            status = EXIT_DISAGREE
    out.write_json("scatter_report.json", diag)
    print(f"scatter: {sol.disc.n_nodes} nodes, residual {diag['boundary_residual']:.2e}, cond {sol.condition:.2e}")
    return status


# ---------------------------------------------------------------- inverse

INVERSE_DEFAULTS = {
    "obstacle1": None,
    "obstacle2": None,
    "k": 2.0,
    "d1_angle": 0.0,
    "d2_angle": 2.0,
    "M": 256,
    "mesh": {},
    "noise_floor": True,
}


def cmd_inverse(args) -> int:
    from .inverse import discrimination_experiment
    from .scatter import SolverError

    cfg = build_config(args, INVERSE_DEFAULTS)
    if args.obstacles:
        cfg["obstacle1"], cfg["obstacle2"] = args.obstacles
    o1, o2 = _obstacle_from(cfg["obstacle1"]), _obstacle_from(cfg["obstacle2"])
    a1, a2 = float(cfg["d1_angle"]), float(cfg["d2_angle"])
    try:
        rep = discrimination_experiment(
            o1,
            o2,
            float(cfg["k"]),
            (math.cos(a1), math.sin(a1)),
            (math.cos(a2), math.sin(a2)),
            M=int(cfg["M"]),
            mesh=_mesh_from(cfg["mesh"]),
            workers=args.workers,
            noise_floor=bool(cfg["noise_floor"]),
        )
    except SolverError as exc:
        print(f"inverse: {exc}", file=sys.stderr)
        return EXIT_DISAGREE
    except ValueError as exc:
        raise CliError(str(exc), EXIT_DATAERR) from exc
    out = Output(args.out)
    out.write_json("inverse_report.json", {"command": "inverse", "config": {"k": cfg["k"], "d1_angle": a1, "d2_angle": a2, "M": cfg["M"]}, **rep.to_json()})
    print(f"inverse: discrepancies {rep.discrepancies[0]:.3e}, {rep.discrepancies[1]:.3e}; floor {rep.noise_floor}; {rep.verdict}")
    if rep.noise_floor is None:
        return EXIT_INCONCLUSIVE
    tol = 1e-5 * args.tol_scale
    if rep.verdict.startswith("identical"):
        return EXIT_OK if max(rep.discrepancies) <= tol else EXIT_DISAGREE
    if rep.verdict.startswith("distinct"):
        return EXIT_OK if rep.separated(10.0) else EXIT_DISAGREE
    return EXIT_INCONCLUSIVE


# ---------------------------------------------------------------- grating

GRATING_DEFAULTS = {
    "k": 1.0,
    "theta": 0.3,
    "b": 1.0,
    "etas": [None, 0.0, 2.0, [1.0, 0.5]],
    "n_max": 8,
    "samples": 64,
    "draws": 50,
    "seed": None,
}


def cmd_grating(args) -> int:
    from . import grating as g

    cfg = build_config(args, GRATING_DEFAULTS)
    k, theta, b = float(cfg["k"]), float(cfg["theta"]), float(cfg["b"])
    tol_scale = args.tol_scale
    nr = g.mode_range(int(cfg["n_max"]))
    try:
        modes = g.rayleigh_modes(k, theta, nr)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_DATAERR) from exc
    mode_err = max(abs(m.alpha_n**2 + m.beta_n**2 - k * k) for m in modes)
    roundtrips = []
    ok = mode_err <= 1e-12 * tol_scale * max(1.0, k * k)
    x1 = g.sample_points(int(cfg["samples"]))
    pts = np.stack([x1, np.full_like(x1, b)], axis=1)
    for eta in cfg["etas"]:
        eta_v = math.inf if eta is None else _complex(eta)
        fc = g.FlatGratingConfig(k, theta, eta_v, b)
        R = g.reflection_coefficient(fc)
        us = g.flat_grating_field(fc, pts) - g.incident_field(fc, pts)
        co = g.extract_rayleigh(us, k, theta, b, nr)
        err = 0.0
        for n, v, rec in zip(co.n, co.values, co.recoverable):
            if rec:
                err = max(err, abs(v - (R if n == 0 else 0.0)))
        residual = g.flat_boundary_residual(fc, x1)
        energy = abs(abs(R) - 1) if complex(eta_v).imag == 0 else None
        row_ok = err <= 1e-10 * tol_scale and residual <= 1e-12 * tol_scale * max(1.0, abs(complex(eta_v)) if eta is not None else 1.0)
        if energy is not None:
            row_ok = row_ok and energy <= 1e-12 * tol_scale
        elif complex(eta_v).imag > 0:
            row_ok = row_ok and abs(R) < 1
        ok = ok and row_ok
        roundtrips.append({"eta": "inf" if eta is None else eta_v, "R": R, "roundtrip_error": err, "boundary_residual": residual, "abs_R_minus_1": energy, "ok": row_ok})
    rng = np.random.default_rng(cfg["seed"])
    draws = []
    for _ in range(int(cfg["draws"])):
        kk = float(rng.uniform(0.2, 6.0))
        t1, t2 = (float(x) for x in rng.uniform(-1.5, 1.5, 2))
        res = g.grating_mode_distinctness(kk, t1, t2, range(-5, 6))
        draws.append({"k": kk, "theta1": t1, "theta2": t2, "distinct": res.distinct, "witness": res.witness})
        ok = ok and res.distinct
    indep = {
        "orthogonal_pair": g.exponential_independence([[0.0, 0.0], [10.0, 0.0]]),
        "close_pair": g.exponential_independence([[0.0, 0.0], [1e-3, 0.0]]),
    }
    out = Output(args.out)
    out.write_csv(
        "rayleigh_modes.csv",
        ["n", "alpha_n", "beta_re", "beta_im", "propagating"],
        [[m.n, m.alpha_n, m.beta_n.real, m.beta_n.imag, m.propagating] for m in modes],
    )
    out.write_json(
        "grating_report.json",
        {"command": "grating", "config": cfg, "mode_identity_error": mode_err, "roundtrips": roundtrips, "distinctness": draws, "independence": indep, "passed": ok},
    )
    print(f"grating: mode identity {mode_err:.1e}, {len(roundtrips)} roundtrips, {len(draws)} distinctness draws, {'ok' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_DISAGREE


# ---------------------------------------------------------------- main


def make_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with command parameters")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config field (JSON value)")
    common.add_argument("--out", default="out", help="output directory (default: out)")
    common.add_argument("--workers", type=int, default=1, help="worker threads for matrix assembly")
    common.add_argument("--tol-scale", type=float, default=1.0, dest="tol_scale", help="multiply every tolerance")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="artifact", description="Corner vanishing, CGO asymptotics and polygonal scattering experiments.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("vanishing", parents=[common], help="prediction vs recursion vs numeric estimate table")
    sub.add_parser("cgo", parents=[common], help="CGO closed forms and asymptotic slope checks")
    sp = sub.add_parser("scatter", parents=[common], help="forward scattering run; far-field CSV")
    sp.add_argument("--obstacle", help="obstacle JSON file")
    sp.add_argument("--k", type=float, help="wavenumber")
    sp.add_argument("--angle", type=float, help="plane-wave incidence angle in radians")
    sp.add_argument("--point-source", type=float, nargs=2, metavar=("X", "Y"), dest="point_source")
    ip = sub.add_parser("inverse", parents=[common], help="two-obstacle discrimination experiment")
    ip.add_argument("--obstacles", nargs=2, metavar=("FILE1", "FILE2"))
    sub.add_parser("grating", parents=[common], help="Rayleigh mode tables and flat-grating checks")
    return p


COMMANDS = {
    "vanishing": cmd_vanishing,
    "cgo": cmd_cgo,
    "scatter": cmd_scatter,
    "inverse": cmd_inverse,
    "grating": cmd_grating,
}


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.workers < 1 or not args.tol_scale > 0:
        print("artifact: --workers must be >= 1 and --tol-scale positive", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except CliError as exc:
        print(f"artifact {args.command}: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
