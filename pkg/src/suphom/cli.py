"""Command-line entry point ``suphom``.

Subcommands: ``eval``, ``sweep``, ``p-curve``, ``effective-set``, ``oracle``
and ``verify``. Records are printed as JSON, tables as CSV. Exit codes:
0 success, 1 malformed input, 2 conservative or unconverged result,
3 hard solver failure, 4 failed verification checks.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import logging
import os
import sys
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from .constraint_hom import (ConstraintMap, EffectiveSetOptions, cross_check_sublevel,
                             default_directions, effective_set)
from .density import PeriodicDensity, check_growth, check_level_convexity, growth_samples, random_pairs
from .errors import ConfigError, InfeasibleLevelError, SolverError, SuphomError
from .feasibility import FeasibilityOptions
from .grid import CellGrid, dump_field_csv
from .lp_hom import LpOptions, is_nondecreasing, p_sweep
from .oracle import Oracle1D, lp_hom_1d_closed_form, sup_hom_1d, sup_hom_laminate_2d
from .sets import matrix_norm
from .sup_hom import SupOptions, multi_cell_compare, solve_sup_cell, solve_sup_many

log = logging.getLogger("suphom")

EXIT_OK, EXIT_CONFIG, EXIT_CONSERVATIVE, EXIT_SOLVER, EXIT_CHECKS = 0, 1, 2, 3, 4
SHIPPED = ("harmonic1d", "laminate2d")
LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


# -- configuration ----------------------------------------------------------


def _options(cls, doc, where):
    doc = dict(doc or {})
    known = {f.name for f in fields(cls)}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    try:
        return cls(**doc)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {where}: {exc}") from exc


@dataclass
class RunConfig:
    density: PeriodicDensity
    grid: CellGrid
    sup: SupOptions = SupOptions()
    lp: LpOptions = LpOptions()
    eset: EffectiveSetOptions = EffectiveSetOptions()
    ps: tuple = (2.0, 4.0, 8.0, 16.0, 32.0)
    seed: int = 0
    verify: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        # a bare density document is accepted as a run config with defaults
        if "density" not in doc:
            doc = {"density": doc}
        extra = set(doc) - {"density", "grid", "solver", "seed", "verify"}
        if extra:
            raise ConfigError(f"unknown top-level keys: {sorted(extra)}")
        density = PeriodicDensity.from_config(doc["density"])
        g = dict(doc.get("grid") or {})
        if set(g) - {"j", "N"}:
            raise ConfigError(f"unknown grid keys: {sorted(set(g) - {'j', 'N'})}")
        try:
            grid = CellGrid(density.n, int(g.get("j", 1)), int(g.get("N", 64)))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid grid: {exc}") from exc
        grid.check_resolution(density.m)

        s = dict(doc.get("solver") or {})
        extra = set(s) - {"sup", "feasibility", "lp", "effective_set", "ps"}
        if extra:
            raise ConfigError(f"unknown solver keys: {sorted(extra)}")
        feas = _options(FeasibilityOptions, s.get("feasibility"), "solver.feasibility")
        sup_doc = dict(s.get("sup") or {})
        sup_doc["feas"] = feas
        sup = _options(SupOptions, sup_doc, "solver.sup")
        lp = _options(LpOptions, s.get("lp"), "solver.lp")
        es_doc = dict(s.get("effective_set") or {})
        es_doc["feas"] = feas
        eset = _options(EffectiveSetOptions, es_doc, "solver.effective_set")
        try:
            ps = tuple(float(p) for p in s.get("ps", cls.ps))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid exponent list: {exc}") from exc
        if not ps or any(p <= 1 for p in ps) or any(b <= a for a, b in zip(ps, ps[1:])):
            raise ConfigError("ps must be a nonempty strictly increasing list of exponents > 1")
        seed = doc.get("seed", 0)
        if not isinstance(seed, int) or seed < 0:
            raise ConfigError("seed must be a nonnegative integer")
        verify = doc.get("verify") or {}
        if not isinstance(verify, dict):
            raise ConfigError("verify must be an object")
        return cls(density, grid, sup, lp, eset, ps, seed, verify)


def shipped_config(name: str) -> dict:
    """A packaged example config by name."""
    if name not in SHIPPED:
        raise ConfigError(f"no shipped config named {name!r}")
    text = resources.files("suphom").joinpath("configs", f"{name}.json").read_text()
    return json.loads(text)


def load_config(path: str) -> RunConfig:
    """Read a config file; a bare shipped name such as ``harmonic1d`` also works."""
    p = Path(path)
    if not p.exists() and path in SHIPPED:
        return RunConfig.from_dict(shipped_config(path))
    try:
        doc = json.loads(p.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return RunConfig.from_dict(doc)


def parse_Z(text: str, d: int, n: int) -> np.ndarray:
    """``"1"``, ``"1,0"`` or rows separated by ``;`` such as ``"1,0;0,1"``."""
    try:
        vals = [float(v) for v in text.replace(";", ",").split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse Z={text!r}") from exc
    if len(vals) != d * n:
        raise ConfigError(f"Z needs {d * n} entries, got {len(vals)}")
    return np.array(vals).reshape(d, n)


def parse_Z_grid(text: str, k: int) -> list:
    """Cartesian product of ``lo:hi:count`` axes, one per component of ``Z``."""
    if not text.strip():
        return []
    axes = []
    for part in text.split(","):
        try:
            lo, hi, count = part.split(":")
            lo, hi, count = float(lo), float(hi), int(count)
        except ValueError as exc:
            raise ConfigError(f"grid axis must read lo:hi:count, got {part!r}") from exc
        if count < 0:
            raise ConfigError("grid axis count must be nonnegative")
        axes.append(np.linspace(lo, hi, count) if count != 1 else np.array([lo]))
    if len(axes) != k:
        raise ConfigError(f"Z grid needs {k} axes, got {len(axes)}")
    return [np.array(pt) for pt in itertools.product(*axes)]


def _num(x) -> str:
    return repr(float(x))


# -- output -----------------------------------------------------------------


class _Output:
    def __init__(self, path: Optional[str]):
        self.path = path

    def write(self, text: str, suffix: str = "") -> None:
        if self.path is None:
            sys.stdout.write(text)
            return
        p = Path(self.path)
        if suffix:
            p = p.with_name(p.stem + suffix + p.suffix)
        p.write_text(text)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# -- subcommands ------------------------------------------------------------


def cmd_eval(args, cfg: RunConfig) -> int:
    grid = CellGrid(cfg.density.n, args.j or cfg.grid.j, args.N or cfg.grid.N)
    grid.check_resolution(cfg.density.m)
    Z = parse_Z(args.Z, cfg.density.d, cfg.density.n)
    est = solve_sup_cell(cfg.density, grid, Z, cfg.sup)
    rec = est.to_dict()
    _Output(args.out).write(_json_text(rec))
    if args.dump_corrector:
        dump_field_csv(args.dump_corrector, est.corrector, grid)
    return EXIT_CONSERVATIVE if est.conservative else EXIT_OK


def cmd_sweep(args, cfg: RunConfig) -> int:
    d, n = cfg.density.d, cfg.density.n
    Zs = parse_Z_grid(args.grid_of_Z, d * n)
    ests = solve_sup_many(cfg.density, cfg.grid, Zs, cfg.sup, workers=args.threads)
    names = [f"z{i + 1}" for i in range(d * n)]
    header = names + ["value", "M_lo", "M_hi", "bracket_width", "conservative"]
    if args.timing:
        header.append("wall_time")
    rows = []
    for Z, est in zip(Zs, ests):
        row = [_num(z) for z in Z.ravel()] + [_num(est.value), _num(est.bracket[0]), _num(est.bracket[1]),
                                              _num(est.width), int(est.conservative)]
        if args.timing:
            row.append(f"{est.wall_time:.6f}")
        rows.append(row)
    _Output(args.out).write(_csv_text(header, rows))
    return EXIT_CONSERVATIVE if any(e.conservative for e in ests) else EXIT_OK


def cmd_p_curve(args, cfg: RunConfig) -> int:
    Z = parse_Z(args.Z, cfg.density.d, cfg.density.n)
    ps = cfg.ps
    if args.ps:
        try:
            ps = tuple(float(p) for p in args.ps.split(","))
        except ValueError as exc:
            raise ConfigError(f"cannot parse --ps {args.ps!r}") from exc
    try:
        ests = p_sweep(cfg.density, cfg.grid, Z, ps, cfg.lp)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    rows = [[_num(e.p), _num(e.energy), _num(e.value_root), int(e.converged)] for e in ests]
    _Output(args.out).write(_csv_text(["p", "energy", "value_root", "converged"], rows))
    return EXIT_OK if all(e.converged for e in ests) else EXIT_CONSERVATIVE


def cmd_effective_set(args, cfg: RunConfig) -> int:
    level = args.level if args.level is not None else cfg.verify.get("level")
    if level is None:
        raise ConfigError("effective-set needs --level")
    d, n = cfg.density.d, cfg.density.n
    cmap = ConstraintMap.from_sublevel(cfg.density, level)
    dirs = default_directions(d, n, args.dirs, seed=args.seed)
    es = effective_set(cmap, cfg.grid, dirs, cfg.eset, workers=args.threads)
    names = [f"e{i + 1}" for i in range(d * n)]
    rows = [[_num(v) for v in e.ravel()] + [_num(t), _num(u), int(c)]
            for e, t, u, c in zip(es.directions, es.radii, es.upper, es.conservative)]
    out = _Output(args.out)
    text = _csv_text(names + ["t_star", "t_upper", "conservative"], rows)
    if args.hull:
        hull = _csv_text([f"p{i + 1}" for i in range(d * n)],
                         [[_num(v) for v in pt] for pt in es.hull_vertices()])
        if args.out is None:
            text += "\n" + hull
        else:
            out.write(hull, suffix="_hull")
    out.write(text)
    return EXIT_CONSERVATIVE if es.conservative.any() else EXIT_OK


def _oracle_coefficients(case: str, cfg_path: Optional[str]):
    doc = load_config(cfg_path).density if cfg_path else RunConfig.from_dict(shipped_config(case)).density
    return doc


def _laminate_profile(density: PeriodicDensity) -> Optional[np.ndarray]:
    """Coefficient along ``x1`` if ``a`` does not depend on ``x2``, else None."""
    if density.n != 2 or density.d != 1:
        return None
    a = density.coeff
    if not np.all(a == a[:, :1]):
        return None
    return a[:, 0].copy()


def cmd_oracle(args, _cfg) -> int:
    density = _oracle_coefficients(args.case, args.config)
    rec = {"case": args.case, "form": density.form}
    if args.case == "harmonic1d":
        if density.n != 1 or density.d != 1:
            raise ConfigError("harmonic1d oracle needs a scalar 1D density")
        z = parse_Z(args.z, 1, 1)[0, 0]
        orc = Oracle1D(tuple(density.coeff), form=density.form)
        rec.update(z=[z], value=sup_hom_1d(orc, z))
        if args.p is not None:
            try:
                rec.update(p=args.p, lp_value_root=lp_hom_1d_closed_form(orc, z, args.p))
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
    else:
        profile = _laminate_profile(density)
        if profile is None:
            raise ConfigError("laminate2d oracle needs a 2D scalar density depending on x1 only")
        if args.p is not None:
            raise ConfigError("no closed-form Lp value for laminates; drop --p")
        z = parse_Z(args.z, 1, 2).ravel()
        rec.update(z=z.tolist(), value=sup_hom_laminate_2d(profile, z, form=density.form))
    _Output(args.out).write(_json_text(rec))
    return EXIT_OK


# -- verify -----------------------------------------------------------------


@dataclass
class Check:
    name: str
    passed: bool
    detail: str


def _oracle_value(density, Z):
    """Exact reference ``f_hom(Z)`` when a 1D or laminate oracle applies, else None."""
    if density.n == 1 and density.d == 1:
        return sup_hom_1d(Oracle1D(tuple(density.coeff), form=density.form), Z.item())
    profile = _laminate_profile(density)
    if profile is not None:
        return sup_hom_laminate_2d(profile, Z.ravel(), form=density.form)
    return None


def run_verify(cfg: RunConfig, seed: int, threads: int = 0) -> list:
    """Seeded invariant checks on one configuration."""
    dens, grid = cfg.density, cfg.grid
    d, n = dens.d, dens.n
    v = cfg.verify
    rng = np.random.default_rng(seed)
    k = int(v.get("samples", 3))
    zmax = float(v.get("zmax", 2.0))
    Zs = [rng.uniform(-zmax, zmax, size=(d, n)) for _ in range(k)]
    checks = []

    rep = check_growth(dens, growth_samples(rng, dens, 200))
    checks.append(Check("density growth bounds", rep.passed,
                        f"lower slack {rep.lower_slack:.3g}, upper slack {rep.upper_slack:.3g}"))
    bad = sum(len(check_level_convexity(dens, x, random_pairs(rng, d, n, 100)).violations)
              for x in rng.random((4, n)))
    checks.append(Check("density level convexity", bad == 0, f"{bad} violations in 400 samples"))

    sups = solve_sup_many(dens, grid, Zs, cfg.sup, workers=threads)
    tols = [cfg.sup.level_tolerance(Z) for Z in Zs]
    cons = sum(e.conservative for e in sups)
    checks.append(Check("sup solves decided", cons == 0, f"{cons} of {k} conservative"))

    worst = max(max(dens.alpha * float(matrix_norm(Z)) - e.value,
                    e.value - dens.beta * (float(matrix_norm(Z)) + 1)) - t
                for Z, e, t in zip(Zs, sups, tols))
    checks.append(Check("homogenized growth sandwich", worst <= 0, f"worst excess {worst:.3g}"))

    sweeps = [p_sweep(dens, grid, Z, cfg.ps, cfg.lp) for Z in Zs]
    mono = all(is_nondecreasing(sw, 2 * cfg.lp.tol_rel) for sw in sweeps)
    checks.append(Check("p-monotonicity of Lp roots", mono, f"ps={list(cfg.ps)}"))
    excess = max(max(e.value_root for e in sw) - s.value - t for sw, s, t in zip(sweeps, sups, tols))
    checks.append(Check("Lp roots below sup value", excess <= 0, f"worst excess {excess:.3g}"))

    multi = multi_cell_compare(dens, Zs[0], (1, 2), grid.N, cfg.sup)
    spread = abs(multi[0].value - multi[1].value)
    checks.append(Check("single vs multi-cell", spread <= 3 * tols[0], f"|j=1 - j=2| = {spread:.3g}"))

    oracle_tol = float(v.get("oracle_tol", 2e-3 if n == 1 else 2e-2))
    refs = [_oracle_value(dens, Z) for Z in Zs]
    if refs[0] is not None:
        err = max(abs(e.value - r) / (1 + float(matrix_norm(Z))) for Z, e, r in zip(Zs, sups, refs))
        checks.append(Check("sup value vs oracle", err <= oracle_tol, f"worst relative error {err:.3g}"))
        if n == 1 and dens.form == "coeff_norm":
            orc = Oracle1D(tuple(dens.coeff))
            lerr = max(abs(sw[0].value_root - lp_hom_1d_closed_form(orc, Z.item(), sw[0].p))
                       for Z, sw in zip(Zs, sweeps))
            checks.append(Check("Lp root vs closed form", lerr <= 1e-4, f"p={cfg.ps[0]:g}, error {lerr:.3g}"))

    level = float(v.get("level", float(dens.coeff.max()) * (3.0 if dens.form == "coeff_psi" else 1.0)))
    dirs = default_directions(d, n, v.get("dirs"), seed=seed)
    xtol = float(v.get("cross_tol", 2e-3 if d * n == 1 else 3e-2))
    cc = cross_check_sublevel(dens, grid, level, dirs, cfg.eset, cfg.sup, tolerance=xtol, workers=threads)
    checks.append(Check("effective set vs sublevel of f_hom", cc.passed,
                        f"{len(dirs)} directions, max difference {cc.max_diff:.3g}"))
    return checks


def cmd_verify(args, cfg: RunConfig) -> int:
    checks = run_verify(cfg, args.seed if args.seed is not None else cfg.seed, args.threads)
    width = max(len(c.name) for c in checks)
    lines = [f"{'PASS' if c.passed else 'FAIL'}  {c.name:<{width}}  {c.detail}" for c in checks]
    _Output(args.out).write("\n".join(lines) + "\n")
    return EXIT_OK if all(c.passed for c in checks) else EXIT_CHECKS


# -- argument parsing -------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    # usage errors count as malformed input, keeping exit code 2 for conservative results
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="run config JSON (or a shipped name: harmonic1d, laminate2d)")
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--seed", type=int, default=None, help="seed for sampled checks and directions")
    common.add_argument("--threads", type=int, default=0, help="worker threads, 0 = sequential")

    parser = _Parser(prog="suphom", description="Homogenized supremal densities and constraint sets.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("eval", parents=[common], help="f_hom(Z) by level bisection (JSON record)")
    p.add_argument("--Z", required=True, help='macroscopic gradient, e.g. "1" or "1,0"')
    p.add_argument("--j", type=int, default=None, help="cell multiplicity (overrides config)")
    p.add_argument("--N", type=int, default=None, help="nodes per unit length (overrides config)")
    p.add_argument("--dump-corrector", metavar="PATH", help="write the corrector as CSV")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", parents=[common], help="f_hom over a grid of Z (CSV)")
    p.add_argument("--grid-of-Z", required=True, help='axes "lo:hi:count" separated by commas')
    p.add_argument("--timing", action="store_true", help="add a wall_time column (not reproducible)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("p-curve", parents=[common], help="Lp roots along an exponent list (CSV)")
    p.add_argument("--Z", required=True, help="macroscopic gradient")
    p.add_argument("--ps", default=None, help="comma-separated exponents (default from config)")
    p.set_defaults(func=cmd_p_curve)

    p = sub.add_parser("effective-set", parents=[common], help="radial samples of the effective set (CSV)")
    p.add_argument("--level", type=float, default=None, help="sublevel M defining C(x)")
    p.add_argument("--dirs", type=int, default=None, help="number of directions")
    p.add_argument("--hull", action="store_true", help="also emit convex-hull vertices")
    p.set_defaults(func=cmd_effective_set)

    p = sub.add_parser("oracle", parents=[common], help="exact reference values")
    p.add_argument("--case", required=True, choices=SHIPPED, help="reference geometry")
    p.add_argument("--z", required=True, help="slope (1D) or gradient \"z1,z2\" (2D)")
    p.add_argument("--p", type=float, default=None, help="also report the closed-form Lp root (1D)")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("verify", parents=[common], help="pass/fail table of invariant checks")
    p.set_defaults(func=cmd_verify)
    return parser


def _setup_logging() -> None:
    name = os.environ.get("SUPHOM_LOG", "error").lower()
    if name not in LOG_LEVELS:
        raise ConfigError(f"SUPHOM_LOG must be one of {sorted(LOG_LEVELS)}, got {name!r}")
    logging.basicConfig(level=LOG_LEVELS[name], format="%(levelname)s %(name)s: %(message)s")


VALUE_FLAGS = ("--Z", "--z", "--grid-of-Z")


def _join_negative_values(argv):
    """Let ``--Z -1,0`` through: argparse would read ``-1,0`` as an option."""
    out, it = [], iter(argv)
    for tok in it:
        if tok in VALUE_FLAGS:
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parser.parse_args(_join_negative_values(argv))
    except SystemExit as exc:
        return exc.code
    try:
        _setup_logging()
        if args.threads < 0:
            raise ConfigError("--threads must be nonnegative")
        cfg = None
        if args.func is not cmd_oracle:
            if not args.config:
                raise ConfigError("--config is required")
            cfg = load_config(args.config)
            if args.seed is None:
                args.seed = cfg.seed
        return args.func(args, cfg)
    except (ConfigError, InfeasibleLevelError) as exc:
        print(f"suphom: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"suphom: solver failure: {exc} (residual {exc.residual})", file=sys.stderr)
        return EXIT_SOLVER
    except SuphomError as exc:
        print(f"suphom: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
