"""
Interfaz de línea de comandos (`python -m src.main <subcomando> ...`).

Códigos de salida: 0 correcto, 1 falló una comprobación, 2 entrada inválida.
"""
import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from src.algorythmes.fundamental.fundamental_algor import (
    build_fundamental,
    build_componentwise,
    is_fundamental,
    wronskian,
)
from src.algorythmes.inhomog.inhomog_algor import general, particular
from src.algorythmes.integrate.integrate_algor import interior_ts, sweep
from src.algorythmes.pathology.pathology_algor import (
    gen_hom_counterexample,
    gen_inhom_counterexample,
    gen_nonsolvable_rhs_first_order,
    punctured_square_H,
    verify_forced_vanishing,
    verify_no_global_solution,
    verify_nonsolvable_rhs,
    wronskian_decay,
)
from src.algorythmes.report_generator import (
    ReportGenerator,
    clean,
    write_grid_csv,
    write_grid_json,
    write_rows_csv,
)
from src.algorythmes.systems.systems_algor import (
    ZetaSamples,
    abel_deviation,
    build_fundamental_matrix,
    is_fundamental_matrix,
    solve_system_inhom,
)
from src.algorythmes.topology.topology_algor import SectionFn, bounds, classify, find_witness, smooth_section
from src.core import expr as ex
from src.core.config import RunConfig
from src.core.errors import ParamodeError
from src.core.json_loader import SCHEMA, JsonLoader, JsonLoadError, problem_to_dict, save_json
from src.core.operators import ScalarOperator, companion
from src.core.region import Region
from src.ui import reproduce

logger = logging.getLogger(__name__)

WRONSKIAN_TOL = 1e-6
SECTION_TOL = 1e-12


# ----------------------------------------------------------------------
# Argumentos
# ----------------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="paramode",
        description="EDO lineales con parámetro sobre regiones del plano (t, x)",
    )
    parser.add_argument("--config", help="archivo JSON con RunConfig")
    parser.add_argument("--resolution", type=float, help="paso h del raster")
    parser.add_argument("--rtol", type=float)
    parser.add_argument("--atol", type=float)
    parser.add_argument("--blowup-bound", type=float, dest="blowup_bound")
    parser.add_argument("--nt", type=int)
    parser.add_argument("--nx", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--output-dir", dest="output_dir")
    parser.add_argument("-v", "--verbose", action="count", default=0)

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="clasifica una región")
    p.add_argument("region")
    fmt = p.add_mutually_exclusive_group()
    fmt.add_argument("--json", action="store_true", help="clasificación en JSON (por defecto)")
    fmt.add_argument("--csv", action="store_true", help="t, número de intervalos, a(t), b(t) por muestra")

    p = sub.add_parser("fundamental", help="conjunto fundamental de un problema homogéneo")
    p.add_argument("problem")
    p.add_argument("--out", help="φ^s y sus derivadas: JSON si termina en .json, si no CSV")

    p = sub.add_parser("wronskian-check", help="Wronskiano frente a Liouville-Ostrogradski")
    p.add_argument("problem")

    p = sub.add_parser("solve", help="PVI por rebanadas desde la sección θ")
    p.add_argument("problem")
    p.add_argument("--grid", type=parse_grid, help="malla de salida nt,nx")
    p.add_argument("--out")

    p = sub.add_parser("solve-inhom", help="solución general ψ + Σ ζ^s φ^s")
    p.add_argument("problem")
    p.add_argument("--zeta", help="archivo con t y ζ; sin él, ζ = 0")
    p.add_argument("--out")

    p = sub.add_parser("system", help="matriz fundamental de un sistema de primer orden")
    p.add_argument("system")
    p.add_argument("--out")

    p = sub.add_parser("pathology", help="genera y verifica contraejemplos")
    p.add_argument("region")
    p.add_argument("--kind", required=True, choices=["hom", "inhom", "punctured-square", "rhs"])
    p.add_argument("--out", help="problema JSON generado")
    p.add_argument("--report", help="reporte JSON de la verificación")
    p.add_argument("--order", type=int, default=1)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--K", type=int, default=1)
    p.add_argument("--k-max", type=int, default=10, dest="k_max")

    p = sub.add_parser("reproduce", help="reproducción con nombre")
    p.add_argument("example", choices=sorted(reproduce.REPRODUCTIONS))
    return parser


def parse_grid(text: str) -> Tuple[int, int]:
    """Lee "nt,nx" como (nt, nx)."""
    try:
        nt, nx = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"se esperaba nt,nx (recibido {text!r})")
    return nt, nx


def make_config(args: argparse.Namespace) -> RunConfig:
    config = RunConfig()
    if args.config:
        try:
            with open(args.config, "r", encoding="utf-8") as f:
                config = RunConfig.from_json(json.load(f))
        except json.JSONDecodeError as e:
            raise JsonLoadError(f"JSON inválido: {e.msg}", Path(args.config), e.lineno, e.colno)
    return config.with_overrides(
        resolution=args.resolution, rtol=args.rtol, atol=args.atol, blowup_bound=args.blowup_bound,
        nt=args.nt, nx=args.nx, seed=args.seed, output_dir=args.output_dir,
    )


def _setup_logging(verbosity: int) -> None:
    level = logging.WARNING if verbosity == 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")


def _print_json(data: dict) -> None:
    json.dump(clean(data), sys.stdout, indent=2, ensure_ascii=False, allow_nan=False)
    sys.stdout.write("\n")


def _with_resolution(region: Region, config: RunConfig) -> Region:
    if config.resolution is None or region.resolution is not None:
        return region
    return dataclasses.replace(region, resolution=config.resolution)


def _section(theta: Optional[ex.Expr], region: Region, config: RunConfig) -> SectionFn:
    if theta is None:
        return smooth_section(region)
    return SectionFn.from_expr(theta, interior_ts(region.t_extent(), max(config.nt, 2)))


def _state_names(prefix: str, p: int, ncols: int = 0) -> List[str]:
    if ncols:
        return [f"{prefix}{s + 1}_{k}" for k in range(p) for s in range(ncols)]
    return [f"{prefix}_{k}" for k in range(p)]


# ----------------------------------------------------------------------
# Subcomandos
# ----------------------------------------------------------------------
def cmd_analyze(args, config: RunConfig) -> int:
    region = _with_resolution(JsonLoader(args.region).region(), config)
    classification = classify(region)
    if args.csv:
        b = bounds(region, classification.scan)
        counts = [s.count for s in classification.scan.slices]
        rows = zip(b.t, counts, b.a, b.b)
        write_rows_csv(rows, ["t", "intervals", "a", "b"], sys.stdout)
        return 0
    _print_json({"schema": SCHEMA, **classification.to_dict()})
    return 0


def _fundamental_sets(args, config: RunConfig):
    problem = JsonLoader(args.problem).problem()
    op = problem.operator.on(_with_resolution(problem.operator.region, config))
    classification = classify(op.region)
    if classification.x_simple:
        theta = _section(problem.theta, op.region, config)
        sets = [build_fundamental(op, theta=theta, config=config)]
    else:
        sets = build_componentwise(op, classification, config)
    return op, classification, sets


def cmd_fundamental(args, config: RunConfig) -> int:
    op, classification, sets = _fundamental_sets(args, config)
    report = ReportGenerator(config.output_dir, "fundamental", {"problem": args.problem})
    report.log_section("classification", classification)
    for k, fset in enumerate(sets):
        report.log_section(f"verdict_{k}", is_fundamental(fset, classification, config))
        if args.out:
            out = args.out if len(sets) == 1 else _numbered(args.out, k)
            field = fset.sample(config.nx)
            names = _state_names("phi", op.p, op.p)
            if Path(out).suffix.lower() == ".json":
                write_grid_json(field, out, names, {"problem": args.problem, "component": k})
            else:
                write_grid_csv(field, out, names)
    _print_json(report.data["sections"])
    report.finalize()
    return 0


def _numbered(path: str, k: int) -> str:
    p = Path(path)
    return str(p.with_name(f"{p.stem}_{k}{p.suffix}"))


def cmd_wronskian_check(args, config: RunConfig) -> int:
    op, classification, sets = _fundamental_sets(args, config)
    report = ReportGenerator(config.output_dir, "wronskian-check", {"problem": args.problem})
    for k, fset in enumerate(sets):
        w = wronskian(fset, config)
        report.log_check(f"liouville_deviation_{k}", w.max_deviation, WRONSKIAN_TOL)
        report.log_check(f"section_deviation_{k}", w.section_deviation, SECTION_TOL)
    path = report.finalize()
    _print_json({"checks": report.data["checks"], "report": path})
    return 0 if report.passed else 1


def cmd_solve(args, config: RunConfig) -> int:
    if args.grid is not None:
        config = config.with_overrides(nt=args.grid[0], nx=args.grid[1])
    problem = JsonLoader(args.problem).problem()
    op = problem.operator
    if problem.init is None:
        raise JsonLoadError("'solve' necesita 'init' en el problema", Path(args.problem), field="init")
    theta = _section(problem.theta, op.region, config)
    init = problem.init

    def init_at(t: float) -> np.ndarray:
        return np.array([e.scalar(t, 0.0) for e in init])

    ts = interior_ts(op.region.t_extent(), config.nt)
    solution = sweep(companion(op), theta, init_at, ts, config, tag=op.region.name)
    field = solution.sample(config.nx)
    if args.out:
        write_grid_csv(field, args.out, _state_names("u", op.p))
    _print_json({"schema": SCHEMA, "samples": len(ts), "blowups": solution.blowups,
                 "failures": [f.t for f in solution.failures]})
    return 0


def cmd_solve_inhom(args, config: RunConfig) -> int:
    problem = JsonLoader(args.problem).problem()
    op = problem.operator
    theta = _section(problem.theta, op.region, config)
    fset = build_fundamental(op, theta=theta, config=config)
    psi = particular(op, fset, config)
    if args.zeta:
        t, values = JsonLoader(args.zeta).zeta()
        zeta = ZetaSamples(t, values)
    else:
        zeta = ZetaSamples(fset.ts, np.zeros((op.p, len(fset.ts))))
    u = general(op, fset, zeta, config.nx, psi, config)
    if args.out:
        write_grid_csv(u, args.out, _state_names("u", op.p))
    _print_json({"schema": SCHEMA, "cross_check_error": psi.cross_check_error, "quad_error": psi.quad_error})
    return 0


def cmd_system(args, config: RunConfig) -> int:
    problem = JsonLoader(args.system).system()
    system = problem.system
    classification = classify(system.region)
    theta = _section(problem.theta, system.region, config)
    phi = build_fundamental_matrix(system, theta, config=config)
    result = {
        "schema": SCHEMA,
        "verdict": is_fundamental_matrix(phi, classification, config).to_dict(),
        "abel_deviation": abel_deviation(phi, config),
    }
    if not system.is_homogeneous:
        inhom = solve_system_inhom(system, phi, config)
        result["cross_check_error"] = inhom.cross_check_error
        if args.out:
            write_grid_csv(inhom.solution.sample(config.nx), args.out, _state_names("v", system.p))
    elif args.out:
        write_grid_csv(phi.sample(config.nx), args.out, _state_names("Phi", system.p, system.p))
    _print_json(result)
    return 0


def cmd_pathology(args, config: RunConfig) -> int:
    region = _with_resolution(JsonLoader(args.region).region(), config)
    if args.kind == "punctured-square":
        op = punctured_square_H(args.K).operator(region, order=args.order)
        result = verify_forced_vanishing(op, config=config)
    else:
        w = find_witness(region)
        if args.kind == "hom":
            op = gen_hom_counterexample(w, region, p=args.order, c=args.c)
            result = wronskian_decay(op, w, config=config)
        elif args.kind == "inhom":
            op = gen_inhom_counterexample(w, region)
            result = verify_no_global_solution(op, w, config=config)
        else:
            base = ScalarOperator(1, (ex.const(0.0), ex.const(1.0)), region)
            construction = gen_nonsolvable_rhs_first_order(base, w, k_max=args.k_max, config=config)
            op = construction.operator
            result = verify_nonsolvable_rhs(construction, w, config)
    if args.out:
        save_json(problem_to_dict(op), args.out)
    data = {"schema": SCHEMA, **result.to_dict()}
    if args.report:
        save_json(clean(data), args.report)
    else:
        _print_json(data)
    return 0 if result.passed else 1


def cmd_reproduce(args, config: RunConfig) -> int:
    passed, path = reproduce.run(args.example, config)
    print(path)
    return 0 if passed else 1


COMMANDS = {
    "analyze": cmd_analyze,
    "fundamental": cmd_fundamental,
    "wronskian-check": cmd_wronskian_check,
    "solve": cmd_solve,
    "solve-inhom": cmd_solve_inhom,
    "system": cmd_system,
    "pathology": cmd_pathology,
    "reproduce": cmd_reproduce,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _setup_logging(args.verbose)
    try:
        config = make_config(args)
        return COMMANDS[args.command](args, config)
    except ParamodeError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
