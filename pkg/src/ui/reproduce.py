"""
Reproducciones de extremo a extremo con nombre. Cada una registra sus
comprobaciones en un ReportGenerator; la ejecución pasa si todas pasan.
"""
import logging
import math
from typing import Callable, Dict, Tuple

import numpy as np

from src.algorythmes.fundamental.fundamental_algor import build_fundamental
from src.algorythmes.inhomog.inhomog_algor import solvability
from src.algorythmes.pathology.pathology_algor import (
    continuation_defect,
    gen_hom_counterexample,
    gen_nonsolvable_rhs_first_order,
    predicted_G,
    punctured_square_H,
    verify_forced_vanishing,
    verify_no_global_solution,
    verify_nonsolvable_rhs,
    wronskian_decay,
)
from src.algorythmes.report_generator import ReportGenerator
from src.algorythmes.systems.systems_algor import Verdict, decide_verdict
from src.algorythmes.topology.topology_algor import NonSimplicityWitness, SectionFn, classify, find_witness
from src.core import expr as ex
from src.core.config import RunConfig
from src.core.expr import parse
from src.core.json_loader import problem_from_dict, problem_to_dict
from src.core.operators import ScalarOperator
from src.core.region import RectShape, Region, punctured_plane, punctured_square

logger = logging.getLogger(__name__)


def _ex3_1(config: RunConfig, report: ReportGenerator) -> None:
    """u_x = u/(x^2+t^2) sobre |t| en (0.05, 1): φ normalizada con φ(t, 1) = 1."""
    region = Region((-1.0, 1.0, -2.0, 2.0),
                    (RectShape(-1.0, -0.05, -2.0, 2.0), RectShape(0.05, 1.0, -2.0, 2.0)), name="ex3_1")
    op = ScalarOperator(1, (parse("-1/(x^2 + t^2)"), ex.const(1.0)), region)
    ts = [-0.9, -0.5, -0.2, -0.1, 0.1, 0.2, 0.5, 0.9]
    fset = build_fundamental(op, theta=SectionFn.constant(1.0, (-1.0, 1.0)), t_samples=ts,
                             config=config, log_domain=True)

    worst = 0.0
    table = []
    for t, s in zip(fset.ts, fset.matrix.solution.slices):
        lo, hi = s.x_span
        xs = np.linspace(lo, hi, config.nx)
        log_phi = s.log_values(xs).ravel()
        log_closed = (np.arctan(xs / t) - math.atan(1.0 / t)) / t
        worst = max(worst, float(np.max(np.abs(np.expm1(log_phi - log_closed)))))
        table.append({"t": float(t), "phi_at_1": float(s(1.0).ravel()[0]),
                      "phi_at_minus_1": float(s(-1.0).ravel()[0]),
                      "closed_at_minus_1": math.exp((math.atan(-1.0 / t) - math.atan(1.0 / t)) / t)})
    report.log_section("table", table)
    report.log_check("max_rel_dev_closed_form", worst, 1e-6)
    at_01 = next(row for row in table if row["t"] == 0.1)
    report.log_check("phi(0.1,-1)", at_01["phi_at_minus_1"], 1e-12)
    report.log_check("phi(t,1)-1", max(abs(row["phi_at_1"] - 1.0) for row in table), 1e-12)


def _ex3_9(config: RunConfig, report: ReportGenerator) -> None:
    """Cuadrado perforado: ley de crecimiento en la perforación (1/2, 1/2) y cotas de la serie."""
    field = punctured_square_H(1)
    growth = verify_forced_vanishing(field.operator(), distances=(1e-2, 1e-3), config=config)
    report.log_section("growth", growth)
    report.log_check("growth_law", 0.0, 0.0, passed=growth.passed)
    for row in growth.measurements["lines"][0]["rows"]:
        target = (math.pi / 4) / row["d"]
        report.log_check(f"log_growth(d={row['d']:g})", abs(row["log_growth"] - target) / target, 0.10)

    tail = punctured_square_H(6).tail_bound(0.1)
    report.log_check("tail_bound(K=6, delta=0.1) * delta^2 / C", tail * 0.01, 0.0157)

    # sumas parciales crecientes; el incremento no supera la cota del resto
    points = [(0.3, 0.1), (0.7, 0.2), (0.5, 0.3)]
    worst_excess = 0.0
    for K in range(1, 4):
        low, high = punctured_square_H(K), punctured_square_H(K + 1)
        for t, x in points:
            diff = high(t, x) - low(t, x)
            worst_excess = max(worst_excess, -diff, diff - low.tail_bound(0.4))
    report.log_check("partial_sums_monotone_within_tail", max(worst_excess, 0.0), 0.0)

    classification = classify(punctured_square(3))
    report.log_section("classification_K3", classification)
    report.log_check("K3_not_x_simple", 0.0, 0.0, passed=not classification.x_simple)
    report.log_check("K3_pieces", len(classification.pieces), 0)


def _ex4_1(config: RunConfig, report: ReportGenerator) -> None:
    """u_x = 1/(x^2+t^2): defecto Δ(t) a través de x = 0 y veredicto de resolubilidad."""
    region = punctured_plane(bbox=(-2.0, 2.0, -2.0, 2.0))
    op = ScalarOperator(1, (ex.const(0.0), ex.const(1.0)), region, parse("1/(x^2 + t^2)"))
    table = []
    for t in (1e-1, 1e-2, 1e-3):
        delta = continuation_defect(op, t, -1.0, 1.0, config)
        table.append({"t": t, "defect": delta, "t_times_defect": t * delta, "closed": 2 * math.atan(1 / t)})
    report.log_section("table", table)
    for row in table[1:]:
        report.log_check(f"t*defect-2atan(1/t) (t={row['t']:g})", row["t_times_defect"] - row["closed"], 1e-3)
    report.log_check("t*defect -> pi", (table[-1]["t_times_defect"] - math.pi) / math.pi, 2e-3)

    verdict = solvability(punctured_plane(), config)
    report.log_section("solvability", verdict)
    report.log_check("not_solvable", 0.0, 0.0, passed=not verdict.solvable)
    witnessed = [c for c in verdict.components if c.witness is not None]
    report.log_check("witness_found", 0.0, 0.0, passed=bool(witnessed))
    if witnessed:
        w = witnessed[0].witness
        report.log_check("witness_at_origin", max(abs(w.t0), abs(w.x1), abs(w.x2)), 1e-9)
        report.log_check("defect_report", 0.0, 0.0, passed=witnessed[0].defect.passed)


def _ex4_2(config: RunConfig, report: ReportGenerator) -> None:
    """(x^2+t^2) u_x = 1 + x^2: el defecto supera δ (π/t - (2/t) atan(t/ε)) con δ = 1, ε = 0.5."""
    region = punctured_plane(bbox=(-2.0, 2.0, -2.0, 2.0))
    op = ScalarOperator(1, (ex.const(0.0), parse("x^2 + t^2")), region, parse("1 + x^2"))
    w = NonSimplicityWitness(t0=0.0, eps=0.5, x1=0.0, x2=0.0, upsilon=((0.0, 0.0),))
    family = verify_no_global_solution(op, w, n=10, delta=1.0, config=config)
    report.log_section("family_bound", family)
    report.log_check("defect_above_family_bound", 0.0, 0.0, passed=family.passed)


def _thm3_3_counter(config: RunConfig, report: ReportGenerator) -> None:
    """Coeficientes g^{p-1} = -c/((x-x1)^2+(t-t0)^2) sobre el plano perforado: W(t, x1-eps) -> 0."""
    region = punctured_plane()
    w = find_witness(region)
    report.log_section("witness", w)
    for p in (1, 2):
        op = gen_hom_counterexample(w, region, p=p, c=1.0)
        decay = wronskian_decay(op, w, config=config)
        report.log_section(f"decay_p{p}", decay)
        report.log_check(f"wronskian_decay_p{p}", decay.measurements["W_near"][-1], 1e-8, passed=decay.passed)
    unit = NonSimplicityWitness(t0=0.0, eps=1.0, x1=0.0, x2=0.0, upsilon=((0.0, 0.0),))
    G = predicted_G(unit, 1.0, -1e-3)
    report.log_check("G(1e-3) <= -3000", G, 0.0, passed=G <= -3000)

    growth = verify_forced_vanishing(gen_hom_counterexample(w, region), distances=(1e-2, 1e-3), config=config)
    report.log_section("growth", growth)
    report.log_check("growth_law", 0.0, 0.0, passed=growth.passed)

    verdict = decide_verdict(None, classify(region), "Wronskiano")
    report.log_section("verdict", verdict)
    report.log_check("not_fundamental", 0.0, 0.0, passed=verdict.kind is Verdict.NOT_FUNDAMENTAL)


def _thm4_3_rhs(config: RunConfig, report: ReportGenerator) -> None:
    """Lado derecho f = Σ f^k χ^k para P = ∂_x sobre el plano perforado."""
    region = punctured_plane()
    w = find_witness(region)
    base = ScalarOperator(1, (ex.const(0.0), ex.const(1.0)), region)
    construction = gen_nonsolvable_rhs_first_order(base, w, k_max=10, config=config)
    result = verify_nonsolvable_rhs(construction, w, config)
    report.log_section("rhs", result)
    report.log_check("exceeds_k", 0.0, 0.0, passed=result.passed)
    short = min(m - 2 * k for k, m in enumerate(construction.mass, start=1))
    report.log_check("mass >= 2k", short, 0.0, passed=short >= 0)

    xi = classify(construction.xi)
    report.log_section("xi", xi)
    report.log_check("xi_x_simple", 0.0, 0.0, passed=xi.x_simple and len(xi.components) == 1)

    generated = construction.operator
    again = problem_from_dict(problem_to_dict(generated)).operator
    same = again.f.to_source() == generated.f.to_source() and again.provenance == generated.provenance
    report.log_check("json_round_trip", 0.0, 0.0, passed=same)


REPRODUCTIONS: Dict[str, Callable[[RunConfig, ReportGenerator], None]] = {
    "ex3.1": _ex3_1,
    "ex3.9": _ex3_9,
    "ex4.1": _ex4_1,
    "ex4.2": _ex4_2,
    "thm3.3-counter": _thm3_3_counter,
    "thm4.3-rhs": _thm4_3_rhs,
}


def run(example_id: str, config: RunConfig = RunConfig()) -> Tuple[bool, str]:
    """Ejecuta una reproducción y devuelve (pasó, ruta del reporte)."""
    if example_id not in REPRODUCTIONS:
        raise KeyError(example_id)
    report = ReportGenerator(config.output_dir, "reproduce", {"id": example_id, "config": config.to_json()})
    REPRODUCTIONS[example_id](config, report)
    path = report.finalize(f"reproduce_{example_id}.json")
    logger.info("Reproducción %s: %s -> %s", example_id, "ok" if report.passed else "FALLÓ", path)
    return report.passed, path
