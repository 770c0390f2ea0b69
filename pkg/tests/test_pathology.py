import math

import numpy as np
import pytest

from src.algorythmes.pathology.pathology_algor import (
    PathologyError,
    ReportKind,
    TruncationError,
    continuation_defect,
    dyadic_depth,
    gen_hom_counterexample,
    gen_inhom_counterexample,
    gen_nonsolvable_rhs_first_order,
    predicted_G,
    punctured_square_H,
    verify_forced_vanishing,
    verify_no_global_solution,
    verify_nonsolvable_rhs,
    wronskian_decay,
    xi_region,
)
from src.algorythmes.topology.topology_algor import NonSimplicityWitness, classify
from src.core import expr as ex
from src.core.expr import parse
from src.core.json_loader import problem_from_dict, problem_to_dict
from src.core.operators import ScalarOperator
from src.core.region import punctured_plane

ORIGIN = NonSimplicityWitness(t0=0.0, eps=0.25, x1=0.0, x2=0.0, upsilon=((0.0, 0.0),))


@pytest.fixture(scope="module")
def plane():
    return punctured_plane()


def test_hom_counterexample_coefficients(plane):
    op = gen_hom_counterexample(ORIGIN, plane, p=2, c=3.0)
    assert op.p == 2
    assert op.g[2].constant_value == 1.0
    assert op.g[0].constant_value == 0.0
    assert op.g[1].scalar(0.5, 0.0) == pytest.approx(-3.0 / 0.25)
    assert op.provenance.kind == "hom"
    assert op.provenance.singular_points == ((0.0, 0.0, 3.0),)
    with pytest.raises(PathologyError):
        gen_hom_counterexample(ORIGIN, plane, c=0.0)


@pytest.mark.parametrize("p, n", [(1, 10), (2, 6)])
def test_wronskian_decays_towards_the_puncture(plane, config, p, n):
    report = wronskian_decay(gen_hom_counterexample(ORIGIN, plane, p=p), ORIGIN, n=n, config=config)
    assert report.kind is ReportKind.WRONSKIAN_VANISHING
    G = report.measurements["G"]
    assert all(b < a for a, b in zip(G, G[1:]))
    assert report.measurements["G_relative_error"] <= 1e-4
    if n == 10:
        assert report.passed
        assert report.measurements["W_near"][-1] < 1e-8


def test_predicted_G_is_large_and_negative():
    unit = NonSimplicityWitness(t0=0.0, eps=1.0, x1=0.0, x2=0.0, upsilon=((0.0, 0.0),))
    G = predicted_G(unit, 1.0, -1e-3)
    assert G == pytest.approx(-3139.6, abs=0.1)
    assert G <= -3000


def test_inhom_defect_closed_form(plane, config):
    op = gen_inhom_counterexample(ORIGIN, plane)
    t = -0.01
    defect = continuation_defect(op, t, -0.25, 0.25, config)
    assert defect == pytest.approx(-predicted_G(ORIGIN, 1.0, t), rel=1e-6)
    report = verify_no_global_solution(op, ORIGIN, n=6, config=config)
    assert report.passed
    assert report.measurements["relative_error"] <= 1e-6


def test_family_lower_bound(config):
    region = punctured_plane(bbox=(-2.0, 2.0, -2.0, 2.0))
    op = ScalarOperator(1, (ex.const(0.0), parse("x^2 + t^2")), region, parse("1 + x^2"))
    w = NonSimplicityWitness(t0=0.0, eps=0.5, x1=0.0, x2=0.0, upsilon=((0.0, 0.0),))
    report = verify_no_global_solution(op, w, n=8, delta=1.0, config=config)
    assert report.passed
    for value, bound in zip(report.measurements["defect"], report.measurements["lower_bound"]):
        assert value >= bound


def test_punctured_square_series():
    H1 = punctured_square_H(1)
    assert H1.punctures == ((0.5, 0.5, 0.25),)
    assert H1(0.3, 0.2) == pytest.approx(0.25 / 0.13)
    H3 = punctured_square_H(3)
    ts, xs = np.array([0.3, 0.7]), np.array([0.1, 0.2])
    assert np.allclose(H3.to_expr()(ts, xs), H3(ts, xs), rtol=1e-14)
    assert punctured_square_H(6).tail_bound(0.1) * 0.01 <= 0.0157
    assert punctured_square_H(6).tail_bound(0.1) * 0.01 == pytest.approx(0.01554, abs=1e-5)
    assert H3.domination_bound(1.0) == pytest.approx(2.0 / 3.0)
    with pytest.raises(TruncationError):
        punctured_square_H(8).to_source()
    with pytest.raises(TruncationError):
        punctured_square_H(0)
    with pytest.raises(PathologyError):
        punctured_square_H(2, {(1, 1): -1.0})


def test_punctured_square_weights_scale_C():
    H = punctured_square_H(2, {(2, 3): 5.0})
    assert H.C == 5.0
    assert (0.75, 0.75, 5.0 / 16) in H.punctures


def test_derivative_source_matches_finite_difference():
    H = punctured_square_H(2)
    dH = parse(H.derivative_source())
    t, x, h = 0.3, 0.4, 1e-6
    numeric = (H(t, x + h) - H(t, x - h)) / (2 * h)
    assert dH.scalar(t, x) == pytest.approx(numeric, rel=1e-6)


def test_second_order_punctured_square_operator():
    op = punctured_square_H(1).operator(order=2)
    assert op.p == 2
    assert op.provenance.singular_points == ((0.5, 0.5, 0.5),)
    with pytest.raises(PathologyError):
        punctured_square_H(1).operator(order=3)


def test_dyadic_depth():
    assert dyadic_depth(0.5) == 1
    assert dyadic_depth(0.375) == 3
    assert dyadic_depth(1.0) == 0
    assert dyadic_depth(0.1) is None


def test_growth_law_on_first_line(config):
    report = verify_forced_vanishing(punctured_square_H(1).operator(), distances=(1e-2, 1e-3), config=config)
    assert report.passed
    line = report.measurements["lines"][0]
    assert line["window"] == pytest.approx(0.45)
    for row in line["rows"]:
        target = (math.pi / 4) / row["d"]
        assert abs(row["log_growth"] - target) / target <= 0.10
        assert abs(row["doubling_ratio"] - 2.0) <= 0.3
    assert line["rows"][1]["log_growth"] == pytest.approx(784.3, abs=0.1)
    assert report.notes


def test_lines_deeper_than_truncation_are_rejected(config):
    op = punctured_square_H(1).operator()
    with pytest.raises(TruncationError):
        verify_forced_vanishing(op, lines=[0.125], config=config)


def test_line_without_punctures_is_unconstrained(config):
    report = verify_forced_vanishing(punctured_square_H(1).operator(), lines=[0.3],
                                     distances=(1e-2, 1e-3), config=config)
    line = report.measurements["lines"][0]
    assert line["status"] == "unconstrained"
    assert line["bounded"]
    assert not report.passed


def test_forced_vanishing_needs_provenance(plane, config):
    op = ScalarOperator(1, (ex.const(0.0), ex.const(1.0)), plane)
    with pytest.raises(PathologyError):
        verify_forced_vanishing(op, config=config)


def test_xi_region_is_x_simple():
    xi = xi_region(ORIGIN, 0.125, 3)
    assert xi.bbox == (-0.375, 0.125, -0.375, 0.375)
    c = classify(xi)
    assert c.x_simple
    assert len(c.components) == 1
    assert xi.contains(0.01, -0.25)
    assert not xi.contains(0.01, 0.0)


def test_xi_region_reflected():
    w = NonSimplicityWitness(t0=0.0, eps=0.25, x1=0.0, x2=0.0, upsilon=((0.0, 0.0),), reflected_t=True)
    xi = xi_region(w, 0.125, 2)
    assert xi.bbox == (-0.125, 0.375, -0.375, 0.375)
    assert xi.contains(-0.01, -0.25)


def test_nonsolvable_rhs_first_order(plane, config):
    base = ScalarOperator(1, (ex.const(0.0), ex.const(1.0)), plane)
    construction = gen_nonsolvable_rhs_first_order(base, ORIGIN, k_max=4, config=config)
    assert construction.t_star == pytest.approx((-0.25, -0.125, -0.25 / 3, -0.0625))
    for k, mass in enumerate(construction.mass, start=1):
        assert mass == pytest.approx(2 * k * 1.001)
        assert mass >= 2 * k
    report = verify_nonsolvable_rhs(construction, ORIGIN, config)
    assert report.passed
    for row in report.measurements["rows"]:
        assert all(abs(v) > row["k"] for v in row["values"])

    generated = construction.operator
    assert generated.provenance.kind == "rhs"
    again = problem_from_dict(problem_to_dict(generated)).operator
    assert again.f == generated.f
    assert again.provenance == generated.provenance


def test_nonsolvable_rhs_is_first_order_only(plane, config):
    op = gen_hom_counterexample(ORIGIN, plane, p=2)
    with pytest.raises(PathologyError):
        gen_nonsolvable_rhs_first_order(op, ORIGIN, k_max=2, config=config)
