import numpy as np
import pytest

from src.core import expr as ex
from src.core.expr import parse
from src.core.operators import (
    LeadingCoefficientError,
    LinearSystem,
    OperatorError,
    Provenance,
    ResidualGridError,
    SampledField,
    ScalarOperator,
    check_leading_coefficient,
    companion,
    liouville_integrand,
    residual,
)
from src.core.region import rectangle


@pytest.fixture
def rect():
    return rectangle(0.0, 1.0, -1.0, 1.0, resolution=0.05)


def second_order(rect, q="t + sin(x)", f=None):
    g = (ex.const(1.0), parse(q), ex.const(1.0))
    return ScalarOperator(2, g, rect, parse(f) if f else None)


def test_companion_layout(rect):
    system = companion(second_order(rect, f="x"))
    A = system.matrix(0.5, 0.2)
    assert A[0].tolist() == [0.0, 1.0]
    assert A[1] == pytest.approx([-1.0, -(0.5 + np.sin(0.2))])
    assert system.forcing(0.5, 0.2).tolist() == [0.0, pytest.approx(0.2)]
    assert system.trace(0.5, 0.2) == pytest.approx(-(0.5 + np.sin(0.2)))


def test_companion_divides_by_leading(rect):
    op = ScalarOperator(1, (parse("x"), ex.const(2.0)), rect, parse("4"))
    system = companion(op)
    assert system.matrix(0.0, 3.0)[0, 0] == pytest.approx(-1.5)
    assert system.forcing(0.0, 3.0)[0] == pytest.approx(2.0)


def test_operator_shape_errors(rect):
    with pytest.raises(OperatorError):
        ScalarOperator(2, (ex.const(1.0), ex.const(1.0)), rect)
    with pytest.raises(OperatorError):
        ScalarOperator(0, (ex.const(1.0),), rect)
    with pytest.raises(OperatorError):
        ScalarOperator(1, (parse("x < 1"), ex.const(1.0)), rect)
    with pytest.raises(OperatorError):
        LinearSystem(2, ((ex.const(0.0),),), (ex.const(0.0), ex.const(0.0)), rect)


def test_homogeneity(rect):
    assert second_order(rect).is_homogeneous
    assert second_order(rect).with_rhs(ex.const(0.0)).is_homogeneous
    assert not second_order(rect, f="1").is_homogeneous
    assert companion(second_order(rect)).is_homogeneous
    assert not companion(second_order(rect, f="x")).is_homogeneous


def test_liouville_integrand(rect):
    e = liouville_integrand(second_order(rect))
    assert e.scalar(0.5, 0.0) == pytest.approx(-0.5)


def test_rhs_matrix_state(rect):
    system = companion(second_order(rect, q="0", f="1"))
    fun = system.rhs(0.5, ncols=2, homogeneous=True)
    out = fun(0.0, np.eye(2).ravel()).reshape(2, 2)
    assert out[0].tolist() == [0.0, 1.0]
    assert out[1].tolist() == [-1.0, 0.0]
    forced = system.rhs(0.5)
    assert forced(0.0, np.zeros(2)).tolist() == [0.0, 1.0]
    hom = system.rhs(0.5, homogeneous=True)
    assert hom(0.0, np.array([1.0, 0.0])).tolist() == [0.0, -1.0]
    with pytest.raises(OperatorError):
        system.rhs(0.5, log_domain=True)


def test_log_domain_rhs(rect):
    system = companion(ScalarOperator(1, (parse("-x"), ex.const(1.0)), rect))
    assert system.rhs(0.5, log_domain=True)(2.0, np.array([0.0]))[0] == pytest.approx(2.0)


def test_leading_coefficient_sign(rect):
    assert check_leading_coefficient(second_order(rect)) == {1: 1}
    op = ScalarOperator(1, (ex.const(0.0), parse("-2 - x^2")), rect)
    assert check_leading_coefficient(op) == {1: -1}


def test_leading_coefficient_vanishes(rect):
    op = ScalarOperator(1, (ex.const(0.0), parse("x - 0.01")), rect)
    with pytest.raises(LeadingCoefficientError) as info:
        check_leading_coefficient(op)
    assert info.value.point[1] == pytest.approx(0.01, abs=0.05)


def test_residual_of_exact_solution(rect):
    op = second_order(rect, q="0")
    nx = 201
    t = np.array([0.25, 0.75])
    x = np.tile(np.linspace(-1.0, 1.0, nx), (2, 1))
    u = SampledField(t, x, np.sin(x + t[:, None]))
    assert residual(op, u) <= 1e-4
    wrong = SampledField(t, x, np.exp(x))
    assert residual(op, wrong) > 1e-2


def test_residual_needs_enough_nodes(rect):
    op = second_order(rect)
    u = SampledField(np.array([0.5]), np.array([[0.0, 0.5, 1.0]]), np.zeros((1, 3)))
    with pytest.raises(ResidualGridError):
        residual(op, u)


def test_provenance_dict_round_trip():
    prov = Provenance(kind="hom", singular_points=((0.0, 0.0, 1.0),), approach="right",
                      window=(-0.25, 0.25), truncation=None, witness={"t0": 0.0})
    assert Provenance.from_dict(prov.to_dict()) == prov
