import numpy as np
import pytest

from src.algorythmes.fundamental.fundamental_algor import build_fundamental
from src.algorythmes.inhomog.inhomog_algor import (
    GridMismatchError,
    general,
    integrands,
    particular,
    solvability,
)
from src.algorythmes.systems.systems_algor import ZetaSamples
from src.algorythmes.topology.topology_algor import NotXSimpleError, SectionFn
from src.core import expr as ex
from src.core.expr import parse
from src.core.json_loader import JsonLoader
from src.core.operators import OperatorError, ScalarOperator, residual
from src.core.region import punctured_plane, rectangle, stacked_rectangles


@pytest.fixture
def oscillator(data_dir):
    return JsonLoader(str(data_dir / "oscillator_inhom.json")).problem().operator


@pytest.fixture
def fine(coarse):
    return coarse.with_overrides(nt=5, nx=201)


@pytest.fixture
def fset(oscillator, fine):
    return build_fundamental(oscillator, theta=SectionFn.constant(0.0, (0.0, 1.0)), config=fine)


def test_particular_solution_routes_agree(oscillator, fset, fine):
    psi = particular(oscillator, fset, fine)
    assert psi.cross_check_error <= 1e-5
    field = psi.sample(fine.nx)
    # u'' + u = 1 con dato nulo en 0: 1 - cos x
    assert np.allclose(field.values[..., 0], 1.0 - np.cos(field.x), atol=1e-7)


def test_general_solution_residual(oscillator, fset, fine):
    zeta = ZetaSamples(fset.ts, np.vstack([np.ones(len(fset.ts)), fset.ts]))
    u = general(oscillator, fset, zeta, config=fine)
    assert u.values.shape == (fine.nt, fine.nx, 2)
    assert residual(oscillator, u) <= 1e-4
    # ψ + cos x + t sin x
    expected = 1.0 + fset.ts[:, None] * np.sin(u.x)
    assert np.allclose(u.values[..., 0], expected, atol=1e-6)


def test_general_rejects_mismatched_zeta(oscillator, fset, fine):
    with pytest.raises(GridMismatchError):
        general(oscillator, fset, ZetaSamples(fset.ts, np.zeros((1, len(fset.ts)))), config=fine)
    short = ZetaSamples([0.4, 0.5], np.zeros((2, 2)))
    with pytest.raises(GridMismatchError):
        general(oscillator, fset, short, config=fine)


def test_integrands_first_order():
    region = rectangle(0.0, 1.0, 0.0, 1.0, resolution=0.05)
    op = ScalarOperator(1, (ex.const(0.0), parse("2")), region, parse("x"))
    phi = np.full((3, 1, 1), 4.0)
    out = integrands(op, phi, np.zeros(3), np.array([1.0, 2.0, 3.0]))
    assert out[:, 0] == pytest.approx([1.0 / 8, 2.0 / 8, 3.0 / 8])


def test_integrands_second_order_signs():
    region = rectangle(0.0, 1.0, 0.0, 1.0, resolution=0.05)
    op = ScalarOperator(2, (ex.const(1.0), ex.const(0.0), ex.const(1.0)), region, ex.const(1.0))
    x = 0.3
    phi = np.array([[np.cos(x), np.sin(x)], [-np.sin(x), np.cos(x)]])
    out = integrands(op, phi, 0.0, x)
    # ψ = cos x ∫ -sin + sin x ∫ cos
    assert out == pytest.approx([-np.sin(x), np.cos(x)])


def test_particular_needs_rhs(fset, oscillator, fine):
    with pytest.raises(OperatorError):
        particular(oscillator.with_rhs(None), fset, fine)


def test_particular_needs_x_simple_region(coarse):
    region = punctured_plane(resolution=0.05)
    op = ScalarOperator(1, (ex.const(0.0), ex.const(1.0)), region, ex.const(1.0))
    fset = build_fundamental(op.with_rhs(None), theta=SectionFn.constant(0.5), config=coarse,
                             check_leading=False)
    with pytest.raises(NotXSimpleError):
        particular(op, fset, coarse)


def test_solvability_verdicts(coarse):
    assert solvability(rectangle(0.0, 1.0, 0.0, 1.0, resolution=0.05), coarse).solvable
    assert solvability(stacked_rectangles(resolution=0.05), coarse).solvable


def test_punctured_plane_is_not_solvable(coarse):
    verdict = solvability(punctured_plane(), coarse)
    assert not verdict.solvable
    entry = verdict.components[0]
    assert entry.witness is not None
    assert entry.defect.passed
    defects = entry.defect.measurements["defect"]
    assert all(b > a for a, b in zip(defects, defects[1:]))
    data = verdict.to_dict()
    assert data["components"][0]["instance"]["kind"] == "inhom"
