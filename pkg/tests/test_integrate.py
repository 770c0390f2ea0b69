import math

import numpy as np
import pytest

from src.algorythmes.integrate.integrate_algor import (
    SliceDomainError,
    SliceStatus,
    interior_ts,
    solve_slice,
    sweep,
)
from src.core import expr as ex
from src.core.expr import parse
from src.core.operators import LinearSystem, ScalarOperator, companion
from src.core.region import punctured_plane, rectangle, strip


def scalar_system(a: str, region) -> LinearSystem:
    return LinearSystem(1, ((parse(a),),), (ex.const(0.0),), region)


def oscillator(region) -> LinearSystem:
    return companion(ScalarOperator(2, (ex.const(1.0), ex.const(0.0), ex.const(1.0)), region))


def test_exponential_both_directions(config):
    sol = solve_slice(scalar_system("1", rectangle(0.0, 1.0, -1.0, 1.0)), 0.5, 0.0, [1.0], config=config)
    assert sol.status is SliceStatus.OK
    assert sol.x_span == (-1.0, 1.0)
    assert sol(1.0)[0] == pytest.approx(math.e, rel=1e-8)
    assert sol(-1.0)[0] == pytest.approx(1 / math.e, rel=1e-8)
    assert sol(0.0)[0] == 1.0


def test_stops_short_of_region_boundary(config):
    sol = solve_slice(scalar_system("0", strip(0.0, 1.0)), 0.0, 0.5, [1.0], config=config)
    assert sol.status is SliceStatus.LEFT_DOMAIN
    lo, hi = sol.x_span
    assert lo == pytest.approx(config.boundary_margin, abs=1e-15)
    assert hi == pytest.approx(1.0 - config.boundary_margin, abs=1e-15)
    assert np.isnan(sol(1.0 - 1e-12)).all()


def test_target_window_is_ok(config):
    sol = solve_slice(scalar_system("0", strip(0.0, 1.0)), 0.0, 0.5, [2.0], target=(0.25, 0.75), config=config)
    assert sol.status is SliceStatus.OK
    assert sol.reached == (0.25, 0.75)
    assert sol(0.3)[0] == pytest.approx(2.0)


def test_blowup_is_reported_not_raised(config):
    region = punctured_plane(bbox=(-2.0, 2.0, -2.0, 2.0))
    system = scalar_system("1/(x^2 + t^2)", region)
    sol = solve_slice(system, 0.01, -1.0, [1.0], config=config)
    assert sol.status is SliceStatus.BLOWUP
    assert sol.blowup_points and sol.blowup_points[0] > -1.0


def test_log_domain_follows_closed_form(config):
    region = punctured_plane(bbox=(-2.0, 2.0, -2.0, 2.0))
    system = scalar_system("1/(x^2 + t^2)", region)
    t = 0.01
    sol = solve_slice(system, t, -1.0, [1.0], config=config, log_domain=True)
    assert sol.status is SliceStatus.OK
    closed = (math.atan(1.0 / t) - math.atan(-1.0 / t)) / t
    assert sol.log_values(1.0)[0] == pytest.approx(closed, rel=1e-6)
    with pytest.raises(SliceDomainError):
        solve_slice(system, t, -1.0, [-1.0], config=config, log_domain=True)


def test_matrix_state_rotation(config):
    sol = solve_slice(oscillator(rectangle(0.0, 1.0, -2.0, 2.0)), 0.5, 0.0, np.eye(2), config=config)
    phi = sol(1.5)
    assert phi.shape == (2, 2)
    expected = np.array([[math.cos(1.5), math.sin(1.5)], [-math.sin(1.5), math.cos(1.5)]])
    assert np.allclose(phi, expected, atol=1e-8)
    assert sol(np.array([0.5, 1.0])).shape == (2, 2, 2)


def test_start_outside_region(config):
    system = scalar_system("1", strip(0.0, 1.0))
    with pytest.raises(SliceDomainError):
        solve_slice(system, 0.0, 2.0, [1.0], config=config)
    with pytest.raises(SliceDomainError):
        solve_slice(system, 0.0, 0.5, [1.0, 2.0], config=config)
    with pytest.raises(SliceDomainError):
        solve_slice(scalar_system("1", punctured_plane()), 0.0, 0.0, [1.0], config=config)


def test_sweep_records_failures(config):
    system = scalar_system("1", strip(0.0, 1.0))
    ts = [-0.5, 0.0, 0.5]

    def theta(t):
        return 2.0 if t == 0.0 else 0.5

    solution = sweep(system, theta, [1.0], ts, config)
    assert solution.slices[1] is None
    assert [f.t for f in solution.failures] == [0.0]
    field = solution.sample(5)
    assert np.isnan(field.values[1]).all()
    assert np.allclose(field.values[0, 2], 1.0)
    assert solution.at_section()[2] == pytest.approx([1.0])


def test_sweep_with_time_dependent_data(config):
    system = scalar_system("t", rectangle(0.0, 1.0, -1.0, 1.0))
    ts = interior_ts((0.0, 1.0), 4)
    solution = sweep(system, lambda t: 0.0, lambda t: [1.0 + t], ts, config)
    at_one = solution.evaluate(lambda t: 1.0)[:, 0]
    assert at_one == pytest.approx((1.0 + ts) * np.exp(ts), rel=1e-8)


def test_interior_ts_avoid_endpoints():
    ts = interior_ts((0.0, 1.0), 4)
    assert ts.tolist() == [0.125, 0.375, 0.625, 0.875]
