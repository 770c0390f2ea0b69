import time

import numpy as np
import pytest

from src.algorythmes.fundamental.fundamental_algor import (
    build_componentwise,
    build_fundamental,
    expand,
    is_fundamental,
    reconstruct,
    wronskian,
)
from src.algorythmes.integrate.integrate_algor import sweep
from src.algorythmes.systems.systems_algor import Verdict
from src.algorythmes.topology.topology_algor import SectionFn, classify
from src.core import expr as ex
from src.core.expr import parse
from src.core.json_loader import JsonLoader
from src.core.operators import LeadingCoefficientError, ScalarOperator, companion
from src.core.region import punctured_plane, rectangle


@pytest.fixture
def liouville(data_dir):
    return JsonLoader(str(data_dir / "liouville.json")).problem().operator


@pytest.fixture
def liouville_set(liouville, coarse):
    return build_fundamental(liouville, theta=SectionFn.constant(0.5, (0.0, 1.0)), config=coarse)


def test_wronskian_matches_liouville_formula(liouville_set, coarse):
    w = wronskian(liouville_set, coarse)
    assert w.max_deviation <= 1e-6
    assert w.section_deviation <= 1e-12
    assert np.all(w.sampled[np.isfinite(w.sampled)] > 0)


@pytest.mark.slow
def test_wronskian_on_full_grid(liouville, config):
    full = config.with_overrides(nt=200, nx=200)
    start = time.perf_counter()
    fset = build_fundamental(liouville, theta=SectionFn.constant(0.5, (0.0, 1.0)), config=full)
    w = wronskian(fset, full)
    assert time.perf_counter() - start < 10.0
    assert w.max_deviation <= 1e-6
    assert w.section_deviation <= 1e-12

def test_identity_at_section(liouville_set, coarse):
    field = liouville_set.sample(coarse.nx)
    mid = coarse.nx // 2
    assert np.allclose(field.x[:, mid], 0.5)
    assert np.allclose(field.values[:, mid], np.eye(2), atol=1e-12)
    assert liouville_set.solutions(coarse.nx).shape == (coarse.nt, coarse.nx, 2)


def test_expand_and_reconstruct(liouville, liouville_set, coarse):
    theta = liouville_set.theta
    u = sweep(companion(liouville), theta, lambda t: [1.0 + t, -0.5], liouville_set.ts, coarse)
    zeta = expand(u, liouville_set)
    assert zeta.values[0] == pytest.approx(1.0 + liouville_set.ts, abs=1e-12)
    assert zeta.values[1] == pytest.approx(-0.5, abs=1e-12)
    rebuilt = reconstruct(liouville_set, zeta, coarse.nx)
    direct = u.sample(coarse.nx)
    assert rebuilt.same_grid(direct)
    scale = 1.0 + np.abs(direct.values)
    assert np.max(np.abs(rebuilt.values - direct.values) / scale) <= 1e-6


def test_expand_and_reconstruct_random_data(liouville, liouville_set, coarse, rng):
    ts = liouville_set.ts
    for a, b, c, d in rng.uniform(-2.0, 2.0, size=(20, 4)):
        init = lambda t, a=a, b=b, c=c, d=d: [a + b * np.sin(3 * t), c * t ** 2 + d]
        u = sweep(companion(liouville), liouville_set.theta, init, ts, coarse)
        zeta = expand(u, liouville_set)
        assert zeta.values[0] == pytest.approx(a + b * np.sin(3 * ts), abs=1e-6)
        assert zeta.values[1] == pytest.approx(c * ts ** 2 + d, abs=1e-6)
        rebuilt = reconstruct(liouville_set, zeta, coarse.nx)
        direct = u.sample(coarse.nx)
        scale = 1.0 + np.abs(direct.values)
        assert np.nanmax(np.abs(rebuilt.values - direct.values) / scale) <= 1e-6


def test_rectangle_set_is_fundamental(liouville, liouville_set, coarse):
    verdict = is_fundamental(liouville_set, classify(liouville.region), coarse)
    assert verdict.kind is Verdict.FUNDAMENTAL
    assert verdict.zero_at is None


def test_default_section_is_computed(liouville, coarse):
    fset = build_fundamental(liouville, config=coarse)
    lo, hi = 0.0, 1.0
    assert all(lo < fset.theta(float(t)) < hi for t in fset.ts)


def test_componentwise_on_punctured_plane(coarse):
    region = punctured_plane(resolution=0.02)
    op = ScalarOperator(1, (parse("-t"), ex.const(1.0)), region)
    classification = classify(region)
    sets = build_componentwise(op, classification, coarse)
    assert len(sets) == len(classification.pieces) == 2
    for fset in sets:
        w = wronskian(fset, coarse)
        assert w.max_deviation <= 1e-6
        verdict = is_fundamental(fset, classification, coarse)
        assert verdict.kind is Verdict.NOT_FUNDAMENTAL


def test_leading_coefficient_is_checked(coarse):
    op = ScalarOperator(1, (ex.const(0.0), parse("x")), rectangle(0.0, 1.0, -1.0, 1.0, resolution=0.05))
    with pytest.raises(LeadingCoefficientError):
        build_fundamental(op, theta=SectionFn.constant(0.5, (0.0, 1.0)), config=coarse)
