import math

import numpy as np
import pytest

from src.core.graph_utils import build_raster, component_boxes
from src.core.region import (
    DiskShape,
    RectShape,
    Region,
    RegionError,
    annulus,
    punctured_plane,
    punctured_square,
    rectangle,
    slit_plane,
    stacked_rectangles,
)


def test_rectangle_slice_is_open_interval():
    s = rectangle(0.0, 1.0, -1.0, 2.0).slice(0.5)
    assert s.count == 1
    iv = s.intervals[0]
    assert iv.lo == pytest.approx(-1.0) and iv.hi == pytest.approx(2.0)
    assert s.containing(0.0) is iv
    assert s.containing(2.0) is None


def test_puncture_splits_only_its_own_slice():
    region = punctured_plane()
    assert region.slice(0.0).count == 2
    assert region.slice(1e-6).count == 1
    left, right = region.slice(0.0).intervals
    assert left.hi == 0.0 and left.hi_kind == "excluded"
    assert right.lo == 0.0 and right.lo_kind == "excluded"
    assert left.lo_kind == "clip"


def test_contains_respects_exclusions_and_open_bbox():
    region = punctured_plane()
    assert not region.contains(0.0, 0.0)
    assert region.contains(0.0, 0.1)
    assert not region.contains(1.0, 0.0)
    mask = region.contains(np.array([0.0, 0.5]), np.array([0.0, 0.0]))
    assert mask.tolist() == [False, True]


def test_slit_plane_slices():
    region = slit_plane()
    assert region.slice(0.5).count == 2
    assert region.slice(-0.5).count == 1


def test_disk_slice_is_exact():
    region = Region((-2.0, 2.0, -2.0, 2.0), (DiskShape(0.0, 0.0, 1.0),))
    iv = region.slice(0.6).intervals[0]
    assert iv.lo == pytest.approx(-0.8, abs=1e-12)
    assert iv.hi == pytest.approx(0.8, abs=1e-12)


def test_predicate_slice_is_refined():
    region = annulus(resolution=0.01)
    s = region.slice(0.0)
    assert s.count == 2
    inner = math.sqrt(0.25)
    assert s.intervals[0].hi == pytest.approx(-inner, abs=1e-3)
    assert s.intervals[1].lo == pytest.approx(inner, abs=1e-3)


def test_punctured_square_points_and_resolution():
    region = punctured_square(2)
    assert region.h == 0.125
    assert sorted(region.excluded_points) == sorted([(0.5, 0.5), (0.25, 0.75), (0.5, 0.75), (0.75, 0.75)])
    assert region.slice(0.5).count == 3


def test_invalid_regions():
    with pytest.raises(RegionError):
        Region((1.0, 0.0, 0.0, 1.0), (RectShape(0.0, 1.0, 0.0, 1.0),))
    with pytest.raises(RegionError):
        Region((0.0, 1.0, 0.0, 1.0), ())
    with pytest.raises(RegionError):
        Region((0.0, math.inf, 0.0, 1.0), (RectShape(0.0, 1.0, 0.0, 1.0),))
    with pytest.raises(RegionError):
        rectangle(0.0, 1.0, 0.0, 1.0).slice(2.0)
    with pytest.raises(RegionError):
        punctured_square(0)


def test_region_to_dict_uses_null_for_infinite_bounds():
    data = punctured_plane().to_dict()
    assert data["shapes"] == [{"rect": [None, None, None, None]}]
    assert data["exclude_points"] == [[0.0, 0.0]]


def test_raster_components():
    raster = build_raster(stacked_rectangles(resolution=0.05))
    assert raster.count == 2
    boxes = component_boxes(raster)
    assert boxes[0] == pytest.approx((0.0, 1.0, 0.0, 1.0), abs=0.05)
    assert boxes[1] == pytest.approx((0.0, 1.0, 2.0, 3.0), abs=0.05)


def test_isolated_point_does_not_disconnect_raster():
    assert build_raster(punctured_plane(resolution=0.05)).count == 1


def test_slit_is_thickened_in_raster():
    region = Region((-1.0, 1.0, -1.0, 1.0), (RectShape(-1.0, 1.0, -1.0, 1.0),),
                    excluded_hsegments=((-1.0, 1.0, 0.02),), resolution=0.05)
    assert build_raster(region).count == 2
