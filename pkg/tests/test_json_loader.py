import json

import numpy as np
import pytest

from src.algorythmes.topology.topology_algor import classify
from src.core import expr as ex
from src.core.expr import parse
from src.core.json_loader import (
    JsonLoader,
    JsonLoadError,
    problem_from_dict,
    problem_to_dict,
    region_from_dict,
    save_json,
)
from src.core.operators import Provenance, ScalarOperator
from src.core.region import punctured_plane


def write(tmp_path, name, data):
    path = tmp_path / name
    path.write_text(data if isinstance(data, str) else json.dumps(data), encoding="utf-8")
    return str(path)


def test_region_file(data_dir):
    region = JsonLoader(str(data_dir / "punctured_plane.json")).region()
    assert region.excluded_points == ((0.0, 0.0),)
    assert region.slice(0.0).count == 2
    assert region.name == "punctured_plane"


def test_problem_with_region_reference(data_dir):
    problem = JsonLoader(str(data_dir / "liouville.json")).problem()
    op = problem.operator
    assert op.p == 2
    assert op.region.bbox == (0.0, 1.0, 0.0, 1.0)
    assert problem.theta.scalar(0.3, 0.0) == 0.5
    assert problem.init is None


def test_system_file(data_dir):
    loader = JsonLoader(str(data_dir / "rotation_system.json"))
    assert loader.is_system()
    system = loader.system().system
    assert system.matrix(0.2, 0.3).tolist() == [[0.0, 1.0], [-1.0, 0.0]]
    assert not system.is_homogeneous


def test_zeta_file(data_dir):
    t, zeta = JsonLoader(str(data_dir / "zeta_oscillator.json")).zeta()
    assert t.tolist() == [0.0, 0.5, 1.0]
    assert zeta.shape == (2, 3)


def test_invalid_json_reports_line_and_column(tmp_path):
    path = write(tmp_path, "bad.json", '{\n  "schema": "paramode/1",\n  "bbox": [0, 1,\n}')
    with pytest.raises(JsonLoadError) as info:
        JsonLoader(path).load()
    assert info.value.line == 4
    assert info.value.column is not None


def test_missing_file(tmp_path):
    with pytest.raises(JsonLoadError):
        JsonLoader(str(tmp_path / "missing.json")).load()


def test_wrong_schema(tmp_path):
    path = write(tmp_path, "r.json", {"schema": "paramode/9", "bbox": [0, 1, 0, 1], "shapes": []})
    with pytest.raises(JsonLoadError):
        JsonLoader(path).region()


def test_expression_error_names_the_field(tmp_path):
    data = {"schema": "paramode/1", "region": {"bbox": [0, 1, 0, 1], "shapes": [{"rect": [0, 1, 0, 1]}]},
            "order": 1, "g": ["0", "u/(x^2+t^2"]}
    with pytest.raises(JsonLoadError) as info:
        problem_from_dict(data)
    assert info.value.field == "g[1]"
    assert "columna 11" in str(info.value)


def test_theta_may_not_depend_on_x(tmp_path):
    data = {"region": {"bbox": [0, 1, 0, 1], "shapes": [{"rect": [0, 1, 0, 1]}]},
            "order": 1, "g": ["0", "1"], "theta": "x"}
    with pytest.raises(JsonLoadError) as info:
        problem_from_dict(data)
    assert info.value.field == "theta"


def test_init_length_must_match_order():
    data = {"region": {"bbox": [0, 1, 0, 1], "shapes": [{"rect": [0, 1, 0, 1]}]},
            "order": 2, "g": ["1", "0", "1"], "init": ["1"]}
    with pytest.raises(JsonLoadError):
        problem_from_dict(data)


def test_unknown_shape():
    with pytest.raises(JsonLoadError) as info:
        region_from_dict({"bbox": [0, 1, 0, 1], "shapes": [{"triangle": [0, 1]}]})
    assert info.value.field == "shapes[0]"


def test_generated_problem_survives_save_and_load(tmp_path):
    region = punctured_plane()
    prov = Provenance(kind="inhom", singular_points=((0.0, 0.0, 1.0),), window=(-0.25, 0.25))
    op = ScalarOperator(1, (ex.const(0.0), ex.const(1.0)), region, parse("1.0/((x - 0.0)^2 + (t - 0.0)^2)"), prov)
    path = save_json(problem_to_dict(op), str(tmp_path / "gen.json"))
    again = JsonLoader(str(path)).problem().operator
    assert again.g == op.g
    assert again.f == op.f
    assert again.provenance == prov
    assert again.region.excluded_points == region.excluded_points
    xs = np.linspace(-1, 1, 7)
    assert np.array_equal(again.f(0.3, xs), op.f(0.3, xs))


def test_save_json_rejects_nan(tmp_path):
    with pytest.raises(ValueError):
        save_json({"value": float("nan")}, str(tmp_path / "nan.json"))


def test_piece_region_survives_save_and_load(tmp_path):
    piece = classify(punctured_plane(resolution=0.05)).pieces[0].region
    assert piece.band is not None
    path = save_json(piece.to_dict(), str(tmp_path / "piece.json"))
    loaded = JsonLoader(str(path)).region()
    assert loaded == piece
    assert loaded.band == piece.band
    assert loaded.name == piece.name


@pytest.mark.parametrize("band, field", [
    ({"t": [0.0, 1.0], "lo": [0.0, 0.0]}, "band"),
    ({"t": [0.0], "lo": [0.0], "hi": [1.0]}, "band"),
    ({"t": [1.0, 0.0], "lo": [0.0, 0.0], "hi": [1.0, 1.0]}, "band.t"),
    ({"t": [0.0, 1.0], "lo": [0.0], "hi": [1.0, 1.0]}, "band.lo"),
])
def test_invalid_band(band, field):
    data = {"schema": "paramode/1", "bbox": [0, 1, 0, 1], "shapes": [{"rect": [0, 1, 0, 1]}], "band": band}
    with pytest.raises(JsonLoadError) as info:
        region_from_dict(data)
    assert info.value.field == field
