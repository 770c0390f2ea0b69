import json
import os

import pytest

from src.ui.cli_app import main


def run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr()


def test_analyze_prints_classification(capsys, data_dir, tmp_path):
    code, out = run(capsys, "--output-dir", str(tmp_path), "analyze", str(data_dir / "punctured_plane.json"))
    assert code == 0
    data = json.loads(out.out)
    assert data["schema"] == "paramode/1"
    assert data["x_simple"] is False
    assert data["witness"]["eps"] == 0.25


def test_analyze_csv(capsys, data_dir):
    code, out = run(capsys, "analyze", str(data_dir / "rect.json"), "--csv")
    assert code == 0
    lines = out.out.splitlines()
    assert lines[0] == "t,intervals,a,b"
    assert len(lines) > 2


def test_missing_file_is_an_input_error(capsys, tmp_path):
    code, out = run(capsys, "analyze", str(tmp_path / "nope.json"))
    assert code == 2
    assert out.err.startswith("error:")


def test_invalid_config_is_an_input_error(capsys, data_dir):
    code, out = run(capsys, "--nx", "1", "analyze", str(data_dir / "rect.json"))
    assert code == 2
    assert "nx" in out.err


def test_unknown_command_exits():
    with pytest.raises(SystemExit):
        main(["integrate-everything"])


def test_wronskian_check(capsys, data_dir, tmp_path):
    code, out = run(capsys, "--output-dir", str(tmp_path), "--nt", "5", "--nx", "21",
                    "wronskian-check", str(data_dir / "liouville.json"))
    assert code == 0
    data = json.loads(out.out)
    assert all(c["pass"] for c in data["checks"])
    assert os.path.exists(data["report"])


def test_solve_writes_csv(capsys, data_dir, tmp_path):
    out_csv = tmp_path / "u.csv"
    code, out = run(capsys, "--nt", "5", "--nx", "21", "solve", str(data_dir / "oscillator_inhom.json"),
                    "--out", str(out_csv))
    assert code == 0
    data = json.loads(out.out)
    assert data["samples"] == 5
    assert data["failures"] == []
    header = out_csv.read_text(encoding="utf-8").splitlines()[0]
    assert header == "t,x,u_0,u_1"


def test_solve_inhom_with_zeta(capsys, data_dir, tmp_path):
    code, out = run(capsys, "--output-dir", str(tmp_path), "--nt", "5", "--nx", "101",
                    "solve-inhom", str(data_dir / "oscillator_inhom.json"),
                    "--zeta", str(data_dir / "zeta_oscillator.json"))
    assert code == 0
    assert json.loads(out.out)["cross_check_error"] <= 1e-5


def test_system(capsys, data_dir, tmp_path):
    code, out = run(capsys, "--nt", "5", "--nx", "21", "system", str(data_dir / "rotation_system.json"),
                    "--out", str(tmp_path / "v.csv"))
    assert code == 0
    data = json.loads(out.out)
    assert data["verdict"]["verdict"] == "fundamental"
    assert data["abel_deviation"] <= 1e-6
    assert data["cross_check_error"] <= 1e-5
    assert (tmp_path / "v.csv").exists()


def test_pathology_inhom(capsys, data_dir, tmp_path):
    generated = tmp_path / "gen.json"
    report = tmp_path / "report.json"
    code, _ = run(capsys, "pathology", str(data_dir / "punctured_plane.json"), "--kind", "inhom",
                  "--out", str(generated), "--report", str(report))
    assert code == 0
    data = json.loads(report.read_text(encoding="utf-8"))
    assert data["kind"] == "no_global_solution"
    assert data["pass"] is True
    assert json.loads(generated.read_text(encoding="utf-8"))["meta"]["kind"] == "inhom"


def test_reproduce_command(capsys, tmp_path):
    code, out = run(capsys, "--output-dir", str(tmp_path), "reproduce", "ex4.2")
    assert code == 0
    assert os.path.exists(out.out.strip())


def test_analyze_stacked_rectangles(capsys, data_dir):
    code, out = run(capsys, "analyze", str(data_dir / "stacked.json"))
    assert code == 0
    data = json.loads(out.out)
    assert data["components"] == 2
    assert data["witness"] is None


def test_solve_inhom_on_strip(capsys, data_dir, tmp_path):
    out_csv = tmp_path / "u.csv"
    code, out = run(capsys, "--nt", "3", "--nx", "21", "solve-inhom", str(data_dir / "ex4_1_strip.json"),
                    "--out", str(out_csv))
    assert code == 0
    assert json.loads(out.out)["cross_check_error"] <= 1e-5
    assert out_csv.read_text(encoding="utf-8").splitlines()[0] == "t,x,u_0"


def test_analyze_json_flag(capsys, data_dir):
    code, out = run(capsys, "analyze", str(data_dir / "rect.json"), "--json")
    assert code == 0
    data = json.loads(out.out)
    assert data["x_simple"] is True
    assert data["components"] == 1


def test_analyze_json_and_csv_exclusive(data_dir):
    with pytest.raises(SystemExit):
        main(["analyze", str(data_dir / "rect.json"), "--json", "--csv"])


def test_solve_grid_overrides_global_grid(capsys, data_dir, tmp_path):
    out_csv = tmp_path / "u.csv"
    code, out = run(capsys, "--nt", "9", "--nx", "41", "solve", str(data_dir / "oscillator_inhom.json"),
                    "--grid", "5,7", "--out", str(out_csv))
    assert code == 0
    assert json.loads(out.out)["samples"] == 5
    rows = out_csv.read_text(encoding="utf-8").splitlines()[1:]
    assert len({r.split(",")[0] for r in rows}) == 5
    assert len(rows) <= 5 * 7


@pytest.mark.parametrize("grid", ["5", "5,x", "5,7,9"])
def test_solve_bad_grid_exits(data_dir, grid):
    with pytest.raises(SystemExit):
        main(["solve", str(data_dir / "oscillator_inhom.json"), "--grid", grid])


def test_solve_grid_too_small_is_an_input_error(capsys, data_dir):
    code, out = run(capsys, "solve", str(data_dir / "oscillator_inhom.json"), "--grid", "5,1")
    assert code == 2
    assert "nx" in out.err


def test_fundamental_writes_json_grids(capsys, data_dir, tmp_path):
    out_json = tmp_path / "set.json"
    code, out = run(capsys, "--output-dir", str(tmp_path), "--nt", "5", "--nx", "21",
                    "fundamental", str(data_dir / "liouville.json"), "--out", str(out_json))
    assert code == 0
    data = json.loads(out_json.read_text(encoding="utf-8"))
    assert data["schema"] == "paramode/1"
    assert len(data["t"]) == 5
    assert len(data["x"]) == 5 and len(data["x"][0]) == 21
    assert sorted(data["grids"]) == ["phi1_0", "phi1_1", "phi2_0", "phi2_1"]
    for grid in data["grids"].values():
        assert len(grid) == 5 and all(len(row) == 21 for row in grid)
    # x = 0.5 es la sección: φ^1 = 1, φ^2 = 0
    row, col = min(((i, j) for i in range(5) for j in range(21)),
                   key=lambda ij: abs(data["x"][ij[0]][ij[1]] - 0.5))
    assert abs(data["x"][row][col] - 0.5) < 0.05
    assert data["grids"]["phi1_0"][row][col] == pytest.approx(1.0, abs=0.05)
    assert data["grids"]["phi2_0"][row][col] == pytest.approx(0.0, abs=0.05)


def test_fundamental_writes_csv_otherwise(capsys, data_dir, tmp_path):
    out_csv = tmp_path / "set.csv"
    code, _ = run(capsys, "--output-dir", str(tmp_path), "--nt", "3", "--nx", "11",
                  "fundamental", str(data_dir / "liouville.json"), "--out", str(out_csv))
    assert code == 0
    assert out_csv.read_text(encoding="utf-8").splitlines()[0] == "t,x,phi1_0,phi2_0,phi1_1,phi2_1"
