import csv
import io
import warnings

import numpy as np
import pytest

from porous_scaffold.cli import main, parse_values, resolve_function
from porous_scaffold.io_formats import read_stl, read_tdf, write_tbss
from porous_scaffold.polygonizer import TriangleMesh, is_closed
from porous_scaffold.spline_core import identity_solid
from porous_scaffold.tdf_builder import EditSet, ParametricGrid, _vertex_supports


@pytest.fixture(autouse=True)
def no_warning_filters():
    # main() reports warnings on stderr; make sure they are not filtered away
    with warnings.catch_warnings():
        warnings.simplefilter("always")
        yield


@pytest.fixture
def cube_tbss(tmp_path):
    path = tmp_path / "cube.tbss"
    write_tbss(identity_solid((4, 4, 4)), path)
    return path


@pytest.fixture
def cube_tdf(tmp_path, cube_tbss):
    out = tmp_path / "cube.tdf"
    assert main(["tdf-build", "--tbss", str(cube_tbss), "--method", "function", "--fn", "sym3",
                 "--tpms", "P", "--grid", "20", "--control", "8", "--out", str(out)]) == 0
    return out


def welded(mesh):
    V, inv = np.unique(mesh.vertices, axis=0, return_inverse=True)
    return TriangleMesh(V, inv.reshape(-1)[mesh.triangles], "physical")


def test_value_parsing():
    assert parse_values("ramp:0:1:5") == [0, 0.25, 0.5, 0.75, 1]
    assert parse_values("0.1, 0.2,0.3") == [0.1, 0.2, 0.3]
    f = resolve_function("expr:sin(u) + v*w")
    assert f(0.0, 2.0, 3.0) == 6.0
    with pytest.raises(ValueError):
        resolve_function("expr:__import__('os')")
    with pytest.raises(ValueError):
        resolve_function("nope")


def test_tdf_build_function(cube_tdf):
    doc = read_tdf(cube_tdf)
    assert doc.tdf.shape == (8, 8, 8)
    assert doc.periods.wx == pytest.approx(4 * np.pi)


def test_tdf_build_layer(tmp_path, cube_tbss):
    out = tmp_path / "layer.tdf"
    rc = main(["tdf-build", "--tbss", str(cube_tbss), "--method", "layer", "--axis", "w",
               "--values", "ramp:0:1:12", "--grid", "12", "--control", "6", "--tpms", "G",
               "--out", str(out)])
    assert rc == 0
    doc = read_tdf(out)
    # the ramp is normalized onto [-0.8, 0.8] and fitted; the field rises along w
    vals = doc.tdf.evaluate(np.full(5, 0.5), np.full(5, 0.5), np.linspace(0, 1, 5))
    assert np.all(np.diff(vals) > 0)
    assert vals[0] == pytest.approx(-0.8, abs=0.02) and vals[-1] == pytest.approx(0.8, abs=0.02)


def test_tdf_build_filling_model(tmp_path):
    out = tmp_path / "beam.tdf"
    assert main(["tdf-build", "--model", "beam", "--method", "filling", "--grid", "10",
                 "--control", "6", "--out", str(out)]) == 0
    assert read_tdf(out).solid.shape == (6, 10, 6)


def test_layer_without_values_is_usage_error(tmp_path, cube_tbss):
    with pytest.raises(SystemExit) as err:
        main(["tdf-build", "--tbss", str(cube_tbss), "--method", "layer", "--out", str(tmp_path / "x")])
    assert err.value.code == 2


def test_missing_solid_is_usage_error(tmp_path):
    with pytest.raises(SystemExit) as err:
        main(["tdf-build", "--method", "function", "--fn", "u", "--out", str(tmp_path / "x")])
    assert err.value.code == 2


def test_generate_pore(tmp_path, cube_tdf, capsys):
    out = tmp_path / "pore.stl"
    assert main(["generate", "--tdf", str(cube_tdf), "--structure", "pore", "--resolution", "24",
                 "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "closed: True" in text and "timing:" in text
    mesh = read_stl(out)
    assert out.stat().st_size == 84 + 50 * mesh.n_triangles
    assert is_closed(welded(mesh))


def test_generate_sheet_ascii(tmp_path, cube_tdf):
    out = tmp_path / "sheet.stl"
    assert main(["generate", "--tdf", str(cube_tdf), "--structure", "sheet", "--epsilon", "0.3",
                 "--resolution", "16", "--ascii", "--out", str(out)]) == 0
    assert out.read_text().startswith("solid")


def test_generate_threads_identical_bytes(tmp_path, cube_tdf):
    a, b = tmp_path / "a.stl", tmp_path / "b.stl"
    for path, n in ((a, "1"), (b, "3")):
        assert main(["generate", "--tdf", str(cube_tdf), "--resolution", "20", "--threads", n,
                     "--out", str(path)]) == 0
    assert a.read_bytes() == b.read_bytes()


@pytest.mark.parametrize("bad", ["1", "0", "x"])
def test_bad_resolution(tmp_path, cube_tdf, bad):
    with pytest.raises(SystemExit) as err:
        main(["generate", "--tdf", str(cube_tdf), "--resolution", bad, "--out", str(tmp_path / "o.stl")])
    assert err.value.code == 2


def test_missing_input_file(tmp_path, capsys):
    rc = main(["generate", "--tdf", str(tmp_path / "nope.tdf"), "--out", str(tmp_path / "o.stl")])
    assert rc == 1
    assert capsys.readouterr().err.startswith("error:")


def test_modify_empty_edits(tmp_path, cube_tdf):
    edits = tmp_path / "none.txt"
    edits.write_text("# nothing to change\n")
    out = tmp_path / "same.tdf"
    assert main(["modify", "--tdf", str(cube_tdf), "--edits", str(edits), "--tpms", "P",
                 "--grid", "20", "--out", str(out)]) == 0
    assert out.read_bytes() == cube_tdf.read_bytes()


def test_modify_one_edit_changes_only_support(tmp_path, cube_tdf):
    edits = tmp_path / "one.txt"
    edits.write_text("3 4 5 0.7\n")
    out = tmp_path / "mod.tdf"
    assert main(["modify", "--tdf", str(cube_tdf), "--edits", str(edits), "--tpms", "P",
                 "--grid", "20", "--out", str(out)]) == 0
    before, after = read_tdf(cube_tdf), read_tdf(out)
    changed = np.flatnonzero((before.tdf.coefficients != after.tdf.coefficients).ravel())
    axes = ParametricGrid.zeros((20, 20, 20)).axis_parameters()
    flat, w = _vertex_supports(before.tdf, np.array([[axes[0][3], axes[1][4], axes[2][5]]]))
    support = set(flat[w != 0].tolist())
    assert len(changed) > 0 and set(changed.tolist()) <= support


def test_modify_clamp_warning(tmp_path, cube_tdf, capsys):
    edits = tmp_path / "big.txt"
    edits.write_text("3 4 5 5.0\n")
    assert main(["modify", "--tdf", str(cube_tdf), "--edits", str(edits), "--tpms", "P",
                 "--grid", "20", "--out", str(tmp_path / "m.tdf")]) == 0
    assert "warning:" in capsys.readouterr().err


def test_modify_requires_tpms(tmp_path, cube_tdf):
    with pytest.raises(SystemExit):
        main(["modify", "--tdf", str(cube_tdf), "--edits", "x"])


def test_analyze_sweep(tmp_path, capsys):
    assert main(["analyze", "sweep", "--tpms", "G", "--structure", "rod", "--steps", "17",
                 "--resolution", "48"]) == 0
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert rows[0] == ["c", "porosity"] and len(rows) == 18
    phis = [float(r[1]) for r in rows[1:]]
    # rod material is {psi <= c}, so porosity falls as c rises
    assert all(b <= a for a, b in zip(phis, phis[1:]))
    assert phis[0] > phis[-1]


def test_analyze_sweep_to_file(tmp_path):
    out = tmp_path / "sweep.csv"
    assert main(["analyze", "sweep", "--tpms", "D", "--steps", "3", "--resolution", "16",
                 "--out", str(out)]) == 0
    assert out.read_text().count("\n") == 4


def test_analyze_bad_tpms():
    with pytest.raises(SystemExit) as err:
        main(["analyze", "sweep", "--tpms", "Q"])
    assert err.value.code == 2


def test_analyze_porosity(cube_tdf, capsys):
    assert main(["analyze", "porosity", "--tdf", str(cube_tdf), "--structure", "pore",
                 "--resolution", "32"]) == 0
    phi = float(capsys.readouterr().out.strip())
    assert 0.0 <= phi <= 1.0


def test_convert_round_trip(tmp_path, cube_tdf):
    stl = tmp_path / "c.stl"
    assert main(["convert", str(cube_tdf), str(stl), "--resolution", "12"]) == 0
    ascii_out = tmp_path / "c_ascii.stl"
    assert main(["convert", str(stl), str(ascii_out), "--ascii"]) == 0
    again = tmp_path / "c2.stl"
    assert main(["convert", str(ascii_out), str(again)]) == 0
    assert np.allclose(read_stl(again).vertices, read_stl(stl).vertices, atol=1e-6)


def test_validate_files(tmp_path, cube_tdf, cube_tbss, capsys):
    assert main(["validate", str(cube_tdf)]) == 0
    assert "TDF file" in capsys.readouterr().out
    assert main(["validate", str(cube_tbss)]) == 0
    out = capsys.readouterr().out
    assert "TBSS file" in out and "positive" in out


def test_validate_garbage(tmp_path, capsys):
    bad = tmp_path / "bad.tdf"
    bad.write_text("hello\n")
    assert main(["validate", str(bad)]) == 1
    assert "error:" in capsys.readouterr().err


def test_edit_set_parse_used_by_cli(tmp_path):
    path = tmp_path / "e.txt"
    path.write_text("1 1 1 0.2 # x\n")
    assert len(EditSet.read(path)) == 1
