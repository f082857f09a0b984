import numpy as np
import pytest

from porous_scaffold.analysis import (
    mesh_statistics,
    porosity_sweep,
    sweep_csv,
    voxel_porosity,
)
from porous_scaffold.polygonizer import TriangleMesh, mesh_volume
from porous_scaffold.scaffold_mapper import map_mesh
from porous_scaffold.spline_core import TrivariateScalarField, affine_solid
from porous_scaffold.tpms_field import ImplicitFieldSpec, PeriodCoefficients, TpmsType

TWO = PeriodCoefficients.from_cells(2, 2, 2)


def cube_mesh():
    V = np.array(list(np.ndindex(2, 2, 2)), float)
    quads = [(0, 1, 3, 2), (4, 6, 7, 5), (0, 4, 5, 1), (2, 3, 7, 6), (0, 2, 6, 4), (1, 5, 7, 3)]
    T = [t for a, b, c, d in quads for t in ((a, b, c), (a, c, d))]
    return TriangleMesh(V, T)


def test_fully_solid_and_fully_void():
    # psi_P <= 3, so C = 5 makes f < 0 everywhere
    tdf = TrivariateScalarField.constant(5.0)
    assert voxel_porosity(ImplicitFieldSpec("P", TWO, "rod"), tdf, 16) == 0.0
    assert voxel_porosity(ImplicitFieldSpec("P", TWO, "pore"), tdf, 16) == 1.0


def test_p_rod_half_porosity(zero_tdf):
    phi = voxel_porosity(ImplicitFieldSpec("P", TWO, "rod"), zero_tdf, 200)
    assert abs(phi - 0.5) < 0.01


def test_resolution_floor(zero_tdf):
    with pytest.raises(ValueError):
        voxel_porosity(ImplicitFieldSpec("P", TWO), zero_tdf, 8)


def test_voxel_porosity_matches_sweep():
    tdf = TrivariateScalarField.constant(0.3)
    phi = voxel_porosity(ImplicitFieldSpec("G", TWO, "rod"), tdf, 64)
    [(_, swept)] = porosity_sweep("G", "rod", TWO, [0.3], resolution=64)
    assert phi == swept


def test_p_pore_sweep_monotone():
    rows = porosity_sweep("P", "pore", TWO, [-0.8, 0.0, 0.8], resolution=64)
    phis = [p for _, p in rows]
    assert phis[0] < phis[1] < phis[2]


@pytest.mark.parametrize("tpms", list(TpmsType))
def test_pore_rod_complementarity(tpms):
    lo, hi = tpms.valid_range
    cs = np.linspace(lo, hi, 5)
    pore = porosity_sweep(tpms, "pore", TWO, cs, resolution=64)
    rod = porosity_sweep(tpms, "rod", TWO, cs, resolution=64)
    for (_, a), (_, b) in zip(pore, rod):
        assert abs(a + b - 1) <= 2 / 64


def test_thin_sheet_is_nearly_void():
    [(_, phi)] = porosity_sweep("G", "sheet", TWO, [0.0], resolution=96, epsilon=1e-4)
    assert phi > 0.98


def test_sweep_rejects_out_of_range():
    with pytest.raises(ValueError, match="outside valid range"):
        porosity_sweep("D", "pore", TWO, [0.0, 0.7])


def test_sweep_csv_format():
    text = sweep_csv([(-0.8, 0.25), (0.1 + 0.2, 0.5)])
    assert text.splitlines() == ["c,porosity", "-0.8,0.25", "0.3,0.5"]


def test_cube_statistics():
    stats = mesh_statistics(cube_mesh())
    assert stats.closed and stats.triangle_count == 12
    assert stats.volume == pytest.approx(1.0)
    assert stats.surface_area == pytest.approx(6.0)
    assert stats.bbox_min == (0, 0, 0) and stats.bbox_max == (1, 1, 1)
    assert any(line.startswith("volume: 1") for line in stats.lines())


def test_scaled_statistics():
    scaled = map_mesh(affine_solid(np.diag([2.0, 2.0, 2.0])), cube_mesh())
    stats = mesh_statistics(scaled)
    assert stats.volume == pytest.approx(8.0, rel=1e-12)
    assert stats.surface_area == pytest.approx(24.0, rel=1e-12)


def test_open_mesh_statistics():
    cube = cube_mesh()
    opened = TriangleMesh(cube.vertices, cube.triangles[:-2])
    stats = mesh_statistics(opened)
    assert stats.volume is None and not stats.closed
    with pytest.raises(ValueError):
        mesh_statistics(opened, require_volume=True)


def test_mesh_volume_agrees_with_voxels(p_rod_mesh_100, p_rod_spec, zero_tdf):
    material = 1 - voxel_porosity(p_rod_spec, zero_tdf, 128)
    assert mesh_volume(p_rod_mesh_100) == pytest.approx(material, rel=0.02)
