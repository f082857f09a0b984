import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from porous_scaffold.errors import ClosureError
from porous_scaffold.polygonizer import (
    CASE_TABLE,
    SampleGrid,
    TriangleMesh,
    boundary_edges,
    close_structure,
    euler_characteristic,
    is_closed,
    marching_tetrahedra,
    mesh_volume,
    open_edges,
    polygonize,
    sample_field,
    structure_surface,
    triangle_areas,
)
from porous_scaffold.spline_core import TrivariateScalarField
from porous_scaffold.tpms_field import ImplicitFieldSpec, PeriodCoefficients


def grid_samples(fn, n, epsilon=None):
    t = np.linspace(0, 1, n + 1)
    U, V, W = np.meshgrid(t, t, t, indexing="ij")
    return SampleGrid(fn(U, V, W), epsilon)


def unit_cube_mesh():
    V = np.array(list(np.ndindex(2, 2, 2)), float)
    quads = [(0, 1, 3, 2), (4, 6, 7, 5), (0, 4, 5, 1), (2, 3, 7, 6), (0, 2, 6, 4), (1, 5, 7, 3)]
    T = []
    for a, b, c, d in quads:
        T += [(a, b, c), (a, c, d)]
    return TriangleMesh(V, T)


# -- mesh utilities ---------------------------------------------------------------

def test_unit_cube_volume():
    cube = unit_cube_mesh()
    assert is_closed(cube)
    assert mesh_volume(cube) == pytest.approx(1.0, abs=1e-15)
    assert euler_characteristic(cube) == 2


def test_tetrahedron_volume():
    tet = TriangleMesh([(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1)],
                       [(0, 2, 1), (0, 1, 3), (0, 3, 2), (1, 2, 3)])
    assert mesh_volume(tet) == pytest.approx(1 / 6, abs=1e-15)
    assert mesh_volume(tet.flipped()) == pytest.approx(-1 / 6, abs=1e-15)


def test_open_mesh_volume_raises():
    cube = unit_cube_mesh()
    opened = TriangleMesh(cube.vertices, cube.triangles[:-1])
    assert not is_closed(opened)
    assert len(boundary_edges(opened)) == 3
    with pytest.raises(ClosureError):
        mesh_volume(opened)


def test_inconsistent_orientation_is_not_closed():
    cube = unit_cube_mesh()
    T = cube.triangles.copy()
    T[0] = T[0, ::-1]
    assert len(open_edges(TriangleMesh(cube.vertices, T))) > 0


def test_case_table_has_sixteen_cases():
    assert len(CASE_TABLE) == 16
    assert len(CASE_TABLE[0]) == 0 and len(CASE_TABLE[15]) == 0


# -- iso-surfaces ---------------------------------------------------------------------

def test_plane_area_and_position():
    mesh = marching_tetrahedra(grid_samples(lambda u, v, w: u - 0.5, 20))
    assert abs(triangle_areas(mesh).sum() - 1.0) < 1e-12
    # the plane passes through grid vertices; zero samples are nudged by 1e-12 * range
    assert np.max(np.abs(mesh.vertices[:, 0] - 0.5)) < 1e-11
    # normals point toward f > 0, i.e. +u
    V = mesh.vertices[mesh.triangles]
    n = np.cross(V[:, 1] - V[:, 0], V[:, 2] - V[:, 0])
    assert np.all(n[:, 0] > 0)


def test_oblique_plane_area():
    mesh = marching_tetrahedra(grid_samples(lambda u, v, w: u + 0.5 * v - 0.6, 16))
    # the plane u = 0.6 - v/2 over the (v, w) square: area sqrt(1 + 1/4)
    assert triangle_areas(mesh).sum() == pytest.approx(np.sqrt(1.25), rel=1e-12)


def test_sphere_is_closed_genus_zero():
    samples = grid_samples(lambda u, v, w: 0.35 - np.sqrt((u - .5) ** 2 + (v - .5) ** 2 + (w - .5) ** 2), 40)
    mesh = marching_tetrahedra(samples)
    assert is_closed(mesh)
    assert euler_characteristic(mesh) == 2
    # normals point toward f > 0, the inside, so the volume comes out negative
    assert -mesh_volume(mesh) == pytest.approx(4 / 3 * np.pi * 0.35 ** 3, rel=0.01)


def test_surface_boundary_lies_on_domain_faces():
    samples = grid_samples(lambda u, v, w: np.sin(5 * u) * np.cos(4 * v) + 0.3 * w - 0.1, 24)
    mesh = marching_tetrahedra(samples)
    ends = mesh.vertices[boundary_edges(mesh)].reshape(-1, 3)
    on_face = np.any((ends == 0) | (ends == 1), axis=1)
    assert on_face.all()
    uniq, counts = np.unique(np.sort(np.concatenate(
        [mesh.triangles[:, [0, 1]], mesh.triangles[:, [1, 2]], mesh.triangles[:, [2, 0]]]), axis=1),
        axis=0, return_counts=True)
    assert counts.max() <= 2


def test_no_index_degenerate_triangles_on_exact_zeros():
    # many grid vertices land exactly on the iso-value
    samples = grid_samples(lambda u, v, w: np.round(4 * (u - v)) / 4, 8)
    mesh = polygonize(samples, "rod")
    T = mesh.triangles
    assert np.all((T[:, 0] != T[:, 1]) & (T[:, 1] != T[:, 2]) & (T[:, 0] != T[:, 2]))
    assert is_closed(mesh)


# -- closed structures: exact oracles for linear fields ---------------------------------

@pytest.mark.parametrize("structure,expected", [("rod", 0.3), ("pore", 0.7)])
def test_slab_volumes(structure, expected):
    mesh = polygonize(grid_samples(lambda u, v, w: u - 0.3, 10), structure)
    assert mesh.closed and is_closed(mesh)
    assert mesh_volume(mesh) == pytest.approx(expected, abs=1e-12)
    assert euler_characteristic(mesh) == 2


def test_sheet_slab_volume():
    mesh = polygonize(grid_samples(lambda u, v, w: u - 0.5, 10, epsilon=0.2), "sheet")
    assert mesh_volume(mesh) == pytest.approx(0.2, abs=1e-12)


def test_diagonal_half_space():
    mesh = polygonize(grid_samples(lambda u, v, w: u + v + w - 1.5, 9), "rod")
    assert mesh_volume(mesh) == pytest.approx(0.5, abs=1e-12)


def test_constant_fields():
    positive = grid_samples(lambda u, v, w: np.ones_like(u), 4)
    assert mesh_volume(polygonize(positive, "pore")) == pytest.approx(1.0, abs=1e-14)
    assert polygonize(positive, "rod").is_empty()


def test_sheet_needs_epsilon():
    with pytest.raises(ValueError):
        polygonize(grid_samples(lambda u, v, w: u - 0.5, 4), "sheet")


def test_close_structure_matches_polygonize():
    samples = grid_samples(lambda u, v, w: np.cos(6 * u) + np.cos(5 * v) + np.cos(4 * w) - 0.4, 20)
    closed = close_structure(marching_tetrahedra(samples), samples, "pore")
    direct = polygonize(samples, "pore")
    assert closed.n_triangles == direct.n_triangles
    assert mesh_volume(closed) == pytest.approx(mesh_volume(direct), abs=1e-13)


def test_close_structure_needs_keys():
    samples = grid_samples(lambda u, v, w: u - 0.5, 4)
    surf = marching_tetrahedra(samples)
    with pytest.raises(ValueError):
        close_structure(TriangleMesh(surf.vertices, surf.triangles), samples, "rod")


def test_sheet_surface_has_two_levels():
    samples = grid_samples(lambda u, v, w: u - 0.5, 6, epsilon=0.25)
    surf = structure_surface(samples, "sheet")
    levels = np.unique(np.round(surf.vertices[:, 0], 9))
    assert np.allclose(levels, [0.25, 0.5], atol=1e-9)


# -- random smooth fields ---------------------------------------------------------------

coef = st.floats(-1, 1, allow_nan=False)


@settings(max_examples=25, deadline=None)
@given(st.lists(coef, min_size=7, max_size=7), st.integers(1, 3), st.floats(0.05, 0.6))
def test_random_fields_close_and_partition(c, k, eps):
    def fn(u, v, w):
        return (c[0] * np.cos(np.pi * k * u) + c[1] * np.sin(np.pi * k * v)
                + c[2] * np.cos(np.pi * k * w + c[3]) + c[4] * u * v + c[5] * w + 0.5 * c[6])

    samples = grid_samples(fn, 10, epsilon=eps)
    pore = polygonize(samples, "pore")
    rod = polygonize(samples, "rod")
    sheet = polygonize(samples, "sheet")
    for mesh in (pore, rod, sheet):
        assert is_closed(mesh)
    vp, vr, vs = (mesh_volume(m) if not m.is_empty() else 0.0 for m in (pore, rod, sheet))
    assert vp + vr == pytest.approx(1.0, abs=1e-9)
    deeper = polygonize(SampleGrid(samples.values + eps), "rod")
    vd = mesh_volume(deeper) if not deeper.is_empty() else 0.0
    assert vs == pytest.approx(vr - vd, abs=1e-9)
    assert vs >= -1e-12


# -- P-surface benchmark ----------------------------------------------------------------

def test_p_rod_benchmark(p_rod_mesh_100, p_pore_mesh_100):
    assert len(boundary_edges(p_rod_mesh_100)) == 0
    vr = mesh_volume(p_rod_mesh_100)
    vp = mesh_volume(p_pore_mesh_100)
    assert abs(vr - 0.5) < 0.02
    assert abs(vr + vp - 1) < 0.01


def test_sampling_threads_do_not_change_values(p_rod_spec, zero_tdf):
    a = sample_field(p_rod_spec, zero_tdf, 30, threads=1)
    b = sample_field(p_rod_spec, zero_tdf, 30, threads=3)
    assert np.array_equal(a.values, b.values)


def test_sampling_with_tdf_offsets_field():
    spec = ImplicitFieldSpec("G", PeriodCoefficients.from_cells(1, 1, 1), "sheet", 0.3)
    s0 = sample_field(spec, TrivariateScalarField.constant(0.0), 6)
    s1 = sample_field(spec, TrivariateScalarField.constant(0.2), 6)
    assert np.allclose(s0.values - s1.values, 0.2, atol=1e-14)
    assert s1.epsilon == 0.3
