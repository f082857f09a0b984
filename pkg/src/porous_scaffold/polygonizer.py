"""Marching tetrahedra on the unit parameter cube and closure of the volume structures.

Vertices are identified by integer keys instead of positions.  A key names
either a grid vertex ``a`` (encoded as the degenerate edge ``(a, a)``) or the
iso-crossing on the grid edge ``(a, b)``, ``a < b``, for a given level.  The
surface and the boundary closure draw from the same key space, so welding is
exact and the closed mesh is crack-free by construction.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ClosureError
from .spline_core import TrivariateScalarField
from .tpms_field import ImplicitFieldSpec, Structure, psi_grid

DEFAULT_RESOLUTION = 100
_TIE_FRACTION = 1e-12


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    vertices: np.ndarray
    triangles: np.ndarray
    space: str = "parametric"
    closed: bool = False
    keys: np.ndarray | None = None

    def __post_init__(self):
        V = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        T = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if len(T) and (T.min() < 0 or T.max() >= len(V)):
            raise ValueError("triangle index out of range")
        if self.space not in ("parametric", "physical"):
            raise ValueError(f"unknown space tag {self.space!r}")
        object.__setattr__(self, "vertices", V)
        object.__setattr__(self, "triangles", T)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def is_empty(self) -> bool:
        return len(self.triangles) == 0

    def flipped(self) -> "TriangleMesh":
        return TriangleMesh(self.vertices, self.triangles[:, ::-1], self.space,
                            self.closed, self.keys)


@dataclass(frozen=True, eq=False)
class SampleGrid:
    """Samples of ``f = psi - C`` at the ``(res+1)^3`` vertices of the cell grid.

    ``offset`` holds ``f + epsilon`` for sheet structures.
    """

    values: np.ndarray
    epsilon: float | None = None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 3 or min(vals.shape) < 2:
            raise ValueError("sample grid needs at least 2 vertices per direction")
        if not np.all(np.isfinite(vals)):
            raise ValueError("samples must be finite")
        object.__setattr__(self, "values", vals)

    @property
    def resolution(self) -> tuple[int, int, int]:
        return tuple(n - 1 for n in self.values.shape)

    @property
    def offset(self) -> np.ndarray | None:
        if self.epsilon is None:
            return None
        return self.values + self.epsilon

    def vertex_coordinates(self, flat_ids) -> np.ndarray:
        idx = np.unravel_index(flat_ids, self.values.shape)
        return np.stack([i / r for i, r in zip(idx, self.resolution)], axis=-1)


def _resolution_triple(resolution):
    if np.isscalar(resolution):
        resolution = (resolution,) * 3
    res = tuple(int(r) for r in resolution)
    if len(res) != 3 or min(res) < 2:
        raise ValueError(f"resolution must be >= 2 cells per direction, got {resolution}")
    return res


def sample_field(spec: ImplicitFieldSpec, tdf: TrivariateScalarField,
                 resolution=DEFAULT_RESOLUTION, threads: int = 1) -> SampleGrid:
    """Evaluate ``f`` at every vertex of a uniform cell grid over [0, 1]^3."""
    res = _resolution_triple(resolution)
    us, vs, ws = (np.linspace(0.0, 1.0, r + 1) for r in res)
    eps = spec.epsilon if spec.structure is Structure.SHEET else None

    def block(sl):
        return psi_grid(spec.tpms, spec.periods, us[sl], vs, ws) - tdf.evaluate_grid(us[sl], vs, ws)

    if threads <= 1:
        f = block(slice(None))
    else:
        bounds = np.linspace(0, len(us), min(threads, len(us)) + 1).astype(int)
        slices = [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:])]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            f = np.concatenate(list(pool.map(block, slices)), axis=0)
    return SampleGrid(f, eps)


# --------------------------------------------------------------------------
# Tetrahedral decomposition and case table

_CORNERS = np.array(list(itertools.product((0, 1), repeat=3)))  # index = 4x + 2y + z


def _corner(offset):
    return int(offset[0] * 4 + offset[1] * 2 + offset[2])


def _tetrahedra():
    """Six tetrahedra around the (0,0,0)-(1,1,1) diagonal, one per axis ordering."""
    tets = []
    for perm in itertools.permutations(range(3)):
        path = [np.zeros(3, int)]
        for axis in perm:
            step = path[-1].copy()
            step[axis] = 1
            path.append(step)
        tets.append([_corner(p) for p in path])
    return np.array(tets)


TETS = _tetrahedra()
_TET_SIGN = np.array([np.sign(np.linalg.det(_CORNERS[t[1:]] - _CORNERS[t[0]])) for t in TETS])


def _build_case_table():
    """Triangles per sign case for a positively oriented tetrahedron.

    Entries are lists of triangles, each a triple of local edges ``(i, j)``,
    ordered so the normal points toward the vertices above the iso level.
    """
    ref = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], float)
    table = {}
    for case in range(16):
        above = [i for i in range(4) if case >> i & 1]
        below = [i for i in range(4) if not case >> i & 1]
        if not above or not below:
            table[case] = []
            continue
        if len(above) == 1 or len(below) == 1:
            lone = above[0] if len(above) == 1 else below[0]
            rest = [i for i in range(4) if i != lone]
            polys = [[(lone, j) for j in rest]]
        else:
            a, b = above
            c, d = below
            quad = [(a, c), (a, d), (b, d), (b, c)]
            polys = [[quad[0], quad[1], quad[2]], [quad[0], quad[2], quad[3]]]
        toward = ref[above].mean(axis=0)
        tris = []
        for tri in polys:
            pts = np.array([(ref[i] + ref[j]) / 2 for i, j in tri])
            n = np.cross(pts[1] - pts[0], pts[2] - pts[0])
            if np.dot(n, toward - pts.mean(axis=0)) < 0:
                tri = [tri[0], tri[2], tri[1]]
            tris.append([tuple(sorted(e)) for e in tri])
        table[case] = tris
    return table


CASE_TABLE = _build_case_table()


def _perturb(g, scale):
    """Push exact zeros to the positive side (simulation-of-simplicity tie break)."""
    zero = g == 0
    if zero.any():
        g = g.copy()
        g[zero] = scale
    return g


class _KeySpace:
    """Integer keys for grid vertices and per-level edge crossings."""

    def __init__(self, samples: SampleGrid, levels):
        self.samples = samples
        self.shape = samples.values.shape
        self.nv = int(np.prod(self.shape))
        f = samples.values
        span = float(np.ptp(f))
        scale = _TIE_FRACTION * (span if span > 0 else 1.0)
        self.levels = [_perturb(g, scale).ravel() for g in levels]

    def edge_keys(self, level, a, b):
        lo = np.minimum(a, b)
        hi = np.maximum(a, b)
        return (level * self.nv + lo) * self.nv + hi

    def vertex_keys(self, a):
        a = np.asarray(a, dtype=np.int64)
        return a * self.nv + a

    def positions(self, keys):
        keys = np.asarray(keys, dtype=np.int64)
        level, rem = np.divmod(keys, self.nv * self.nv)
        a, b = np.divmod(rem, self.nv)
        pa = self.samples.vertex_coordinates(a)
        pb = self.samples.vertex_coordinates(b)
        out = pa.copy()
        edge = a != b
        if edge.any():
            ga = np.empty(edge.sum())
            gb = np.empty(edge.sum())
            lv = level[edge]
            for lid, g in enumerate(self.levels):
                m = lv == lid
                ga[m] = g[a[edge][m]]
                gb[m] = g[b[edge][m]]
            t = ga / (ga - gb)
            out[edge] = pa[edge] + t[:, None] * (pb[edge] - pa[edge])
        return out

    def level_of(self, keys):
        return np.asarray(keys, dtype=np.int64) // (self.nv * self.nv)


def _mt_key_triangles(space: _KeySpace, level: int) -> np.ndarray:
    """Triangles (as key triples) of the iso-surface of one level."""
    shape = space.shape
    g = space.levels[level].reshape(shape)
    pos = g > 0
    cnt = np.zeros(tuple(n - 1 for n in shape), dtype=np.int8)
    for c in _CORNERS:
        cnt += pos[c[0]: shape[0] - 1 + c[0], c[1]: shape[1] - 1 + c[1], c[2]: shape[2] - 1 + c[2]]
    mixed = np.argwhere((cnt > 0) & (cnt < 8))
    if len(mixed) == 0:
        return np.zeros((0, 3), dtype=np.int64)
    origin = np.ravel_multi_index(mixed.T, shape)
    strides = np.array([shape[1] * shape[2], shape[2], 1])
    corner_off = _CORNERS @ strides
    flat_pos = pos.ravel()

    out = []
    for t, tet in enumerate(TETS):
        verts = origin[:, None] + corner_off[tet][None, :]  # (n, 4)
        case = (flat_pos[verts] * np.array([1, 2, 4, 8])).sum(axis=1)
        for c in range(1, 15):
            sel = case == c
            if not sel.any():
                continue
            vsel = verts[sel]
            for tri in CASE_TABLE[c]:
                ks = [space.edge_keys(level, vsel[:, i], vsel[:, j]) for i, j in tri]
                if _TET_SIGN[t] < 0:
                    ks = ks[::-1]
                out.append(np.stack(ks, axis=1))
    return np.concatenate(out, axis=0)


def _weld(space: _KeySpace, key_tris: np.ndarray, space_tag="parametric", closed=False):
    if len(key_tris) == 0:
        return TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3), np.int64), space_tag, closed,
                            np.zeros(0, np.int64))
    keys, inverse = np.unique(key_tris.ravel(), return_inverse=True)
    tris = inverse.reshape(-1, 3)
    return TriangleMesh(space.positions(keys), tris, space_tag, closed, keys)


def marching_tetrahedra(samples: SampleGrid, iso: float = 0.0) -> TriangleMesh:
    """Welded iso-surface ``f = iso`` with normals pointing toward ``f > iso``."""
    space = _KeySpace(samples, [samples.values - iso])
    return _weld(space, _mt_key_triangles(space, 0))


# --------------------------------------------------------------------------
# Closure on the six domain faces

def _level_arrays(samples: SampleGrid, structure: Structure):
    if structure is Structure.SHEET:
        if samples.epsilon is None:
            raise ValueError("sheet closure needs samples with an epsilon offset")
        return [samples.values, samples.offset]
    return [samples.values]


def _region(structure: Structure, above):
    """Inside mask from per-level 'above' flags (lists of bool arrays)."""
    if structure is Structure.PORE:
        return above[0]
    if structure is Structure.ROD:
        return ~above[0]
    return ~above[0] & above[1]


def _face_triangles(shape):
    """Grid-vertex triangles of the six faces, oriented outward, as flat id triples."""
    out = []
    for axis in range(3):
        others = [a for a in range(3) if a != axis]
        ns, nt = shape[others[0]], shape[others[1]]
        s, t = np.meshgrid(np.arange(ns - 1), np.arange(nt - 1), indexing="ij")
        s = s.ravel()
        t = t.ravel()
        for side, fixed in ((0, 0), (1, shape[axis] - 1)):
            def vid(ds, dt):
                idx = [None, None, None]
                idx[axis] = np.full(s.shape, fixed)
                idx[others[0]] = s + ds
                idx[others[1]] = t + dt
                return np.ravel_multi_index(idx, shape)
            A, B, C, D = vid(0, 0), vid(1, 0), vid(1, 1), vid(0, 1)
            tris = np.concatenate([np.stack([A, B, C], 1), np.stack([A, C, D], 1)])
            # (s, t) counter-clockwise normal is e_s x e_t
            normal_sign = np.sign(np.linalg.det(np.eye(3)[[others[0], others[1], axis]]))
            outward = 1 if side == 1 else -1
            if normal_sign != outward:
                tris = tris[:, ::-1]
            out.append(tris)
    return np.concatenate(out, axis=0)


def _clip_polygon(poly, level, keep_above, space: _KeySpace):
    """Sutherland-Hodgman clip of a face polygon against one level.

    Polygon vertices are ``(key, support, gvals)`` where ``support`` is the
    tuple of grid vertex ids the point lies between and ``gvals`` holds the
    level values at the point.
    """
    out = []
    n = len(poly)
    for i in range(n):
        cur = poly[i]
        nxt = poly[(i + 1) % n]
        cur_in = (cur[2][level] > 0) == keep_above
        nxt_in = (nxt[2][level] > 0) == keep_above
        if cur_in:
            out.append(cur)
        if cur_in != nxt_in:
            support = tuple(sorted(set(cur[1]) | set(nxt[1])))
            if len(support) != 2:
                # level sets of a linear function cannot cross a chord at another level
                continue
            a, b = support
            key = int(space.edge_keys(level, np.int64(a), np.int64(b)))
            ga = [g[a] for g in space.levels]
            gb = [g[b] for g in space.levels]
            t = ga[level] / (ga[level] - gb[level])
            gvals = [x + t * (y - x) for x, y in zip(ga, gb)]
            gvals[level] = 0.0
            out.append((key, support, gvals))
    return out


def _closure_key_triangles(space: _KeySpace, structure: Structure) -> np.ndarray:
    tris = _face_triangles(space.shape)
    above = [g[tris] > 0 for g in space.levels]  # each (n, 3)
    inside = _region(structure, above)
    full = inside.all(axis=1)
    out = [space.vertex_keys(tris[full])]

    uniform = np.ones(len(tris), dtype=bool)
    for ab in above:
        uniform &= ab.all(axis=1) | (~ab).all(axis=1)
    partial = ~full & ~uniform

    keep = {Structure.PORE: [(0, True)], Structure.ROD: [(0, False)],
            Structure.SHEET: [(0, False), (1, True)]}[structure]
    extra = []
    for tri in tris[partial]:
        poly = [(int(space.vertex_keys(v)), (int(v),), [g[v] for g in space.levels])
                for v in tri]
        for level, keep_above in keep:
            poly = _clip_polygon(poly, level, keep_above, space)
            if len(poly) < 3:
                break
        if len(poly) < 3:
            continue
        for i in range(1, len(poly) - 1):
            extra.append((poly[0][0], poly[i][0], poly[i + 1][0]))
    if extra:
        out.append(np.array(extra, dtype=np.int64))
    return np.concatenate(out, axis=0) if out else np.zeros((0, 3), np.int64)


def structure_key_triangles(samples: SampleGrid, structure):
    """All key triangles of the closed structure, outward oriented."""
    structure = Structure.parse(structure)
    space = _KeySpace(samples, _level_arrays(samples, structure))
    parts = []
    for level in range(len(space.levels)):
        tris = _mt_key_triangles(space, level)
        # MT normals point toward g > 0; flip where that side is solid
        solid_above = structure is Structure.PORE or level == 1
        parts.append(tris[:, ::-1] if solid_above else tris)
    parts.append(_closure_key_triangles(space, structure))
    return space, np.concatenate(parts, axis=0)


def structure_surface(samples: SampleGrid, structure) -> TriangleMesh:
    """Iso-surface(s) bounding the structure before closure (f = 0, and f = -eps for sheets)."""
    structure = Structure.parse(structure)
    space = _KeySpace(samples, _level_arrays(samples, structure))
    parts = [_mt_key_triangles(space, level) for level in range(len(space.levels))]
    return _weld(space, np.concatenate(parts, axis=0))


def close_structure(surface: TriangleMesh, samples: SampleGrid, structure) -> TriangleMesh:
    """Add the boundary-face triangles that close ``surface`` into a solid.

    ``surface`` must come from :func:`marching_tetrahedra` (iso 0) or
    :func:`structure_surface` on the same samples; its vertex keys are used
    to weld it to the closure.  The result is outward oriented and verified
    to be closed.
    """
    structure = Structure.parse(structure)
    if surface.keys is None:
        raise ValueError("surface mesh carries no vertex keys; build it with marching_tetrahedra")
    space = _KeySpace(samples, _level_arrays(samples, structure))
    surf_tris = surface.keys[surface.triangles] if len(surface.triangles) else np.zeros((0, 3), np.int64)
    level = space.level_of(surf_tris[:, 0]) if len(surf_tris) else np.zeros(0, np.int64)
    solid_above = (level == 1) if structure is not Structure.PORE else np.ones(len(level), bool)
    surf_tris = np.where(solid_above[:, None], surf_tris[:, ::-1], surf_tris)
    closure = _closure_key_triangles(space, structure)
    mesh = _weld(space, np.concatenate([surf_tris, closure], axis=0))
    bad = open_edges(mesh)
    if len(bad):
        raise ClosureError(f"closure left {len(bad)} unpaired edge(s)", bad[:20].tolist())
    return TriangleMesh(mesh.vertices, mesh.triangles, mesh.space, True, mesh.keys)


def polygonize(samples: SampleGrid, structure) -> TriangleMesh:
    """Closed, outward-oriented mesh of the pore/rod/sheet structure in parameter space."""
    space, key_tris = structure_key_triangles(samples, structure)
    mesh = _weld(space, key_tris)
    bad = open_edges(mesh)
    if len(bad):
        raise ClosureError(f"closure left {len(bad)} unpaired edge(s)", bad[:20].tolist())
    return TriangleMesh(mesh.vertices, mesh.triangles, mesh.space, True, mesh.keys)


# --------------------------------------------------------------------------
# Mesh checks

def _directed_edges(mesh: TriangleMesh):
    T = mesh.triangles
    return np.concatenate([T[:, [0, 1]], T[:, [1, 2]], T[:, [2, 0]]], axis=0)


def open_edges(mesh: TriangleMesh) -> np.ndarray:
    """Directed edges without exactly one opposite partner (empty for closed, oriented meshes)."""
    if mesh.is_empty():
        return np.zeros((0, 2), np.int64)
    E = _directed_edges(mesh)
    n = mesh.n_vertices
    fwd = E[:, 0] * n + E[:, 1]
    rev = E[:, 1] * n + E[:, 0]
    uniq, counts = np.unique(fwd, return_counts=True)
    dup = uniq[counts > 1]
    present = np.isin(rev, fwd)
    bad = ~present | np.isin(fwd, dup)
    return E[bad]


def edge_valences(mesh: TriangleMesh):
    """Map each undirected edge to the number of triangles using it."""
    E = np.sort(_directed_edges(mesh), axis=1)
    uniq, counts = np.unique(E, axis=0, return_counts=True)
    return uniq, counts


def boundary_edges(mesh: TriangleMesh) -> np.ndarray:
    uniq, counts = edge_valences(mesh)
    return uniq[counts == 1]


def is_closed(mesh: TriangleMesh) -> bool:
    return len(open_edges(mesh)) == 0


def euler_characteristic(mesh: TriangleMesh) -> int:
    uniq, _ = edge_valences(mesh)
    used = np.unique(mesh.triangles)
    return int(len(used) - len(uniq) + mesh.n_triangles)


def triangle_areas(mesh: TriangleMesh) -> np.ndarray:
    V = mesh.vertices[mesh.triangles]
    return 0.5 * np.linalg.norm(np.cross(V[:, 1] - V[:, 0], V[:, 2] - V[:, 0]), axis=1)


def mesh_volume(mesh: TriangleMesh, check: bool = True) -> float:
    """Signed enclosed volume (positive for outward orientation)."""
    if check and not is_closed(mesh):
        raise ClosureError("volume requested on an open mesh", open_edges(mesh)[:20].tolist())
    if mesh.is_empty():
        return 0.0
    V = mesh.vertices[mesh.triangles]
    return float(np.einsum("ij,ij->i", V[:, 0], np.cross(V[:, 1], V[:, 2])).sum() / 6.0)
