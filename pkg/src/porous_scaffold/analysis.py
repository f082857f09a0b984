"""Porosity and mesh statistics."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .polygonizer import TriangleMesh, is_closed, mesh_volume, triangle_areas
from .spline_core import TrivariateScalarField
from .tpms_field import (
    ImplicitFieldSpec,
    PeriodCoefficients,
    Structure,
    TpmsType,
    inside_from_field,
    psi_grid,
)

DEFAULT_SWEEP_RESOLUTION = 128


def voxel_centers(resolution: int) -> np.ndarray:
    return (np.arange(resolution) + 0.5) / resolution


def voxel_porosity(spec: ImplicitFieldSpec, tdf: TrivariateScalarField, resolution: int = 128) -> float:
    """Void fraction of the unit parameter cube, by voxel-centre sampling."""
    if resolution < 16:
        raise ValueError("voxel resolution must be >= 16")
    t = voxel_centers(resolution)
    material = 0
    # slab-wise to bound memory at high resolution
    step = max(1, 2_000_000 // (resolution * resolution))
    for start in range(0, resolution, step):
        us = t[start:start + step]
        f = psi_grid(spec.tpms, spec.periods, us, t, t) - tdf.evaluate_grid(us, t, t)
        material += int(np.count_nonzero(inside_from_field(f, spec.structure, spec.epsilon)))
    return 1.0 - material / resolution ** 3


def porosity_sweep(tpms, structure, periods: PeriodCoefficients, c_values, resolution: int = DEFAULT_SWEEP_RESOLUTION,
                   epsilon: float = 0.3):
    """Porosity of the constant-threshold structure for each ``c``; returns ``[(c, porosity)]``."""
    tpms = TpmsType.parse(tpms)
    structure = Structure.parse(structure)
    lo, hi = tpms.valid_range
    c_values = [float(c) for c in c_values]
    bad = [c for c in c_values if not lo <= c <= hi]
    if bad:
        raise ValueError(f"thresholds {bad} outside valid range [{lo}, {hi}] of {tpms.value}")
    t = voxel_centers(resolution)
    p = psi_grid(tpms, periods, t, t, t)
    n = p.size
    return [(c, 1.0 - np.count_nonzero(inside_from_field(p - c, structure, epsilon)) / n)
            for c in c_values]


def sweep_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["c", "porosity"])
    for c, phi in rows:
        writer.writerow([f"{float(c):.12g}", repr(float(phi))])
    return buf.getvalue()


@dataclass
class MeshStatistics:
    triangle_count: int
    closed: bool
    volume: float | None
    surface_area: float
    bbox_min: tuple
    bbox_max: tuple

    def lines(self):
        vol = "n/a (open mesh)" if self.volume is None else f"{self.volume:.6g}"
        return [
            f"triangles: {self.triangle_count}",
            f"closed: {self.closed}",
            f"volume: {vol}",
            f"surface area: {self.surface_area:.6g}",
            "bounding box: ({:.6g}, {:.6g}, {:.6g}) - ({:.6g}, {:.6g}, {:.6g})".format(
                *self.bbox_min, *self.bbox_max),
        ]


def mesh_statistics(mesh: TriangleMesh, require_volume: bool = False) -> MeshStatistics:
    closed = is_closed(mesh)
    if require_volume and not closed:
        raise ValueError("volume requested on an open mesh")
    if mesh.is_empty():
        lo = hi = (0.0, 0.0, 0.0)
    else:
        used = mesh.vertices[np.unique(mesh.triangles)]
        lo = tuple(float(x) for x in used.min(axis=0))
        hi = tuple(float(x) for x in used.max(axis=0))
    return MeshStatistics(
        triangle_count=mesh.n_triangles,
        closed=closed,
        volume=mesh_volume(mesh, check=False) if closed else None,
        surface_area=float(triangle_areas(mesh).sum()),
        bbox_min=lo,
        bbox_max=hi,
    )
