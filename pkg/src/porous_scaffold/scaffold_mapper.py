"""Mapping parameter-space meshes through a trivariate B-spline solid."""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ParameterDomainError
from .polygonizer import TriangleMesh
from .spline_core import TrivariateBSplineSolid, jacobian_det

DEFAULT_JACOBIAN_SAMPLES = 21


def map_mesh(solid: TrivariateBSplineSolid, mesh: TriangleMesh, threads: int = 1) -> TriangleMesh:
    """Replace every vertex by its image under the solid; connectivity is kept as is."""
    if mesh.space != "parametric":
        raise ValueError("map_mesh expects a parametric-space mesh")
    V = mesh.vertices
    if len(V) and (V.min() < -1e-12 or V.max() > 1 + 1e-12):
        raise ParameterDomainError("mesh vertex outside the unit parameter cube")
    if threads <= 1 or len(V) < 2 * threads:
        mapped = solid.evaluate(V[:, 0], V[:, 1], V[:, 2]) if len(V) else np.zeros((0, 3))
    else:
        bounds = np.linspace(0, len(V), threads + 1).astype(int)
        chunks = [V[a:b] for a, b in zip(bounds[:-1], bounds[1:])]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = pool.map(lambda c: solid.evaluate(c[:, 0], c[:, 1], c[:, 2]), chunks)
            mapped = np.concatenate(list(parts), axis=0)
    return TriangleMesh(mapped, mesh.triangles, "physical", mesh.closed, mesh.keys)


@dataclass
class JacobianReport:
    min_det: float
    location: tuple
    positive: bool
    samples_per_axis: int

    def __str__(self):
        state = "positive" if self.positive else "NOT positive"
        loc = ", ".join(f"{x:.4f}" for x in self.location)
        return (f"Jacobian {state}: min det {self.min_det:.6g} at (u, v, w) = ({loc}) "
                f"[{self.samples_per_axis}^3 samples]")


def validate_jacobian(solid: TrivariateBSplineSolid,
                      samples_per_axis: int = DEFAULT_JACOBIAN_SAMPLES,
                      refine_steps: int = 3, warn: bool = True) -> JacobianReport:
    """Sample the Jacobian determinant on a uniform grid and refine around the minimum.

    Refinement evaluates a 3x3x3 stencil at half the previous spacing around
    the current worst point, ``refine_steps`` times.
    """
    if samples_per_axis < 2:
        raise ValueError("samples_per_axis must be >= 2")
    t = np.linspace(0.0, 1.0, samples_per_axis)
    U, V, W = np.meshgrid(t, t, t, indexing="ij")
    det = jacobian_det(solid, U.ravel(), V.ravel(), W.ravel())
    k = int(np.argmin(det))
    best = np.array([U.ravel()[k], V.ravel()[k], W.ravel()[k]])
    best_val = float(det[k])
    all_positive = bool(np.all(det > 0))
    h = 1.0 / (samples_per_axis - 1)
    offs = np.array(np.meshgrid(*(np.array([-1.0, 0.0, 1.0]),) * 3, indexing="ij")).reshape(3, -1).T
    for _ in range(refine_steps):
        h /= 2
        cand = np.clip(best + h * offs, 0.0, 1.0)
        vals = jacobian_det(solid, cand[:, 0], cand[:, 1], cand[:, 2])
        j = int(np.argmin(vals))
        if vals[j] < best_val:
            best_val = float(vals[j])
            best = cand[j]
    report = JacobianReport(best_val, tuple(float(x) for x in best),
                            all_positive and best_val > 0, samples_per_axis)
    if warn and not report.positive:
        warnings.warn(str(report), stacklevel=2)
    return report


def orientation_flips(solid: TrivariateBSplineSolid, param_mesh: TriangleMesh,
                      mapped_mesh: TriangleMesh, n_sample: int = 1000, seed: int = 0) -> int:
    """Count sampled triangles whose mapped normal opposes the Jacobian-transported normal.

    The parametric normal ``n`` transports to ``cof(J) n``, evaluated at the
    triangle centroid.
    """
    rng = np.random.default_rng(seed)
    m = param_mesh.n_triangles
    if m == 0:
        return 0
    idx = rng.choice(m, size=min(n_sample, m), replace=False)
    P = param_mesh.vertices[param_mesh.triangles[idx]]
    Q = mapped_mesh.vertices[mapped_mesh.triangles[idx]]
    n_par = np.cross(P[:, 1] - P[:, 0], P[:, 2] - P[:, 0])
    n_map = np.cross(Q[:, 1] - Q[:, 0], Q[:, 2] - Q[:, 0])
    c = P.mean(axis=1)
    J = solid.jacobian(c[:, 0], c[:, 1], c[:, 2])
    cof = np.linalg.det(J)[:, None, None] * np.linalg.inv(J).transpose(0, 2, 1)
    transported = np.einsum("nij,nj->ni", cof, n_par)
    dots = np.einsum("ij,ij->i", transported, n_map)
    # slivers from exact-zero samples carry no reliable normal; skip them
    edge2 = max(float(np.max(np.sum((P - np.roll(P, 1, axis=1)) ** 2, axis=2))), 1e-300)
    usable = np.linalg.norm(n_par, axis=1) > 1e-8 * edge2
    scale = np.linalg.norm(transported, axis=1) * np.linalg.norm(n_map, axis=1)
    return int(np.sum(usable & (dots < -1e-9 * scale)))
