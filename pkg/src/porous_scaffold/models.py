"""Sample trivariate B-spline solids for demos, benchmarks and tests.

Control points are placed at the image of the Greville abscissae under a
smooth map, which reproduces the map exactly when it is affine and
approximates it otherwise.
"""

from __future__ import annotations

import numpy as np

from .spline_core import (
    KnotVector,
    TrivariateBSplineSolid,
    affine_solid,
    collocation_matrix,
    identity_solid,
)

__all__ = ["identity_solid", "affine_solid", "from_map", "bent_beam", "rounded_block",
           "folded_solid", "MODELS"]


def from_map(fn, shape=(8, 8, 8), interpolate=False) -> TrivariateBSplineSolid:
    """Solid approximating ``fn(u, v, w) -> (x, y, z)`` over the unit cube.

    With ``interpolate`` the solid passes through ``fn`` at the Greville
    abscissae (tensor-product interpolation) instead of using them as
    control points directly.
    """
    kvs = tuple(KnotVector.clamped_uniform(n) for n in shape)
    g = [kv.greville() for kv in kvs]
    U, V, W = np.meshgrid(*g, indexing="ij")
    cp = np.stack(fn(U, V, W), axis=-1)
    if interpolate:
        inv = [np.linalg.inv(collocation_matrix(kv, t)) for kv, t in zip(kvs, g)]
        cp = np.einsum("ai,bj,ck,ijkd->abcd", inv[0], inv[1], inv[2], cp)
    return TrivariateBSplineSolid(cp, kvs)


def bent_beam(shape=(6, 10, 6), angle=np.pi / 2, r_in=1.0, r_out=2.0, height=1.0):
    """Quarter-annulus beam: u runs along the radius, v sweeps the angle, w the height."""
    def fn(u, v, w):
        r = r_in + (r_out - r_in) * u
        th = angle * v
        return r * np.cos(th), r * np.sin(th), height * w
    return from_map(fn, shape)


def rounded_block(shape=(8, 8, 8), radius=1.0):
    """Cube squashed toward a ball (the classic cube-to-sphere map)."""
    def fn(u, v, w):
        x, y, z = 2 * u - 1, 2 * v - 1, 2 * w - 1
        sx = x * np.sqrt(1 - y * y / 2 - z * z / 2 + y * y * z * z / 3)
        sy = y * np.sqrt(1 - z * z / 2 - x * x / 2 + z * z * x * x / 3)
        sz = z * np.sqrt(1 - x * x / 2 - y * y / 2 + x * x * y * y / 3)
        # blend with the cube so corners stay non-degenerate
        return (radius * (0.5 * x + 0.5 * sx), radius * (0.5 * y + 0.5 * sy),
                radius * (0.5 * z + 0.5 * sz))
    return from_map(fn, shape)


def folded_solid(shape=(6, 4, 4)):
    """Identity solid with two neighbouring u-slabs of control points swapped."""
    base = identity_solid(shape)
    cp = base.control_points.copy()
    cp[[2, 3]] = cp[[3, 2]]
    return TrivariateBSplineSolid(cp, base.knots)


MODELS = {
    "cube": lambda: identity_solid((4, 4, 4)),
    "beam": bent_beam,
    "ball": rounded_block,
}
