"""Discrete threshold fields on the parametric grid and their B-spline fits.

A discrete TDF is built on a regular vertex grid over the unit cube by one
of three methods (boundary-curvature filling, layers, or a user function),
mapped affinely into the valid threshold interval of a TPMS type, and then
fitted by a clamped uniform cubic B-spline function with LSPIA.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .spline_core import (
    FACES,
    KnotVector,
    TrivariateBSplineSolid,
    TrivariateScalarField,
    basis_derivatives,
    boundary_curvature_masked,
    collocation_matrix,
    face_parameters,
)
from .tpms_field import TpmsType

log = logging.getLogger(__name__)

DEFAULT_GRID = (50, 50, 50)
DEFAULT_CONTROL = (20, 20, 20)


@dataclass(frozen=True, eq=False)
class ParametricGrid:
    """Scalar values at the vertices of a regular grid over [0, 1]^3.

    Vertex ``(a, b, c)`` sits at ``(a/(Ru-1), b/(Rv-1), c/(Rw-1))``.
    """

    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.ndim != 3:
            raise ValueError(f"grid values must be 3D, got shape {vals.shape}")
        if min(vals.shape) < 1:
            raise ValueError("empty grid")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def zeros(cls, resolution=DEFAULT_GRID) -> "ParametricGrid":
        res = tuple(int(r) for r in resolution)
        if len(res) != 3 or min(res) < 2:
            raise ValueError(f"grid resolution must be >= 2 per direction, got {res}")
        return cls(np.zeros(res))

    @property
    def resolution(self) -> tuple[int, int, int]:
        return self.values.shape

    def axis_parameters(self):
        return tuple(np.linspace(0.0, 1.0, r) if r > 1 else np.zeros(1)
                     for r in self.resolution)

    def vertex_parameters(self, index) -> tuple[float, float, float]:
        return tuple(float(p[i]) for p, i in zip(self.axis_parameters(), index))

    def with_values(self, values) -> "ParametricGrid":
        return ParametricGrid(values)


@dataclass
class EditSet:
    """Target threshold values at chosen grid vertices."""

    edits: list = field(default_factory=list)

    def __post_init__(self):
        clean = []
        for idx, value in self.edits:
            idx = tuple(int(i) for i in idx)
            if len(idx) != 3:
                raise ValueError(f"edit index must be a triple, got {idx}")
            value = float(value)
            if not math.isfinite(value):
                raise ValueError(f"edit value at {idx} is not finite")
            clean.append((idx, value))
        self.edits = clean

    def __len__(self):
        return len(self.edits)

    def check(self, resolution):
        for idx, _ in self.edits:
            if any(not 0 <= i < r for i, r in zip(idx, resolution)):
                raise IndexError(f"edit vertex {idx} outside grid {tuple(resolution)}")

    @classmethod
    def parse(cls, text: str) -> "EditSet":
        edits = []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 4:
                raise ValueError(f"edit line {lineno}: expected 'a b c value', got {line!r}")
            try:
                idx = tuple(int(p) for p in parts[:3])
                value = float(parts[3])
            except ValueError:
                raise ValueError(f"edit line {lineno}: malformed entry {line!r}") from None
            edits.append((idx, value))
        return cls(edits)

    @classmethod
    def read(cls, path) -> "EditSet":
        return cls.parse(Path(path).read_text())


# --------------------------------------------------------------------------
# Discrete TDF construction

def laplace_fill(values, fixed, tol, max_iters=10000):
    """Jacobi iteration of the 6-neighbour discrete Laplace equation.

    ``fixed`` marks Dirichlet vertices.  Free vertices take the mean of their
    in-grid neighbours.  Stops when the largest per-vertex change is below
    ``tol``.  Returns ``(values, iterations, last_change)``.
    """
    x = np.array(values, dtype=float)
    fixed = np.asarray(fixed, dtype=bool)
    shape = x.shape

    interior = np.zeros(shape, dtype=bool)
    if min(shape) >= 3:
        interior[1:-1, 1:-1, 1:-1] = True
    free_interior = interior & ~fixed
    has_interior = bool(free_interior.any())
    fixed_interior = fixed[1:-1, 1:-1, 1:-1] if has_interior else None

    # free vertices on the outer shell (degenerate boundary samples)
    shell_free = np.argwhere(~fixed & ~interior)
    if len(shell_free):
        nbr_idx, nbr_owner = [], []
        for n, idx in enumerate(shell_free):
            for axis in range(3):
                for step in (-1, 1):
                    j = idx.copy()
                    j[axis] += step
                    if 0 <= j[axis] < shape[axis]:
                        nbr_idx.append(np.ravel_multi_index(j, shape))
                        nbr_owner.append(n)
        nbr_idx = np.array(nbr_idx)
        nbr_owner = np.array(nbr_owner)
        nbr_count = np.bincount(nbr_owner, minlength=len(shell_free))
        shell_flat = np.ravel_multi_index(shell_free.T, shape)

    change = 0.0
    for it in range(1, max_iters + 1):
        change = 0.0
        new = x
        if has_interior:
            avg = (x[:-2, 1:-1, 1:-1] + x[2:, 1:-1, 1:-1]
                   + x[1:-1, :-2, 1:-1] + x[1:-1, 2:, 1:-1]
                   + x[1:-1, 1:-1, :-2] + x[1:-1, 1:-1, 2:]) / 6.0
            new = x.copy()
            core = new[1:-1, 1:-1, 1:-1]
            old = x[1:-1, 1:-1, 1:-1]
            upd = np.where(fixed_interior, old, avg)
            change = float(np.max(np.abs(upd - old)))
            core[...] = upd
        if len(shell_free):
            if new is x:
                new = x.copy()
            flat_old = x.ravel()
            sums = np.bincount(nbr_owner, weights=flat_old[nbr_idx], minlength=len(shell_free))
            vals = sums / nbr_count
            change = max(change, float(np.max(np.abs(vals - flat_old[shell_flat]))))
            new.ravel()[shell_flat] = vals
        x = new
        if change < tol:
            return x, it, change
    return x, max_iters, change


def filling_method(solid: TrivariateBSplineSolid, grid: ParametricGrid, quantity: str = "mean",
                   tol: float | None = None, max_iters: int = 10000) -> ParametricGrid:
    """Boundary curvature on the outer grid shell, diffused inward by Laplace smoothing.

    Edge and corner vertices average the curvature of the faces meeting there.
    Degenerate boundary samples are left free and get filled from neighbours.
    """
    res = grid.resolution
    if min(res) < 2:
        raise ValueError("filling needs at least 2 vertices per direction")
    params = grid.axis_parameters()
    total = np.zeros(res)
    count = np.zeros(res, dtype=int)
    n_degenerate = 0
    for face in FACES:
        axis = "uvw".index(face[0])
        side = 0 if face[1] == "0" else -1
        others = [a for a in range(3) if a != axis]
        s, t = np.meshgrid(params[others[0]], params[others[1]], indexing="ij")
        vals, bad = boundary_curvature_masked(solid, face, s, t, quantity)
        n_degenerate += int(bad.sum())
        sl = [slice(None)] * 3
        sl[axis] = side
        sl = tuple(sl)
        total[sl] += np.where(bad, 0.0, vals)
        count[sl] += (~bad).astype(int)
    if n_degenerate:
        log.info("filling: %d degenerate curvature samples skipped", n_degenerate)

    fixed = count > 0
    values = np.zeros(res)
    values[fixed] = total[fixed] / count[fixed]
    if not fixed.any():
        raise ValueError("no usable boundary curvature samples")
    bvals = values[fixed]
    if tol is None:
        span = float(bvals.max() - bvals.min())
        tol = 1e-6 * span if span > 0 else 1e-12
    values, iters, change = laplace_fill(values, fixed, tol, max_iters)
    if change >= tol:
        warnings.warn(f"Laplace smoothing did not converge in {iters} iterations "
                      f"(last change {change:.3e}, tol {tol:.3e})", stacklevel=2)
    return grid.with_values(values)


def layer_method(grid: ParametricGrid, mode: str, layer_values: Sequence[float]) -> ParametricGrid:
    """Constant threshold per layer.

    ``axis-w``: layer index is the w index.  ``onion-sides``: layer index is
    the grid distance to the nearest of the four side faces u=0, u=1, v=0, v=1.
    """
    Ru, Rv, Rw = grid.resolution
    vals = np.asarray(layer_values, dtype=float)
    if mode in ("axis-w", "w"):
        if len(vals) != Rw:
            raise ValueError(f"axis-w layering needs {Rw} values, got {len(vals)}")
        out = np.broadcast_to(vals[None, None, :], (Ru, Rv, Rw))
    elif mode in ("onion-sides", "onion"):
        n_layers = math.ceil(min(Ru, Rv) / 2)
        if len(vals) != n_layers:
            raise ValueError(f"onion-sides layering needs {n_layers} values, got {len(vals)}")
        a = np.arange(Ru)
        b = np.arange(Rv)
        du = np.minimum(a, Ru - 1 - a)
        dv = np.minimum(b, Rv - 1 - b)
        layer = np.minimum(du[:, None], dv[None, :])
        out = np.broadcast_to(vals[layer][:, :, None], (Ru, Rv, Rw))
    else:
        raise ValueError(f"unknown layer mode {mode!r}; expected 'axis-w' or 'onion-sides'")
    return grid.with_values(out)


def prescribed_function(grid: ParametricGrid, fn: Callable) -> ParametricGrid:
    """Sample ``fn(u, v, w)`` (vectorised over numpy arrays) at every vertex."""
    pu, pv, pw = grid.axis_parameters()
    U, V, W = np.meshgrid(pu, pv, pw, indexing="ij")
    vals = np.broadcast_to(np.asarray(fn(U, V, W), dtype=float), grid.resolution)
    bad = ~np.isfinite(vals)
    if bad.any():
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        raise ValueError(f"function is not finite at vertex {idx} "
                         f"(u, v, w) = {grid.vertex_parameters(idx)}")
    return grid.with_values(vals)


def sym3(u, v, w):
    """|u - v| + |v - w| + |u - w|, zero along the main diagonal."""
    return np.abs(u - v) + np.abs(v - w) + np.abs(u - w)


def normalize_to_range(grid: ParametricGrid, tpms, sub_interval=None) -> ParametricGrid:
    """Affine map of ``[min, max]`` of the grid onto the target threshold interval."""
    lo, hi = TpmsType.parse(tpms).valid_range
    if sub_interval is not None:
        a, b = (float(x) for x in sub_interval)
        if not lo <= a <= b <= hi:
            raise ValueError(f"sub-interval [{a}, {b}] not inside valid range [{lo}, {hi}]")
        lo, hi = a, b
    vals = grid.values
    vmin, vmax = float(vals.min()), float(vals.max())
    if vmax == vmin:
        return grid.with_values(np.full(vals.shape, 0.5 * (lo + hi)))
    out = lo + (vals - vmin) * ((hi - lo) / (vmax - vmin))
    return grid.with_values(np.clip(out, lo, hi))


# --------------------------------------------------------------------------
# LSPIA fitting

@dataclass
class LspiaResult:
    field: TrivariateScalarField
    residuals: list
    converged: bool

    @property
    def iterations(self) -> int:
        return len(self.residuals) - 1


def _trilinear_at(grid: ParametricGrid, us, vs, ws):
    axes = grid.axis_parameters()
    interp = RegularGridInterpolator(axes, grid.values, method="linear")
    U, V, W = np.meshgrid(us, vs, ws, indexing="ij")
    pts = np.stack([U.ravel(), V.ravel(), W.ravel()], axis=1)
    return interp(pts).reshape(U.shape)


def _mode_product(mats, x):
    """Apply one matrix per axis of a 3D array: ``x`` contracted with ``mats[k]`` along axis k."""
    a, b, c = x.shape
    y = (mats[0] @ x.reshape(a, b * c)).reshape(-1, b, c)
    y = np.matmul(mats[1], y)
    return np.matmul(y, mats[2].T)


def lspia_iterate(grid: ParametricGrid, control_res=DEFAULT_CONTROL, tol: float | None = None,
                  max_iters: int = 200, initial=None, callback=None) -> LspiaResult:
    """Fit the grid values with a clamped uniform cubic B-spline function.

    Each step computes the residual at every grid vertex, distributes it to
    the coefficients whose basis product is non-zero there, averages with
    basis-product weights, and adds the average to the coefficient.
    ``callback(iteration, max_residual)`` is called once per residual
    evaluation, starting at iteration 0.
    """
    res = grid.resolution
    control_res = tuple(int(n) for n in control_res)
    if any(n < 4 for n in control_res):
        raise ValueError("cubic fitting needs at least 4 control coefficients per direction")
    if any(n > r for n, r in zip(control_res, res)):
        raise ValueError(f"control resolution {control_res} exceeds grid resolution {res}")
    kvs = tuple(KnotVector.clamped_uniform(n) for n in control_res)
    axes = grid.axis_parameters()
    B = [collocation_matrix(kv, p) for kv, p in zip(kvs, axes)]
    Bt = [np.ascontiguousarray(b.T) for b in B]
    weights = [b.sum(axis=0) for b in B]
    denom = weights[0][:, None, None] * weights[1][None, :, None] * weights[2][None, None, :]
    if np.any(denom <= 0):
        raise ValueError("a control coefficient receives no grid vertex (zero total weight)")

    T = grid.values
    if tol is None:
        span = float(T.max() - T.min())
        tol = 1e-4 * span if span > 0 else 1e-12 * max(1.0, float(np.abs(T).max()))

    if initial is None:
        coeffs = _trilinear_at(grid, *(kv.greville() for kv in kvs))
    else:
        coeffs = np.array(initial, dtype=float)
        if coeffs.shape != control_res:
            raise ValueError(f"initial coefficients shape {coeffs.shape} != {control_res}")

    residuals = []
    converged = False
    for it in range(max_iters + 1):
        approx = _mode_product(B, coeffs)
        delta = T - approx
        r = float(np.max(np.abs(delta)))
        residuals.append(r)
        if callback is not None:
            callback(it, r)
        if r < tol:
            converged = True
            break
        if it == max_iters:
            break
        num = _mode_product(Bt, delta)
        coeffs = coeffs + num / denom
    if not converged:
        log.info("LSPIA stopped after %d iterations, max residual %.3e (tol %.3e)",
                 max_iters, residuals[-1], tol)
    return LspiaResult(TrivariateScalarField(coeffs, kvs), residuals, converged)


def lspia_fit(grid: ParametricGrid, control_res=DEFAULT_CONTROL, tol: float | None = None,
              max_iters: int = 200, callback=None) -> TrivariateScalarField:
    return lspia_iterate(grid, control_res, tol, max_iters, callback=callback).field


def _vertex_supports(field: TrivariateScalarField, params):
    """Flat coefficient indices and basis-product weights of each point's 4x4x4 support."""
    p = 3
    offs = np.arange(p + 1)
    spans, vals = [], []
    for axis in range(3):
        s, d = basis_derivatives(field.knots[axis], params[:, axis])
        spans.append(s - p)
        vals.append(d[0])
    ii = spans[0][:, None, None, None] + offs[None, :, None, None]
    jj = spans[1][:, None, None, None] + offs[None, None, :, None]
    kk = spans[2][:, None, None, None] + offs[None, None, None, :]
    flat = np.ravel_multi_index(np.broadcast_arrays(ii, jj, kk), field.shape)
    w = (vals[0][:, :, None, None] * vals[1][:, None, :, None] * vals[2][:, None, None, :])
    n = params.shape[0]
    return flat.reshape(n, -1), w.reshape(n, -1)


def lspia_local_modify(field: TrivariateScalarField, grid: ParametricGrid, edits: EditSet,
                       tol: float | None = None, max_iters: int = 200, tpms=None,
                       callback=None) -> TrivariateScalarField:
    """Refit only around edited grid vertices.

    Residuals are evaluated at the edited vertices alone, and only
    coefficients with a non-zero basis product at some edited vertex move;
    every other coefficient is returned bit-for-bit unchanged.  With
    ``tpms`` given, edit values are first clamped into its valid range.
    """
    if len(edits) == 0:
        return field
    edits.check(grid.resolution)
    axes = grid.axis_parameters()
    idx = np.array([e[0] for e in edits.edits])
    targets = np.array([e[1] for e in edits.edits], dtype=float)
    if tpms is not None:
        lo, hi = TpmsType.parse(tpms).valid_range
        clipped = np.clip(targets, lo, hi)
        if np.any(clipped != targets):
            warnings.warn(f"{int(np.sum(clipped != targets))} edit value(s) clamped into "
                          f"[{lo}, {hi}]", stacklevel=2)
        targets = clipped
    # a vertex edited twice keeps its last value
    _, last = np.unique(idx[::-1], axis=0, return_index=True)
    keep = np.sort(len(idx) - 1 - last)
    idx, targets = idx[keep], targets[keep]
    params = np.stack([axes[a][idx[:, a]] for a in range(3)], axis=1)

    flat, w = _vertex_supports(field, params)
    nz = w != 0
    touched = np.unique(flat[nz])
    col = np.searchsorted(touched, flat)
    A = np.zeros((len(targets), len(touched)))
    np.add.at(A, (np.repeat(np.arange(len(targets)), flat.shape[1])[nz.ravel()],
                  col.ravel()[nz.ravel()]), w.ravel()[nz.ravel()])
    colsum = A.sum(axis=0)

    coeffs = field.coefficients.copy()
    c = coeffs.ravel()[touched].copy()
    if tol is None:
        span = float(np.ptp(field.coefficients))
        tol = 1e-4 * span if span > 0 else 1e-8

    for it in range(max_iters + 1):
        delta = targets - A @ c
        r = float(np.max(np.abs(delta)))
        if callback is not None:
            callback(it, r)
        if r < tol or it == max_iters:
            break
        c = c + (A.T @ delta) / colsum
    coeffs.ravel()[touched] = c
    return field.with_coefficients(coeffs)
