"""B-spline bases, trivariate B-spline solids and scalar fields.

Everything here works on clamped knot vectors normalized to [0, 1].  The
fast paths evaluate only the ``p + 1`` non-zero basis functions of the
span containing each parameter; :func:`cox_de_boor` is the plain
recursive definition and is kept as an independent reference.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np

from .errors import DegenerateGeometryError, ParameterDomainError

DEGREE = 3
_DOMAIN_SLACK = 1e-12

FACES = ("u0", "u1", "v0", "v1", "w0", "w1")


@dataclass(frozen=True, eq=False)
class KnotVector:
    """Non-decreasing knot sequence with its spline degree."""

    knots: np.ndarray
    degree: int = DEGREE

    def __post_init__(self):
        knots = np.array(self.knots, dtype=float)
        knots.setflags(write=False)
        object.__setattr__(self, "knots", knots)
        p = self.degree
        if knots.ndim != 1:
            raise ValueError("knot vector must be one-dimensional")
        if p < 0:
            raise ValueError("degree must be non-negative")
        if len(knots) < 2 * (p + 1):
            raise ValueError(
                f"degree {p} needs at least {2 * (p + 1)} knots, got {len(knots)}")
        if not np.all(np.isfinite(knots)):
            raise ValueError("knots must be finite")
        if np.any(np.diff(knots) < 0):
            raise ValueError("knots must be non-decreasing")
        if knots[-1] <= knots[0]:
            raise ValueError("knot vector spans an empty interval")

    @property
    def n_basis(self) -> int:
        return len(self.knots) - self.degree - 1

    @property
    def is_clamped(self) -> bool:
        p = self.degree
        k = self.knots
        return bool(np.all(k[: p + 1] == k[0]) and np.all(k[-p - 1:] == k[-1]))

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.knots[self.degree]), float(self.knots[-self.degree - 1])

    def normalized(self) -> "KnotVector":
        lo, hi = self.knots[0], self.knots[-1]
        if lo == 0.0 and hi == 1.0:
            return self
        return KnotVector((self.knots - lo) / (hi - lo), self.degree)

    def greville(self) -> np.ndarray:
        p = self.degree
        if p == 0:
            return 0.5 * (self.knots[:-1] + self.knots[1:])
        k = self.knots
        return np.array([k[i + 1: i + p + 1].mean() for i in range(self.n_basis)])

    @classmethod
    def clamped_uniform(cls, n_basis: int, degree: int = DEGREE) -> "KnotVector":
        """Uniform knots on [0, 1] with end multiplicity ``degree + 1``."""
        if n_basis < degree + 1:
            raise ValueError(f"need at least {degree + 1} basis functions, got {n_basis}")
        inner = np.linspace(0.0, 1.0, n_basis - degree + 1)
        return cls(np.concatenate([np.zeros(degree), inner, np.ones(degree)]), degree)


def find_span(kv: KnotVector, u) -> np.ndarray:
    """Index ``i`` with ``knots[i] <= u < knots[i+1]`` (last span closed on the right)."""
    u = np.asarray(u, dtype=float)
    span = np.searchsorted(kv.knots, u, side="right") - 1
    return np.clip(span, kv.degree, kv.n_basis - 1)


def basis_derivatives(kv: KnotVector, u, order: int = 0):
    """Non-zero basis functions and their derivatives at parameters ``u``.

    Returns ``(span, ders)`` where ``ders[k, m, a]`` is the ``k``-th derivative
    of ``N_{span[m] - p + a, p}`` at ``u[m]``.
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    p = kv.degree
    U = kv.knots
    span = find_span(kv, u)
    npts = u.shape[0]

    ndu = np.zeros((p + 1, p + 1, npts))
    ndu[0, 0] = 1.0
    left = np.zeros((p + 1, npts))
    right = np.zeros((p + 1, npts))
    for j in range(1, p + 1):
        left[j] = u - U[span + 1 - j]
        right[j] = U[span + j] - u
        saved = np.zeros(npts)
        for r in range(j):
            ndu[j, r] = right[r + 1] + left[j - r]
            temp = ndu[r, j - 1] / ndu[j, r]
            ndu[r, j] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        ndu[j, j] = saved

    ders = np.zeros((order + 1, npts, p + 1))
    for j in range(p + 1):
        ders[0, :, j] = ndu[j, p]
    if order == 0:
        return span, ders

    n = min(order, p)
    a = np.zeros((2, p + 1, npts))
    for r in range(p + 1):
        s1, s2 = 0, 1
        a[:] = 0.0
        a[0, 0] = 1.0
        for k in range(1, n + 1):
            d = np.zeros(npts)
            rk, pk = r - k, p - k
            if r >= k:
                a[s2, 0] = a[s1, 0] / ndu[pk + 1, rk]
                d += a[s2, 0] * ndu[rk, pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = k - 1 if r - 1 <= pk else p - r
            for j in range(j1, j2 + 1):
                a[s2, j] = (a[s1, j] - a[s1, j - 1]) / ndu[pk + 1, rk + j]
                d += a[s2, j] * ndu[rk + j, pk]
            if r <= pk:
                a[s2, k] = -a[s1, k - 1] / ndu[pk + 1, r]
                d += a[s2, k] * ndu[r, pk]
            ders[k, :, r] = d
            s1, s2 = s2, s1
    for k in range(1, n + 1):
        ders[k] *= factorial(p) / factorial(p - k)
    return span, ders


def collocation_matrix(kv: KnotVector, u, order: int = 0) -> np.ndarray:
    """Dense matrix ``B[m, i] = N_i^{(order)}(u[m])``."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    span, ders = basis_derivatives(kv, u, order)
    B = np.zeros((u.shape[0], kv.n_basis))
    rows = np.arange(u.shape[0])[:, None]
    cols = span[:, None] - kv.degree + np.arange(kv.degree + 1)
    B[rows, cols] = ders[order]
    return B


def cox_de_boor(knots, i: int, p: int, u: float) -> float:
    """Recursive definition of ``N_{i,p}(u)``; 0/0 terms count as 0.

    The right end of the last non-empty span is closed so that clamped bases
    interpolate at ``u = knots[-1]``.
    """
    knots = np.asarray(knots, dtype=float)
    last = len(knots) - 1
    # last non-empty span, closed on the right at the final knot
    end_span = int(np.nonzero(knots[:-1] < knots[1:])[0][-1])

    def rec(i, p):
        if p == 0:
            if knots[i] <= u < knots[i + 1]:
                return 1.0
            return 1.0 if (u == knots[last] and i == end_span) else 0.0
        out = 0.0
        d1 = knots[i + p] - knots[i]
        if d1 > 0:
            out += (u - knots[i]) / d1 * rec(i, p - 1)
        d2 = knots[i + p + 1] - knots[i + 1]
        if d2 > 0:
            out += (knots[i + p + 1] - u) / d2 * rec(i + 1, p - 1)
        return out

    return rec(i, p)


def basis_value(kv: KnotVector, i: int, p: int, u: float) -> float:
    """Value of the ``i``-th degree-``p`` basis function over ``kv.knots``."""
    n_basis = len(kv.knots) - p - 1
    if not 0 <= i < n_basis:
        raise IndexError(f"basis index {i} out of range [0, {n_basis - 1}]")
    if not kv.knots[0] <= u <= kv.knots[-1]:
        raise ParameterDomainError(
            f"u={u} outside knot range [{kv.knots[0]}, {kv.knots[-1]}]")
    return cox_de_boor(kv.knots, i, p, float(u))


def _check_params(*arrays):
    out = []
    for a in arrays:
        a = np.asarray(a, dtype=float)
        if np.any(~np.isfinite(a)) or np.any(a < -_DOMAIN_SLACK) or np.any(a > 1 + _DOMAIN_SLACK):
            raise ParameterDomainError("parameters must lie in [0, 1]")
        out.append(np.clip(a, 0.0, 1.0))
    return np.broadcast_arrays(*out)


def _check_cubic_knots(knots, shape):
    if len(knots) != 3:
        raise ValueError("need three knot vectors")
    out = []
    for axis, (kv, n) in enumerate(zip(knots, shape)):
        if not isinstance(kv, KnotVector):
            kv = KnotVector(kv, DEGREE)
        if kv.degree != DEGREE:
            raise ValueError(f"only cubic splines are supported (axis {axis} has degree {kv.degree})")
        if kv.n_basis != n:
            raise ValueError(
                f"axis {axis}: {n} control points need {n + DEGREE + 1} knots, got {len(kv.knots)}")
        if not kv.is_clamped:
            raise ValueError(f"axis {axis}: knot vector must be clamped")
        out.append(kv.normalized())
    return tuple(out)


_CHUNK = 16384


def _tensor_eval(coeffs, knots, u, v, w, orders):
    """Evaluate a trivariate tensor-product spline and partial derivatives.

    ``coeffs`` has shape ``(nu, nv, nw, dim)``; ``orders`` is a list of
    ``(du, dv, dw)`` triples.  Returns an array ``(len(orders), npts, dim)``.
    """
    u = np.ravel(u)
    v = np.ravel(v)
    w = np.ravel(w)
    npts = u.shape[0]
    dim = coeffs.shape[-1]
    out = np.empty((len(orders), npts, dim))
    max_order = [max(o[axis] for o in orders) for axis in range(3)]
    ku, kv_, kw = knots
    p = DEGREE
    offs = np.arange(p + 1)
    for start in range(0, npts, _CHUNK):
        sl = slice(start, min(start + _CHUNK, npts))
        su, Du = basis_derivatives(ku, u[sl], max_order[0])
        sv, Dv = basis_derivatives(kv_, v[sl], max_order[1])
        sw, Dw = basis_derivatives(kw, w[sl], max_order[2])
        iu = (su - p)[:, None, None, None] + offs[None, :, None, None]
        iv = (sv - p)[:, None, None, None] + offs[None, None, :, None]
        iw = (sw - p)[:, None, None, None] + offs[None, None, None, :]
        block = coeffs[iu, iv, iw]  # (n, 4, 4, 4, dim)
        for o, (du, dv, dw) in enumerate(orders):
            out[o, sl] = np.einsum("na,nb,nc,nabcd->nd", Du[du], Dv[dv], Dw[dw], block,
                                   optimize=True)
    return out


def _grid_eval(coeffs, knots, us, vs, ws, orders=(0, 0, 0)):
    Bu = collocation_matrix(knots[0], us, orders[0])
    Bv = collocation_matrix(knots[1], vs, orders[1])
    Bw = collocation_matrix(knots[2], ws, orders[2])
    return np.einsum("ia,jb,kc,abc...->ijk...", Bu, Bv, Bw, coeffs, optimize=True)


@dataclass(frozen=True, eq=False)
class TrivariateBSplineSolid:
    """Cubic tensor-product map from the unit cube into physical space.

    ``control_points`` has shape ``(m+1, n+1, l+1, 3)``.
    """

    control_points: np.ndarray
    knots: tuple

    def __post_init__(self):
        cp = np.array(self.control_points, dtype=float)
        if cp.ndim != 4 or cp.shape[-1] != 3:
            raise ValueError(f"control points must have shape (nu, nv, nw, 3), got {cp.shape}")
        if not np.all(np.isfinite(cp)):
            raise ValueError("control points must be finite")
        cp.setflags(write=False)
        object.__setattr__(self, "control_points", cp)
        object.__setattr__(self, "knots", _check_cubic_knots(self.knots, cp.shape[:3]))

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.control_points.shape[:3]

    @property
    def degrees(self) -> tuple[int, int, int]:
        return (DEGREE,) * 3

    @classmethod
    def uniform(cls, control_points) -> "TrivariateBSplineSolid":
        cp = np.asarray(control_points, dtype=float)
        return cls(cp, tuple(KnotVector.clamped_uniform(n) for n in cp.shape[:3]))

    def evaluate(self, u, v, w) -> np.ndarray:
        u, v, w = _check_params(u, v, w)
        shape = u.shape
        out = _tensor_eval(self.control_points, self.knots, u, v, w, [(0, 0, 0)])[0]
        return out.reshape(shape + (3,))

    def jacobian(self, u, v, w) -> np.ndarray:
        """Matrices ``J[..., :, c] = dP/d(param c)``."""
        u, v, w = _check_params(u, v, w)
        shape = u.shape
        d = _tensor_eval(self.control_points, self.knots, u, v, w,
                         [(1, 0, 0), (0, 1, 0), (0, 0, 1)])
        return np.stack(d, axis=-1).reshape(shape + (3, 3))

    def evaluate_grid(self, us, vs, ws) -> np.ndarray:
        us, vs, ws = (np.clip(np.asarray(a, float), 0, 1) for a in (us, vs, ws))
        return _grid_eval(self.control_points, self.knots, us, vs, ws)


@dataclass(frozen=True, eq=False)
class TrivariateScalarField:
    """Cubic tensor-product scalar function on the unit cube."""

    coefficients: np.ndarray
    knots: tuple

    def __post_init__(self):
        c = np.array(self.coefficients, dtype=float)
        if c.ndim != 3:
            raise ValueError(f"coefficients must be a 3D grid, got shape {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)
        object.__setattr__(self, "knots", _check_cubic_knots(self.knots, c.shape))

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.coefficients.shape

    @classmethod
    def uniform(cls, coefficients) -> "TrivariateScalarField":
        c = np.asarray(coefficients, dtype=float)
        return cls(c, tuple(KnotVector.clamped_uniform(n) for n in c.shape))

    @classmethod
    def constant(cls, value: float, shape=(4, 4, 4)) -> "TrivariateScalarField":
        return cls.uniform(np.full(shape, float(value)))

    def with_coefficients(self, coefficients) -> "TrivariateScalarField":
        return TrivariateScalarField(coefficients, self.knots)

    def evaluate(self, u, v, w) -> np.ndarray:
        u, v, w = _check_params(u, v, w)
        shape = u.shape
        out = _tensor_eval(self.coefficients[..., None], self.knots, u, v, w, [(0, 0, 0)])
        return out[0, :, 0].reshape(shape)

    def evaluate_grid(self, us, vs, ws) -> np.ndarray:
        us, vs, ws = (np.clip(np.asarray(a, float), 0, 1) for a in (us, vs, ws))
        return _grid_eval(self.coefficients, self.knots, us, vs, ws)


def eval_solid(solid: TrivariateBSplineSolid, u, v, w) -> np.ndarray:
    return solid.evaluate(u, v, w)


def eval_scalar(field: TrivariateScalarField, u, v, w):
    return field.evaluate(u, v, w)


def jacobian_det(solid: TrivariateBSplineSolid, u, v, w):
    """Determinant of the parametric Jacobian, computed from analytic derivatives."""
    return np.linalg.det(solid.jacobian(u, v, w))


def identity_solid(shape=(4, 4, 4)) -> TrivariateBSplineSolid:
    """Solid whose control points sit at the Greville abscissae, so P(u,v,w) = (u,v,w)."""
    kvs = tuple(KnotVector.clamped_uniform(n) for n in shape)
    g = [kv.greville() for kv in kvs]
    cp = np.stack(np.meshgrid(*g, indexing="ij"), axis=-1)
    return TrivariateBSplineSolid(cp, kvs)


def affine_solid(matrix, offset=(0.0, 0.0, 0.0), shape=(4, 4, 4)) -> TrivariateBSplineSolid:
    """Image of the identity solid under ``x -> matrix @ x + offset``."""
    base = identity_solid(shape)
    A = np.asarray(matrix, dtype=float)
    cp = base.control_points @ A.T + np.asarray(offset, dtype=float)
    return TrivariateBSplineSolid(cp, base.knots)


# (fixed axis, fixed value, first face parameter axis, second face parameter axis)
_FACE_AXES = {
    "u0": (0, 0.0, 1, 2), "u1": (0, 1.0, 1, 2),
    "v0": (1, 0.0, 0, 2), "v1": (1, 1.0, 0, 2),
    "w0": (2, 0.0, 0, 1), "w1": (2, 1.0, 0, 1),
}


def face_parameters(face: str, s, t):
    """Map face coordinates ``(s, t)`` to solid parameters ``(u, v, w)``."""
    fixed, value, a, b = _FACE_AXES[face]
    s, t = np.broadcast_arrays(np.asarray(s, float), np.asarray(t, float))
    params = [None, None, None]
    params[fixed] = np.full(s.shape, value)
    params[a] = s
    params[b] = t
    return tuple(params)


def boundary_curvature(solid: TrivariateBSplineSolid, face: str, s, t, kind: str = "mean",
                       degenerate_tol: float = 1e-14):
    """Mean or Gauss curvature of a boundary face at face coordinates ``(s, t)``.

    Mean curvature is positive where the boundary is convex (bulges away from
    the solid).  Raises :class:`DegenerateGeometryError` if any requested point
    has a vanishing normal; use :func:`boundary_curvature_masked` to get NaN
    instead.
    """
    values, bad = boundary_curvature_masked(solid, face, s, t, kind, degenerate_tol)
    if np.any(bad):
        raise DegenerateGeometryError(f"zero surface normal on face {face}")
    return values if values.ndim else float(values)


def boundary_curvature_masked(solid, face, s, t, kind="mean", degenerate_tol=1e-14):
    """Like :func:`boundary_curvature` but returns ``(values, degenerate_mask)``."""
    if face not in _FACE_AXES:
        raise ValueError(f"unknown face {face!r}; expected one of {FACES}")
    if kind not in ("mean", "gauss"):
        raise ValueError(f"unknown curvature kind {kind!r}")
    fixed, _, a, b = _FACE_AXES[face]
    uvw = _check_params(*face_parameters(face, s, t))
    shape = uvw[0].shape

    def unit(axis, n=1):
        o = [0, 0, 0]
        o[axis] += n
        return o

    def add(o1, o2):
        return tuple(x + y for x, y in zip(o1, o2))

    orders = [tuple(unit(a)), tuple(unit(b)), tuple(unit(a, 2)),
              add(unit(a), unit(b)), tuple(unit(b, 2)), tuple(unit(fixed))]
    d = _tensor_eval(solid.control_points, solid.knots, *uvw, orders)
    Ss, St, Sss, Sst, Stt, Sn = d

    n = np.cross(Ss, St)
    norm = np.linalg.norm(n, axis=-1)
    scale = np.maximum(np.linalg.norm(Ss, axis=-1) * np.linalg.norm(St, axis=-1), 1.0)
    bad = norm <= degenerate_tol * scale
    safe = np.where(bad, 1.0, norm)
    n = n / safe[:, None]
    # orient the normal away from the solid: P_fixed points inward at the 0-face
    side = 1.0 if face.endswith("1") else -1.0
    inward = np.einsum("ij,ij->i", n, Sn)
    n = n * (side * np.where(inward < 0, -1.0, 1.0))[:, None]

    E = np.einsum("ij,ij->i", Ss, Ss)
    F = np.einsum("ij,ij->i", Ss, St)
    G = np.einsum("ij,ij->i", St, St)
    L = np.einsum("ij,ij->i", Sss, n)
    M = np.einsum("ij,ij->i", Sst, n)
    N = np.einsum("ij,ij->i", Stt, n)
    denom = E * G - F * F
    denom = np.where(bad, 1.0, denom)
    if kind == "gauss":
        val = (L * N - M * M) / denom
    else:
        # outward normal gives negative curvature on convex faces; flip
        val = -(L * G - 2 * M * F + N * E) / (2 * denom)
    val = np.where(bad, np.nan, val)
    return val.reshape(shape), bad.reshape(shape)
