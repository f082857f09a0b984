"""TPMS nodal functions and the combined scaffold field ``f = psi - C``."""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np

from .spline_core import TrivariateScalarField


class TpmsType(enum.Enum):
    P = "P"
    D = "D"
    G = "G"
    IWP = "IWP"

    @property
    def valid_range(self) -> tuple[float, float]:
        return VALID_RANGES[self]

    @classmethod
    def parse(cls, name) -> "TpmsType":
        if isinstance(name, cls):
            return name
        key = str(name).upper().replace("-", "").replace("_", "")
        try:
            return cls(key)
        except ValueError:
            raise ValueError(
                f"unknown TPMS type {name!r}; expected one of P, D, G, IWP") from None


VALID_RANGES = {
    TpmsType.P: (-0.8, 0.8),
    TpmsType.D: (-0.6, 0.6),
    TpmsType.G: (-0.8, 0.8),
    TpmsType.IWP: (-2.0, 2.0),
}


class Structure(enum.Enum):
    PORE = "pore"
    ROD = "rod"
    SHEET = "sheet"

    @classmethod
    def parse(cls, name) -> "Structure":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).lower())
        except ValueError:
            raise ValueError(
                f"unknown structure {name!r}; expected pore, rod or sheet") from None


@dataclass(frozen=True)
class PeriodCoefficients:
    """Angular frequencies per unit parameter; the TPMS period along u is 2*pi/wx."""

    wx: float
    wy: float
    wz: float

    def __post_init__(self):
        for name in ("wx", "wy", "wz"):
            val = float(getattr(self, name))
            if not np.isfinite(val) or val <= 0:
                raise ValueError(f"period coefficient {name} must be positive, got {val}")
            object.__setattr__(self, name, val)

    @classmethod
    def from_cells(cls, kx: float, ky: float, kz: float) -> "PeriodCoefficients":
        """``k`` full TPMS cells per parameter direction (omega = 2*pi*k)."""
        return cls(2 * np.pi * kx, 2 * np.pi * ky, 2 * np.pi * kz)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.wx, self.wy, self.wz)


DEFAULT_EPSILON = 0.3


@dataclass(frozen=True)
class ImplicitFieldSpec:
    tpms: TpmsType
    periods: PeriodCoefficients
    structure: Structure = Structure.PORE
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        object.__setattr__(self, "tpms", TpmsType.parse(self.tpms))
        object.__setattr__(self, "structure", Structure.parse(self.structure))
        if self.structure is Structure.SHEET and not self.epsilon > 0:
            raise ValueError(f"sheet thickness must be positive, got {self.epsilon}")


def psi(tpms, periods: PeriodCoefficients, u, v, w):
    """Nodal approximation of the TPMS evaluated at ``(wx*u, wy*v, wz*w)``."""
    tpms = TpmsType.parse(tpms)
    x = periods.wx * np.asarray(u, dtype=float)
    y = periods.wy * np.asarray(v, dtype=float)
    z = periods.wz * np.asarray(w, dtype=float)
    if tpms is TpmsType.P:
        return np.cos(x) + np.cos(y) + np.cos(z)
    if tpms is TpmsType.D:
        return (np.cos(x) * np.cos(y) * np.cos(z)
                - np.sin(x) * np.sin(y) * np.sin(z))
    if tpms is TpmsType.G:
        return (np.sin(x) * np.cos(y) + np.sin(y) * np.cos(z)
                + np.sin(z) * np.cos(x))
    cx, cy, cz = np.cos(x), np.cos(y), np.cos(z)
    return 2 * (cx * cy + cy * cz + cz * cx) - (np.cos(2 * x) + np.cos(2 * y) + np.cos(2 * z))


def psi_grid(tpms, periods: PeriodCoefficients, us, vs, ws) -> np.ndarray:
    """``psi`` on the tensor grid ``us x vs x ws`` without forming full coordinate arrays."""
    return psi(tpms, periods, np.asarray(us)[:, None, None],
               np.asarray(vs)[None, :, None], np.asarray(ws)[None, None, :])


def scaffold_field(spec: ImplicitFieldSpec, tdf: TrivariateScalarField, u, v, w):
    return psi(spec.tpms, spec.periods, u, v, w) - tdf.evaluate(u, v, w)


def scaffold_field_grid(spec: ImplicitFieldSpec, tdf: TrivariateScalarField, us, vs, ws):
    return psi_grid(spec.tpms, spec.periods, us, vs, ws) - tdf.evaluate_grid(us, vs, ws)


def inside_from_field(f, structure, epsilon: float = DEFAULT_EPSILON):
    """Membership test on precomputed values of ``f``; surface points are inside."""
    structure = Structure.parse(structure)
    f = np.asarray(f)
    if structure is Structure.PORE:
        return f >= 0
    if structure is Structure.ROD:
        return f <= 0
    return (f >= -epsilon) & (f <= 0)


def inside_structure(spec: ImplicitFieldSpec, tdf: TrivariateScalarField, u, v, w):
    return inside_from_field(scaffold_field(spec, tdf, u, v, w), spec.structure, spec.epsilon)


def clamp_to_valid_range(tpms, c):
    """Clamp ``c`` into the valid threshold interval; returns ``(value, clamped)``."""
    lo, hi = TpmsType.parse(tpms).valid_range
    c_arr = np.asarray(c, dtype=float)
    out = np.clip(c_arr, lo, hi)
    clamped = bool(np.any(out != c_arr))
    if clamped:
        warnings.warn(f"threshold clamped into valid range [{lo}, {hi}]", stacklevel=2)
    if out.ndim == 0:
        out = float(out)
    return out, clamped
