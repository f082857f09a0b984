"""TDF/TBSS text formats and STL export.

A TDF file stores everything needed to regenerate a scaffold: the period
coefficients, the threshold field (a cubic B-spline function) and the solid
(a cubic B-spline volume).  Layout, one record per line, ``#`` lines are
section headers or comments::

    #period coefficients(omega_x,omega_y,omega_z)
    wx wy wz
    #resolution of control grid of TDF
    nu nv nw
    #control points of TDF
    C_000                      (nu*nv*nw lines, k fastest, then j, then i)
    #knot vector in u-direction of TDF
    u_0 ... u_{nu+3}           (likewise for v and w)
    #resolution of control grid of TBSS
    mu mv mw
    #control points of TBSS
    x y z                      (mu*mv*mw lines, same ordering)
    #knot vector in u-direction of TBSS
    U_0 ... U_{mu+3}           (likewise for v and w)

Numbers are written with 17 significant digits so 64-bit values survive a
round trip exactly.  A TBSS file holds only the last four sections.
"""

from __future__ import annotations

import io
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError
from .polygonizer import TriangleMesh
from .spline_core import KnotVector, TrivariateBSplineSolid, TrivariateScalarField
from .tpms_field import PeriodCoefficients

HEADERS = {
    "periods": "#period coefficients(omega_x,omega_y,omega_z)",
    "tdf_res": "#resolution of control grid of TDF",
    "tdf_cp": "#control points of TDF",
    "tdf_ku": "#knot vector in u-direction of TDF",
    "tdf_kv": "#knot vector in v-direction of TDF",
    "tdf_kw": "#knot vector in w-direction of TDF",
    "tbss_res": "#resolution of control grid of TBSS",
    "tbss_cp": "#control points of TBSS",
    "tbss_ku": "#knot vector in u-direction of TBSS",
    "tbss_kv": "#knot vector in v-direction of TBSS",
    "tbss_kw": "#knot vector in w-direction of TBSS",
}
TDF_SECTIONS = list(HEADERS)
TBSS_SECTIONS = TDF_SECTIONS[6:]


def _norm_header(line: str) -> str:
    return "".join(line.lstrip("#").split()).lower()


_HEADER_LOOKUP = {_norm_header(h): name for name, h in HEADERS.items()}


@dataclass(frozen=True, eq=False)
class TdfDocument:
    periods: PeriodCoefficients
    tdf: TrivariateScalarField
    solid: TrivariateBSplineSolid


def _fmt(x) -> str:
    return f"{float(x):.17g}"


def _solid_lines(solid: TrivariateBSplineSolid):
    yield HEADERS["tbss_res"]
    yield " ".join(str(n) for n in solid.shape)
    yield HEADERS["tbss_cp"]
    for p in solid.control_points.reshape(-1, 3):
        yield " ".join(_fmt(x) for x in p)
    for d, kv in zip("uvw", solid.knots):
        yield HEADERS[f"tbss_k{d}"]
        yield " ".join(_fmt(x) for x in kv.knots)


def format_tdf(doc: TdfDocument) -> str:
    lines = [HEADERS["periods"], " ".join(_fmt(x) for x in doc.periods.as_tuple()),
             HEADERS["tdf_res"], " ".join(str(n) for n in doc.tdf.shape),
             HEADERS["tdf_cp"]]
    lines.extend(_fmt(c) for c in doc.tdf.coefficients.ravel())
    for d, kv in zip("uvw", doc.tdf.knots):
        lines.append(HEADERS[f"tdf_k{d}"])
        lines.append(" ".join(_fmt(x) for x in kv.knots))
    lines.extend(_solid_lines(doc.solid))
    return "\n".join(lines) + "\n"


def format_tbss(solid: TrivariateBSplineSolid) -> str:
    return "\n".join(_solid_lines(solid)) + "\n"


def _write_text(text: str, destination) -> bytes:
    data = text.encode("ascii")
    if hasattr(destination, "write"):
        if isinstance(destination, io.TextIOBase):
            destination.write(text)
        else:
            destination.write(data)
    else:
        Path(destination).write_bytes(data)
    return data


def write_tdf(doc: TdfDocument, destination) -> bytes:
    """Write ``doc`` to a path or file object; returns the bytes written."""
    return _write_text(format_tdf(doc), destination)


def write_tbss(solid: TrivariateBSplineSolid, destination) -> bytes:
    return _write_text(format_tbss(solid), destination)


def _read_text(source) -> str:
    if hasattr(source, "read"):
        data = source.read()
    elif isinstance(source, (str, os.PathLike)) and not (isinstance(source, str) and "\n" in source):
        data = Path(source).read_bytes()
    else:
        data = source
    if isinstance(data, bytes):
        try:
            data = data.decode("ascii")
        except UnicodeDecodeError as exc:
            raise FormatError(f"file is not ASCII text: {exc}") from None
    return data


class _Parser:
    def __init__(self, text: str, sections):
        self.sections = list(sections)
        self.records = []  # (lineno, tokens)
        self.headers = {}  # record position -> (lineno, section name)
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                name = _HEADER_LOOKUP.get(_norm_header(line))
                if name is not None:
                    if len(self.records) in self.headers:
                        raise FormatError("section has no data", self.headers[len(self.records)][0],
                                          HEADERS[self.headers[len(self.records)][1]][1:])
                    self.headers[len(self.records)] = (lineno, name)
                continue
            self.records.append((lineno, line.split()))
        self.pos = 0

    def take(self, section, n_tokens=None, row=0, rows=1):
        """Next data record of ``section``; ``row`` counts records already read from it."""
        label = HEADERS[section][1:]
        if self.pos in self.headers:
            hl, name = self.headers[self.pos]
            other = HEADERS[name][1:]
            if name not in self.sections:
                raise FormatError(f"section '{other}' is not allowed here", hl, label)
            if name != section:
                if row:
                    raise FormatError(f"expected {rows} rows, got {row}", hl, label)
                raise FormatError(f"unexpected section '{other}', expected '{label}'", hl)
            if row:
                raise FormatError("section header repeated", hl, label)
        if self.pos >= len(self.records):
            detail = f"expected {rows} rows, got {row}" if row else "missing data"
            raise FormatError(f"file is truncated: {detail}", None, label)
        lineno, tokens = self.records[self.pos]
        self.pos += 1
        if n_tokens is not None and len(tokens) != n_tokens:
            raise FormatError(f"expected {n_tokens} values, got {len(tokens)}", lineno, label)
        return lineno, tokens

    def floats(self, section, n_tokens=None, row=0, rows=1):
        lineno, tokens = self.take(section, n_tokens, row, rows)
        try:
            vals = [float(t) for t in tokens]
        except ValueError:
            raise FormatError(f"non-numeric token in {tokens!r}", lineno,
                              HEADERS[section][1:]) from None
        if not all(np.isfinite(vals)):
            raise FormatError("non-finite value", lineno, HEADERS[section][1:])
        return lineno, vals

    def block(self, section, count, width):
        return np.array([self.floats(section, width, i, count)[1] for i in range(count)])

    def knot_vectors(self, prefix, shape):
        kvs = []
        for d, n in zip("uvw", shape):
            section = f"{prefix}_k{d}"
            lineno, knots = self.floats(section)
            expected = n + 4
            if len(knots) != expected:
                raise FormatError(f"dimension mismatch: {n} control points need {expected} knots, "
                                  f"got {len(knots)}", lineno, HEADERS[section][1:])
            try:
                kvs.append(KnotVector(knots, 3))
            except ValueError as exc:
                raise FormatError(f"invalid knot vector: {exc}", lineno,
                                  HEADERS[section][1:]) from None
        return tuple(kvs)

    def resolution(self, section):
        lineno, tokens = self.take(section, 3)
        label = HEADERS[section][1:]
        try:
            res = tuple(int(t) for t in tokens)
        except ValueError:
            raise FormatError(f"expected integers, got {tokens!r}", lineno, label) from None
        if min(res) < 4:
            raise FormatError(f"dimension error: cubic splines need >= 4 control points per "
                              f"direction, got {res}", lineno, label)
        return res

    def finish(self):
        if self.pos in self.headers:
            hl, name = self.headers[self.pos]
            raise FormatError(f"unexpected section '{HEADERS[name][1:]}' after the last section", hl)
        if self.pos < len(self.records):
            raise FormatError("unexpected data after the last section", self.records[self.pos][0])


def _parse_solid(parser: _Parser) -> TrivariateBSplineSolid:
    shape = parser.resolution("tbss_res")
    cps = parser.block("tbss_cp", int(np.prod(shape)), 3)
    kvs = parser.knot_vectors("tbss", shape)
    try:
        return TrivariateBSplineSolid(cps.reshape(shape + (3,)), kvs)
    except ValueError as exc:
        raise FormatError(str(exc), None, HEADERS["tbss_res"][1:]) from None


def read_tdf(source) -> TdfDocument:
    """Parse a TDF file from a path, file object or text."""
    p = _Parser(_read_text(source), TDF_SECTIONS)
    lineno, w = p.floats("periods", 3)
    try:
        periods = PeriodCoefficients(*w)
    except ValueError as exc:
        raise FormatError(str(exc), lineno, HEADERS["periods"][1:]) from None
    shape = p.resolution("tdf_res")
    coeffs = p.block("tdf_cp", int(np.prod(shape)), 1)
    kvs = p.knot_vectors("tdf", shape)
    try:
        tdf = TrivariateScalarField(coeffs.reshape(shape), kvs)
    except ValueError as exc:
        raise FormatError(str(exc), None, HEADERS["tdf_res"][1:]) from None
    solid = _parse_solid(p)
    p.finish()
    return TdfDocument(periods, tdf, solid)


def read_tbss(source) -> TrivariateBSplineSolid:
    """Parse a file holding only the TBSS sections of the TDF layout."""
    p = _Parser(_read_text(source), TBSS_SECTIONS)
    solid = _parse_solid(p)
    p.finish()
    return solid


# --------------------------------------------------------------------------
# STL

STL_RECORD = np.dtype([("normal", "<f4", 3), ("v0", "<f4", 3), ("v1", "<f4", 3),
                       ("v2", "<f4", 3), ("attr", "<u2")])
assert STL_RECORD.itemsize == 50


def _facet_normals(mesh: TriangleMesh):
    V = mesh.vertices[mesh.triangles]
    n = np.cross(V[:, 1] - V[:, 0], V[:, 2] - V[:, 0])
    norm = np.linalg.norm(n, axis=1, keepdims=True)
    return V, np.divide(n, norm, out=np.zeros_like(n), where=norm > 0)


def format_stl_binary(mesh: TriangleMesh, header: bytes = b"porous_scaffold") -> bytes:
    if mesh.is_empty():
        raise ValueError("cannot write an empty mesh to STL")
    V, n = _facet_normals(mesh)
    rec = np.zeros(mesh.n_triangles, dtype=STL_RECORD)
    rec["normal"] = n
    rec["v0"], rec["v1"], rec["v2"] = V[:, 0], V[:, 1], V[:, 2]
    return header[:80].ljust(80, b"\0") + struct.pack("<I", mesh.n_triangles) + rec.tobytes()


def format_stl_ascii(mesh: TriangleMesh, name: str = "scaffold") -> str:
    if mesh.is_empty():
        raise ValueError("cannot write an empty mesh to STL")
    V, n = _facet_normals(mesh)
    out = [f"solid {name}"]
    for tri, nn in zip(V, n):
        out.append("  facet normal {:.9g} {:.9g} {:.9g}".format(*nn))
        out.append("    outer loop")
        for p in tri:
            out.append("      vertex {:.9g} {:.9g} {:.9g}".format(*p))
        out.append("    endloop")
        out.append("  endfacet")
    out.append(f"endsolid {name}")
    return "\n".join(out) + "\n"


def write_stl(mesh: TriangleMesh, destination, mode: str = "binary") -> bytes:
    if mode == "binary":
        data = format_stl_binary(mesh)
    elif mode == "ascii":
        data = format_stl_ascii(mesh).encode("ascii")
    else:
        raise ValueError(f"unknown STL mode {mode!r}")
    if hasattr(destination, "write"):
        destination.write(data)
    else:
        Path(destination).write_bytes(data)
    return data


def read_stl(source) -> TriangleMesh:
    """Read binary or ASCII STL into an unwelded triangle soup (3 vertices per facet)."""
    data = Path(source).read_bytes() if not hasattr(source, "read") else source.read()
    if len(data) >= 84:
        (count,) = struct.unpack("<I", data[80:84])
        if len(data) == 84 + 50 * count:
            rec = np.frombuffer(data, dtype=STL_RECORD, count=count, offset=84)
            V = np.stack([rec["v0"], rec["v1"], rec["v2"]], axis=1).astype(float).reshape(-1, 3)
            return TriangleMesh(V, np.arange(len(V)).reshape(-1, 3), "physical")
    text = data.decode("ascii", errors="replace")
    verts = [list(map(float, line.split()[1:4])) for line in text.splitlines()
             if line.strip().startswith("vertex")]
    if not verts or len(verts) % 3:
        raise FormatError("not a valid STL file")
    V = np.array(verts)
    return TriangleMesh(V, np.arange(len(V)).reshape(-1, 3), "physical")
