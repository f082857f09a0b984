"""End-to-end steps: solid -> discrete TDF -> fitted TDF document -> scaffold mesh."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

from .io_formats import TdfDocument
from .polygonizer import TriangleMesh, polygonize, sample_field
from .models import rounded_block
from .scaffold_mapper import JacobianReport, map_mesh, validate_jacobian
from .spline_core import TrivariateBSplineSolid
from .tdf_builder import (
    DEFAULT_CONTROL,
    DEFAULT_GRID,
    ParametricGrid,
    filling_method,
    layer_method,
    lspia_iterate,
    normalize_to_range,
    prescribed_function,
    sym3,
)
from .tpms_field import ImplicitFieldSpec, PeriodCoefficients

log = logging.getLogger(__name__)


def discrete_tdf(solid: TrivariateBSplineSolid, method: str, grid_res=DEFAULT_GRID, *,
                 fn=None, mode="axis-w", layer_values=None, quantity="mean") -> ParametricGrid:
    grid = ParametricGrid.zeros(grid_res)
    if method == "filling":
        return filling_method(solid, grid, quantity)
    if method == "layer":
        if layer_values is None:
            raise ValueError("layer method needs layer values")
        return layer_method(grid, mode, layer_values)
    if method == "function":
        if fn is None:
            raise ValueError("function method needs a function")
        return prescribed_function(grid, fn)
    raise ValueError(f"unknown TDF method {method!r}")


def build_document(solid: TrivariateBSplineSolid, grid: ParametricGrid, tpms,
                   periods: PeriodCoefficients, control_res=DEFAULT_CONTROL, sub_interval=None,
                   tol=None, max_iters=200) -> TdfDocument:
    """Normalize the discrete TDF into the valid range of ``tpms`` and fit it."""
    normalized = normalize_to_range(grid, tpms, sub_interval)
    result = lspia_iterate(normalized, control_res, tol, max_iters)
    log.info("LSPIA: %d iterations, max residual %.3e", result.iterations, result.residuals[-1])
    return TdfDocument(periods, result.field, solid)


def benchmark_document(cells=3, grid_res=DEFAULT_GRID, control_res=DEFAULT_CONTROL) -> TdfDocument:
    """Rounded block with a P-type threshold graded by ``sym3``, ``cells`` periods per axis."""
    solid = rounded_block()
    grid = discrete_tdf(solid, "function", grid_res, fn=sym3)
    # a narrower interval leaves room for fitting overshoot at the |.| kinks
    return build_document(solid, grid, "P", PeriodCoefficients.from_cells(cells, cells, cells),
                          control_res, sub_interval=(-0.5, 0.5))


@dataclass
class Scaffold:
    parametric: TriangleMesh
    physical: TriangleMesh
    jacobian: JacobianReport
    timings: dict = field(default_factory=dict)


def generate_scaffold(doc: TdfDocument, tpms, structure, epsilon=0.3, resolution=100,
                      threads=1, periods: PeriodCoefficients | None = None) -> Scaffold:
    spec = ImplicitFieldSpec(tpms, periods or doc.periods, structure, epsilon)
    timings = {}
    t0 = time.perf_counter()
    samples = sample_field(spec, doc.tdf, resolution, threads=threads)
    t1 = time.perf_counter()
    mesh = polygonize(samples, spec.structure)
    t2 = time.perf_counter()
    report = validate_jacobian(doc.solid, warn=False)
    physical = map_mesh(doc.solid, mesh, threads=threads)
    t3 = time.perf_counter()
    timings.update(sample=t1 - t0, polygonize=t2 - t1, map=t3 - t2, total=t3 - t0)
    return Scaffold(mesh, physical, report, timings)
