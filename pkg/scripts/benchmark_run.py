"""Time TDF construction and scaffold generation for each TDF method and structure."""

import argparse
import time
from dataclasses import dataclass

from porous_scaffold.analysis import mesh_statistics
from porous_scaffold.models import MODELS
from porous_scaffold.pipeline import build_document, discrete_tdf, generate_scaffold
from porous_scaffold.tdf_builder import sym3
from porous_scaffold.tpms_field import PeriodCoefficients


@dataclass
class BenchConfig:
    model: str = "ball"
    tpms: str = "P"
    cells: int = 3
    resolution: int = 100
    grid: int = 50
    control: int = 20
    threads: int = 1


METHODS = {
    "function": dict(fn=sym3),
    "layer": dict(mode="axis-w"),
    "filling": dict(quantity="mean"),
}


def run(cfg: BenchConfig):
    solid = MODELS[cfg.model]()
    periods = PeriodCoefficients.from_cells(cfg.cells, cfg.cells, cfg.cells)
    res3 = (cfg.grid,) * 3
    print("method,structure,build_s,generate_s,triangles,closed,volume")
    for method, extra in METHODS.items():
        if method == "layer":
            extra = dict(extra, layer_values=list(range(cfg.grid)))
        t0 = time.perf_counter()
        grid = discrete_tdf(solid, method, res3, **extra)
        doc = build_document(solid, grid, cfg.tpms, periods, (cfg.control,) * 3, (-0.5, 0.5))
        build = time.perf_counter() - t0
        for structure in ("pore", "rod", "sheet"):
            t1 = time.perf_counter()
            sc = generate_scaffold(doc, cfg.tpms, structure, resolution=cfg.resolution,
                                   threads=cfg.threads)
            gen = time.perf_counter() - t1
            st = mesh_statistics(sc.physical)
            print(f"{method},{structure},{build:.2f},{gen:.2f},{st.triangle_count},"
                  f"{st.closed},{st.volume:.5g}")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--model", choices=sorted(MODELS), default="ball")
    ap.add_argument("--tpms", default="P")
    ap.add_argument("--resolution", type=int, default=100)
    ap.add_argument("--threads", type=int, default=1)
    a = ap.parse_args()
    run(BenchConfig(a.model, a.tpms, resolution=a.resolution, threads=a.threads))


if __name__ == "__main__":
    main()
