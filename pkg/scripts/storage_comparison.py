"""TDF file size versus binary STL size as polygonization resolution grows."""

import argparse
from dataclasses import dataclass, field

from porous_scaffold.io_formats import format_stl_binary, format_tdf
from porous_scaffold.pipeline import benchmark_document, generate_scaffold


@dataclass
class StorageConfig:
    resolutions: list = field(default_factory=lambda: [50, 75, 100, 150])
    structure: str = "pore"
    cells: int = 3


def run(cfg: StorageConfig):
    doc = benchmark_document(cfg.cells)
    tdf_bytes = len(format_tdf(doc).encode())
    print(f"TDF document: {tdf_bytes} bytes")
    print("resolution,triangles,stl_bytes,saving")
    for res in cfg.resolutions:
        mesh = generate_scaffold(doc, "P", cfg.structure, resolution=res).physical
        stl = len(format_stl_binary(mesh))
        print(f"{res},{mesh.n_triangles},{stl},{1 - tdf_bytes / stl:.4f}")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--resolutions", type=int, nargs="+", default=[50, 75, 100, 150])
    ap.add_argument("--structure", default="pore")
    a = ap.parse_args()
    run(StorageConfig(a.resolutions, a.structure))


if __name__ == "__main__":
    main()
