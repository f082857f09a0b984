"""Porosity against constant threshold for the four TPMS types.

Writes one CSV per (type, structure) plus a short monotonicity summary.
"""

import argparse
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from porous_scaffold.analysis import porosity_sweep, sweep_csv
from porous_scaffold.tpms_field import PeriodCoefficients, TpmsType


@dataclass
class SweepConfig:
    steps: int = 17
    resolution: int = 128
    cells: int = 2
    epsilon: float = 0.3
    structures: tuple = ("pore", "rod", "sheet")
    out_dir: Path = Path("results/sweeps")


def run(cfg: SweepConfig):
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    periods = PeriodCoefficients.from_cells(cfg.cells, cfg.cells, cfg.cells)
    for tpms in TpmsType:
        cs = np.linspace(*tpms.valid_range, cfg.steps)
        for structure in cfg.structures:
            rows = porosity_sweep(tpms, structure, periods, cs, cfg.resolution, cfg.epsilon)
            path = cfg.out_dir / f"{tpms.value}_{structure}.csv"
            path.write_text(sweep_csv(rows))
            phi = np.array([p for _, p in rows])
            d = np.diff(phi)
            trend = "increasing" if np.all(d > 0) else "decreasing" if np.all(d < 0) else "mixed"
            print(f"{tpms.value:>3} {structure:<5} porosity {phi[0]:.3f} -> {phi[-1]:.3f} ({trend})")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=17)
    ap.add_argument("--resolution", type=int, default=128)
    ap.add_argument("--cells", type=int, default=2)
    ap.add_argument("--out-dir", type=Path, default=Path("results/sweeps"))
    a = ap.parse_args()
    run(SweepConfig(a.steps, a.resolution, a.cells, out_dir=a.out_dir))


if __name__ == "__main__":
    main()
