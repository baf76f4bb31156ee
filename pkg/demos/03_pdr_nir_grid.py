"""
PDR x NIR comparison grid
=========================

A reduced version of the full 72-cell sweep: one poisoning rate, the IID
setting and one skewed setting, all six aggregators, 15 rounds each. The
CSV lands in ``grid_out/sweep.csv``.
"""

from pathlib import Path

from fedward.harness import ExperimentConfig, make_grid, sweep

base = ExperimentConfig(rounds=15)
grid = make_grid(base, pdrs=(0.3125,), nirs=(0.0, 0.75))
rows = sweep(grid, out_dir=Path("grid_out"), base_seed=0)

print(f"{'defense':>13} {'nir':>5} {'AASR':>6} {'MA':>6}")
for row in rows:
    print(f"{row['defense']:>13} {row['nir']:5.2f} {row['aasr']:6.3f} {row['ma_final']:6.3f}")
