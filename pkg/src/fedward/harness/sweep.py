"""Grids of experiments laid out like the PDR x data-distribution comparison table."""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
from itertools import product
from pathlib import Path

from ..defense import DefenseSpec
from .config import ConfigError, ExperimentConfig
from .experiment import run_experiment

log = logging.getLogger(__name__)

SWEEP_COLUMNS = ("pdr", "nir", "defense", "aasr", "aer", "ma_final", "ma_avg")
TABLE_PDRS = (0.15625, 0.3125, 0.46875)
TABLE_NIRS = (0.0, 0.25, 0.50, 0.75)  # 0.0 is the IID column
TABLE_DEFENSES = ("median", "trimmed_mean", "static_clip", "kmeans2", "fedavg", "fedward")


def make_grid(base: ExperimentConfig, pdrs=TABLE_PDRS, nirs=TABLE_NIRS,
              defenses=TABLE_DEFENSES) -> list[ExperimentConfig]:
    """Cartesian grid over PDR rows, NIR columns and defenses."""
    grid = []
    for pdr, nir, kind in product(pdrs, nirs, defenses):
        defense = dataclasses.replace(base.defense, kind=kind)
        grid.append(base.replace(pdr=pdr, nir=nir, defense=defense))
    return grid


def grid_from_tree(tree: dict) -> list[ExperimentConfig]:
    """Build a grid from ``{"base": {...}, "grid": {"pdr": [...], "nir": [...], "defense": [...]}}``."""
    unknown = sorted(set(tree) - {"base", "grid"})
    if unknown:
        raise ConfigError(f"sweep config: unknown keys {unknown}")
    base = ExperimentConfig.from_dict(tree.get("base", {}))
    axes = tree.get("grid", {}) or {}
    unknown = sorted(set(axes) - {"pdr", "nir", "defense"})
    if unknown:
        raise ConfigError(f"sweep grid: unknown keys {unknown}")
    return make_grid(
        base,
        tuple(axes.get("pdr", TABLE_PDRS)),
        tuple(axes.get("nir", TABLE_NIRS)),
        tuple(axes.get("defense", TABLE_DEFENSES)),
    )


def sweep(grid: list[ExperimentConfig], out_dir=None, base_seed: int | None = None) -> list[dict]:
    """Run every config with seed ``base_seed + index``; errors are kept per row.

    Returns one row per config. Rows of failed runs carry an ``error`` entry
    and blank metrics; the CSV keeps exactly :data:`SWEEP_COLUMNS` and the
    errors go to ``sweep_errors.jsonl``.
    """
    if not grid:
        raise ValueError("empty sweep grid")
    base_seed = grid[0].seed if base_seed is None else base_seed
    rows = []
    for index, cfg in enumerate(grid):
        row = {"pdr": cfg.pdr, "nir": cfg.nir, "defense": cfg.defense.kind}
        try:
            cfg = cfg.replace(seed=base_seed + index)
            s = run_experiment(cfg)
            row.update(aasr=s.aasr, aer=s.aer, ma_final=s.ma_final, ma_avg=s.ma_avg)
        except Exception as e:  # noqa: BLE001 - a failed cell must not stop the sweep
            log.warning("sweep row %d failed: %s", index, e)
            row.update(aasr=None, aer=None, ma_final=None, ma_avg=None,
                       error=f"{type(e).__name__}: {e}")
        rows.append(row)
    if out_dir is not None:
        write_sweep(rows, out_dir)
    return rows


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for row in rows:
        w.writerow(["" if row[c] is None else repr(row[c]) if isinstance(row[c], float) else row[c]
                    for c in SWEEP_COLUMNS])
    return buf.getvalue()


def write_sweep(rows: list[dict], out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "sweep.csv").write_text(rows_to_csv(rows))
    errors = [dict(index=i, **r) for i, r in enumerate(rows) if "error" in r]
    path = out / "sweep_errors.jsonl"
    if errors:
        path.write_text("".join(json.dumps(e, sort_keys=True) + "\n" for e in errors))
    elif path.exists():
        path.unlink()
