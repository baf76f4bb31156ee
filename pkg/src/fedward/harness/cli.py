"""Command line: ``run``, ``sweep`` and ``report``.

Failures exit non-zero with a JSON object ``{"error": ..., "message": ...}`` on stderr.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .config import ConfigError, ExperimentConfig, load_tree
from .experiment import run_experiment
from .sweep import grid_from_tree, sweep


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fedward", description=__doc__.splitlines()[0])
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one experiment")
    r.add_argument("--config", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--seed", type=int, default=argparse.SUPPRESS)

    s = sub.add_parser("sweep", help="run a PDR x NIR x defense grid")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=argparse.SUPPRESS)

    rep = sub.add_parser("report", help="print stored results")
    rep.add_argument("--in", dest="in_dir", required=True)
    rep.add_argument("--format", choices=("csv", "json"), default="json")
    return p


def _cmd_run(args) -> None:
    cfg = ExperimentConfig.from_dict(load_tree(args.config))
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    summary = run_experiment(cfg, out_dir=args.out)
    print(json.dumps(summary.to_dict(), sort_keys=True))


def _cmd_sweep(args) -> None:
    grid = grid_from_tree(load_tree(args.config))
    rows = sweep(grid, out_dir=args.out, base_seed=args.seed)
    failed = sum("error" in r for r in rows)
    print(json.dumps({"rows": len(rows), "failed": failed, "csv": str(Path(args.out) / "sweep.csv")}))


def _cmd_report(args) -> None:
    d = Path(args.in_dir)
    if (d / "sweep.csv").exists():
        rows = list(csv.DictReader((d / "sweep.csv").read_text().splitlines()))
        if args.format == "csv":
            sys.stdout.write((d / "sweep.csv").read_text())
        else:
            print(json.dumps(rows, indent=2))
        return
    if not (d / "summary.json").exists():
        raise FileNotFoundError(f"no summary.json or sweep.csv in {d}")
    if args.format == "json":
        sys.stdout.write((d / "summary.json").read_text())
        return
    rounds = [json.loads(line) for line in (d / "rounds.jsonl").read_text().splitlines() if line]
    cols = ["round", "malicious_selected", "aer_round", "asr_round", "ma_round", "rho_clip", "eps", "fallback"]
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(cols)
    for r in rounds:
        w.writerow(["" if r[c] is None else r[c] for c in cols])


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        {"run": _cmd_run, "sweep": _cmd_sweep, "report": _cmd_report}[args.command](args)
    except (ConfigError, ValueError, OSError) as e:
        sys.stderr.write(json.dumps({"error": type(e).__name__, "message": str(e)}) + "\n")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
