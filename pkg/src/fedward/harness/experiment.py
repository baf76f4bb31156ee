"""The federated training loop: sampling, local training, attacks, aggregation
and per-round metrics."""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..attacks import apply_model_poison, boost_training, forge_update
from ..datagen import Dataset, PartitionSpec, gen_synthetic, load_idx, partition_noniid, poison_client
from ..defense import aggregate
from ..trainer import evaluate_asr, evaluate_ma, init_params, local_update
from ..updates import mean_update
from .config import ConfigError, ExperimentConfig

log = logging.getLogger(__name__)

# stream tags for np.random.default_rng([seed, tag, ...])
_SAMPLING, _TRAIN, _POISON, _FORGE, _INIT, _DATA = range(6)


@dataclass(frozen=True)
class RoundReport:
    round: int
    selected: tuple[int, ...]
    malicious_selected: int
    accepted: tuple[int, ...]
    aer_round: float | None
    asr_round: float
    ma_round: float
    rho_clip: float | None
    eps: float | None
    fallback: bool

    def to_dict(self) -> dict:
        d = asdict(self)
        d["selected"] = list(self.selected)
        d["accepted"] = list(self.accepted)
        return d


@dataclass
class RunSummary:
    aasr: float
    aer: float | None
    ma_final: float
    ma_avg: float
    asr_final: float
    fallback_rounds: int
    config_hash: str
    rounds: list[RoundReport] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "aasr": self.aasr,
            "aer": self.aer,
            "ma_final": self.ma_final,
            "ma_avg": self.ma_avg,
            "asr_final": self.asr_final,
            "fallback_rounds": self.fallback_rounds,
            "n_rounds": len(self.rounds),
            "config_hash": self.config_hash,
        }


def compute_aer(selected_malicious, accepted) -> float | None:
    """Share of the selected malicious clients that the defense accepted."""
    selected_malicious = set(selected_malicious)
    if not selected_malicious:
        return None
    return len(selected_malicious & set(accepted)) / len(selected_malicious)


def build_datasets(cfg: ExperimentConfig) -> tuple[Dataset, Dataset]:
    ds = cfg.dataset
    if ds.source == "synthetic":
        train = gen_synthetic(ds.classes, ds.per_class, ds.dims, seed=cfg.seed * 2,
                              noise=ds.noise, pattern_seed=cfg.seed)
        test = gen_synthetic(ds.classes, ds.test_per_class, ds.dims, seed=cfg.seed * 2 + 1,
                             noise=ds.noise, pattern_seed=cfg.seed)
    else:
        try:
            train = load_idx(ds.train_images, ds.train_labels)
            test = load_idx(ds.test_images, ds.test_labels)
        except OSError as e:
            raise ConfigError(f"dataset load failure: {e}") from None
        rng = np.random.default_rng([cfg.seed, _DATA])
        if ds.max_train is not None and ds.max_train < len(train):
            train = train.subset(np.sort(rng.permutation(len(train))[:ds.max_train]))
        if ds.max_test is not None and ds.max_test < len(test):
            test = test.subset(np.sort(rng.permutation(len(test))[:ds.max_test]))
    if cfg.model.input_dim != train.x.shape[1] or cfg.model.classes < train.classes:
        raise ConfigError(
            f"model ({cfg.model.input_dim} inputs, {cfg.model.classes} classes) does not fit "
            f"the dataset ({train.x.shape[1]} inputs, {train.classes} classes)")
    return train, test


def setup_clients(cfg: ExperimentConfig, train: Dataset) -> tuple[list[Dataset], set[int]]:
    """Partition the data and poison the designated malicious clients."""
    parts = partition_noniid(train, PartitionSpec(cfg.n_clients, cfg.nir, train.classes, cfg.seed))
    malicious = set(range(cfg.n_malicious))
    if cfg.attack.poisons_data:
        trigger = cfg.resolved_trigger(train.dims)
        n_regions = len(trigger.anchor_points)
        for i in sorted(malicious):
            seed = np.random.default_rng([cfg.seed, _POISON, i]).integers(2**32)
            parts[i] = poison_client(parts[i], trigger, i % n_regions, cfg.pdr, seed=int(seed))
    return parts, malicious


def client_update(cfg: ExperimentConfig, params, data: Dataset, client: int, t: int, malicious: bool):
    train_cfg = cfg.train.with_seed([cfg.seed, _TRAIN, client, t])
    if malicious and cfg.attack.kind != "none":
        train_cfg = boost_training(train_cfg, cfg.attack)
    w = local_update(params, data, train_cfg)
    if malicious and cfg.attack.scales:
        w = apply_model_poison(w, cfg.attack)
    return w


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> RunSummary:
    """Run ``cfg.rounds`` federated rounds; write reports when ``out_dir`` is given."""
    train, test = build_datasets(cfg)
    trigger = cfg.resolved_trigger(train.dims)
    trigger.check_fits(train.dims)
    parts, malicious = setup_clients(cfg, train)
    params = init_params(cfg.model, np.random.default_rng([cfg.seed, _INIT]).integers(2**32))
    reports: list[RoundReport] = []

    for t in range(1, cfg.rounds + 1):
        rng = np.random.default_rng([cfg.seed, _SAMPLING, t])
        selected = tuple(sorted(int(i) for i in rng.choice(cfg.n_clients, cfg.m_selected, replace=False)))
        ws = [client_update(cfg, params, parts[i], i, t, i in malicious) for i in selected]
        if cfg.attack.kind == "forged":
            benign = [w for i, w in zip(selected, ws) if i not in malicious]
            if benign:
                ref = mean_update(benign)
                ws = [
                    forge_update(ref, cfg.attack.angle_deg, cfg.attack.magnitude_ratio,
                                 seed=np.random.default_rng([cfg.seed, _FORGE, i, t]).integers(2**32))
                    if i in malicious else w
                    for i, w in zip(selected, ws)
                ]
        params, trace = aggregate(params, ws, cfg.defense)
        accepted = tuple(selected[k] for k in trace.inds)
        mal_sel = [i for i in selected if i in malicious]
        reports.append(RoundReport(
            round=t,
            selected=selected,
            malicious_selected=len(mal_sel),
            accepted=accepted,
            aer_round=compute_aer(mal_sel, accepted),
            asr_round=evaluate_asr(params, test, trigger),
            ma_round=evaluate_ma(params, test),
            rho_clip=trace.rho_clip,
            eps=trace.eps,
            fallback=trace.fallback,
        ))
        log.debug("round %d: asr=%.3f ma=%.3f accepted=%s", t, reports[-1].asr_round,
                  reports[-1].ma_round, accepted)

    summary = summarize(reports, cfg.digest())
    if out_dir is not None:
        write_reports(summary, out_dir)
    return summary


def summarize(reports: list[RoundReport], config_hash: str) -> RunSummary:
    aers = [r.aer_round for r in reports if r.aer_round is not None]
    return RunSummary(
        aasr=float(np.mean([r.asr_round for r in reports])),
        aer=float(np.mean(aers)) if aers else None,
        ma_final=reports[-1].ma_round,
        ma_avg=float(np.mean([r.ma_round for r in reports])),
        asr_final=reports[-1].asr_round,
        fallback_rounds=sum(r.fallback for r in reports),
        config_hash=config_hash,
        rounds=reports,
    )


def write_reports(summary: RunSummary, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "rounds.jsonl", "w") as f:
        for r in summary.rounds:
            f.write(json.dumps(r.to_dict(), sort_keys=True) + "\n")
    (out / "summary.json").write_text(json.dumps(summary.to_dict(), sort_keys=True, indent=2) + "\n")
