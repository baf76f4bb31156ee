"""Reference aggregators: FedAvg, coordinate-wise median and trimmed mean, a
static norm clip and a 2-means filter on flattened updates."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..updates import LayeredUpdate, mean_update, stack, unflatten
from .clipping import clip_to

DEFENSE_KINDS = ("fedward", "fedavg", "median", "trimmed_mean", "static_clip", "kmeans2")


@dataclass(frozen=True)
class DefenseSpec:
    kind: str = "fedward"
    trim_k: int = 1
    clip_bound: float = 1.0
    eps_rule: str = "knn_median"
    seed: int = 0

    def __post_init__(self):
        if self.kind not in DEFENSE_KINDS:
            raise ValueError(f"unknown defense kind {self.kind!r}")
        if self.trim_k < 0:
            raise ValueError("trim_k must be >= 0")
        if not self.clip_bound > 0:
            raise ValueError("clip_bound must be positive")

    def check_for(self, m: int) -> None:
        if self.kind == "trimmed_mean" and 2 * self.trim_k >= m:
            raise ValueError(f"trim_k={self.trim_k} leaves nothing to average over {m} updates")


def coordinate_median(x: np.ndarray) -> np.ndarray:
    """Per-column median of ``x`` (rows are clients); even counts average the middle pair."""
    s = np.sort(x, axis=0)
    m = s.shape[0]
    mid = m // 2
    if m % 2:
        return s[mid].copy()
    return (s[mid - 1] + s[mid]) / 2


def coordinate_trimmed_mean(x: np.ndarray, k: int) -> np.ndarray:
    """Per-column mean after dropping the ``k`` smallest and ``k`` largest values."""
    m = x.shape[0]
    if 2 * k >= m:
        raise ValueError(f"cannot trim {k} from each side of {m} values")
    s = np.sort(x, axis=0)[k:m - k]
    acc = s[0].copy()
    for row in s[1:]:
        acc += row
    return acc / (m - 2 * k)


def kmeans2_accept(x: np.ndarray, seed=0, restarts: int = 10, tol: float = 1e-9,
                   max_iter: int = 300) -> np.ndarray:
    """Indices of the larger of two k-means clusters (ties to the cluster with index 0)."""
    m = x.shape[0]
    if m < 2:
        return np.arange(m)
    rng = np.random.default_rng(seed)
    best_labels, best_inertia = None, np.inf
    for _ in range(restarts):
        centers = x[rng.choice(m, size=2, replace=False)].copy()
        for _ in range(max_iter):
            dist = ((x[:, None, :] - centers[None]) ** 2).sum(axis=2)
            labels = np.argmin(dist, axis=1)
            new = np.array([x[labels == c].mean(axis=0) if np.any(labels == c) else centers[c]
                            for c in range(2)])
            moved = np.max(np.linalg.norm(new - centers, axis=1))
            centers = new
            if moved <= tol:
                break
        dist = ((x[:, None, :] - centers[None]) ** 2).sum(axis=2)
        labels = np.argmin(dist, axis=1)
        inertia = dist[np.arange(m), labels].sum()
        if inertia < best_inertia:
            best_labels, best_inertia = labels, inertia
    sizes = np.bincount(best_labels, minlength=2)
    if sizes[0] == sizes[1]:
        keep = best_labels[0]
    else:
        keep = int(np.argmax(sizes))
    return np.flatnonzero(best_labels == keep)


def baseline_update(ws: Sequence[LayeredUpdate], spec: DefenseSpec):
    """Aggregate update plus the accepted client positions (None when not applicable)."""
    if not ws:
        raise ValueError("no updates to aggregate")
    spec.check_for(len(ws))
    kind = spec.kind
    if kind == "fedavg":
        return mean_update(ws), None
    if kind == "static_clip":
        return mean_update([clip_to(w, spec.clip_bound) for w in ws]), None
    x = stack(ws)
    if kind == "median":
        return unflatten(coordinate_median(x), ws[0]), None
    if kind == "trimmed_mean":
        return unflatten(coordinate_trimmed_mean(x, spec.trim_k), ws[0]), None
    if kind == "kmeans2":
        keep = kmeans2_accept(x, seed=spec.seed)
        return mean_update([ws[i] for i in keep]), tuple(int(i) for i in keep)
    raise ValueError(f"{kind!r} is not a baseline aggregator")


def baseline_aggregate(kind: str, global_prev: LayeredUpdate, ws: Sequence[LayeredUpdate],
                       spec: DefenseSpec | None = None) -> LayeredUpdate:
    spec = DefenseSpec(kind=kind) if spec is None else spec
    if spec.kind != kind:
        raise ValueError(f"spec kind {spec.kind!r} does not match {kind!r}")
    update, _ = baseline_update(ws, spec)
    return global_prev + update
