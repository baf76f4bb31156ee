"""OPTICS ordering over a precomputed distance matrix, DBSCAN-style extraction,
and the adaptive wrapper that picks eps and min_pts from the updates."""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..updates import LayeredUpdate, pairwise_distances

NOISE = -1
EPS_RULES = ("knn_median", "smallest_pairs")


@dataclass(frozen=True)
class ClusterResult:
    inds: tuple[int, ...]
    eps_used: float
    mins_used: int
    fallback: bool

    @property
    def size(self) -> int:
        return len(self.inds)


def core_distances(d: np.ndarray, min_pts: int, max_eps: float = math.inf) -> np.ndarray:
    """Distance to the ``min_pts``-th nearest neighbour, the point itself included.

    Values beyond ``max_eps`` become ``inf``.
    """
    core = np.sort(d, axis=1)[:, min_pts - 1]
    return np.where(core <= max_eps, core, math.inf)


def optics_order(d: np.ndarray, min_pts: int, max_eps: float = math.inf):
    """Return ``(ordering, reachability, core_dist)``.

    ``reachability`` is indexed by point. Seeds are popped by smallest
    reachability, ties to the lowest index; each new component starts from
    the lowest unprocessed index with reachability ``inf``.
    """
    d = np.asarray(d, dtype=np.float64)
    m = d.shape[0]
    if not 2 <= min_pts <= m:
        raise ValueError(f"min_pts must lie in [2, {m}], got {min_pts}")
    core = core_distances(d, min_pts, max_eps)
    reach = np.full(m, math.inf)
    done = np.zeros(m, dtype=bool)
    ordering: list[int] = []

    for start in range(m):
        if done[start]:
            continue
        seeds = [(math.inf, start)]
        while seeds:
            r, p = heapq.heappop(seeds)
            if done[p] or r > reach[p]:
                continue  # stale heap entry
            done[p] = True
            ordering.append(p)
            if math.isinf(core[p]):
                continue
            for o in range(m):
                if done[o] or d[p, o] > max_eps:
                    continue
                new = max(core[p], d[p, o])
                if new < reach[o]:
                    reach[o] = new
                    heapq.heappush(seeds, (new, o))
    return ordering, reach, core


def extract_dbscan(ordering, reachability, core_dist, eps: float) -> np.ndarray:
    """Label points by walking an OPTICS ordering at radius ``eps``.

    Returns one label per point: a cluster id ``0, 1, ...`` or ``NOISE``.
    """
    if eps < 0:
        raise ValueError("eps must be >= 0")
    labels = np.full(len(ordering), NOISE, dtype=np.int64)
    current, next_id = NOISE, 0
    for p in ordering:
        if reachability[p] > eps:
            if core_dist[p] <= eps:
                current, next_id = next_id, next_id + 1
                labels[p] = current
        else:
            labels[p] = current
    return labels


def attach_borders(labels: np.ndarray, d: np.ndarray, core_dist: np.ndarray, eps: float) -> np.ndarray:
    """Canonical border assignment.

    Every non-core point within ``eps`` of some core point joins the cluster
    of its nearest core point (ties to the lowest index); the rest is noise.
    Core labels are left as they are.
    """
    labels = labels.copy()
    is_core = core_dist <= eps
    core_idx = np.flatnonzero(is_core)
    for p in np.flatnonzero(~is_core):
        if core_idx.size == 0:
            labels[p] = NOISE
            continue
        dist = d[p, core_idx]
        j = int(np.argmin(dist))
        labels[p] = labels[core_idx[j]] if dist[j] <= eps else NOISE
    return labels


def largest_cluster(labels: np.ndarray) -> tuple[int, ...] | None:
    """Members of the biggest cluster; ties go to the cluster holding the lowest index."""
    best = None
    for c in np.unique(labels[labels != NOISE]):
        members = tuple(int(i) for i in np.flatnonzero(labels == c))
        if best is None or len(members) > len(best) or (len(members) == len(best) and members[0] < best[0]):
            best = members
    return best


def min_group_size(m: int) -> int:
    """Smallest group that can hold a strict majority plus one."""
    return math.ceil(m / 2) + 1


def select_eps(d: np.ndarray, mins: int, rule: str = "knn_median") -> float:
    """Pick the DBSCAN radius from the distance matrix.

    ``knn_median``: median over clients of the distance to their
    ``mins``-th nearest neighbour (self included), so about half of the
    clients are core points.
    ``smallest_pairs``: median of the ``mins`` smallest off-diagonal
    distances. For ``m >= 5`` this radius admits no core point unless
    distances tie, so it nearly always falls back.
    """
    if rule == "knn_median":
        return float(np.median(np.sort(d, axis=1)[:, mins - 1]))
    if rule == "smallest_pairs":
        iu = np.triu_indices(d.shape[0], k=1)
        return float(np.median(np.sort(d[iu])[:mins]))
    raise ValueError(f"unknown eps rule {rule!r}")


def auto_optics(ws_am: Sequence[LayeredUpdate], eps_rule: str = "knn_median") -> ClusterResult:
    """Adaptive OPTICS clustering of (AmGrad-transformed) updates.

    Returns the largest density cluster at the chosen radius, or all clients
    with ``fallback=True`` when no cluster forms.
    """
    m = len(ws_am)
    if m < 3:
        raise ValueError("auto_optics needs at least 3 updates")
    return cluster_distance_matrix(pairwise_distances(ws_am), eps_rule)


def cluster_distance_matrix(d: np.ndarray, eps_rule: str = "knn_median") -> ClusterResult:
    m = d.shape[0]
    mins = min_group_size(m)
    eps = select_eps(d, mins, eps_rule)
    ordering, reach, core = optics_order(d, mins, max_eps=eps)
    labels = attach_borders(extract_dbscan(ordering, reach, core, eps), d, core, eps)
    best = largest_cluster(labels)
    if best is None:
        return ClusterResult(tuple(range(m)), eps, mins, True)
    return ClusterResult(best, eps, mins, False)
