from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from ..updates import LayeredUpdate, mean_update
from .amgrad import amgrad
from .clipping import adaptive_clip
from .optics import auto_optics


@dataclass(frozen=True)
class RoundDefenseTrace:
    inds: tuple[int, ...]
    rho_clip: float | None
    eps: float | None
    fallback: bool


def fedward_update(ws: Sequence[LayeredUpdate], eps_rule: str = "knn_median"):
    """One server step: AmGrad, adaptive OPTICS on the amplified updates, then
    clipping of the accepted original updates to the |inds|-th smallest norm."""
    if len(ws) < 3:
        raise ValueError("fedward needs at least 3 updates")
    cluster = auto_optics([amgrad(w) for w in ws], eps_rule=eps_rule)
    clipped, rho = adaptive_clip(ws, cluster.size)
    update = mean_update([clipped[i] for i in cluster.inds])
    return update, RoundDefenseTrace(cluster.inds, rho, cluster.eps_used, cluster.fallback)


def fedward_aggregate(global_prev: LayeredUpdate, ws: Sequence[LayeredUpdate],
                      eps_rule: str = "knn_median"):
    """Return ``(global_new, trace)``; the mean clipped update is added to ``global_prev``."""
    for w in ws:
        global_prev.check_compatible(w)
    update, trace = fedward_update(ws, eps_rule)
    return global_prev + update, trace
