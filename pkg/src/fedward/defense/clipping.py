from __future__ import annotations

from typing import Sequence

import numpy as np

from ..updates import LayeredUpdate, l2_norm


def clip_to(w: LayeredUpdate, bound: float, norm: float | None = None) -> LayeredUpdate:
    """Scale ``w`` down to norm ``bound``; returned as-is when already inside."""
    norm = l2_norm(w) if norm is None else norm
    factor = max(1.0, norm / bound) if bound > 0 else (1.0 if norm == 0 else np.inf)
    if factor == 1.0:
        return w
    if np.isinf(factor):
        return w.zeros_like()
    return w.map(lambda a: a / factor)


def adaptive_clip(ws: Sequence[LayeredUpdate], k: int):
    """Clip every update to the ``k``-th smallest update norm.

    Returns ``(clipped, rho_clip)`` with ``clipped`` in input order.
    """
    m = len(ws)
    if not 1 <= k <= m:
        raise ValueError(f"k must lie in [1, {m}], got {k}")
    norms = [l2_norm(w) for w in ws]
    rho = sorted(norms)[k - 1]
    return [clip_to(w, rho, n) for w, n in zip(ws, norms)], rho
