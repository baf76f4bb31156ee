"""Layered model updates: flattening, norms, arithmetic and pairwise distances."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


class ShapeMismatchError(ValueError):
    """Two updates do not share layer names and shapes."""


@dataclass(frozen=True)
class LayeredUpdate:
    """Ordered named layers of float64 values.

    Layer order is part of the contract: per-layer transforms (AmGrad) and
    arithmetic both rely on it. Arrays are stored read-only.
    """

    names: tuple[str, ...]
    arrays: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.names) != len(self.arrays):
            raise ValueError("names and arrays differ in length")
        if len(set(self.names)) != len(self.names):
            raise ValueError("duplicate layer names")
        frozen = []
        for name, arr in zip(self.names, self.arrays):
            a = np.array(arr, dtype=np.float64, copy=True)
            if not np.all(np.isfinite(a)):
                raise ValueError(f"layer {name!r} has non-finite values")
            a.setflags(write=False)
            frozen.append(a)
        object.__setattr__(self, "arrays", tuple(frozen))

    @classmethod
    def from_layers(cls, layers: Iterable[tuple[str, np.ndarray]]) -> "LayeredUpdate":
        layers = list(layers)
        return cls(tuple(n for n, _ in layers), tuple(np.asarray(a) for _, a in layers))

    @property
    def shapes(self) -> tuple[tuple[int, ...], ...]:
        return tuple(a.shape for a in self.arrays)

    @property
    def size(self) -> int:
        return int(sum(a.size for a in self.arrays))

    def layers(self):
        return zip(self.names, self.arrays)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.arrays[self.names.index(name)]

    def map(self, fn) -> "LayeredUpdate":
        """Apply ``fn`` to every layer array, keeping names."""
        return LayeredUpdate(self.names, tuple(fn(a) for a in self.arrays))

    def zeros_like(self) -> "LayeredUpdate":
        return self.map(np.zeros_like)

    def check_compatible(self, other: "LayeredUpdate") -> None:
        if self.names != other.names or self.shapes != other.shapes:
            raise ShapeMismatchError(
                f"layer layout mismatch: {list(zip(self.names, self.shapes))} vs "
                f"{list(zip(other.names, other.shapes))}"
            )

    def __add__(self, other: "LayeredUpdate") -> "LayeredUpdate":
        return axpy(1.0, other, self)

    def __sub__(self, other: "LayeredUpdate") -> "LayeredUpdate":
        return axpy(-1.0, other, self)

    def __mul__(self, c: float) -> "LayeredUpdate":
        return self.map(lambda a: a * float(c))

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, LayeredUpdate):
            return NotImplemented
        return (
            self.names == other.names
            and self.shapes == other.shapes
            and all(np.array_equal(a, b) for a, b in zip(self.arrays, other.arrays))
        )

    __hash__ = None


def flatten(u: LayeredUpdate) -> np.ndarray:
    """Concatenate layer values in declared order."""
    if not u.arrays:
        return np.zeros(0, dtype=np.float64)
    return np.concatenate([a.ravel() for a in u.arrays])


def unflatten(vec, like: LayeredUpdate) -> LayeredUpdate:
    """Inverse of :func:`flatten` using the layout of ``like``."""
    vec = np.asarray(vec, dtype=np.float64)
    if vec.shape != (like.size,):
        raise ShapeMismatchError(f"expected {like.size} values, got shape {vec.shape}")
    out, pos = [], 0
    for a in like.arrays:
        out.append(vec[pos:pos + a.size].reshape(a.shape))
        pos += a.size
    return LayeredUpdate(like.names, tuple(out))


def l2_norm(u: LayeredUpdate) -> float:
    return float(np.linalg.norm(flatten(u)))


def axpy(a: float, x: LayeredUpdate, y: LayeredUpdate) -> LayeredUpdate:
    """Return ``a * x + y`` layer by layer."""
    x.check_compatible(y)
    a = float(a)
    return LayeredUpdate(x.names, tuple(a * xa + ya for xa, ya in zip(x.arrays, y.arrays)))


def mean_update(us: Sequence[LayeredUpdate]) -> LayeredUpdate:
    """Unweighted mean, summed in list order."""
    if not us:
        raise ValueError("mean of an empty list")
    acc = [a.copy() for a in us[0].arrays]
    for u in us[1:]:
        us[0].check_compatible(u)
        for i, a in enumerate(u.arrays):
            acc[i] += a
    n = float(len(us))
    return LayeredUpdate(us[0].names, tuple(a / n for a in acc))


def stack(us: Sequence[LayeredUpdate]) -> np.ndarray:
    """Flatten every update into the rows of an ``(m, d)`` matrix."""
    for u in us[1:]:
        us[0].check_compatible(u)
    return np.stack([flatten(u) for u in us]) if us else np.zeros((0, 0))


def pairwise_distances(us: Sequence[LayeredUpdate]) -> np.ndarray:
    """Symmetric ``m x m`` Euclidean distance matrix over flattened updates."""
    if len(us) < 2:
        raise ValueError("pairwise_distances needs at least 2 updates")
    return distance_matrix(stack(us))


def distance_matrix(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    m = x.shape[0]
    d = np.zeros((m, m))
    # Row differences, not the Gram trick: small distances must not cancel.
    for i in range(m):
        d[i, i + 1:] = np.sqrt(np.sum((x[i + 1:] - x[i]) ** 2, axis=1))
    return d + d.T
