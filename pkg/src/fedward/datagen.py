"""Datasets for desk-scale runs: synthetic blobs, MNIST IDX files, Non-IID
partitions and DBA-style regional trigger poisoning."""
from __future__ import annotations

import logging
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


class IdxFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    """Flattened images ``x`` of shape ``(n, H*W)`` in [0, 1] and labels ``y``."""

    x: np.ndarray
    y: np.ndarray
    dims: tuple[int, int]
    classes: int

    def __post_init__(self):
        if self.x.ndim != 2 or self.x.shape[1] != self.dims[0] * self.dims[1]:
            raise ValueError(f"features must be (n, {self.dims[0] * self.dims[1]})")
        if self.x.shape[0] != self.y.shape[0]:
            raise ValueError("feature/label count mismatch")
        if self.y.size and (self.y.min() < 0 or self.y.max() >= self.classes):
            raise ValueError("label out of range")

    def __len__(self):
        return int(self.y.shape[0])

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.x[idx], self.y[idx], self.dims, self.classes)

    def label_counts(self) -> np.ndarray:
        return np.bincount(self.y, minlength=self.classes)


@dataclass(frozen=True)
class PartitionSpec:
    n_clients: int
    nir: float
    classes: int
    seed: int = 0

    def __post_init__(self):
        if self.n_clients < 2:
            raise ValueError("n_clients must be >= 2")
        if not 0.0 <= self.nir <= 1.0:
            raise ValueError("nir must lie in [0, 1]")
        if self.classes < 1:
            raise ValueError("classes must be positive")


@dataclass(frozen=True)
class TriggerSpec:
    """Global trigger made of one rectangular patch per anchor point."""

    patch_size: tuple[int, int] = (2, 2)
    patch_value: float = 1.0
    anchor_points: tuple[tuple[int, int], ...] = field(default=())
    target_label: int = 0

    def __post_init__(self):
        h, w = self.patch_size
        if h < 1 or w < 1:
            raise ValueError("patch_size must be positive")
        if not 0.0 <= self.patch_value <= 1.0:
            raise ValueError("patch_value must lie in [0, 1]")
        if len(self.anchor_points) == 0:
            raise ValueError("trigger needs at least one anchor point")
        object.__setattr__(self, "anchor_points", tuple(tuple(int(v) for v in p) for p in self.anchor_points))
        object.__setattr__(self, "patch_size", (int(h), int(w)))

    @classmethod
    def corners(cls, dims: tuple[int, int], patch: int = 2, value: float = 1.0, target: int = 0):
        """Default trigger: one ``patch x patch`` square at each image corner."""
        H, W = dims
        anchors = ((0, 0), (0, W - patch), (H - patch, 0), (H - patch, W - patch))
        return cls((patch, patch), value, anchors, target)

    def check_fits(self, dims: tuple[int, int]) -> None:
        H, W = dims
        h, w = self.patch_size
        for r, c in self.anchor_points:
            if r < 0 or c < 0 or r + h > H or c + w > W:
                raise ValueError(f"patch at {(r, c)} of size {(h, w)} exceeds image {dims}")

    def pixel_index(self, dims: tuple[int, int], region: int | None = None) -> np.ndarray:
        """Flat pixel indices covered by one region, or by all of them."""
        self.check_fits(dims)
        h, w = self.patch_size
        anchors = self.anchor_points if region is None else (self.anchor_points[region],)
        idx = [
            (r + i) * dims[1] + (c + j)
            for r, c in anchors for i in range(h) for j in range(w)
        ]
        return np.unique(np.asarray(idx, dtype=np.int64))


def gen_synthetic(classes: int, per_class: int, dims=(16, 16), seed: int = 0,
                  noise: float = 0.3, pattern_seed: int | None = None) -> Dataset:
    """Gaussian blobs around a random mean image per class, clipped to [0, 1].

    ``pattern_seed`` fixes the class means separately from the sample noise so
    that a train and a test split can share the same classes.
    """
    if classes < 2 or per_class < 1:
        raise ValueError("need classes >= 2 and per_class >= 1")
    H, W = dims
    if H < 1 or W < 1:
        raise ValueError(f"invalid dims {dims}")
    prng = np.random.default_rng(seed if pattern_seed is None else pattern_seed)
    means = prng.uniform(0.1, 0.7, size=(classes, H * W))
    rng = np.random.default_rng([seed, 1])
    y = np.repeat(np.arange(classes, dtype=np.int64), per_class)
    x = means[y] + noise * rng.standard_normal((y.size, H * W))
    return Dataset(np.clip(x, 0.0, 1.0), y, (H, W), classes)


def load_idx(images_path, labels_path) -> Dataset:
    """Read an IDX image/label file pair (big-endian, optionally gzipped)."""
    img = _read_bytes(images_path)
    lab = _read_bytes(labels_path)
    if len(img) < 16:
        raise IdxFormatError("truncated image header")
    magic, n, rows, cols = struct.unpack(">IIII", img[:16])
    if magic != IDX_IMAGES_MAGIC:
        raise IdxFormatError(f"bad magic in images file: {magic:#010x}")
    if len(lab) < 8:
        raise IdxFormatError("truncated label header")
    lmagic, ln = struct.unpack(">II", lab[:8])
    if lmagic != IDX_LABELS_MAGIC:
        raise IdxFormatError(f"bad magic in labels file: {lmagic:#010x}")
    if n != ln:
        raise IdxFormatError(f"count mismatch: {n} images vs {ln} labels")
    if len(img) < 16 + n * rows * cols:
        raise IdxFormatError("truncated image data")
    if len(lab) < 8 + n:
        raise IdxFormatError("truncated label data")
    pixels = np.frombuffer(img, dtype=np.uint8, count=n * rows * cols, offset=16)
    labels = np.frombuffer(lab, dtype=np.uint8, count=n, offset=8).astype(np.int64)
    classes = max(10, int(labels.max()) + 1) if n else 10
    return Dataset(pixels.reshape(n, rows * cols) / 255.0, labels, (rows, cols), classes)


def _read_bytes(path) -> bytes:
    path = Path(path)
    if path.suffix == ".gz":
        import gzip
        with gzip.open(path, "rb") as f:
            return f.read()
    return path.read_bytes()


def write_idx(images: np.ndarray, labels: np.ndarray, images_path, labels_path) -> None:
    """Write uint8 images ``(n, rows, cols)`` and labels as an IDX pair."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    n, rows, cols = images.shape
    Path(images_path).write_bytes(struct.pack(">IIII", IDX_IMAGES_MAGIC, n, rows, cols) + images.tobytes())
    Path(labels_path).write_bytes(struct.pack(">II", IDX_LABELS_MAGIC, labels.size) + labels.tobytes())


def partition_noniid(data: Dataset, spec: PartitionSpec) -> list[Dataset]:
    """Split ``data`` into disjoint client datasets with a preferred-class skew.

    Client ``i`` prefers class ``i mod C``. A fraction ``nir`` of its slots is
    drawn from that class and the rest is spread evenly over all classes.
    Shortfalls are filled from whatever is left, so the union is always the
    whole dataset.
    """
    if len(data) == 0:
        raise ValueError("cannot partition an empty dataset")
    n, C = spec.n_clients, max(spec.classes, data.classes)
    rng = np.random.default_rng(spec.seed)
    order = rng.permutation(len(data))
    pools = [list(order[data.y[order] == c]) for c in range(C)]
    base, extra = divmod(len(data), n)
    slots = [base + (1 if i < extra else 0) for i in range(n)]
    assigned: list[list[int]] = [[] for _ in range(n)]
    shortfall = 0

    for i in range(n):
        want = int(round(spec.nir * slots[i]))
        pool = pools[i % spec.classes]
        take = min(want, len(pool))
        assigned[i].extend(pool[:take])
        del pool[:take]
        shortfall += want - take

    # leftover slots cycle through classes so total demand stays balanced
    offset = int(rng.integers(C))
    for i in range(n):
        rest = slots[i] - len(assigned[i])
        per, rem = divmod(rest, C)
        quota = np.full(C, per)
        quota[(offset + np.arange(rem)) % C] += 1
        offset = (offset + rem) % C
        for c in range(C):
            take = min(int(quota[c]), len(pools[c]))
            assigned[i].extend(pools[c][:take])
            del pools[c][:take]
            shortfall += int(quota[c]) - take

    left = [j for c in range(C) for j in pools[c]]
    left = list(np.asarray(left, dtype=np.int64)[rng.permutation(len(left))]) if left else []
    for i in range(n):
        need = slots[i] - len(assigned[i])
        assigned[i].extend(left[:need])
        del left[:need]
    if shortfall:
        log.warning("partition_noniid: %d slots filled from other classes (class shortfall)", shortfall)
    return [data.subset(sorted(a)) for a in assigned]


def poison_client(data: Dataset, trigger: TriggerSpec, region_index: int, pdr: float,
                  seed: int = 0) -> Dataset:
    """Stamp one regional patch on ``ceil(pdr * n)`` examples and relabel them.

    Returns a new dataset; the poisoned rows are the first ``ceil(pdr * n)``
    positions of a seeded permutation.
    """
    if not 0.0 <= pdr <= 1.0:
        raise ValueError("pdr must lie in [0, 1]")
    if not 0 <= region_index < len(trigger.anchor_points):
        raise ValueError("region_index out of range")
    pix = trigger.pixel_index(data.dims, region_index)
    k = n_poisoned(len(data), pdr)
    chosen = np.random.default_rng(seed).permutation(len(data))[:k]
    x, y = data.x.copy(), data.y.copy()
    x[np.ix_(chosen, pix)] = trigger.patch_value
    y[chosen] = trigger.target_label
    return Dataset(x, y, data.dims, data.classes)


def poisoned_indices(n: int, pdr: float, seed: int = 0) -> np.ndarray:
    """Rows that :func:`poison_client` would modify for the same inputs."""
    return np.random.default_rng(seed).permutation(n)[:n_poisoned(n, pdr)]


def n_poisoned(n: int, pdr: float) -> int:
    # round first so that e.g. 0.1 * 30 does not ceil to 4
    return min(n, math.ceil(round(pdr * n, 9)))


def apply_global_trigger(x: np.ndarray, trigger: TriggerSpec, dims: tuple[int, int]) -> np.ndarray:
    """Stamp every regional patch onto one flattened image or a batch of them."""
    pix = trigger.pixel_index(dims)
    out = np.array(x, dtype=np.float64, copy=True)
    out[..., pix] = trigger.patch_value
    return out
