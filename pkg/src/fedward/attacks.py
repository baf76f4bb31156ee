"""Model-poisoning transforms: scaling (MLA), training boosts (ALA) and a
forger that emits updates at a chosen angle and magnitude from a reference."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .trainer import TrainConfig
from .updates import LayeredUpdate, flatten, unflatten

ATTACK_KINDS = ("none", "data_poison", "scale", "data_poison_scale", "forged")

# taxonomy thresholds used by classify()
MLA_MIN_SCALE = 10.0
ALA_MIN_PDR = 0.25
AMSA_MAX_ANGLE = 10.0
AMSA_MAX_RATIO_DEV = 0.1


@dataclass(frozen=True)
class AttackSpec:
    kind: str = "none"
    scale_factor: float = 1.0
    pdr: float = 0.0
    boost_epochs: int = 0
    angle_deg: float = 0.0
    magnitude_ratio: float = 1.0

    def __post_init__(self):
        if self.kind not in ATTACK_KINDS:
            raise ValueError(f"unknown attack kind {self.kind!r}")
        if not self.scale_factor > 0:
            raise ValueError("scale_factor must be positive")
        if not 0.0 <= self.pdr <= 1.0:
            raise ValueError("pdr must lie in [0, 1]")
        if self.boost_epochs < 0:
            raise ValueError("boost_epochs must be >= 0")
        if not 0.0 <= self.angle_deg <= 180.0:
            raise ValueError("angle_deg must lie in [0, 180]")
        if not self.magnitude_ratio > 0:
            raise ValueError("magnitude_ratio must be positive")

    @classmethod
    def replacement(cls, m: int, pdr: float) -> "AttackSpec":
        """Model replacement: poisoned training scaled by the aggregation size."""
        return cls(kind="data_poison_scale", scale_factor=float(m), pdr=pdr)

    @property
    def poisons_data(self) -> bool:
        return self.kind in ("data_poison", "data_poison_scale")

    @property
    def scales(self) -> bool:
        return self.kind in ("scale", "data_poison_scale")


def apply_model_poison(w: LayeredUpdate, spec: AttackSpec) -> LayeredUpdate:
    """Multiply every value of ``w`` by ``spec.scale_factor``."""
    if not spec.scales:
        raise ValueError(f"attack kind {spec.kind!r} does not scale updates")
    if not spec.scale_factor > 0:
        raise ValueError("scale_factor must be positive")
    return w * spec.scale_factor


def boost_training(cfg: TrainConfig, spec: AttackSpec) -> TrainConfig:
    return replace(cfg, local_epochs=cfg.local_epochs + spec.boost_epochs)


def forge_update(reference: LayeredUpdate, angle_deg: float, magnitude_ratio: float,
                 seed=0) -> LayeredUpdate:
    """Rotate ``reference`` by ``angle_deg`` towards a seeded orthogonal direction
    and rescale it to ``magnitude_ratio`` times its norm."""
    if not 0.0 <= angle_deg <= 180.0:
        raise ValueError("angle_deg must lie in [0, 180]")
    if not magnitude_ratio > 0:
        raise ValueError("magnitude_ratio must be positive")
    r = flatten(reference)
    norm = np.linalg.norm(r)
    if norm == 0.0:
        raise ValueError("cannot forge from a zero reference")
    e1 = r / norm
    if r.size == 1:
        if angle_deg not in (0.0, 180.0):
            raise ValueError("a 1-dimensional reference only admits 0 or 180 degrees")
        e2 = np.zeros(1)
    else:
        rng = np.random.default_rng(seed)
        while True:
            v = rng.standard_normal(r.size)
            v -= (v @ e1) * e1
            v -= (v @ e1) * e1
            vn = np.linalg.norm(v)
            if vn > 1e-8:
                break
        e2 = v / vn
    theta = math.radians(angle_deg)
    out = (math.cos(theta) * e1 + math.sin(theta) * e2) * (magnitude_ratio * norm)
    return unflatten(out, reference)


def cosine(a, b) -> float:
    a = flatten(a) if isinstance(a, LayeredUpdate) else np.asarray(a, dtype=np.float64)
    b = flatten(b) if isinstance(b, LayeredUpdate) else np.asarray(b, dtype=np.float64)
    return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))


def classify(spec: AttackSpec) -> str:
    """Map an attack onto the deviation taxonomy: none, MLA, ALA or AMSA."""
    if spec.kind == "none":
        return "none"
    if spec.kind == "forged":
        if spec.magnitude_ratio >= MLA_MIN_SCALE:
            return "MLA"
        if spec.angle_deg <= AMSA_MAX_ANGLE and abs(spec.magnitude_ratio - 1.0) <= AMSA_MAX_RATIO_DEV:
            return "AMSA"
        return "ALA"
    if spec.scales and spec.scale_factor >= MLA_MIN_SCALE:
        return "MLA"
    if spec.boost_epochs > 0 or (spec.poisons_data and spec.pdr >= ALA_MIN_PDR):
        return "ALA"
    return "AMSA"
