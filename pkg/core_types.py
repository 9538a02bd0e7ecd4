#!/usr/bin/env python3
"""
Shared domain types for ordinal preference feedback.
Scales, discrete measures, preference items, seeded randomness and the
error hierarchy used by every other module.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Literal, Optional, Sequence, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)

LEVEL_TOLERANCE = 1e-9
MASS_TOLERANCE = 1e-12
MAX_SEED = 2**64

ORACLE = "oracle"


# ============================================================
# Errors
# ============================================================

class OrdinalFeedbackError(ValueError):
    """Base class for every domain error raised by this project."""


class NonMonotone(OrdinalFeedbackError):
    pass


class OutOfRange(OrdinalFeedbackError):
    pass


class LabelMismatch(OrdinalFeedbackError):
    pass


class IntervalViolation(OrdinalFeedbackError):
    pass


class DegenerateInterval(OrdinalFeedbackError):
    pass


class OracleOutOfScale(OrdinalFeedbackError):
    pass


class BiasedMeasure(OrdinalFeedbackError):
    """Mean of a measure differs from the oracle it should be unbiased for."""


class EmptySample(OrdinalFeedbackError):
    pass


class LabelOutOfRange(OrdinalFeedbackError):
    pass


class NonpositiveBeta(OrdinalFeedbackError):
    pass


class RowNotStochastic(OrdinalFeedbackError):
    pass


class BarycenterViolation(OrdinalFeedbackError):
    pass


class MarginalMismatch(OrdinalFeedbackError):
    pass


class InfeasibleExact(OrdinalFeedbackError):
    pass


class EmptyClass(OrdinalFeedbackError):
    pass


class DimensionMismatch(OrdinalFeedbackError):
    pass


class NonfiniteLoss(OrdinalFeedbackError):
    pass


class MissingOracle(OrdinalFeedbackError):
    pass


class MalformedRecord(OrdinalFeedbackError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class ConfigError(OrdinalFeedbackError):
    def __init__(self, field_name: str, reason: str = "missing or invalid"):
        super().__init__(f"{field_name}: {reason}")
        self.field = field_name


# ============================================================
# Scales and measures
# ============================================================

@dataclass(frozen=True)
class OrdinalScale:
    """
    The feedback set 0 <= z_1 < ... < z_m <= 1 with optional text labels.

    A single-level scale is only used for the degenerate oracle singleton
    (see coupling_he.oracle_coupling).
    """
    levels: Tuple[float, ...]
    labels: Optional[Tuple[str, ...]] = None
    name: str = "custom"

    @property
    def size(self) -> int:
        return len(self.levels)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.levels, dtype=np.float64)

    def index_of(self, value: float) -> int:
        """Index of the level equal to value (within LEVEL_TOLERANCE)."""
        for i, level in enumerate(self.levels):
            if abs(level - value) <= LEVEL_TOLERANCE:
                return i
        raise LabelMismatch(f"{value!r} is not a level of scale {self.name} {self.levels}")

    def contains(self, value: float) -> bool:
        return any(abs(level - value) <= LEVEL_TOLERANCE for level in self.levels)

    def label_for(self, value: float) -> str:
        idx = self.index_of(value)
        return self.labels[idx] if self.labels else f"{self.levels[idx]:g}"


# A feedback system is either a finite ordinal scale or the oracle itself
FeedbackSystem = Union[OrdinalScale, Literal["oracle"]]


def system_name(system: FeedbackSystem) -> str:
    return ORACLE if is_oracle(system) else system.name


def is_oracle(system: FeedbackSystem) -> bool:
    return isinstance(system, str) and system == ORACLE


def validate_scale(levels: Sequence[float],
                   labels: Optional[Sequence[str]] = None,
                   name: str = "custom",
                   allow_singleton: bool = False) -> OrdinalScale:
    """
    Build a validated OrdinalScale

    Args:
        levels: ascending real values in [0, 1]
        labels: optional human-readable label per level
        name: scale name used in reports
        allow_singleton: permit m = 1 (oracle singleton scale)

    Returns:
        OrdinalScale
    """
    values = tuple(float(v) for v in levels)
    minimum = 1 if allow_singleton else 2
    if len(values) < minimum:
        raise OutOfRange(f"a scale needs at least {minimum} levels, got {len(values)}")

    for v in values:
        if not math.isfinite(v) or v < 0.0 or v > 1.0:
            raise OutOfRange(f"level {v!r} outside [0, 1]")

    for lo, hi in zip(values, values[1:]):
        if not lo < hi:
            raise NonMonotone(f"levels must be strictly increasing: {values}")

    label_tuple = None
    if labels is not None:
        label_tuple = tuple(str(label) for label in labels)
        if len(label_tuple) != len(values):
            raise LabelMismatch(
                f"{len(label_tuple)} labels given for {len(values)} levels")

    return OrdinalScale(levels=values, labels=label_tuple, name=name)


class ScalePreset(str, Enum):
    BINARY = "binary"
    THREE_LEVEL = "three_level"
    FIVE_LEVEL = "five_level"


# Endpoint wording is a project choice: z = 1 reads "response 1 better"
_PRESETS = {
    ScalePreset.BINARY: ((0.0, 1.0), ("worse", "better")),
    ScalePreset.THREE_LEVEL: ((0.0, 0.5, 1.0), ("worse", "same-as", "better")),
    ScalePreset.FIVE_LEVEL: (
        (0.0, 0.2, 0.5, 0.8, 1.0),
        ("worse", "slightly-worse", "same", "slightly-better", "better"),
    ),
}


def scale_preset(name: Union[ScalePreset, str]) -> OrdinalScale:
    """Return one of the named preset scales with default text labels."""
    preset = ScalePreset(name)
    levels, labels = _PRESETS[preset]
    return validate_scale(levels, labels, name=preset.value)


def parse_system(spec: Union[str, Sequence[float], OrdinalScale]) -> FeedbackSystem:
    """Turn 'oracle', a preset name, or a list of levels into a feedback system."""
    if isinstance(spec, OrdinalScale):
        return spec
    if isinstance(spec, str):
        if spec == ORACLE:
            return ORACLE
        try:
            return scale_preset(spec)
        except ValueError:
            raise OutOfRange(f"unknown scale {spec!r}") from None
    levels = list(spec)
    return validate_scale(levels, name="custom[" + ",".join(f"{v:g}" for v in levels) + "]")


@dataclass(frozen=True)
class DiscreteMeasure:
    """Probability masses over the levels of an OrdinalScale."""
    scale: OrdinalScale
    mass: Tuple[float, ...]

    def __post_init__(self):
        if len(self.mass) != self.scale.size:
            raise DimensionMismatch(
                f"{len(self.mass)} masses for a scale of {self.scale.size} levels")
        for p in self.mass:
            if not math.isfinite(p) or p < 0.0:
                raise OutOfRange(f"negative or non-finite mass {p!r}")
        total = math.fsum(self.mass)
        if abs(total - 1.0) > MASS_TOLERANCE:
            raise OutOfRange(f"masses sum to {total!r}, expected 1")

    @classmethod
    def from_mapping(cls, scale: OrdinalScale, masses: dict) -> "DiscreteMeasure":
        values = [0.0] * scale.size
        for level, p in masses.items():
            values[scale.index_of(level)] += float(p)
        return cls(scale=scale, mass=tuple(values))

    @classmethod
    def dirac(cls, scale: OrdinalScale, level: float) -> "DiscreteMeasure":
        return cls.from_mapping(scale, {level: 1.0})

    def as_array(self) -> np.ndarray:
        return np.asarray(self.mass, dtype=np.float64)

    def mean(self) -> float:
        return math.fsum(p * z for p, z in zip(self.mass, self.scale.levels))

    def variance(self) -> float:
        mu = self.mean()
        return math.fsum(p * (z - mu) ** 2 for p, z in zip(self.mass, self.scale.levels))

    def support(self) -> List[float]:
        return [z for z, p in zip(self.scale.levels, self.mass) if p > 0.0]

    def to_dict(self) -> dict:
        return {z: p for z, p in zip(self.scale.levels, self.mass) if p > 0.0}


@dataclass(frozen=True)
class PreferenceItem:
    """One (features_1, features_2, oracle, label) record."""
    id: str
    features1: Tuple[float, ...]
    features2: Tuple[float, ...]
    oracle: Optional[float] = None
    label: Optional[float] = None

    def __post_init__(self):
        if len(self.features1) != len(self.features2):
            raise DimensionMismatch(
                f"item {self.id}: features of length {len(self.features1)} "
                f"and {len(self.features2)}")
        for name in ("oracle", "label"):
            value = getattr(self, name)
            if value is not None and not 0.0 <= value <= 1.0:
                raise OutOfRange(f"item {self.id}: {name} {value!r} outside [0, 1]")

    @property
    def dimension(self) -> int:
        return len(self.features1)


@dataclass
class PreferenceBatch:
    """Column view of a list of PreferenceItems, used by the numeric code."""
    features1: np.ndarray
    features2: np.ndarray
    oracles: np.ndarray
    labels: np.ndarray
    ids: List[str] = field(default_factory=list)

    def __len__(self) -> int:
        return self.features1.shape[0]

    @property
    def diff(self) -> np.ndarray:
        return self.features1 - self.features2

    @classmethod
    def from_items(cls, items: Sequence[PreferenceItem]) -> "PreferenceBatch":
        if not items:
            raise EmptySample("no preference items")
        dims = {item.dimension for item in items}
        if len(dims) != 1:
            raise DimensionMismatch(f"mixed feature dimensions {sorted(dims)}")
        nan = float("nan")
        return cls(
            features1=np.array([item.features1 for item in items], dtype=np.float64),
            features2=np.array([item.features2 for item in items], dtype=np.float64),
            oracles=np.array([nan if item.oracle is None else item.oracle for item in items]),
            labels=np.array([nan if item.label is None else item.label for item in items]),
            ids=[item.id for item in items],
        )

    def to_items(self) -> List[PreferenceItem]:
        items = []
        for i in range(len(self)):
            oracle = float(self.oracles[i])
            label = float(self.labels[i])
            items.append(PreferenceItem(
                id=self.ids[i] if self.ids else str(i),
                features1=tuple(float(v) for v in self.features1[i]),
                features2=tuple(float(v) for v in self.features2[i]),
                oracle=None if math.isnan(oracle) else oracle,
                label=None if math.isnan(label) else label,
            ))
        return items


# ============================================================
# Seeded randomness
# ============================================================

RngSeed = int


def check_seed(seed: RngSeed) -> int:
    seed = int(seed)
    if not 0 <= seed < MAX_SEED:
        raise OutOfRange(f"seed {seed} outside [0, 2^64)")
    return seed


def make_rng(seed: RngSeed) -> np.random.Generator:
    """PCG64 generator; identical seeds give identical streams."""
    return np.random.default_rng(check_seed(seed))


def shard_seeds(seed: RngSeed, count: int) -> List[int]:
    """Independent child seeds for parallel shards of one seeded job."""
    children = np.random.SeedSequence(check_seed(seed)).spawn(count)
    return [int(child.generate_state(1, dtype=np.uint64)[0]) for child in children]
