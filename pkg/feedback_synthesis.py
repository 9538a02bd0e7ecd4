#!/usr/bin/env python3
"""
Ordinal feedback synthesis
Builds unbiased label distributions from an oracle preference probability,
samples labels from them, splits arbitrary unbiased measures into two-point
pieces and checks sampled labels for unbiasedness.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from core_types import (
    LEVEL_TOLERANCE,
    BiasedMeasure,
    DegenerateInterval,
    DiscreteMeasure,
    EmptySample,
    FeedbackSystem,
    IntervalViolation,
    OracleOutOfScale,
    OrdinalScale,
    RngSeed,
    is_oracle,
    make_rng,
)

logger = logging.getLogger(__name__)

DECOMPOSITION_TOLERANCE = 1e-9
_NEGLIGIBLE_MASS = 1e-15


@dataclass(frozen=True)
class TwoPointSpec:
    """Index pair (j, k) of a scale whose interval brackets the oracle."""
    j: int
    k: int
    oracle: float


@dataclass(frozen=True)
class Decomposition:
    """Convex combination of two-point measures sharing one oracle."""
    scale: OrdinalScale
    components: Tuple[Tuple[TwoPointSpec, float], ...]

    @property
    def weights(self) -> List[float]:
        return [w for _, w in self.components]

    def remix(self) -> np.ndarray:
        """Mass vector of the weighted mixture of the components."""
        total = np.zeros(self.scale.size)
        for spec, weight in self.components:
            total += weight * two_point_measure(self.scale, spec).as_array()
        return total


@dataclass(frozen=True)
class UnbiasednessReport:
    mean: float
    stderr: float
    oracle: float
    n: int
    passed: bool

    def to_dict(self) -> Dict[str, object]:
        return {
            "mean": self.mean,
            "stderr": self.stderr,
            "oracle": self.oracle,
            "n": self.n,
            "pass": self.passed,
        }


def two_point_measure(scale: OrdinalScale, spec: TwoPointSpec) -> DiscreteMeasure:
    """
    The unique unbiased measure supported on levels j and k

    Args:
        scale: ordinal scale
        spec: bracketing pair and oracle value

    Returns:
        DiscreteMeasure whose mean equals spec.oracle
    """
    m = scale.size
    if not (0 <= spec.j < m and 0 <= spec.k < m and spec.j <= spec.k):
        raise IntervalViolation(f"invalid index pair ({spec.j}, {spec.k}) for {m} levels")

    z_j = scale.levels[spec.j]
    z_k = scale.levels[spec.k]
    oracle = spec.oracle

    if spec.j == spec.k:
        if abs(oracle - z_j) > LEVEL_TOLERANCE:
            raise DegenerateInterval(f"oracle {oracle} differs from the single level {z_j}")
        mass = [0.0] * m
        mass[spec.j] = 1.0
        return DiscreteMeasure(scale, tuple(mass))

    if oracle < z_j - LEVEL_TOLERANCE or oracle > z_k + LEVEL_TOLERANCE:
        raise IntervalViolation(f"oracle {oracle} outside [{z_j}, {z_k}]")

    width = z_k - z_j
    upper = min(max((oracle - z_j) / width, 0.0), 1.0)
    lower = min(max((z_k - oracle) / width, 0.0), 1.0)
    mass = [0.0] * m
    mass[spec.j] = lower
    mass[spec.k] = upper
    return DiscreteMeasure(scale, tuple(mass))


def smallest_interval(scale: OrdinalScale, oracle: float) -> TwoPointSpec:
    """Adjacent pair [z_j, z_j+1] containing the oracle, or (i, i) when it is a level."""
    levels = scale.levels
    if not math.isfinite(oracle) or oracle < levels[0] or oracle > levels[-1]:
        raise OracleOutOfScale(f"oracle {oracle} outside [{levels[0]}, {levels[-1]}]")

    for i, level in enumerate(levels):
        if oracle == level:
            return TwoPointSpec(i, i, oracle)

    j = int(np.searchsorted(scale.as_array(), oracle, side="right")) - 1
    return TwoPointSpec(j, j + 1, oracle)


def smallest_interval_measure(scale: OrdinalScale, oracle: float) -> DiscreteMeasure:
    return two_point_measure(scale, smallest_interval(scale, oracle))


def sample_label(measure: DiscreteMeasure, seed: RngSeed) -> float:
    """
    Draw one level from a measure.

    One uniform u per draw; the label is the highest level whose upper-tail
    mass exceeds u, so a two-point measure returns its upper level iff
    u < mass(upper).
    """
    u = make_rng(seed).random()
    return _label_from_uniform(measure, u)


def _label_from_uniform(measure: DiscreteMeasure, u: float) -> float:
    mass = measure.as_array()
    tail = np.cumsum(mass[::-1])[::-1]
    hits = np.flatnonzero(tail > u)
    if hits.size == 0:
        # u above a total mass rounded below 1
        idx = int(np.flatnonzero(mass > 0.0)[0])
    else:
        idx = int(hits[-1])
    return measure.scale.levels[idx]


def sample_labels(system: FeedbackSystem,
                  oracles: np.ndarray,
                  uniforms: np.ndarray) -> np.ndarray:
    """
    Vectorized smallest-interval labeling

    Args:
        system: an OrdinalScale, or the oracle system (labels = oracles)
        oracles: oracle probabilities, shape (n,)
        uniforms: one uniform draw per oracle, shape (n,)

    Returns:
        labels, shape (n,)
    """
    oracles = np.asarray(oracles, dtype=np.float64)
    if is_oracle(system):
        return oracles.copy()

    uniforms = np.asarray(uniforms, dtype=np.float64)
    if uniforms.shape != oracles.shape:
        raise ValueError(f"uniforms shape {uniforms.shape} != oracles shape {oracles.shape}")

    levels = system.as_array()
    if oracles.size and (np.any(~np.isfinite(oracles))
                         or oracles.min() < levels[0] or oracles.max() > levels[-1]):
        raise OracleOutOfScale(f"oracles outside [{levels[0]}, {levels[-1]}]")

    if levels.size == 1:
        return np.full_like(oracles, levels[0])

    j = np.clip(np.searchsorted(levels, oracles, side="right") - 1, 0, levels.size - 2)
    z_low = levels[j]
    z_up = levels[j + 1]
    p_up = (oracles - z_low) / (z_up - z_low)
    return np.where(uniforms < p_up, z_up, z_low)


def alg1_three_level(oracles: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    """Three-level sampling routine, line by line; y ~ Bernoulli(p) is u < p."""
    labels = np.empty(len(oracles))
    for i, (z_oracle, u) in enumerate(zip(oracles, uniforms)):
        if z_oracle < 0.5:
            y = 1.0 if u < z_oracle / 0.5 else 0.0
            labels[i] = 0.5 * y
        elif z_oracle > 0.5:
            y = 1.0 if u < (z_oracle - 0.5) / 0.5 else 0.0
            labels[i] = 0.5 * y + 0.5
        else:
            labels[i] = 0.5
    return labels


def decompose_unbiased(measure: DiscreteMeasure,
                       oracle: float,
                       tolerance: float = DECOMPOSITION_TOLERANCE) -> Decomposition:
    """
    Split an unbiased measure into a convex combination of two-point measures

    Repeatedly takes the support point with the smallest
    |z_i - oracle| * mass(z_i) (lowest index on ties), pairs it with the
    nearest supported level on the other side of the oracle, and removes
    the largest multiple of their two-point measure that keeps masses
    nonnegative. Every step empties at least one level.
    """
    mean = measure.mean()
    if abs(mean - oracle) > tolerance:
        raise BiasedMeasure(f"measure mean {mean!r} differs from oracle {oracle!r}")

    scale = measure.scale
    levels = scale.levels
    remaining = list(measure.mass)
    components: List[Tuple[TwoPointSpec, float]] = []

    for i, level in enumerate(levels):
        if abs(level - oracle) <= LEVEL_TOLERANCE and remaining[i] > 0.0:
            components.append((TwoPointSpec(i, i, level), remaining[i]))
            remaining[i] = 0.0

    while True:
        below = [i for i, z in enumerate(levels)
                 if z < oracle - LEVEL_TOLERANCE and remaining[i] > _NEGLIGIBLE_MASS]
        above = [i for i, z in enumerate(levels)
                 if z > oracle + LEVEL_TOLERANCE and remaining[i] > _NEGLIGIBLE_MASS]
        if not below or not above:
            break

        pivot = None
        best = math.inf
        for i in sorted(below + above):
            moment = abs(levels[i] - oracle) * remaining[i]
            if moment < best:
                best = moment
                pivot = i

        partner = min(above) if pivot in below else max(below)
        j, k = min(pivot, partner), max(pivot, partner)
        spec = TwoPointSpec(j, k, oracle)
        piece = two_point_measure(scale, spec).mass

        weight = remaining[pivot] / piece[pivot]
        remaining[partner] = max(remaining[partner] - weight * piece[partner], 0.0)
        remaining[pivot] = 0.0
        components.append((spec, weight))

    leftover = math.fsum(remaining)
    if leftover > tolerance:
        raise BiasedMeasure(f"mass {leftover!r} left after decomposition; measure is biased")

    logger.debug("Decomposed measure into %d components", len(components))
    return Decomposition(scale=scale, components=tuple(components))


def check_unbiasedness(samples: Sequence[float],
                       oracle: float,
                       confidence_z: float = 3.0) -> UnbiasednessReport:
    """Pass iff |mean - oracle| <= confidence_z * stderr."""
    values = np.asarray(samples, dtype=np.float64)
    n = values.size
    if n == 0:
        raise EmptySample("no samples to check")

    mean = float(np.mean(values))
    stderr = float(np.std(values, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    passed = abs(mean - oracle) <= confidence_z * stderr
    return UnbiasednessReport(mean=mean, stderr=stderr, oracle=oracle, n=n, passed=passed)


def label_histogram(labels: Sequence[float], scale: OrdinalScale) -> Dict[float, float]:
    """Fraction of labels at each scale level, in level order."""
    values = np.asarray(labels, dtype=np.float64)
    if values.size == 0:
        return {level: 0.0 for level in scale.levels}
    counts = {level: 0 for level in scale.levels}
    for value in values:
        counts[scale.levels[scale.index_of(float(value))]] += 1
    return {level: count / values.size for level, count in counts.items()}


def random_unbiased_measure(scale: OrdinalScale, rng: np.random.Generator,
                            max_pieces: int = 3) -> Tuple[DiscreteMeasure, float]:
    """
    A random unbiased measure and its oracle

    The oracle is uniform on [z_1, z_m]; the measure mixes up to
    max_pieces two-point measures on random bracketing pairs with
    Dirichlet weights.
    """
    levels = scale.as_array()
    oracle = float(rng.uniform(levels[0], levels[-1]))
    below = np.flatnonzero(levels <= oracle)
    above = np.flatnonzero(levels >= oracle)
    pieces = int(rng.integers(1, max_pieces + 1))
    weights = rng.dirichlet(np.ones(pieces))

    mass = np.zeros(scale.size)
    for weight in weights:
        j = int(rng.choice(below))
        k = int(rng.choice(above))
        mass += weight * two_point_measure(scale, TwoPointSpec(j, k, oracle)).as_array()
    mass /= mass.sum()
    return DiscreteMeasure(scale, tuple(float(p) for p in mass)), oracle
