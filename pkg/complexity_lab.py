#!/usr/bin/env python3
"""
Rademacher complexity of loss classes under different feedback systems
Exact sign enumeration and Monte Carlo estimates for finite and
norm-bounded linear hypothesis classes, expectations over resampled
datasets with common random numbers, and ordering reports.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from tqdm import tqdm

from core_types import (
    DimensionMismatch,
    EmptyClass,
    EmptySample,
    FeedbackSystem,
    InfeasibleExact,
    LabelOutOfRange,
    OrdinalFeedbackError,
    PreferenceBatch,
    PreferenceItem,
    RngSeed,
    make_rng,
    shard_seeds,
    system_name,
)
from feedback_synthesis import sample_labels
from losses import HingeConfig, LossKind, ce_margin_grad, loss_from_margin, sigmoid

logger = logging.getLogger(__name__)

MAX_EXACT_ITEMS = 20
MAX_GRID_POINTS = 200_000
REFINE_STARTS = 4
REFINE_STEPS = 50
COMPARISON_Z = 3.0


class HypothesisKind(str, Enum):
    FINITE_SET = "finite_set"
    LINEAR_BALL = "linear_ball"


class EstimateMethod(str, Enum):
    EXACT_ENUMERATION = "exact_enumeration"
    MONTE_CARLO = "monte_carlo"


@dataclass(frozen=True, eq=False)
class HypothesisClass:
    """Linear reward-difference predictors h(x1, x2) = <w, x1 - x2>."""
    kind: HypothesisKind
    weights: Optional[np.ndarray] = None
    dimension: int = 0
    norm_bound: float = 0.0
    grid_resolution: float = 0.0

    @classmethod
    def finite(cls, weights: Sequence[Sequence[float]]) -> "HypothesisClass":
        array = np.atleast_2d(np.asarray(weights, dtype=np.float64))
        if array.size == 0:
            raise EmptyClass("finite hypothesis class needs at least one weight vector")
        return cls(kind=HypothesisKind.FINITE_SET, weights=array, dimension=array.shape[1])

    @classmethod
    def linear_ball(cls, dimension: int, norm_bound: float,
                    grid_resolution: float) -> "HypothesisClass":
        if dimension < 1 or norm_bound <= 0.0 or grid_resolution <= 0.0:
            raise OrdinalFeedbackError(
                "linear ball needs dimension >= 1, norm_bound > 0, grid_resolution > 0")
        return cls(kind=HypothesisKind.LINEAR_BALL, dimension=dimension,
                   norm_bound=float(norm_bound), grid_resolution=float(grid_resolution))

    @property
    def is_finite(self) -> bool:
        return self.kind is HypothesisKind.FINITE_SET

    def candidates(self) -> np.ndarray:
        """The finite set itself, or the grid points inside the ball."""
        if self.is_finite:
            return self.weights
        axis = np.arange(-self.norm_bound, self.norm_bound + self.grid_resolution / 2,
                         self.grid_resolution)
        if axis.size ** self.dimension > MAX_GRID_POINTS:
            raise OrdinalFeedbackError(
                f"grid of {axis.size}^{self.dimension} points is too large; "
                f"raise grid_resolution")
        mesh = np.stack(np.meshgrid(*([axis] * self.dimension), indexing="ij"), axis=-1)
        points = mesh.reshape(-1, self.dimension)
        return points[np.linalg.norm(points, axis=1) <= self.norm_bound + 1e-12]


@dataclass(frozen=True)
class RademacherMode:
    exact: bool = True
    n_eps: int = 0

    @classmethod
    def parse(cls, text: str) -> "RademacherMode":
        """'exact' or 'mc:<n_eps>'"""
        if text == "exact":
            return cls(exact=True)
        if text.startswith("mc:"):
            return cls(exact=False, n_eps=int(text[3:]))
        raise OrdinalFeedbackError(f"unknown Rademacher mode {text!r}")

    def __str__(self) -> str:
        return "exact" if self.exact else f"mc:{self.n_eps}"


@dataclass(frozen=True)
class RadEstimate:
    value: float
    stderr: float
    method: EstimateMethod

    def to_dict(self) -> dict:
        return {"value": self.value, "stderr": self.stderr, "method": self.method.value}


def _as_batch(data: Union[PreferenceBatch, Sequence[PreferenceItem]]) -> PreferenceBatch:
    batch = data if isinstance(data, PreferenceBatch) else PreferenceBatch.from_items(list(data))
    if len(batch) == 0:
        raise EmptySample("empty dataset")
    if np.any(np.isnan(batch.labels)):
        raise LabelOutOfRange("every item needs a label for Rademacher estimation")
    return batch


def loss_matrix(batch: PreferenceBatch, weights: np.ndarray,
                loss: Union[LossKind, str], hinge: HingeConfig = HingeConfig()) -> np.ndarray:
    """loss[h, i] of hypothesis h on item i."""
    if weights.shape[1] != batch.features1.shape[1]:
        raise DimensionMismatch(
            f"hypotheses of dimension {weights.shape[1]} on features of "
            f"dimension {batch.features1.shape[1]}")
    margins = weights @ batch.diff.T
    labels = np.broadcast_to(batch.labels, margins.shape)
    return np.asarray(loss_from_margin(loss, labels, margins, hinge))


def all_sign_vectors(n: int) -> np.ndarray:
    codes = np.arange(2 ** n)[:, None]
    return ((codes >> np.arange(n)) & 1).astype(np.float64) * 2.0 - 1.0


def _refine_sup(batch: PreferenceBatch, signs: np.ndarray, starts: np.ndarray,
                norm_bound: float) -> float:
    """Projected gradient ascent of sum_i eps_i ce_i(w) from several starts."""
    x = batch.diff
    z = batch.labels
    curvature = 0.25 * float(np.sum(x * x)) + 1e-12
    step = 1.0 / curvature
    best = -math.inf
    for w in starts:
        w = w.copy()
        for _ in range(REFINE_STEPS):
            grad = x.T @ (signs * np.asarray(ce_margin_grad(z, x @ w)))
            w = w + step * grad
            norm = np.linalg.norm(w)
            if norm > norm_bound:
                w *= norm_bound / norm
            value = float(signs @ np.asarray(loss_from_margin(LossKind.CE, z, x @ w)))
            best = max(best, value)
    return best


def _sups(batch: PreferenceBatch, hclass: HypothesisClass, loss: LossKind,
          signs: np.ndarray, hinge: HingeConfig) -> np.ndarray:
    """sup_h sum_i eps_i loss_i(h) for every sign vector (rows of signs)."""
    candidates = hclass.candidates()
    losses = loss_matrix(batch, candidates, loss, hinge)
    scores = signs @ losses.T
    sups = scores.max(axis=1)
    if hclass.is_finite or loss not in (LossKind.CE, LossKind.DPO):
        return sups

    top = np.argsort(-scores, axis=1, kind="stable")[:, :REFINE_STARTS]
    refined = np.array([
        _refine_sup(batch, signs[r], candidates[top[r]], hclass.norm_bound)
        for r in range(signs.shape[0])
    ])
    return np.maximum(sups, refined)


def sign_vectors(n: int, mode: RademacherMode, seed: RngSeed) -> np.ndarray:
    """All 2^n sign vectors in exact mode, else mode.n_eps random ones."""
    if mode.exact:
        if n > MAX_EXACT_ITEMS:
            raise InfeasibleExact(f"exact enumeration over 2^{n} sign vectors is infeasible")
        return all_sign_vectors(n)
    if mode.n_eps < 2:
        raise OrdinalFeedbackError("Monte Carlo mode needs at least 2 sign vectors")
    rng = make_rng(seed)
    return rng.integers(0, 2, (mode.n_eps, n)).astype(np.float64) * 2.0 - 1.0


def _estimate_from_sups(sups: np.ndarray, n: int, mode: RademacherMode) -> RadEstimate:
    if mode.exact:
        return RadEstimate(float(np.mean(sups)) / n, 0.0, EstimateMethod.EXACT_ENUMERATION)
    scaled = sups / n
    stderr = float(np.std(scaled, ddof=1) / math.sqrt(scaled.size))
    return RadEstimate(float(np.mean(scaled)), stderr, EstimateMethod.MONTE_CARLO)


def rademacher_from_loss_matrix(losses: np.ndarray, mode: RademacherMode = RademacherMode(),
                                seed: RngSeed = 0) -> RadEstimate:
    """Rademacher complexity of a finite loss class given as losses[h, i]."""
    losses = np.asarray(losses, dtype=np.float64)
    if losses.ndim != 2 or losses.shape[0] == 0:
        raise EmptyClass("loss matrix needs at least one hypothesis")
    n = losses.shape[1]
    if n == 0:
        raise EmptySample("empty dataset")
    signs = sign_vectors(n, mode, seed)
    return _estimate_from_sups((signs @ losses.T).max(axis=1), n, mode)


def empirical_rademacher(data: Union[PreferenceBatch, Sequence[PreferenceItem]],
                         hclass: HypothesisClass,
                         loss: Union[LossKind, str] = LossKind.CE,
                         mode: RademacherMode = RademacherMode(),
                         seed: RngSeed = 0,
                         hinge: HingeConfig = HingeConfig()) -> RadEstimate:
    """
    (1/n) E_eps[ sup_h sum_i eps_i loss(Z_i, h(x_i)) ] on one labeled dataset

    Exact mode enumerates all 2^n sign vectors (finite classes, n <= 20).
    Monte Carlo mode averages mode.n_eps random sign vectors. On a linear
    ball the sup is taken over the grid, refined by projected gradient
    ascent for the cross-entropy loss; that sup is a lower bound.
    """
    loss = LossKind(loss)
    batch = _as_batch(data)
    n = len(batch)
    if mode.exact and not hclass.is_finite:
        raise InfeasibleExact("exact enumeration needs a finite hypothesis class")
    signs = sign_vectors(n, mode, seed)
    return _estimate_from_sups(_sups(batch, hclass, loss, signs, hinge), n, mode)


# ============================================================
# Expectations over datasets
# ============================================================

FeatureSampler = Callable[[np.random.Generator, int], Tuple[np.ndarray, np.ndarray]]
OracleFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class DatasetDistribution:
    """How to draw one labeled dataset of size n."""
    feature_sampler: FeatureSampler
    oracle_fn: OracleFn
    system: FeedbackSystem
    n: int

    def with_system(self, system: FeedbackSystem) -> "DatasetDistribution":
        return replace(self, system=system)


def draw_dataset(distribution: DatasetDistribution, seed: RngSeed) -> Tuple[PreferenceBatch, int]:
    """
    One dataset and the seed for its sign vectors.

    Draw order is fixed (features, uniforms, sign seed) and independent
    of the feedback system, so equal seeds give common random numbers
    across systems.
    """
    if distribution.n < 1:
        raise EmptySample("dataset size must be at least 1")
    rng = make_rng(seed)
    features1, features2 = distribution.feature_sampler(rng, distribution.n)
    uniforms = rng.random(distribution.n)
    sign_seed = int(rng.integers(0, 2**63))
    oracles = np.asarray(distribution.oracle_fn(features1, features2), dtype=np.float64)
    labels = sample_labels(distribution.system, oracles, uniforms)
    batch = PreferenceBatch(features1=features1, features2=features2,
                            oracles=oracles, labels=labels)
    return batch, sign_seed


def replica_values(distribution: DatasetDistribution,
                   systems: Sequence[FeedbackSystem],
                   hclass: HypothesisClass,
                   loss: Union[LossKind, str],
                   n_datasets: int,
                   mode: RademacherMode,
                   seed: RngSeed,
                   hinge: HingeConfig = HingeConfig(),
                   workers: int = 1,
                   progress: bool = False) -> np.ndarray:
    """Empirical Rademacher values, shape (n_datasets, len(systems)), with CRN."""
    if n_datasets < 1:
        raise EmptySample("n_datasets must be at least 1")
    seeds = shard_seeds(seed, n_datasets)

    def one_replica(replica_seed: int) -> List[float]:
        values = []
        for system in systems:
            batch, sign_seed = draw_dataset(distribution.with_system(system), replica_seed)
            values.append(empirical_rademacher(batch, hclass, loss, mode, sign_seed, hinge).value)
        return values

    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        rows = list(tqdm(executor.map(one_replica, seeds), total=n_datasets,
                         desc="replicas", disable=not progress))
    return np.asarray(rows, dtype=np.float64)


def _summarize(values: np.ndarray, mode: RademacherMode) -> RadEstimate:
    method = EstimateMethod.EXACT_ENUMERATION if mode.exact else EstimateMethod.MONTE_CARLO
    if values.size == 1:
        return RadEstimate(float(values[0]), 0.0, method)
    return RadEstimate(float(np.mean(values)),
                       float(np.std(values, ddof=1) / math.sqrt(values.size)), method)


def expected_rademacher(distribution: DatasetDistribution,
                        hclass: HypothesisClass,
                        loss: Union[LossKind, str] = LossKind.CE,
                        n_datasets: int = 100,
                        mode: RademacherMode = RademacherMode(),
                        seed: RngSeed = 0,
                        hinge: HingeConfig = HingeConfig(),
                        workers: int = 1) -> RadEstimate:
    """
    Average empirical Rademacher complexity over resampled labeled datasets.

    stderr is the dataset-resampling standard error (0 for a single
    dataset in exact mode).
    """
    if n_datasets == 1 and not mode.exact:
        batch, sign_seed = draw_dataset(distribution, shard_seeds(seed, 1)[0])
        return empirical_rademacher(batch, hclass, loss, mode, sign_seed, hinge)
    values = replica_values(distribution, [distribution.system], hclass, loss,
                            n_datasets, mode, seed, hinge, workers)[:, 0]
    return _summarize(values, mode)


@dataclass(frozen=True)
class PairComparison:
    """second - first, which should be >= 0 when first is finer."""
    first: str
    second: str
    gap: float
    stderr: float
    holds: bool
    strict: bool

    def to_dict(self) -> dict:
        return {
            "first": self.first,
            "second": self.second,
            "gap": self.gap,
            "stderr": self.stderr,
            "holds": self.holds,
            "strict": self.strict,
        }


@dataclass(frozen=True)
class OrderingReport:
    rows: Tuple[Tuple[str, RadEstimate], ...]
    comparisons: Tuple[PairComparison, ...] = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {
            "rows": [{"system": name, **estimate.to_dict()} for name, estimate in self.rows],
            "comparisons": [c.to_dict() for c in self.comparisons],
        }

    def comparison(self, first: str, second: str) -> PairComparison:
        for c in self.comparisons:
            if c.first == first and c.second == second:
                return c
        raise KeyError((first, second))


def compare_pair(first_values: np.ndarray, second_values: np.ndarray,
                 first: str, second: str, z: float = COMPARISON_Z) -> PairComparison:
    """second - first over paired replicas."""
    diff = np.asarray(second_values, dtype=np.float64) - np.asarray(first_values, dtype=np.float64)
    gap = float(np.mean(diff))
    stderr = float(np.std(diff, ddof=1) / math.sqrt(diff.size)) if diff.size > 1 else 0.0
    return PairComparison(first=first, second=second, gap=gap, stderr=stderr,
                          holds=gap >= -z * stderr, strict=gap > z * stderr)


def compare_columns(values: np.ndarray, names: Sequence[str],
                    z: float = COMPARISON_Z) -> Tuple[PairComparison, ...]:
    """Paired comparisons for every (i, j), i < j, using per-replica differences."""
    return tuple(
        compare_pair(values[:, i], values[:, j], names[i], names[j], z)
        for i in range(len(names))
        for j in range(i + 1, len(names))
    )


def ordering_report(systems: Sequence[FeedbackSystem],
                    distribution: DatasetDistribution,
                    hclass: HypothesisClass,
                    loss: Union[LossKind, str] = LossKind.CE,
                    mode: RademacherMode = RademacherMode(),
                    seed: RngSeed = 0,
                    n_datasets: int = 100,
                    hinge: HingeConfig = HingeConfig(),
                    workers: int = 1,
                    progress: bool = False) -> OrderingReport:
    """
    Expected Rademacher complexity per feedback system, in the given order,
    with pairwise flags at 3 standard errors of the paired difference.
    """
    if not systems:
        raise EmptySample("no feedback systems to compare")
    names = [system_name(s) for s in systems]
    logger.info("Rademacher ordering over %s (%d datasets, %s)", names, n_datasets, mode)
    values = replica_values(distribution, systems, hclass, loss, n_datasets, mode,
                            seed, hinge, workers, progress)
    rows = tuple((name, _summarize(values[:, c], mode)) for c, name in enumerate(names))
    return OrderingReport(rows=rows, comparisons=compare_columns(values, names))


# ============================================================
# Builtin tiny instance
# ============================================================

TINY_TRUE_WEIGHTS = (2.0, -1.0)
TINY_HYPOTHESIS_RADIUS = 1.5


def gaussian_pairs(dimension: int) -> FeatureSampler:
    def sampler(rng: np.random.Generator, n: int) -> Tuple[np.ndarray, np.ndarray]:
        return rng.standard_normal((n, dimension)), rng.standard_normal((n, dimension))
    return sampler


def bradley_terry_oracle(true_weights: Sequence[float], temperature: float = 1.0) -> OracleFn:
    w = np.asarray(true_weights, dtype=np.float64)

    def oracle(features1: np.ndarray, features2: np.ndarray) -> np.ndarray:
        return np.asarray(sigmoid((features1 - features2) @ w / temperature))
    return oracle


def tiny_instance(n: int = 4, system: FeedbackSystem = "oracle"
                  ) -> Tuple[DatasetDistribution, HypothesisClass]:
    """Two-dimensional Bradley-Terry data and 8 linear hypotheses on a circle."""
    angles = np.arange(8) * (np.pi / 4)
    weights = TINY_HYPOTHESIS_RADIUS * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    distribution = DatasetDistribution(
        feature_sampler=gaussian_pairs(2),
        oracle_fn=bradley_terry_oracle(TINY_TRUE_WEIGHTS),
        system=system,
        n=n,
    )
    return distribution, HypothesisClass.finite(weights)
