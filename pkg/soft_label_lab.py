#!/usr/bin/env python3
"""
Soft labels for k-class classification
Oracle, original, distilled and sampled-from-teacher labeling paradigms,
a resampled-label teacher ensemble, its marginal-unbiasedness check, the
distillation bias term and the Rademacher variance-reduction report.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import torch
import torch.nn.functional as F
from scipy import special

from complexity_lab import (
    HypothesisClass,
    PairComparison,
    RadEstimate,
    RademacherMode,
    compare_pair,
    rademacher_from_loss_matrix,
)
from core_types import (
    MASS_TOLERANCE,
    DimensionMismatch,
    EmptySample,
    OrdinalFeedbackError,
    OutOfRange,
    RngSeed,
    make_rng,
    shard_seeds,
)
from coupling_he import check_conditions
from losses import LOG_EPS

logger = logging.getLogger(__name__)

DEFAULT_CLASSES = 3
DEFAULT_ENSEMBLE_SIZE = 32
DEFAULT_TEACHER_POOL = 512
BIAS_Z = 3.0


@dataclass(frozen=True)
class SoftLabel:
    """A point of the probability simplex; one-hot labels are its vertices."""
    probs: Tuple[float, ...]

    def __post_init__(self):
        if not self.probs:
            raise DimensionMismatch("soft label needs at least one class")
        for p in self.probs:
            if not math.isfinite(p) or p < 0.0:
                raise OutOfRange(f"negative or non-finite probability {p!r}")
        total = math.fsum(self.probs)
        if abs(total - 1.0) > MASS_TOLERANCE:
            raise OutOfRange(f"probabilities sum to {total!r}, expected 1")

    @classmethod
    def one_hot(cls, index: int, k: int) -> "SoftLabel":
        probs = [0.0] * k
        probs[index] = 1.0
        return cls(tuple(probs))

    @property
    def k(self) -> int:
        return len(self.probs)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.probs, dtype=np.float64)


def ce_loss_multiclass(label: SoftLabel, logits: Sequence[float]) -> float:
    """-sum_j label_j * log softmax(logits)_j, probabilities clamped to [eps, 1 - eps]"""
    logits = np.asarray(logits, dtype=np.float64)
    if logits.shape != (label.k,):
        raise DimensionMismatch(f"{logits.size} logits for a {label.k}-class label")
    probs = np.clip(special.softmax(logits), LOG_EPS, 1.0 - LOG_EPS)
    return float(-np.sum(label.as_array() * np.log(probs)))


def multiclass_loss_matrix(labels: np.ndarray, features: np.ndarray,
                           weights: np.ndarray) -> np.ndarray:
    """
    Cross-entropy of every hypothesis on every item

    Args:
        labels: (n, k) simplex points
        features: (n, d)
        weights: (H, k, d) linear softmax classifiers

    Returns:
        loss[h, i], shape (H, n)
    """
    logits = np.einsum("hkd,nd->hnk", weights, features)
    probs = np.clip(special.softmax(logits, axis=-1), LOG_EPS, 1.0 - LOG_EPS)
    return -np.einsum("nk,hnk->hn", labels, np.log(probs))


# ============================================================
# World, paradigms, teachers
# ============================================================

@dataclass(frozen=True, eq=False)
class SoftLabelWorld:
    """Gaussian features with y_oracle(x) = softmax(W x / T)."""
    k: int
    dimension: int
    weights: np.ndarray
    temperature: float = 1.0

    def __post_init__(self):
        if self.k < 2 or self.dimension < 1:
            raise OutOfRange("need k >= 2 classes and dimension >= 1")
        if not self.temperature > 0.0:
            raise OutOfRange(f"temperature must be positive, got {self.temperature}")
        if np.shape(self.weights) != (self.k, self.dimension):
            raise DimensionMismatch(
                f"weights shape {np.shape(self.weights)} != ({self.k}, {self.dimension})")

    @classmethod
    def create(cls, k: int = DEFAULT_CLASSES, dimension: int = 2, temperature: float = 1.0,
               seed: RngSeed = 0) -> "SoftLabelWorld":
        weights = make_rng(seed).standard_normal((k, dimension))
        return cls(k=k, dimension=dimension, weights=weights, temperature=temperature)

    def draw_features(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.standard_normal((n, self.dimension))

    def oracle_probs(self, features: np.ndarray) -> np.ndarray:
        return special.softmax(features @ self.weights.T / self.temperature, axis=-1)


def sample_one_hot(probs: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    """Row-wise inverse-CDF draw: class j is the first with cumsum > u."""
    cdf = np.cumsum(probs, axis=1)
    index = np.minimum((uniforms[:, None] >= cdf).sum(axis=1), probs.shape[1] - 1)
    return np.eye(probs.shape[1])[index]


Member = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class TeacherEnsemble:
    """
    Teacher output ybar_T(x) = mean of member probability vectors

    An interpolating teacher reproduces the observed labels, ybar_T = y.
    """
    members: Tuple[Member, ...] = ()
    interpolating: bool = False

    def __post_init__(self):
        if not self.members and not self.interpolating:
            raise EmptySample("teacher ensemble needs at least one member")

    @classmethod
    def interpolating_teacher(cls) -> "TeacherEnsemble":
        return cls(interpolating=True)

    @classmethod
    def from_oracle(cls, world: SoftLabelWorld) -> "TeacherEnsemble":
        return cls(members=(world.oracle_probs,))

    def member_outputs(self, features: np.ndarray) -> np.ndarray:
        """(M, n, k) member predictions."""
        if self.interpolating:
            raise OrdinalFeedbackError("an interpolating teacher has no members")
        return np.stack([member(features) for member in self.members])

    def predict(self, features: np.ndarray, observed: Optional[np.ndarray] = None) -> np.ndarray:
        if self.interpolating:
            if observed is None:
                raise OrdinalFeedbackError("an interpolating teacher needs the observed labels")
            return np.array(observed, dtype=np.float64)
        return self.member_outputs(features).mean(axis=0)


class Paradigm(str, Enum):
    ORACLE = "oracle"
    ORIGINAL = "original"
    DISTILL = "distill"
    SAMPLE_FROM_TEACHER = "sample_from_teacher"


@dataclass
class ParadigmDraw:
    """One feature sample with the labels of all four paradigms."""
    features: np.ndarray
    oracle: np.ndarray
    original: np.ndarray
    distill: np.ndarray
    sampled_teacher: np.ndarray
    sign_seed: int

    def labels(self, paradigm: Paradigm) -> np.ndarray:
        return {
            Paradigm.ORACLE: self.oracle,
            Paradigm.ORIGINAL: self.original,
            Paradigm.DISTILL: self.distill,
            Paradigm.SAMPLE_FROM_TEACHER: self.sampled_teacher,
        }[Paradigm(paradigm)]


def draw_paradigms(world: SoftLabelWorld, teacher: Optional[TeacherEnsemble], n: int,
                   seed: RngSeed) -> ParadigmDraw:
    """
    Features, label uniforms and a sign seed in a fixed order, so every
    paradigm sees the same randomness for one seed.
    """
    if n < 1:
        raise EmptySample("dataset size must be at least 1")
    rng = make_rng(seed)
    features = world.draw_features(rng, n)
    u_label = rng.random(n)
    u_teacher = rng.random(n)
    sign_seed = int(rng.integers(0, 2**63))

    oracle = world.oracle_probs(features)
    original = sample_one_hot(oracle, u_label)
    if teacher is None:
        distill = sampled = np.full_like(oracle, np.nan)
    else:
        distill = teacher.predict(features, observed=original)
        sampled = sample_one_hot(distill, u_teacher)
    return ParadigmDraw(features=features, oracle=oracle, original=original,
                        distill=distill, sampled_teacher=sampled, sign_seed=sign_seed)


def paradigm_dataset(world: SoftLabelWorld, paradigm: Paradigm, n: int, seed: RngSeed,
                     teacher: Optional[TeacherEnsemble] = None
                     ) -> List[Tuple[np.ndarray, SoftLabel]]:
    """(features, label) pairs labeled under one paradigm."""
    paradigm = Paradigm(paradigm)
    if paradigm in (Paradigm.DISTILL, Paradigm.SAMPLE_FROM_TEACHER) and teacher is None:
        raise OrdinalFeedbackError(f"paradigm {paradigm.value} needs a teacher")
    draw = draw_paradigms(world, teacher, n, seed)
    labels = draw.labels(paradigm)
    return [(draw.features[i], SoftLabel(tuple(float(p) for p in labels[i] / labels[i].sum())))
            for i in range(n)]


def _fit_softmax_regression(features: np.ndarray, targets: np.ndarray, k: int,
                            epochs: int, learning_rate: float, l2: float) -> np.ndarray:
    x = torch.from_numpy(features)
    y = torch.from_numpy(targets)
    weights = torch.zeros((k, features.shape[1]), dtype=torch.float64, requires_grad=True)
    optimizer = torch.optim.SGD([weights], lr=learning_rate)
    for _ in range(epochs):
        optimizer.zero_grad()
        loss = F.cross_entropy(x @ weights.T, y) + 0.5 * l2 * (weights * weights).sum()
        loss.backward()
        optimizer.step()
    return weights.detach().numpy().copy()


def _linear_member(weights: np.ndarray) -> Member:
    def member(features: np.ndarray) -> np.ndarray:
        return special.softmax(features @ weights.T, axis=-1)
    return member


def train_teacher_ensemble(world: SoftLabelWorld,
                           n_train: int = DEFAULT_TEACHER_POOL,
                           n_members: int = DEFAULT_ENSEMBLE_SIZE,
                           seed: RngSeed = 0,
                           epochs: int = 200,
                           learning_rate: float = 0.5,
                           l2: float = 0.0,
                           workers: int = 1) -> TeacherEnsemble:
    """
    Average of softmax regressions, each fit to an independent relabeling
    of one shared feature pool drawn from the oracle.
    """
    if n_members < 1:
        raise EmptySample("ensemble needs at least one member")
    pool_seed, *member_seeds = shard_seeds(seed, n_members + 1)
    features = world.draw_features(make_rng(pool_seed), n_train)
    oracle = world.oracle_probs(features)
    logger.info("Training teacher ensemble: %d members on %d items", n_members, n_train)

    def fit(member_seed: int) -> Member:
        onehot = sample_one_hot(oracle, make_rng(member_seed).random(n_train))
        targets = onehot.argmax(axis=1)
        return _linear_member(_fit_softmax_regression(
            features, targets, world.k, epochs, learning_rate, l2))

    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        members = tuple(executor.map(fit, member_seeds))
    return TeacherEnsemble(members=members)


# ============================================================
# Checks and reports
# ============================================================

@dataclass(frozen=True)
class BiasCheck:
    """Per-class marginal bias of teacher outputs against the oracle."""
    bias: Tuple[float, ...]
    stderr: Tuple[float, ...]
    passed: bool

    def to_dict(self) -> dict:
        return {"bias": list(self.bias), "stderr": list(self.stderr), "pass": self.passed}


def check_marginal_unbiasedness(world: SoftLabelWorld, teacher: TeacherEnsemble,
                                n_eval: int = 2000, seed: RngSeed = 0,
                                z: float = BIAS_Z) -> BiasCheck:
    """
    E_T[ybar_T | x] = y_oracle(x), checked per class on the mean over x

    Each member contributes e_m = mean_x(p_m(x) - y_oracle(x)); the check
    passes when |mean_m e_m| <= z * stderr for every class. An
    interpolating teacher is checked item by item on sampled labels.
    """
    rng = make_rng(seed)
    features = world.draw_features(rng, n_eval)
    oracle = world.oracle_probs(features)
    if teacher.interpolating:
        errors = sample_one_hot(oracle, rng.random(n_eval)) - oracle
    else:
        errors = (teacher.member_outputs(features) - oracle[None]).mean(axis=1)

    bias = errors.mean(axis=0)
    if errors.shape[0] > 1:
        stderr = errors.std(axis=0, ddof=1) / math.sqrt(errors.shape[0])
    else:
        stderr = np.zeros_like(bias)
    passed = bool(np.all(np.abs(bias) <= z * stderr + 1e-15))
    return BiasCheck(bias=tuple(bias.tolist()), stderr=tuple(stderr.tolist()), passed=passed)


def _class_weights(hclass: HypothesisClass, world: SoftLabelWorld) -> np.ndarray:
    if not hclass.is_finite:
        raise OrdinalFeedbackError("soft-label complexity needs a finite hypothesis class")
    if hclass.dimension != world.k * world.dimension:
        raise DimensionMismatch(
            f"hypotheses of dimension {hclass.dimension}, expected k * d = "
            f"{world.k * world.dimension}")
    return hclass.weights.reshape(-1, world.k, world.dimension)


def random_softmax_class(k: int, dimension: int, count: int, radius: float = 1.5,
                         seed: RngSeed = 0) -> HypothesisClass:
    """count random k x d classifiers with Frobenius norm radius, flattened."""
    raw = make_rng(seed).standard_normal((count, k * dimension))
    raw *= radius / np.linalg.norm(raw, axis=1, keepdims=True)
    return HypothesisClass.finite(raw)


@dataclass(frozen=True)
class BiasTerm:
    value: float
    stderr: float

    def to_dict(self) -> dict:
        return {"value": self.value, "stderr": self.stderr}


def estimate_bias_term(world: SoftLabelWorld, teacher: TeacherEnsemble, hclass: HypothesisClass,
                       n_eval: int = 2000, seed: RngSeed = 0) -> BiasTerm:
    """
    Excess held-out loss of the teacher-optimal hypothesis

    Per member m, h_m minimizes the loss against that member's outputs
    and h* the loss against the oracle (equal in expectation to the loss
    against sampled labels). Both are scored on an independent one-hot
    stream y'; the term is the mean over members of the paired gap.
    """
    weights = _class_weights(hclass, world)
    rng = make_rng(seed)
    features = world.draw_features(rng, n_eval)
    oracle = world.oracle_probs(features)
    y_prime = sample_one_hot(oracle, rng.random(n_eval))

    held_out = multiclass_loss_matrix(y_prime, features, weights).mean(axis=1)
    best = int(np.argmin(multiclass_loss_matrix(oracle, features, weights).mean(axis=1)))
    outputs = (teacher.member_outputs(features) if not teacher.interpolating
               else sample_one_hot(oracle, rng.random(n_eval))[None])
    gaps = []
    for member_output in outputs:
        member_losses = multiclass_loss_matrix(member_output, features, weights).mean(axis=1)
        h_member = int(np.argmin(member_losses))
        gaps.append(held_out[h_member] - held_out[best])
    gaps = np.asarray(gaps)
    stderr = float(gaps.std(ddof=1) / math.sqrt(gaps.size)) if gaps.size > 1 else 0.0
    return BiasTerm(value=float(gaps.mean()), stderr=stderr)


def soft_label_coupling(points: Sequence[SoftLabel]) -> np.ndarray:
    """
    Couple soft labels with one-hot vertices: P(w' = e_j | w) = w_j

    Returns the validated conditional matrix (one row per point).
    """
    if not points:
        raise EmptySample("no soft labels to couple")
    k = points[0].k
    if any(p.k != k for p in points):
        raise DimensionMismatch("soft labels of mixed dimension")
    beta = np.stack([p.as_array() for p in points])
    mass = np.full(len(points), 1.0 / len(points))
    check_conditions(beta, beta, np.eye(k), fine_mass=mass, coarse_mass=mass @ beta)
    return beta


@dataclass(frozen=True)
class VarianceReductionReport:
    rad_y: RadEstimate
    rad_teacher: RadEstimate
    rad_sampled_teacher: RadEstimate
    rad_oracle: RadEstimate
    reduced_variance: PairComparison
    teacher_vs_sampled: PairComparison
    oracle_vs_y: PairComparison

    @property
    def gaps(self) -> Tuple[PairComparison, ...]:
        return (self.reduced_variance, self.teacher_vs_sampled, self.oracle_vs_y)

    def to_dict(self) -> dict:
        return {
            "rad_y": self.rad_y.to_dict(),
            "rad_teacher": self.rad_teacher.to_dict(),
            "rad_sampled_teacher": self.rad_sampled_teacher.to_dict(),
            "rad_oracle": self.rad_oracle.to_dict(),
            "gaps": [g.to_dict() for g in self.gaps],
        }


def _summary(values: np.ndarray, method) -> RadEstimate:
    if values.size == 1:
        return RadEstimate(float(values[0]), 0.0, method)
    return RadEstimate(float(values.mean()), float(values.std(ddof=1) / math.sqrt(values.size)),
                       method)


def variance_reduction_report(world: SoftLabelWorld,
                              teacher: TeacherEnsemble,
                              hclass: HypothesisClass,
                              n: int,
                              n_datasets: int,
                              seed: RngSeed = 0,
                              mode: RademacherMode = RademacherMode()) -> VarianceReductionReport:
    """
    Rademacher complexity of the cross-entropy class under the four
    paradigms, with common features, uniforms and signs per replica.
    """
    weights = _class_weights(hclass, world)
    if n_datasets < 1:
        raise EmptySample("n_datasets must be at least 1")

    columns = (Paradigm.ORIGINAL, Paradigm.DISTILL, Paradigm.SAMPLE_FROM_TEACHER, Paradigm.ORACLE)
    values = np.empty((n_datasets, len(columns)))
    method = None
    for r, replica_seed in enumerate(shard_seeds(seed, n_datasets)):
        draw = draw_paradigms(world, teacher, n, replica_seed)
        for c, paradigm in enumerate(columns):
            losses = multiclass_loss_matrix(draw.labels(paradigm), draw.features, weights)
            estimate = rademacher_from_loss_matrix(losses, mode, draw.sign_seed)
            values[r, c] = estimate.value
            method = estimate.method

    rad_y, rad_teacher, rad_sampled, rad_oracle = (values[:, c] for c in range(len(columns)))
    report = VarianceReductionReport(
        rad_y=_summary(rad_y, method),
        rad_teacher=_summary(rad_teacher, method),
        rad_sampled_teacher=_summary(rad_sampled, method),
        rad_oracle=_summary(rad_oracle, method),
        reduced_variance=compare_pair(rad_teacher, rad_y, "teacher", "y"),
        teacher_vs_sampled=compare_pair(rad_teacher, rad_sampled, "teacher", "sampled_teacher"),
        oracle_vs_y=compare_pair(rad_oracle, rad_y, "oracle", "y"),
    )
    logger.info("Variance reduction y - teacher: %.4g +/- %.2g",
                report.reduced_variance.gap, report.reduced_variance.stderr)
    return report
