#!/usr/bin/env python3
"""
Loss functions that are affine in the ordinal label
Ordinal cross-entropy, the margin hinge loss and ordinal DPO, with
analytic gradients and an exact affinity check against a label measure.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence, Tuple, Union

import numpy as np

from core_types import (
    DiscreteMeasure,
    LabelOutOfRange,
    NonpositiveBeta,
    OrdinalFeedbackError,
)

logger = logging.getLogger(__name__)

LOG_EPS = 1e-12
DEFAULT_HINGE_MARGIN = 2.0
DEFAULT_DPO_BETA = 0.1

_SIGMOID_FLOOR = np.finfo(np.float64).tiny
_SIGMOID_CEIL = float(np.nextafter(1.0, 0.0))

ArrayLike = Union[float, np.ndarray]


class LossKind(str, Enum):
    CE = "ce"
    HINGE = "hinge"
    DPO = "dpo"
    # not affine in the label; negative control only
    SQUARED = "squared"


@dataclass(frozen=True)
class RewardPairScore:
    """Reward model outputs for the two responses of one pair."""
    r1: float
    r2: float

    def __post_init__(self):
        if not (math.isfinite(self.r1) and math.isfinite(self.r2)):
            raise OrdinalFeedbackError(f"non-finite rewards ({self.r1}, {self.r2})")

    @property
    def margin(self) -> float:
        return self.r1 - self.r2


@dataclass(frozen=True)
class DpoPairScore:
    """Policy and reference log-probabilities of both responses."""
    lp1_policy: float
    lp1_ref: float
    lp2_policy: float
    lp2_ref: float
    beta: float = DEFAULT_DPO_BETA

    def __post_init__(self):
        values = (self.lp1_policy, self.lp1_ref, self.lp2_policy, self.lp2_ref, self.beta)
        if not all(math.isfinite(v) for v in values):
            raise OrdinalFeedbackError(f"non-finite DPO scores {values}")
        if self.beta <= 0.0:
            raise NonpositiveBeta(f"beta must be positive, got {self.beta}")

    @property
    def implied_margin(self) -> float:
        """beta * [(lp1_policy - lp1_ref) - (lp2_policy - lp2_ref)]"""
        return self.beta * ((self.lp1_policy - self.lp1_ref) - (self.lp2_policy - self.lp2_ref))


@dataclass(frozen=True)
class HingeConfig:
    margin: float = DEFAULT_HINGE_MARGIN

    def __post_init__(self):
        if not self.margin > 0.0:
            raise OrdinalFeedbackError(f"hinge margin must be positive, got {self.margin}")


def _as_output(value: np.ndarray, like: ArrayLike) -> ArrayLike:
    return float(value) if np.ndim(like) == 0 else value


def _check_label(z: ArrayLike) -> np.ndarray:
    labels = np.asarray(z, dtype=np.float64)
    if np.any(~np.isfinite(labels)) or np.any(labels < 0.0) or np.any(labels > 1.0):
        raise LabelOutOfRange(f"labels must lie in [0, 1], got {z!r}")
    return labels


def sigmoid(x: ArrayLike) -> ArrayLike:
    """exp(x) / (1 + exp(x)), branched on sign; never returns exactly 0 or 1."""
    values = np.asarray(x, dtype=np.float64)
    flat = np.atleast_1d(values)
    out = np.empty_like(flat)
    pos = flat >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-flat[pos]))
    ex = np.exp(flat[~pos])
    out[~pos] = ex / (1.0 + ex)
    out = np.clip(out, _SIGMOID_FLOOR, _SIGMOID_CEIL).reshape(values.shape)
    return _as_output(out, x)


# ============================================================
# Margin-form losses (vectorized); the margin is r1 - r2
# ============================================================

def ce_from_margin(z: ArrayLike, margin: ArrayLike) -> ArrayLike:
    """
    -z log sigma(d) - (1 - z) log sigma(-d) with d the margin

    Swapping (z, d) for (1 - z, -d) agrees to within 1e-15 relative, not
    bit for bit: 1 - (1 - z) != z for some doubles.
    """
    labels = _check_label(z)
    d = np.asarray(margin, dtype=np.float64)
    p1 = np.clip(np.asarray(sigmoid(d)), LOG_EPS, 1.0 - LOG_EPS)
    p2 = np.clip(np.asarray(sigmoid(-d)), LOG_EPS, 1.0 - LOG_EPS)
    loss = -labels * np.log(p1) - (1.0 - labels) * np.log(p2)
    return _as_output(loss, loss)


def hinge_from_margin(z: ArrayLike, margin: ArrayLike,
                      cfg: HingeConfig = HingeConfig()) -> ArrayLike:
    labels = _check_label(z)
    d = np.asarray(margin, dtype=np.float64)
    loss = (labels * np.maximum(0.0, cfg.margin - d)
            + (1.0 - labels) * np.maximum(0.0, cfg.margin + d))
    return _as_output(loss, loss)


def squared_from_margin(z: ArrayLike, margin: ArrayLike) -> ArrayLike:
    labels = _check_label(z)
    loss = (labels - np.asarray(sigmoid(np.asarray(margin, dtype=np.float64)))) ** 2
    return _as_output(loss, loss)


def loss_from_margin(kind: Union[LossKind, str], z: ArrayLike, margin: ArrayLike,
                     hinge: HingeConfig = HingeConfig()) -> ArrayLike:
    """Dispatch on loss kind; DPO takes its implied margin, so it matches CE here."""
    kind = LossKind(kind)
    if kind in (LossKind.CE, LossKind.DPO):
        return ce_from_margin(z, margin)
    if kind is LossKind.HINGE:
        return hinge_from_margin(z, margin, hinge)
    return squared_from_margin(z, margin)


# ============================================================
# Pair-form losses
# ============================================================

def ce_loss(z: float, scores: RewardPairScore) -> float:
    """-z log sigma(r1 - r2) - (1 - z) log sigma(r2 - r1), sigma clamped to [eps, 1 - eps]"""
    return float(ce_from_margin(z, scores.margin))


def hinge_loss(z: float, scores: RewardPairScore, cfg: HingeConfig = HingeConfig()) -> float:
    """z max(0, C - (r1 - r2)) + (1 - z) max(0, C - (r2 - r1))"""
    return float(hinge_from_margin(z, scores.margin, cfg))


def dpo_loss(z: float, scores: DpoPairScore) -> float:
    return float(ce_from_margin(z, scores.implied_margin))


# ============================================================
# Gradients
# ============================================================

def ce_margin_grad(z: ArrayLike, margin: ArrayLike) -> ArrayLike:
    """d ce / d margin = sigma(margin) - z (clamping ignored)"""
    labels = _check_label(z)
    grad = np.asarray(sigmoid(np.asarray(margin, dtype=np.float64))) - labels
    return _as_output(grad, grad)


def hinge_margin_grad(z: ArrayLike, margin: ArrayLike,
                      cfg: HingeConfig = HingeConfig()) -> ArrayLike:
    """Subgradient with 0 at the kinks."""
    labels = _check_label(z)
    d = np.asarray(margin, dtype=np.float64)
    grad = -labels * (cfg.margin - d > 0.0) + (1.0 - labels) * (cfg.margin + d > 0.0)
    return _as_output(grad, grad)


def ce_grad(z: float, scores: RewardPairScore) -> Tuple[float, float]:
    """Gradient of ce_loss with respect to (r1, r2)."""
    g = float(ce_margin_grad(z, scores.margin))
    return g, -g


def dpo_grad(z: float, scores: DpoPairScore) -> Tuple[float, float]:
    """Gradient of dpo_loss with respect to (lp1_policy, lp2_policy)."""
    g = scores.beta * float(ce_margin_grad(z, scores.implied_margin))
    return g, -g


def batch_ce_loss(z: np.ndarray, r1: np.ndarray, r2: np.ndarray) -> float:
    """Mean ce loss over a batch of reward pairs."""
    return float(np.mean(ce_from_margin(z, np.asarray(r1) - np.asarray(r2))))


def batch_ce_grad(z: np.ndarray, r1: np.ndarray, r2: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Gradient of batch_ce_loss with respect to r1 and r2."""
    n = np.asarray(z).size
    g = np.asarray(ce_margin_grad(z, np.asarray(r1) - np.asarray(r2))) / n
    return g, -g


def _dpo_margins(lp1_policy, lp1_ref, lp2_policy, lp2_ref, beta: float) -> np.ndarray:
    if beta <= 0.0:
        raise NonpositiveBeta(f"beta must be positive, got {beta}")
    return beta * ((np.asarray(lp1_policy) - np.asarray(lp1_ref))
                   - (np.asarray(lp2_policy) - np.asarray(lp2_ref)))


def batch_dpo_loss(z, lp1_policy, lp1_ref, lp2_policy, lp2_ref,
                   beta: float = DEFAULT_DPO_BETA) -> float:
    """Mean ordinal DPO loss over a batch of log-probability quadruples."""
    margins = _dpo_margins(lp1_policy, lp1_ref, lp2_policy, lp2_ref, beta)
    return float(np.mean(ce_from_margin(z, margins)))


def batch_dpo_grad(z, lp1_policy, lp1_ref, lp2_policy, lp2_ref,
                   beta: float = DEFAULT_DPO_BETA) -> Tuple[np.ndarray, np.ndarray]:
    """Gradient of batch_dpo_loss with respect to the two policy log-probabilities."""
    margins = _dpo_margins(lp1_policy, lp1_ref, lp2_policy, lp2_ref, beta)
    n = margins.size
    g = beta * np.asarray(ce_margin_grad(z, margins)) / n
    return g, -g


# ============================================================
# Affinity
# ============================================================

def expected_loss(kind: Union[LossKind, str], measure: DiscreteMeasure, margin: float,
                  hinge: HingeConfig = HingeConfig()) -> float:
    """E_Z[loss(Z, margin)] by exact summation over the measure."""
    levels = measure.scale.as_array()
    values = np.asarray(loss_from_margin(kind, levels, np.full_like(levels, margin), hinge))
    return math.fsum(p * v for p, v in zip(measure.mass, values))


def verify_affinity(kind: Union[LossKind, str],
                    measure: DiscreteMeasure,
                    margins: Sequence[float],
                    hinge: HingeConfig = HingeConfig(),
                    beta: float = DEFAULT_DPO_BETA) -> float:
    """
    Largest gap |E_Z[loss(Z, p)] - loss(E[Z], p)| over the given margins

    For DPO a margin p is read as a policy log-ratio p / beta on response 1,
    so the implied margin equals p.
    """
    kind = LossKind(kind)
    mean_label = min(max(measure.mean(), 0.0), 1.0)
    gap = 0.0
    for point in margins:
        margin = float(point)
        if kind is LossKind.DPO:
            margin = DpoPairScore(margin / beta, 0.0, 0.0, 0.0, beta).implied_margin
        expected = expected_loss(kind, measure, margin, hinge)
        at_mean = float(loss_from_margin(kind, mean_label, margin, hinge))
        gap = max(gap, abs(expected - at_mean))
    logger.debug("Affinity gap for %s: %.3e", kind.value, gap)
    return gap
