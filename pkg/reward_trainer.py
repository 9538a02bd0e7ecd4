#!/usr/bin/env python3
"""
Reward learning from ordinal feedback on a synthetic Bradley-Terry world
Generates labeled datasets under any feedback system, trains a linear
reward model with torch, evaluates oracle cross-entropy and ID/OOD
accuracy, and runs granularity and tied-ratio sweeps across seeds.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import torch
import torch.nn.functional as F
from tqdm import tqdm

from core_types import (
    ORACLE,
    DimensionMismatch,
    EmptySample,
    FeedbackSystem,
    LabelOutOfRange,
    MissingOracle,
    NonfiniteLoss,
    OutOfRange,
    PreferenceBatch,
    PreferenceItem,
    RngSeed,
    make_rng,
    scale_preset,
    shard_seeds,
    system_name,
)
from feedback_synthesis import sample_labels
from losses import (
    DEFAULT_DPO_BETA,
    DEFAULT_HINGE_MARGIN,
    HingeConfig,
    LossKind,
    ce_margin_grad,
    hinge_margin_grad,
    loss_from_margin,
    sigmoid,
)

logger = logging.getLogger(__name__)

DEFAULT_TEMPERATURE = 20.0 / 3.0
DEFAULT_DIMENSION = 16
OOD_SHIFT = 0.5
OOD_SCALE = 1.5
DEFAULT_HOLDOUT_SIZE = 2000
TIED_LABEL = 0.5
_TIED_MAX_ROUNDS = 1000


# ============================================================
# Synthetic world
# ============================================================

@dataclass(frozen=True)
class FeatureSampler:
    """Independent Gaussian features for both responses: shift + scale * N(0, 1)."""
    shift: float = 0.0
    scale: float = 1.0

    def draw(self, rng: np.random.Generator, n: int,
             dimension: int) -> Tuple[np.ndarray, np.ndarray]:
        features1 = self.shift + self.scale * rng.standard_normal((n, dimension))
        features2 = self.shift + self.scale * rng.standard_normal((n, dimension))
        return features1, features2


@dataclass(frozen=True, eq=False)
class SyntheticWorld:
    """r*(phi) = <true_weights, phi>, oracle = sigmoid((r*_1 - r*_2) / T)."""
    dimension: int
    true_weights: np.ndarray
    temperature: float = DEFAULT_TEMPERATURE
    id_sampler: FeatureSampler = FeatureSampler()
    ood_sampler: FeatureSampler = FeatureSampler(OOD_SHIFT, OOD_SCALE)

    def __post_init__(self):
        if self.dimension < 1:
            raise OutOfRange(f"dimension must be at least 1, got {self.dimension}")
        if not self.temperature > 0.0:
            raise OutOfRange(f"temperature must be positive, got {self.temperature}")
        if np.shape(self.true_weights) != (self.dimension,):
            raise DimensionMismatch(
                f"true_weights shape {np.shape(self.true_weights)} for dimension {self.dimension}")

    @classmethod
    def create(cls, dimension: int = DEFAULT_DIMENSION,
               temperature: float = DEFAULT_TEMPERATURE,
               seed: RngSeed = 0) -> "SyntheticWorld":
        """World with true weights drawn once from N(0, I)."""
        weights = make_rng(seed).standard_normal(dimension)
        return cls(dimension=dimension, true_weights=weights, temperature=temperature)

    def rewards(self, features: np.ndarray) -> np.ndarray:
        return features @ self.true_weights

    def oracle(self, features1: np.ndarray, features2: np.ndarray) -> np.ndarray:
        margin = (self.rewards(features1) - self.rewards(features2)) / self.temperature
        return np.asarray(sigmoid(margin), dtype=np.float64).reshape(-1)


def generate_batch(world: SyntheticWorld, n: int, system: FeedbackSystem,
                   seed: RngSeed, ood: bool = False) -> PreferenceBatch:
    """
    Draw n pairs and label them under a feedback system

    Features are drawn before the label uniforms, so one seed gives the
    same features and uniforms under every system.
    """
    if n < 1:
        raise EmptySample("dataset size must be at least 1")
    rng = make_rng(seed)
    sampler = world.ood_sampler if ood else world.id_sampler
    features1, features2 = sampler.draw(rng, n, world.dimension)
    uniforms = rng.random(n)
    oracles = world.oracle(features1, features2)
    labels = sample_labels(system, oracles, uniforms)
    return PreferenceBatch(features1=features1, features2=features2,
                           oracles=oracles, labels=labels,
                           ids=[f"{seed}-{i}" for i in range(n)])


def generate_dataset(world: SyntheticWorld, n: int, system: FeedbackSystem,
                     seed: RngSeed) -> List[PreferenceItem]:
    return generate_batch(world, n, system, seed).to_items()


@dataclass
class Holdout:
    """Oracle-labeled evaluation sets."""
    id_batch: PreferenceBatch
    ood_batch: PreferenceBatch


def make_holdout(world: SyntheticWorld, n: int = DEFAULT_HOLDOUT_SIZE,
                 seed: RngSeed = 0) -> Holdout:
    id_seed, ood_seed = shard_seeds(seed, 2)
    return Holdout(
        id_batch=generate_batch(world, n, ORACLE, id_seed),
        ood_batch=generate_batch(world, n, ORACLE, ood_seed, ood=True),
    )


def build_tied_dataset(world: SyntheticWorld, n: int, tied_ratio: float,
                       seed: RngSeed) -> PreferenceBatch:
    """
    Three-level dataset with round(tied_ratio * n) tied items

    Pairs are drawn and labeled in sequence; a pair is kept if its label
    (0.5 or not) still has quota left, until both quotas are filled.
    Untied items carry labels 0 or 1.
    """
    if not 0.0 <= tied_ratio <= 1.0:
        raise OutOfRange(f"tied_ratio {tied_ratio} outside [0, 1]")
    if n < 1:
        raise EmptySample("dataset size must be at least 1")

    three = scale_preset("three_level")
    need_tied = int(round(tied_ratio * n))
    need_untied = n - need_tied
    rng = make_rng(seed)
    chunk = max(n, 256)
    parts: List[Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]] = []

    for _ in range(_TIED_MAX_ROUNDS):
        features1, features2 = world.id_sampler.draw(rng, chunk, world.dimension)
        uniforms = rng.random(chunk)
        oracles = world.oracle(features1, features2)
        labels = sample_labels(three, oracles, uniforms)

        tied = labels == TIED_LABEL
        take_tied = np.flatnonzero(tied)[:need_tied]
        take_untied = np.flatnonzero(~tied)[:need_untied]
        keep = np.sort(np.concatenate([take_tied, take_untied]))
        need_tied -= take_tied.size
        need_untied -= take_untied.size
        parts.append((features1[keep], features2[keep], oracles[keep], labels[keep]))
        if need_tied == 0 and need_untied == 0:
            break
    else:
        raise EmptySample(f"could not fill tied/untied quotas for ratio {tied_ratio}")

    features1, features2, oracles, labels = (np.concatenate(cols) for cols in zip(*parts))
    return PreferenceBatch(features1=features1, features2=features2, oracles=oracles,
                           labels=labels, ids=[f"{seed}-{i}" for i in range(n)])


# ============================================================
# Training
# ============================================================

@dataclass(frozen=True)
class TrainConfig:
    loss: LossKind = LossKind.CE
    scale: FeedbackSystem = ORACLE
    learning_rate: float = 0.5
    epochs: int = 200
    batch_size: Optional[int] = None
    l2: float = 0.0
    momentum: float = 0.0
    seed: RngSeed = 0
    tied_ratio: Optional[float] = None
    hinge_margin: float = DEFAULT_HINGE_MARGIN
    dpo_beta: float = DEFAULT_DPO_BETA
    eval_every: int = 10

    def __post_init__(self):
        object.__setattr__(self, "loss", LossKind(self.loss))
        if not self.learning_rate > 0.0:
            raise OutOfRange(f"learning_rate must be positive, got {self.learning_rate}")
        if self.epochs < 0:
            raise OutOfRange(f"epochs must be nonnegative, got {self.epochs}")
        if self.batch_size is not None and self.batch_size < 1:
            raise OutOfRange(f"batch_size must be positive, got {self.batch_size}")
        if self.l2 < 0.0 or not 0.0 <= self.momentum < 1.0:
            raise OutOfRange("l2 must be >= 0 and momentum in [0, 1)")
        if self.tied_ratio is not None and not 0.0 <= self.tied_ratio <= 1.0:
            raise OutOfRange(f"tied_ratio {self.tied_ratio} outside [0, 1]")
        if self.eval_every < 1:
            raise OutOfRange(f"eval_every must be positive, got {self.eval_every}")

    def eval_epochs(self) -> List[int]:
        return sorted(set(range(0, self.epochs + 1, self.eval_every)) | {self.epochs})


@dataclass(frozen=True)
class EvalPoint:
    epoch: int
    oracle_ce: float
    id_accuracy: float
    ood_accuracy: float

    def to_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "oracle_ce": self.oracle_ce,
            "id_acc": self.id_accuracy,
            "ood_acc": self.ood_accuracy,
        }


@dataclass
class RunReport:
    system: str
    seed: int
    curve: List[EvalPoint] = field(default_factory=list)
    train_loss: List[float] = field(default_factory=list)

    @property
    def final(self) -> EvalPoint:
        return self.curve[-1]


@dataclass
class TrainResult:
    weights: np.ndarray
    report: RunReport


def _as_training_batch(data: Union[PreferenceBatch, Sequence[PreferenceItem]]) -> PreferenceBatch:
    batch = data if isinstance(data, PreferenceBatch) else PreferenceBatch.from_items(list(data))
    if len(batch) == 0:
        raise EmptySample("no training data")
    if np.any(np.isnan(batch.labels)):
        raise LabelOutOfRange("every training item needs a label")
    return batch


def _margin_scale(cfg: TrainConfig) -> float:
    """DPO reads <theta, phi> as the policy log-ratio, so its margin is beta * <theta, diff>."""
    return cfg.dpo_beta if cfg.loss is LossKind.DPO else 1.0


def batch_objective(theta: np.ndarray, batch: PreferenceBatch, cfg: TrainConfig) -> float:
    """mean loss(z_i, <theta, diff_i>) + l2 / 2 * |theta|^2"""
    margins = _margin_scale(cfg) * (batch.diff @ theta)
    losses = loss_from_margin(cfg.loss, batch.labels, margins, HingeConfig(cfg.hinge_margin))
    return float(np.mean(losses)) + 0.5 * cfg.l2 * float(theta @ theta)


def batch_gradient(theta: np.ndarray, batch: PreferenceBatch, cfg: TrainConfig) -> np.ndarray:
    """Analytic gradient of batch_objective (subgradient 0 at hinge kinks)."""
    x = batch.diff
    scale = _margin_scale(cfg)
    margins = scale * (x @ theta)
    if cfg.loss in (LossKind.CE, LossKind.DPO):
        g = np.asarray(ce_margin_grad(batch.labels, margins))
    elif cfg.loss is LossKind.HINGE:
        g = np.asarray(hinge_margin_grad(batch.labels, margins, HingeConfig(cfg.hinge_margin)))
    else:
        p = np.asarray(sigmoid(margins))
        g = -2.0 * (batch.labels - p) * p * (1.0 - p)
    return scale * (x.T @ g) / len(batch) + cfg.l2 * theta


def _torch_objective(theta: torch.Tensor, x: torch.Tensor, z: torch.Tensor,
                     cfg: TrainConfig) -> torch.Tensor:
    d = _margin_scale(cfg) * (x @ theta)
    if cfg.loss in (LossKind.CE, LossKind.DPO):
        loss = -(z * F.logsigmoid(d) + (1.0 - z) * F.logsigmoid(-d))
    elif cfg.loss is LossKind.HINGE:
        loss = z * F.relu(cfg.hinge_margin - d) + (1.0 - z) * F.relu(cfg.hinge_margin + d)
    else:
        loss = (z - torch.sigmoid(d)) ** 2
    return loss.mean() + 0.5 * cfg.l2 * (theta @ theta)


def accuracy(theta: np.ndarray, batch: PreferenceBatch) -> float:
    """
    Fraction of pairs whose predicted preference agrees with the oracle

    This is not a plain fraction of sign matches: a pair the model scores
    as an exact tie (zero margin) earns half credit, and pairs whose oracle
    is exactly 0.5 are left out. With no decisive pair the result is 0.5.
    """
    if np.any(np.isnan(batch.oracles)):
        raise MissingOracle("accuracy needs oracle values")
    truth = batch.oracles - 0.5
    decisive = truth != 0.0
    if not np.any(decisive):
        return 0.5
    pred = batch.diff[decisive] @ theta
    score = np.where(pred == 0.0, 0.5, (np.sign(pred) == np.sign(truth[decisive])).astype(float))
    return float(np.mean(score))


def oracle_ce(theta: np.ndarray, batch: PreferenceBatch) -> float:
    """Mean cross-entropy of the reward model against oracle labels."""
    if np.any(np.isnan(batch.oracles)):
        raise MissingOracle("oracle cross-entropy needs oracle values")
    return float(np.mean(loss_from_margin(LossKind.CE, batch.oracles, batch.diff @ theta)))


def evaluate(theta: np.ndarray, holdout: Holdout, epoch: int) -> EvalPoint:
    return EvalPoint(
        epoch=epoch,
        oracle_ce=oracle_ce(theta, holdout.id_batch),
        id_accuracy=accuracy(theta, holdout.id_batch),
        ood_accuracy=accuracy(theta, holdout.ood_batch),
    )


def train(data: Union[PreferenceBatch, Sequence[PreferenceItem]],
          cfg: TrainConfig,
          holdout: Optional[Holdout] = None) -> TrainResult:
    """
    Gradient descent on the mean ordinal loss of a linear reward model

    Args:
        data: labeled training pairs
        cfg: training configuration; batch_size None means full batch
        holdout: oracle-labeled eval sets; the training pairs (with their
            oracles) are used for both ID and OOD when omitted

    Returns:
        TrainResult with final weights and the eval curve
    """
    batch = _as_training_batch(data)
    if holdout is None:
        holdout = Holdout(id_batch=batch, ood_batch=batch)
    dimension = batch.features1.shape[1]
    if holdout.id_batch.features1.shape[1] != dimension:
        raise DimensionMismatch(
            f"holdout dimension {holdout.id_batch.features1.shape[1]} != training {dimension}")

    n = len(batch)
    x = torch.from_numpy(batch.diff)
    z = torch.from_numpy(batch.labels)
    theta = torch.zeros(dimension, dtype=torch.float64, requires_grad=True)
    optimizer = torch.optim.SGD([theta], lr=cfg.learning_rate, momentum=cfg.momentum)
    generator = torch.Generator().manual_seed(cfg.seed % 2**63)
    batch_size = n if cfg.batch_size is None else min(cfg.batch_size, n)
    eval_at = set(cfg.eval_epochs())

    report = RunReport(system=system_name(cfg.scale), seed=cfg.seed)

    def full_objective() -> float:
        with torch.no_grad():
            value = float(_torch_objective(theta, x, z, cfg))
        if not math.isfinite(value):
            raise NonfiniteLoss(f"objective became {value} (learning rate {cfg.learning_rate})")
        return value

    report.train_loss.append(full_objective())
    report.curve.append(evaluate(theta.detach().numpy().copy(), holdout, 0))

    for epoch in range(1, cfg.epochs + 1):
        order = torch.randperm(n, generator=generator) if batch_size < n else torch.arange(n)
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            optimizer.zero_grad()
            loss = _torch_objective(theta, x[idx], z[idx], cfg)
            if not torch.isfinite(loss):
                raise NonfiniteLoss(f"epoch {epoch}: minibatch loss {float(loss)}")
            loss.backward()
            optimizer.step()

        report.train_loss.append(full_objective())
        if epoch in eval_at:
            point = evaluate(theta.detach().numpy().copy(), holdout, epoch)
            report.curve.append(point)
            logger.debug("epoch %d: oracle_ce=%.4f id_acc=%.4f", epoch,
                         point.oracle_ce, point.id_accuracy)

    weights = theta.detach().numpy().copy()
    logger.info("Trained %s/%s seed %d: oracle_ce=%.4f", report.system, cfg.loss.value,
                cfg.seed, report.final.oracle_ce)
    return TrainResult(weights=weights, report=report)


# ============================================================
# Sweeps
# ============================================================

@dataclass(frozen=True)
class SweepRow:
    key: str
    runs: int
    oracle_ce_mean: float
    oracle_ce_std: float
    id_acc_mean: float
    id_acc_std: float
    ood_acc_mean: float
    ood_acc_std: float

    def to_dict(self) -> dict:
        return {
            "key": self.key,
            "runs": self.runs,
            "oracle_ce": {"mean": self.oracle_ce_mean, "std": self.oracle_ce_std},
            "id_acc": {"mean": self.id_acc_mean, "std": self.id_acc_std},
            "ood_acc": {"mean": self.ood_acc_mean, "std": self.ood_acc_std},
        }


@dataclass
class SweepTable:
    """Per-key summaries plus every individual run, in sweep order."""
    rows: List[SweepRow]
    runs: List[Tuple[str, RunReport]]
    final_weights: Dict[Tuple[str, int], np.ndarray] = field(default_factory=dict)

    def row(self, key: str) -> SweepRow:
        for row in self.rows:
            if row.key == key:
                return row
        raise KeyError(key)

    def finals(self, key: str) -> List[EvalPoint]:
        return [report.final for k, report in self.runs if k == key]

    def csv_rows(self) -> List[Tuple]:
        """(seed, scale_or_ratio, epoch, oracle_ce, id_acc, ood_acc) for every eval point."""
        out = []
        for key, report in self.runs:
            for point in report.curve:
                out.append((report.seed, key, point.epoch, point.oracle_ce,
                            point.id_accuracy, point.ood_accuracy))
        return out

    def summary(self) -> Dict[str, dict]:
        return {row.key: row.to_dict() for row in self.rows}


def _std(values: Sequence[float]) -> float:
    return float(np.std(values, ddof=1)) if len(values) > 1 else 0.0


def _summarize(key: str, finals: List[EvalPoint]) -> SweepRow:
    ce = [p.oracle_ce for p in finals]
    id_acc = [p.id_accuracy for p in finals]
    ood_acc = [p.ood_accuracy for p in finals]
    return SweepRow(key=key, runs=len(finals),
                    oracle_ce_mean=float(np.mean(ce)), oracle_ce_std=_std(ce),
                    id_acc_mean=float(np.mean(id_acc)), id_acc_std=_std(id_acc),
                    ood_acc_mean=float(np.mean(ood_acc)), ood_acc_std=_std(ood_acc))


def _check_sweep_shape(kind: str, keys: Sequence, seeds: Sequence[int]) -> None:
    if not keys or not seeds:
        raise EmptySample(f"{kind} sweep needs at least one setting and one seed")
    if len(keys) < 2:
        logger.warning("%s sweep with a single setting gives a one-row table", kind)
    if len(seeds) < 3:
        logger.warning("%s sweep with %d seeds; at least 3 are recommended", kind, len(seeds))


def _run_grid(jobs: List[Tuple[str, int]], run_one, workers: int, progress: bool,
              desc: str) -> SweepTable:
    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        results = list(tqdm(executor.map(lambda job: run_one(*job), jobs), total=len(jobs),
                            desc=desc, disable=not progress))

    runs = [(key, result.report) for (key, _), result in zip(jobs, results)]
    weights = {(key, seed): result.weights for (key, seed), result in zip(jobs, results)}
    keys = list(dict.fromkeys(key for key, _ in jobs))
    rows = [_summarize(key, [r.final for k, r in runs if k == key]) for key in keys]
    return SweepTable(rows=rows, runs=runs, final_weights=weights)


def granularity_sweep(world: SyntheticWorld,
                      n: int,
                      scales: Sequence[FeedbackSystem],
                      seeds: Sequence[int],
                      cfg: TrainConfig = TrainConfig(),
                      holdout_size: int = DEFAULT_HOLDOUT_SIZE,
                      workers: int = 1,
                      progress: bool = False) -> SweepTable:
    """
    Train one model per (scale, seed) and summarize final metrics per scale

    A seed fixes the training features and label uniforms across scales,
    and its holdout set, so scales differ only in their labels.

    Fewer than 3 seeds, or a single scale, log a warning and the table is
    still built. No seeds or no scales raise EmptySample.
    """
    _check_sweep_shape("granularity", scales, seeds)
    by_name = {system_name(s): s for s in scales}
    logger.info("Granularity sweep over %s with %d seeds (n=%d)", list(by_name), len(seeds), n)

    def run_one(key: str, seed: int) -> TrainResult:
        system = by_name[key]
        data = generate_batch(world, n, system, seed)
        holdout = make_holdout(world, holdout_size, shard_seeds(seed, 1)[0])
        return train(data, replace(cfg, scale=system, seed=seed), holdout)

    jobs = [(system_name(s), seed) for s in scales for seed in seeds]
    return _run_grid(jobs, run_one, workers, progress, "granularity")


def tied_ratio_sweep(world: SyntheticWorld,
                     n: int,
                     ratios: Sequence[float],
                     seeds: Sequence[int],
                     cfg: TrainConfig = TrainConfig(),
                     holdout_size: int = DEFAULT_HOLDOUT_SIZE,
                     workers: int = 1,
                     progress: bool = False) -> SweepTable:
    """
    Train on three-level datasets with a fixed share of tied (0.5) labels

    Seed and setting counts are checked as in granularity_sweep.
    """
    _check_sweep_shape("tied-ratio", ratios, seeds)
    for ratio in ratios:
        if not 0.0 <= ratio <= 1.0:
            raise OutOfRange(f"tied ratio {ratio} outside [0, 1]")
    three = scale_preset("three_level")
    by_key = {f"{ratio:g}": float(ratio) for ratio in ratios}
    logger.info("Tied-ratio sweep over %s with %d seeds (n=%d)", list(by_key), len(seeds), n)

    def run_one(key: str, seed: int) -> TrainResult:
        ratio = by_key[key]
        data = build_tied_dataset(world, n, ratio, seed)
        holdout = make_holdout(world, holdout_size, shard_seeds(seed, 1)[0])
        return train(data, replace(cfg, scale=three, seed=seed, tied_ratio=ratio), holdout)

    jobs = [(f"{ratio:g}", seed) for ratio in ratios for seed in seeds]
    return _run_grid(jobs, run_one, workers, progress, "tied-ratio")
