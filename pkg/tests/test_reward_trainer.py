#!/usr/bin/env python3
"""
Tests for synthetic data, reward model training and sweeps
"""

import logging
import math

import numpy as np
import pytest
import torch

from core_types import (
    EmptySample,
    LabelOutOfRange,
    MissingOracle,
    OutOfRange,
    PreferenceBatch,
    scale_preset,
)
from losses import LossKind
from reward_trainer import (
    DEFAULT_TEMPERATURE,
    SyntheticWorld,
    TrainConfig,
    _torch_objective,
    accuracy,
    batch_gradient,
    batch_objective,
    build_tied_dataset,
    generate_batch,
    generate_dataset,
    granularity_sweep,
    make_holdout,
    oracle_ce,
    tied_ratio_sweep,
    train,
)


@pytest.fixture
def world():
    return SyntheticWorld.create(dimension=4, seed=1)


# ============================================================
# Data
# ============================================================

def test_world_oracle(world):
    batch = generate_batch(world, 50, "oracle", seed=0)
    expected = 1.0 / (1.0 + np.exp(-(batch.diff @ world.true_weights) / DEFAULT_TEMPERATURE))
    np.testing.assert_allclose(batch.oracles, expected)
    np.testing.assert_array_equal(batch.labels, batch.oracles)
    assert batch.ids[:2] == ["0-0", "0-1"]


def test_same_seed_shares_features_across_scales(world):
    binary = generate_batch(world, 200, scale_preset("binary"), seed=5)
    five = generate_batch(world, 200, scale_preset("five_level"), seed=5)
    np.testing.assert_array_equal(binary.features1, five.features1)
    assert set(binary.labels) <= {0.0, 1.0}
    assert set(five.labels) <= {0.0, 0.2, 0.5, 0.8, 1.0}


def test_ood_features_are_shifted(world):
    ood = generate_batch(world, 5000, "oracle", seed=2, ood=True)
    assert ood.features1.mean() == pytest.approx(0.5, abs=0.05)
    assert ood.features1.std() == pytest.approx(1.5, abs=0.05)


def test_generate_dataset_items(world):
    items = generate_dataset(world, 3, scale_preset("three_level"), seed=4)
    assert [item.id for item in items] == ["4-0", "4-1", "4-2"]
    assert all(item.label in (0.0, 0.5, 1.0) for item in items)


@pytest.mark.parametrize("ratio", [0.0, 0.3, 1.0])
def test_tied_dataset_hits_its_quota(world, ratio):
    batch = build_tied_dataset(world, 200, ratio, seed=3)
    assert len(batch) == 200
    assert int(np.sum(batch.labels == 0.5)) == round(ratio * 200)
    assert set(batch.labels) <= {0.0, 0.5, 1.0}


def test_tied_dataset_validation(world):
    with pytest.raises(OutOfRange):
        build_tied_dataset(world, 10, 1.5, seed=0)
    with pytest.raises(EmptySample):
        build_tied_dataset(world, 0, 0.5, seed=0)


# ============================================================
# Objective and metrics
# ============================================================

@pytest.mark.parametrize("loss", list(LossKind))
def test_analytic_gradient_matches_autograd(world, loss):
    batch = generate_batch(world, 64, scale_preset("five_level"), seed=6)
    cfg = TrainConfig(loss=loss, l2=0.01)
    theta = np.random.default_rng(0).standard_normal(4) * 0.3
    t = torch.tensor(theta, requires_grad=True)
    value = _torch_objective(t, torch.from_numpy(batch.diff), torch.from_numpy(batch.labels), cfg)
    value.backward()
    np.testing.assert_allclose(batch_gradient(theta, batch, cfg), t.grad.numpy(), atol=1e-10)
    assert batch_objective(theta, batch, cfg) == pytest.approx(float(value), rel=1e-9)


def test_accuracy_half_credit_and_skips_ties():
    batch = PreferenceBatch(
        features1=np.array([[1.0], [1.0], [0.0], [2.0]]),
        features2=np.zeros((4, 1)),
        oracles=np.array([0.9, 0.2, 0.7, 0.5]),
        labels=np.full(4, np.nan),
    )
    # pairs: correct, wrong, predicted tie; the last has oracle 0.5
    assert accuracy(np.array([1.0]), batch) == pytest.approx(0.5)
    assert accuracy(np.zeros(1), batch) == pytest.approx(0.5)


def test_metrics_need_oracles():
    batch = PreferenceBatch(np.ones((2, 1)), np.zeros((2, 1)), np.full(2, np.nan), np.ones(2))
    with pytest.raises(MissingOracle):
        accuracy(np.ones(1), batch)
    with pytest.raises(MissingOracle):
        oracle_ce(np.ones(1), batch)


# ============================================================
# Training
# ============================================================

def test_eval_schedule():
    assert TrainConfig(epochs=25, eval_every=10).eval_epochs() == [0, 10, 20, 25]
    assert TrainConfig(epochs=0).eval_epochs() == [0]


@pytest.mark.parametrize("kwargs", [
    {"learning_rate": 0.0},
    {"epochs": -1},
    {"batch_size": 0},
    {"momentum": 1.0},
    {"tied_ratio": 2.0},
    {"eval_every": 0},
])
def test_train_config_validation(kwargs):
    with pytest.raises(OutOfRange):
        TrainConfig(**kwargs)


def test_training_improves_oracle_ce(world):
    data = generate_batch(world, 400, scale_preset("three_level"), seed=0)
    holdout = make_holdout(world, 1000, seed=1)
    result = train(data, TrainConfig(scale=scale_preset("three_level"), epochs=100), holdout)
    curve = result.report.curve
    assert curve[0].oracle_ce == pytest.approx(math.log(2.0))
    assert curve[-1].oracle_ce < curve[0].oracle_ce
    assert curve[-1].id_accuracy > 0.75
    assert result.report.system == "three_level"
    assert len(result.report.train_loss) == 101


def test_full_batch_training_loss_never_increases(world):
    data = generate_batch(world, 400, scale_preset("three_level"), seed=0)
    ce = train(data, TrainConfig(epochs=100))
    assert np.all(np.diff(ce.report.train_loss) <= 1e-12)
    assert ce.report.train_loss[-1] < ce.report.train_loss[0]

    hinge = train(data, TrainConfig(loss=LossKind.HINGE, learning_rate=0.01, epochs=30))
    assert np.all(np.diff(hinge.report.train_loss) <= 1e-12)
    assert hinge.report.train_loss[-1] < hinge.report.train_loss[0]


def test_all_tied_labels_keep_the_model_at_zero(world):
    data = build_tied_dataset(world, 100, 1.0, seed=2)
    result = train(data, TrainConfig(epochs=30))
    np.testing.assert_array_equal(result.weights, np.zeros(4))
    assert result.report.final.oracle_ce == pytest.approx(math.log(2.0), abs=1e-12)
    assert result.report.final.id_accuracy == 0.5


def test_minibatch_training_is_seeded(world):
    data = generate_batch(world, 120, scale_preset("binary"), seed=3)
    cfg = TrainConfig(epochs=5, batch_size=32, momentum=0.9, seed=11)
    np.testing.assert_array_equal(train(data, cfg).weights, train(data, cfg).weights)


@pytest.mark.parametrize("loss", [LossKind.HINGE, LossKind.DPO])
def test_other_losses_train(world, loss):
    data = generate_batch(world, 300, scale_preset("five_level"), seed=4)
    lr = 5.0 if loss is LossKind.DPO else 0.05
    result = train(data, TrainConfig(loss=loss, learning_rate=lr, epochs=60))
    assert result.report.final.id_accuracy > result.report.curve[0].id_accuracy


def test_training_needs_labels(world):
    batch = generate_batch(world, 10, "oracle", seed=0)
    batch.labels[:] = np.nan
    with pytest.raises(LabelOutOfRange):
        train(batch, TrainConfig(epochs=1))


# ============================================================
# Sweeps
# ============================================================

def test_granularity_sweep_table(world):
    scales = ["oracle", scale_preset("three_level"), scale_preset("binary")]
    cfg = TrainConfig(epochs=20, eval_every=10)
    table = granularity_sweep(world, 80, scales, [0, 1, 2], cfg, holdout_size=200, workers=2)
    assert [row.key for row in table.rows] == ["oracle", "three_level", "binary"]
    assert all(row.runs == 3 for row in table.rows)
    assert len(table.csv_rows()) == 9 * 3
    assert set(table.summary()) == {"oracle", "three_level", "binary"}
    assert table.finals("binary")[0].epoch == 20


def test_granularity_sweep_is_reproducible(world):
    cfg = TrainConfig(epochs=10)
    first = granularity_sweep(world, 60, ["oracle", scale_preset("binary")], [0, 1, 2], cfg,
                              holdout_size=100)
    again = granularity_sweep(world, 60, ["oracle", scale_preset("binary")], [0, 1, 2], cfg,
                              holdout_size=100, workers=3)
    assert first.summary() == again.summary()


def test_few_seeds_warn_but_still_sweep(world, caplog):
    cfg = TrainConfig(epochs=2)
    with caplog.at_level(logging.WARNING, logger="reward_trainer"):
        table = granularity_sweep(world, 20, ["oracle", scale_preset("binary")], [0, 1], cfg,
                                  holdout_size=20)
    assert all(row.runs == 2 for row in table.rows)
    assert "at least 3 are recommended" in caplog.text
    with pytest.raises(EmptySample):
        granularity_sweep(world, 20, ["oracle"], [], cfg, holdout_size=20)
    with pytest.raises(EmptySample):
        tied_ratio_sweep(world, 20, [], [0, 1, 2], cfg, holdout_size=20)


def test_tied_ratio_sweep_keys(world):
    table = tied_ratio_sweep(world, 60, [0.0, 0.5], [0, 1, 2], TrainConfig(epochs=10),
                             holdout_size=100)
    assert [row.key for row in table.rows] == ["0", "0.5"]
    with pytest.raises(OutOfRange):
        tied_ratio_sweep(world, 60, [1.2], [0], TrainConfig(epochs=1), holdout_size=10)


@pytest.mark.parametrize("loss", [LossKind.CE, LossKind.DPO])
def test_batch_gradient_matches_central_differences(world, loss):
    batch = generate_batch(world, 64, scale_preset("five_level"), seed=9)
    cfg = TrainConfig(loss=loss, l2=1e-3)
    step = 1e-6
    for theta in np.random.default_rng(1).standard_normal((10, 4)) * 0.5:
        numeric = np.array([
            (batch_objective(theta + step * e, batch, cfg)
             - batch_objective(theta - step * e, batch, cfg)) / (2 * step)
            for e in np.eye(4)
        ])
        np.testing.assert_allclose(batch_gradient(theta, batch, cfg), numeric,
                                   rtol=1e-6, atol=1e-9)


def test_fully_tied_sweep_collapses_with_weight_decay(world):
    table = tied_ratio_sweep(world, 200, [1.0], seeds=range(5),
                             cfg=TrainConfig(epochs=50, l2=1e-2), holdout_size=500)
    for weights in table.final_weights.values():
        assert np.linalg.norm(weights) <= 1e-3
    for point in table.finals("1"):
        assert abs(point.oracle_ce - math.log(2.0)) <= 1e-3


# ============================================================
# Experiment directions
# ============================================================

@pytest.mark.slow
def test_finer_feedback_lowers_oracle_ce():
    world = SyntheticWorld.create(dimension=16, seed=0)
    scales = ["oracle", scale_preset("five_level"), scale_preset("three_level"),
              scale_preset("binary")]
    table = granularity_sweep(world, 500, scales, seeds=range(20), cfg=TrainConfig(epochs=200))
    oracle, three, binary = (table.row(k) for k in ("oracle", "three_level", "binary"))
    pooled = math.sqrt((oracle.oracle_ce_std ** 2 + binary.oracle_ce_std ** 2) / 20)
    assert oracle.oracle_ce_mean <= three.oracle_ce_mean <= binary.oracle_ce_mean
    assert binary.oracle_ce_mean - oracle.oracle_ce_mean > pooled


@pytest.mark.slow
def test_some_ties_do_not_hurt_accuracy():
    world = SyntheticWorld.create(dimension=16, seed=0)
    table = tied_ratio_sweep(world, 512, [0.0, 0.25], seeds=range(20), cfg=TrainConfig())
    none, some = table.row("0"), table.row("0.25")
    pooled = math.sqrt((none.id_acc_std ** 2 + some.id_acc_std ** 2) / 2)
    assert some.id_acc_mean >= none.id_acc_mean - pooled
