#!/usr/bin/env python3
"""
Tests for hierarchical-expectation couplings
"""

import numpy as np
import pytest

from core_types import (
    BarycenterViolation,
    BiasedMeasure,
    DimensionMismatch,
    DiscreteMeasure,
    MarginalMismatch,
    RowNotStochastic,
    make_rng,
    scale_preset,
)
from coupling_he import (
    build_coupling,
    check_conditions,
    find_coupling,
    oracle_coupling,
    sample_joint,
    to_binary_coupling,
)
from feedback_synthesis import random_unbiased_measure, smallest_interval_measure


# ============================================================
# Condition checks
# ============================================================

def test_valid_three_to_binary_coupling():
    beta = np.array([[1.0, 0.0], [0.5, 0.5], [0.0, 1.0]])
    check_conditions(beta, np.array([0.0, 0.5, 1.0]), np.array([0.0, 1.0]))


def test_row_that_does_not_sum_to_one():
    beta = np.array([[1.0, 0.0], [0.5, 0.6], [0.0, 1.0]])
    with pytest.raises(RowNotStochastic):
        check_conditions(beta, np.array([0.0, 0.5, 1.0]), np.array([0.0, 1.0]))


def test_negative_entry():
    beta = np.array([[1.2, -0.2], [0.5, 0.5]])
    with pytest.raises(RowNotStochastic):
        check_conditions(beta, np.array([0.0, 0.5]), np.array([0.0, 1.0]))


def test_conditional_mean_off_the_fine_level():
    beta = np.array([[1.0, 0.0], [0.7, 0.3], [0.0, 1.0]])
    with pytest.raises(BarycenterViolation):
        check_conditions(beta, np.array([0.0, 0.5, 1.0]), np.array([0.0, 1.0]))


def test_declared_coarse_marginal_must_match():
    beta = np.array([[1.0, 0.0], [0.5, 0.5], [0.0, 1.0]])
    mu = np.array([0.2, 0.6, 0.2])
    check_conditions(beta, np.array([0.0, 0.5, 1.0]), np.array([0.0, 1.0]), mu, [0.5, 0.5])
    with pytest.raises(MarginalMismatch):
        check_conditions(beta, np.array([0.0, 0.5, 1.0]), np.array([0.0, 1.0]), mu, [0.6, 0.4])


def test_shape_mismatch():
    with pytest.raises(DimensionMismatch):
        check_conditions(np.ones((2, 2)) / 2, np.array([0.0, 0.5, 1.0]), np.array([0.0, 1.0]))


def test_vector_levels_for_simplex_vertices():
    points = np.array([[0.2, 0.3, 0.5], [1.0, 0.0, 0.0]])
    check_conditions(points, points, np.eye(3))


# ============================================================
# Builders
# ============================================================

@pytest.mark.parametrize("name", ["three_level", "five_level"])
def test_every_unbiased_measure_couples_to_binary(name):
    rng = make_rng(4)
    for _ in range(200):
        measure, oracle = random_unbiased_measure(scale_preset(name), rng)
        coupling = to_binary_coupling(measure)
        assert coupling.coarse_marginal.mean() == pytest.approx(oracle, abs=1e-9)
        np.testing.assert_allclose(coupling.conditional_means(), measure.scale.levels, atol=1e-12)


def test_oracle_coupling_is_a_single_row():
    coarse = smallest_interval_measure(scale_preset("five_level"), 0.65)
    coupling = oracle_coupling(0.65, coarse)
    assert coupling.fine_scale.levels == (0.65,)
    assert coupling.beta == (coarse.mass,)
    with pytest.raises(BiasedMeasure):
        oracle_coupling(0.3, coarse)


def test_build_coupling_checks_coarse_scale():
    fine = smallest_interval_measure(scale_preset("three_level"), 0.5)
    with pytest.raises(DimensionMismatch):
        build_coupling(fine, scale_preset("binary"), [[1, 0], [0.5, 0.5], [0, 1]],
                       coarse_marginal=DiscreteMeasure.dirac(scale_preset("three_level"), 0.5))


def test_sample_joint_respects_conditional_means():
    fine = DiscreteMeasure(scale_preset("three_level"), (0.3, 0.4, 0.3))
    pairs = np.array(sample_joint(to_binary_coupling(fine), 60_000, seed=9))
    middle = pairs[pairs[:, 0] == 0.5, 1]
    assert abs(middle.mean() - 0.5) < 0.02
    assert set(pairs[pairs[:, 0] == 0.0, 1]) == {0.0}
    assert sample_joint(to_binary_coupling(fine), 0, seed=9) == []


def test_find_coupling_for_smallest_interval_measures():
    fine = smallest_interval_measure(scale_preset("three_level"), 0.7)
    coarse = smallest_interval_measure(scale_preset("binary"), 0.7)
    coupling = find_coupling(fine, coarse)
    assert coupling is not None
    np.testing.assert_allclose(coupling.coarse_mass(), coarse.as_array(), atol=1e-6)


def test_find_coupling_reports_infeasible_pairs():
    fine = DiscreteMeasure.dirac(scale_preset("binary"), 1.0)
    coarse = DiscreteMeasure(scale_preset("binary"), (0.5, 0.5))
    assert find_coupling(fine, coarse) is None
