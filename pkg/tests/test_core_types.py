#!/usr/bin/env python3
"""
Tests for scales, measures, preference items and seeded randomness
"""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from core_types import (
    ORACLE,
    DimensionMismatch,
    DiscreteMeasure,
    EmptySample,
    LabelMismatch,
    NonMonotone,
    OrdinalFeedbackError,
    OutOfRange,
    PreferenceBatch,
    PreferenceItem,
    is_oracle,
    make_rng,
    parse_system,
    scale_preset,
    shard_seeds,
    system_name,
    validate_scale,
)


# ============================================================
# Scales
# ============================================================

def test_presets_have_expected_levels():
    assert scale_preset("binary").levels == (0.0, 1.0)
    assert scale_preset("three_level").levels == (0.0, 0.5, 1.0)
    assert scale_preset("five_level").levels == (0.0, 0.2, 0.5, 0.8, 1.0)
    assert scale_preset("three_level").label_for(0.5) == "same-as"


@pytest.mark.parametrize("levels, error", [
    ([0.5], OutOfRange),
    ([0.0, 0.0, 1.0], NonMonotone),
    ([0.0, 0.7, 0.3], NonMonotone),
    ([-0.1, 1.0], OutOfRange),
    ([0.0, 1.2], OutOfRange),
    ([0.0, float("nan")], OutOfRange),
])
def test_validate_scale_rejects_bad_levels(levels, error):
    with pytest.raises(error):
        validate_scale(levels)


def test_validate_scale_label_count_must_match():
    with pytest.raises(LabelMismatch):
        validate_scale([0.0, 1.0], labels=["only one"])


def test_singleton_scale_needs_opt_in():
    assert validate_scale([0.3], allow_singleton=True).size == 1
    with pytest.raises(OutOfRange):
        validate_scale([0.3])


def test_errors_share_a_root():
    assert issubclass(NonMonotone, OrdinalFeedbackError)
    assert issubclass(OrdinalFeedbackError, ValueError)


def test_parse_system_variants():
    assert is_oracle(parse_system("oracle"))
    assert system_name(parse_system(ORACLE)) == "oracle"
    assert system_name(parse_system("five_level")) == "five_level"
    custom = parse_system([0.0, 0.25, 1.0])
    assert custom.levels == (0.0, 0.25, 1.0)
    assert system_name(custom) == "custom[0,0.25,1]"
    with pytest.raises(OutOfRange):
        parse_system("seven_level")


def test_index_of_uses_tolerance():
    scale = scale_preset("five_level")
    assert scale.index_of(0.2 + 1e-12) == 1
    assert scale.contains(0.8)
    with pytest.raises(LabelMismatch):
        scale.index_of(0.3)


# ============================================================
# Measures
# ============================================================

def test_measure_mean_and_variance():
    measure = DiscreteMeasure(scale_preset("three_level"), (0.0, 0.4, 0.6))
    assert measure.mean() == pytest.approx(0.8)
    assert measure.variance() == pytest.approx(0.4 * 0.09 + 0.6 * 0.04)
    assert measure.support() == [0.5, 1.0]


def test_measure_rejects_bad_mass():
    scale = scale_preset("binary")
    with pytest.raises(OutOfRange):
        DiscreteMeasure(scale, (0.5, 0.6))
    with pytest.raises(OutOfRange):
        DiscreteMeasure(scale, (1.5, -0.5))
    with pytest.raises(DimensionMismatch):
        DiscreteMeasure(scale, (1.0,))


def test_dirac_and_mapping():
    scale = scale_preset("three_level")
    assert DiscreteMeasure.dirac(scale, 0.5).mass == (0.0, 1.0, 0.0)
    measure = DiscreteMeasure.from_mapping(scale, {0.0: 0.25, 1.0: 0.75})
    assert measure.to_dict() == {0.0: 0.25, 1.0: 0.75}


# ============================================================
# Preference items
# ============================================================

def test_item_validation():
    with pytest.raises(DimensionMismatch):
        PreferenceItem("a", (1.0, 2.0), (1.0,))
    with pytest.raises(OutOfRange):
        PreferenceItem("a", (1.0,), (0.0,), oracle=1.5)


def test_batch_keeps_missing_labels():
    items = [
        PreferenceItem("a", (1.0, 0.0), (0.0, 1.0), oracle=0.7),
        PreferenceItem("b", (0.5, 0.5), (0.0, 0.0), oracle=0.4, label=1.0),
    ]
    batch = PreferenceBatch.from_items(items)
    assert len(batch) == 2
    np.testing.assert_allclose(batch.diff[0], [1.0, -1.0])
    assert math.isnan(batch.labels[0])
    assert batch.to_items() == items


def test_batch_rejects_empty_and_mixed():
    with pytest.raises(EmptySample):
        PreferenceBatch.from_items([])
    with pytest.raises(DimensionMismatch):
        PreferenceBatch.from_items([PreferenceItem("a", (1.0,), (0.0,)),
                                    PreferenceItem("b", (1.0, 2.0), (0.0, 0.0))])


# ============================================================
# Seeds
# ============================================================

@given(st.integers(min_value=0, max_value=2**64 - 1))
def test_same_seed_same_stream(seed):
    assert np.array_equal(make_rng(seed).random(4), make_rng(seed).random(4))


def test_seed_range_is_checked():
    with pytest.raises(OutOfRange):
        make_rng(-1)
    with pytest.raises(OutOfRange):
        make_rng(2**64)


def test_shard_seeds_are_stable_and_distinct():
    first = shard_seeds(7, 5)
    assert first == shard_seeds(7, 5)
    assert len(set(first)) == 5
    assert all(0 <= s < 2**64 for s in first)
