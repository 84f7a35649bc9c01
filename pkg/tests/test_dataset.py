import math

import numpy as np
import pytest
from pydantic import ValidationError

from app.controllers.datasetController import (
    apply_scaler,
    combo_by_name,
    concat_datasets,
    fit_scaler,
    majority_baseline_error,
    select_features,
    split_indices,
    split_random,
    split_train_validation,
    subset,
)
from app.models.dataset_model import (
    EXTERNAL_COMBOS,
    STOCHASTIC_COMBOS,
    Dataset,
    Example,
    FeatureCombo,
    FeatureVector,
    SplitSpec,
)
from app.utils.exceptions import (
    DatasetTooSmallError,
    DegenerateScaleError,
    FeatureMismatchError,
    MissingFeatureError,
)


def _ds(values, labels, features=("d", "theta", "cm_power")):
    return Dataset(features=features, values=values, labels=labels)


def test_feature_vector_needs_one_feature():
    with pytest.raises(ValidationError):
        FeatureVector()
    assert FeatureVector(cm_power=3.0).present() == ("cm_power",)


def test_feature_vector_ranges():
    with pytest.raises(ValidationError):
        FeatureVector(d=0.0)
    with pytest.raises(ValidationError):
        FeatureVector(theta=4.0)


def test_dataset_rejects_row_without_features():
    with pytest.raises(ValidationError):
        _ds([[1.0, math.nan], [math.nan, math.nan]], [0, 1], features=("d", "theta"))


def test_dataset_rejects_bad_label():
    with pytest.raises(ValidationError):
        _ds([[1.0, 0.0, 3.0]], [2])


def test_examples_round_trip():
    examples = [
        Example(features=FeatureVector(d=10.0, theta=0.5), label=1),
        Example(features=FeatureVector(d=20.0, cm_power=-3.0), label=0),
    ]
    ds = Dataset.from_examples(examples)
    assert ds.features == ("d", "theta", "cm_power")
    assert ds.N == 2
    assert ds.examples == examples


def test_combo_presets():
    assert STOCHASTIC_COMBOS["c-2"].columns == ("d", "theta", "cm_power")
    assert STOCHASTIC_COMBOS["c-7"].columns == ("theta",)
    assert EXTERNAL_COMBOS["c-8"].columns == ("delay", "mpc_power")
    assert EXTERNAL_COMBOS["delay"].columns == ("delay",)
    assert combo_by_name("c-6").columns == ("cm_power",)
    assert combo_by_name("c-6", "external").columns == ("d",)
    assert combo_by_name("theta+d").columns == ("d", "theta")


def test_combo_rejects_unknown_feature():
    with pytest.raises(ValidationError):
        FeatureCombo(included=frozenset({"speed"}))


def test_select_features_projects_in_canonical_order():
    ds = _ds([[10.0, 0.1, 5.0], [20.0, -0.1, 6.0]], [0, 1])
    out = select_features(ds, FeatureCombo(included=frozenset({"cm_power", "d"})))
    assert out.features == ("d", "cm_power")
    np.testing.assert_array_equal(out.values, [[10.0, 5.0], [20.0, 6.0]])


def test_select_features_missing_value_names_example():
    ds = _ds([[10.0, 0.1, 5.0], [20.0, -0.1, math.nan]], [0, 1])
    with pytest.raises(MissingFeatureError) as info:
        select_features(ds, STOCHASTIC_COMBOS["c-2"])
    assert info.value.feature == "cm_power"
    assert info.value.index == 1


def test_select_features_missing_column():
    ds = _ds([[10.0, 0.1, 5.0]], [0])
    with pytest.raises(MissingFeatureError):
        select_features(ds, EXTERNAL_COMBOS["c-4"])


def test_scaler_uses_log_for_distance():
    ds = _ds([[10.0, 0.0, 1.0], [100.0, 1.0, 3.0], [1000.0, 2.0, 5.0]], [0, 1, 0])
    scaler = fit_scaler(ds, STOCHASTIC_COMBOS["c-2"])
    assert scaler.log_flags == (True, False, False)
    assert scaler.offsets[0] == pytest.approx(2.0)
    assert scaler.offsets[2] == pytest.approx(3.0)
    scaled = apply_scaler(scaler, ds)
    assert scaled.standardized
    np.testing.assert_allclose(scaled.values.mean(axis=0), 0.0, atol=1e-12)
    np.testing.assert_allclose(scaled.values.std(axis=0), 1.0, atol=1e-12)


def test_scaler_degenerate_column():
    ds = _ds([[10.0, 0.5, 1.0], [20.0, 0.5, 3.0]], [0, 1])
    with pytest.raises(DegenerateScaleError) as info:
        fit_scaler(ds, STOCHASTIC_COMBOS["c-1"])
    assert info.value.feature == "theta"


def test_scaler_applied_twice_composes_the_affine_step(small_cell):
    scaler = fit_scaler(small_cell, STOCHASTIC_COMBOS["c-2"])
    once = apply_scaler(scaler, small_cell)
    twice = apply_scaler(scaler, once)
    assert twice.standardized
    assert not np.allclose(twice.values, once.values)
    expected = (once.values - np.asarray(scaler.offsets)) / np.asarray(scaler.scales)
    np.testing.assert_allclose(twice.values, expected)


def test_scaler_missing_column():
    ds = _ds([[10.0, 0.5, 1.0], [20.0, 0.1, 3.0]], [0, 1])
    scaler = fit_scaler(ds, STOCHASTIC_COMBOS["c-2"])
    with pytest.raises(FeatureMismatchError):
        apply_scaler(scaler, select_features(ds, STOCHASTIC_COMBOS["c-1"]))


def test_split_sizes_stochastic_protocol():
    train, val, test = split_indices(100, SplitSpec(train_fraction=0.65, validation_fraction_of_train=0.2))
    assert (len(train), len(val), len(test)) == (52, 13, 35)
    assert sorted(np.concatenate([train, val, test]).tolist()) == list(range(100))


def test_split_sizes_external_protocol():
    train, val, test = split_indices(1150, SplitSpec(train_fraction=0.3, validation_fraction_of_train=0.2))
    assert (len(train), len(val), len(test)) == (276, 69, 805)


def test_split_is_seeded():
    spec = SplitSpec(seed=3)
    a = split_indices(50, spec)
    b = split_indices(50, spec)
    c = split_indices(50, SplitSpec(seed=4))
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    assert not np.array_equal(a[0], c[0])


def test_split_too_small():
    with pytest.raises(DatasetTooSmallError):
        split_indices(2, SplitSpec())


def test_split_random_partitions_dataset(small_cell):
    train, val, test = split_random(small_cell, SplitSpec(seed=1))
    assert train.N + val.N + test.N == small_cell.N
    assert train.features == small_cell.features


def test_split_train_validation():
    ds = _ds([[float(i + 1), 0.0, 0.0] for i in range(10)], [i % 2 for i in range(10)])
    train, val = split_train_validation(ds, 0.2, seed=5)
    assert (train.N, val.N) == (8, 2)
    joined = sorted(np.concatenate([train.column("d"), val.column("d")]).tolist())
    assert joined == [float(i + 1) for i in range(10)]


def test_concat_and_subset(small_cell):
    head = subset(small_cell, range(10))
    tail = subset(small_cell, range(10, small_cell.N))
    pooled = concat_datasets([head, tail])
    np.testing.assert_array_equal(pooled.values, small_cell.values)
    np.testing.assert_array_equal(pooled.labels, small_cell.labels)


def test_concat_rejects_mixed_columns(small_cell):
    with pytest.raises(FeatureMismatchError):
        concat_datasets([small_cell, select_features(small_cell, STOCHASTIC_COMBOS["c-1"])])


def test_majority_baseline_error():
    ds = _ds([[1.0, 0.0, 0.0]] * 4, [1, 0, 0, 1])
    assert majority_baseline_error(ds) == 0.5
