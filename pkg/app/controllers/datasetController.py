import logging
import math
from typing import Dict, Sequence, Tuple

import numpy as np

from app.models.dataset_model import (
    EXTERNAL_COMBOS,
    LOG_FEATURES,
    STOCHASTIC_COMBOS,
    Dataset,
    FeatureCombo,
    Scaler,
    SplitSpec,
)
from app.utils.exceptions import (
    DatasetTooSmallError,
    DegenerateScaleError,
    FeatureMismatchError,
    MissingFeatureError,
)
from app.utils.seeding import make_rng

logger = logging.getLogger(__name__)

COMBO_FAMILIES: Dict[str, Dict[str, FeatureCombo]] = {
    "stochastic": STOCHASTIC_COMBOS,
    "external": EXTERNAL_COMBOS,
}


def combo_by_name(name: str, family: str = "stochastic") -> FeatureCombo:
    """Resolve a preset name ("c-2") or an explicit '+'-joined feature list ("d+theta")."""
    presets = COMBO_FAMILIES[family]
    if name in presets:
        return presets[name]
    return FeatureCombo(included=frozenset(name.split("+")), name=name)


def round_half_up(x: float) -> int:
    # 1e-9 absorbs representation error such as 0.65 * 100 = 65.00000000000001
    return int(math.floor(x + 0.5 + 1e-9))


def subset(ds: Dataset, indices) -> Dataset:
    idx = np.asarray(indices, dtype=np.int64)
    return Dataset(features=ds.features, values=ds.values[idx], labels=ds.labels[idx],
                   standardized=ds.standardized)


def concat_datasets(parts: Sequence[Dataset]) -> Dataset:
    if not parts:
        raise DatasetTooSmallError("nothing to concatenate")
    first = parts[0]
    for p in parts[1:]:
        if p.features != first.features or p.standardized != first.standardized:
            raise FeatureMismatchError("datasets with different feature columns cannot be pooled")
    return Dataset(
        features=first.features,
        values=np.concatenate([p.values for p in parts], axis=0),
        labels=np.concatenate([p.labels for p in parts]),
        standardized=first.standardized,
    )


def select_features(ds: Dataset, combo: FeatureCombo) -> Dataset:
    columns = combo.columns
    for name in columns:
        if name not in ds.features:
            raise MissingFeatureError(name, 0)
        missing = np.flatnonzero(np.isnan(ds.column(name)))
        if missing.size:
            raise MissingFeatureError(name, int(missing[0]))
    idx = [ds.features.index(n) for n in columns]
    return Dataset(features=columns, values=ds.values[:, idx], labels=ds.labels, standardized=ds.standardized)


def _raw_matrix(ds: Dataset, features: Tuple[str, ...]) -> np.ndarray:
    for name in features:
        if name not in ds.features:
            raise FeatureMismatchError(f"dataset has no column '{name}' expected by the scaler")
    idx = [ds.features.index(n) for n in features]
    return ds.values[:, idx]


def fit_scaler(ds: Dataset, combo: FeatureCombo) -> Scaler:
    projected = select_features(ds, combo)
    features = projected.features
    log_flags = tuple(n in LOG_FEATURES for n in features)
    x = projected.values.copy()
    for j, flag in enumerate(log_flags):
        if flag:
            x[:, j] = np.log10(x[:, j])
    offsets = x.mean(axis=0)
    scales = x.std(axis=0)
    for j, name in enumerate(features):
        if not scales[j] > 1e-12 * max(1.0, abs(offsets[j])):
            raise DegenerateScaleError(name)
    return Scaler(features=features, log_flags=log_flags,
                  offsets=tuple(float(v) for v in offsets), scales=tuple(float(v) for v in scales))


def apply_scaler(scaler: Scaler, ds: Dataset) -> Dataset:
    """Not idempotent: a second application repeats the affine step on the standardized columns.

    Columns of an already standardized dataset are in the log domain, so only raw input gets the log10.
    """
    x = _raw_matrix(ds, scaler.features).copy()
    for j, flag in enumerate(scaler.log_flags):
        if flag and not ds.standardized:
            col = x[:, j]
            if np.any(col[~np.isnan(col)] <= 0):
                raise FeatureMismatchError(f"column '{scaler.features[j]}' has non-positive values")
            x[:, j] = np.log10(col)
    x = (x - np.asarray(scaler.offsets)) / np.asarray(scaler.scales)
    return Dataset(features=scaler.features, values=x, labels=ds.labels, standardized=True)


def split_indices(n: int, spec: SplitSpec) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    n_design = round_half_up(n * spec.train_fraction)
    n_val = round_half_up(n_design * spec.validation_fraction_of_train)
    n_train = n_design - n_val
    n_test = n - n_design
    if min(n_train, n_val, n_test) < 1:
        raise DatasetTooSmallError(
            f"{n} examples cannot be split {spec.train_fraction:g}/{spec.validation_fraction_of_train:g} "
            f"with every part non-empty (sizes {n_train}/{n_val}/{n_test})")
    perm = make_rng(spec.seed).permutation(n)
    return perm[:n_train], perm[n_train:n_design], perm[n_design:]


def split_random(ds: Dataset, spec: SplitSpec) -> Tuple[Dataset, Dataset, Dataset]:
    train_idx, val_idx, test_idx = split_indices(ds.N, spec)
    return subset(ds, train_idx), subset(ds, val_idx), subset(ds, test_idx)


def split_train_validation(ds: Dataset, validation_fraction: float, seed: int) -> Tuple[Dataset, Dataset]:
    """Monte-Carlo cross-validation re-split of a design set into training and validation parts."""
    n_val = round_half_up(ds.N * validation_fraction)
    if n_val < 1 or ds.N - n_val < 1:
        raise DatasetTooSmallError(f"{ds.N} examples leave an empty training or validation part")
    perm = make_rng(seed).permutation(ds.N)
    return subset(ds, perm[n_val:]), subset(ds, perm[:n_val])


def majority_baseline_error(ds: Dataset) -> float:
    """Error of always assigning the cmWave band, i.e. the fraction of label-1 examples."""
    return float(np.count_nonzero(ds.labels == 1)) / ds.N
