import math
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

# f1..f5, in canonical column order
FEATURE_NAMES: Tuple[str, ...] = ("d", "theta", "cm_power", "delay", "mpc_power")

# distance-like features are standardized on a log10 scale; dB/dBm features already are logarithmic
LOG_FEATURES: FrozenSet[str] = frozenset({"d", "delay"})


def canonical_order(names) -> Tuple[str, ...]:
    names = set(names)
    return tuple(n for n in FEATURE_NAMES if n in names)


class FeatureVector(BaseModel):
    d: Optional[float] = None  # meters
    theta: Optional[float] = None  # radians
    cm_power: Optional[float] = None  # dB or dBm
    delay: Optional[float] = None  # seconds
    mpc_power: Optional[float] = None  # dBm

    class Config:
        frozen = True

    @field_validator("d", "theta", "cm_power", "delay", "mpc_power")
    def finite_when_present(cls, v):
        if v is not None and not math.isfinite(v):
            raise ValueError("feature values must be finite")
        return v

    @field_validator("d", "delay")
    def positive_when_present(cls, v):
        if v is not None and v <= 0:
            raise ValueError("must be > 0")
        return v

    @field_validator("theta")
    def angle_in_range(cls, v):
        if v is not None and not -math.pi <= v <= math.pi:
            raise ValueError("theta must lie in [-pi, pi]")
        return v

    @model_validator(mode="after")
    def at_least_one(self):
        if not self.present():
            raise ValueError("at least one feature must be present")
        return self

    def present(self) -> Tuple[str, ...]:
        return tuple(n for n in FEATURE_NAMES if getattr(self, n) is not None)


class Example(BaseModel):
    features: FeatureVector
    label: int

    class Config:
        frozen = True

    @field_validator("label")
    def binary_label(cls, v):
        if v not in (0, 1):
            raise ValueError("label must be 0 or 1")
        return v


class Dataset(BaseModel):
    """Examples stored column-wise: `values[i, j]` is feature `features[j]` of example i, NaN when absent.

    A standardized dataset (output of apply_scaler) skips the physical range checks.
    """

    features: Tuple[str, ...]
    values: np.ndarray
    labels: np.ndarray
    standardized: bool = False

    class Config:
        arbitrary_types_allowed = True
        frozen = True

    @field_validator("features")
    def known_features(cls, v):
        if not v:
            raise ValueError("a dataset needs at least one feature column")
        unknown = [n for n in v if n not in FEATURE_NAMES]
        if unknown:
            raise ValueError(f"unknown feature(s): {unknown}")
        if tuple(v) != canonical_order(v) or len(set(v)) != len(v):
            raise ValueError(f"feature columns must be unique and ordered as {FEATURE_NAMES}")
        return tuple(v)

    @field_validator("values", mode="before")
    def as_matrix(cls, v):
        arr = np.array(v, dtype=np.float64, copy=True)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        if arr.ndim != 2:
            raise ValueError("values must be a 2-D array")
        arr.setflags(write=False)
        return arr

    @field_validator("labels", mode="before")
    def as_labels(cls, v):
        arr = np.array(v, copy=True).reshape(-1)
        if arr.size and not np.all((arr == 0) | (arr == 1)):
            raise ValueError("labels must be 0 or 1")
        arr = arr.astype(np.int8)
        arr.setflags(write=False)
        return arr

    @model_validator(mode="after")
    def consistent(self):
        n, k = self.values.shape
        if n < 1:
            raise ValueError("a dataset needs at least one example")
        if k != len(self.features):
            raise ValueError("values columns do not match feature names")
        if self.labels.shape[0] != n:
            raise ValueError("labels length does not match values")
        present = ~np.isnan(self.values)
        if np.any(np.isinf(self.values)):
            raise ValueError("feature values must be finite")
        if not np.all(present.any(axis=1)):
            row = int(np.flatnonzero(~present.any(axis=1))[0])
            raise ValueError(f"example {row} has no feature present")
        if not self.standardized:
            for name in ("d", "delay"):
                if name in self.features:
                    col = self.column(name)
                    if np.any(col[~np.isnan(col)] <= 0):
                        raise ValueError(f"{name} must be > 0")
            if "theta" in self.features:
                col = self.column("theta")
                if np.any(np.abs(col[~np.isnan(col)]) > math.pi):
                    raise ValueError("theta must lie in [-pi, pi]")
        return self

    @property
    def N(self) -> int:
        return int(self.values.shape[0])

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.features.index(name)]

    def has_feature(self, name: str) -> bool:
        return name in self.features

    @property
    def examples(self) -> List[Example]:
        out = []
        for row, label in zip(self.values, self.labels):
            fields = {n: float(x) for n, x in zip(self.features, row) if not np.isnan(x)}
            out.append(Example(features=FeatureVector(**fields), label=int(label)))
        return out

    @classmethod
    def from_examples(cls, examples: Sequence[Example]) -> "Dataset":
        features = canonical_order({n for ex in examples for n in ex.features.present()})
        values = [
            [np.nan if getattr(ex.features, n) is None else getattr(ex.features, n) for n in features]
            for ex in examples
        ]
        return cls(features=features, values=np.array(values, dtype=np.float64).reshape(len(examples), len(features)),
                   labels=[ex.label for ex in examples])


class FeatureCombo(BaseModel):
    included: FrozenSet[str]
    name: Optional[str] = None

    class Config:
        frozen = True

    @field_validator("included")
    def valid_subset(cls, v):
        if not v:
            raise ValueError("a feature combination must not be empty")
        unknown = sorted(set(v) - set(FEATURE_NAMES))
        if unknown:
            raise ValueError(f"unknown feature(s): {unknown}")
        return frozenset(v)

    @property
    def columns(self) -> Tuple[str, ...]:
        return canonical_order(self.included)

    @property
    def label(self) -> str:
        return self.name or "+".join(self.columns)


def _combos(table: Dict[str, Tuple[str, ...]]) -> Dict[str, FeatureCombo]:
    return {name: FeatureCombo(name=name, included=frozenset(cols)) for name, cols in table.items()}


# stochastic environment: three observable features
STOCHASTIC_COMBOS: Dict[str, FeatureCombo] = _combos({
    "c-1": ("d", "theta"),
    "c-2": ("d", "theta", "cm_power"),
    "c-3": ("theta", "cm_power"),
    "c-4": ("d", "cm_power"),
    "c-5": ("d",),
    "c-6": ("cm_power",),
    "c-7": ("theta",),
})

# external (ray-traced style) datasets: all five features
EXTERNAL_COMBOS: Dict[str, FeatureCombo] = _combos({
    "c-1": ("d", "theta"),
    "c-2": ("d", "theta", "cm_power"),
    "c-3": ("d", "cm_power"),
    "c-4": ("cm_power", "delay"),
    "c-5": ("cm_power",),
    "c-6": ("d",),
    "c-7": ("cm_power", "delay", "mpc_power"),
    "c-8": ("delay", "mpc_power"),
    "delay": ("delay",),
})


class SplitSpec(BaseModel):
    train_fraction: float = Field(0.65, gt=0, lt=1)
    validation_fraction_of_train: float = Field(0.2, gt=0, lt=1)
    seed: int = 0

    class Config:
        frozen = True


class Scaler(BaseModel):
    features: Tuple[str, ...]
    log_flags: Tuple[bool, ...]
    offsets: Tuple[float, ...]
    scales: Tuple[float, ...]

    class Config:
        frozen = True

    @field_validator("scales")
    def positive_scales(cls, v):
        if any(not (s > 0 and math.isfinite(s)) for s in v):
            raise ValueError("every scale must be a finite positive number")
        return v

    @model_validator(mode="after")
    def same_length(self):
        n = len(self.features)
        if not (len(self.log_flags) == len(self.offsets) == len(self.scales) == n) or n == 0:
            raise ValueError("scaler parameter lengths must match its feature list")
        return self
