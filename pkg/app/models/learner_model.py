from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from app.models.dataset_model import Scaler

MAX_HIDDEN_LAYERS = 4
MAX_HIDDEN_NODES = 100


class ModelKind(str, Enum):
    nn = "nn"
    logistic = "logistic"
    linear = "linear"


# row labels used in reports: NN, GR (logistic regression), LR (linear regression)
REPORT_NAMES: Dict[ModelKind, str] = {
    ModelKind.nn: "nn",
    ModelKind.logistic: "gr",
    ModelKind.linear: "lr",
}
KIND_BY_REPORT_NAME: Dict[str, ModelKind] = {v: k for k, v in REPORT_NAMES.items()}


class ModelSpec(BaseModel):
    kind: ModelKind
    hidden_layout: Tuple[int, ...] = ()
    alpha: float = Field(0.0, ge=0)
    seed: int = 0

    class Config:
        frozen = True

    @model_validator(mode="after")
    def layout_bounds(self):
        if self.kind == ModelKind.nn:
            if not 1 <= len(self.hidden_layout) <= MAX_HIDDEN_LAYERS:
                raise ValueError(f"an nn needs 1 to {MAX_HIDDEN_LAYERS} hidden layers")
            if any(w < 1 for w in self.hidden_layout):
                raise ValueError("hidden layer widths must be >= 1")
            if sum(self.hidden_layout) > MAX_HIDDEN_NODES:
                raise ValueError(f"at most {MAX_HIDDEN_NODES} hidden nodes in total")
        elif self.hidden_layout:
            raise ValueError(f"{self.kind.value} models have no hidden layers")
        return self

    @property
    def total_nodes(self) -> int:
        return sum(self.hidden_layout)


class NnParams(BaseModel):
    """Layer l maps a (n, fan_in) activation to (n, fan_out) via `a @ weights[l] + biases[l]`."""

    weights: List[np.ndarray]
    biases: List[np.ndarray]

    class Config:
        arbitrary_types_allowed = True

    @field_validator("weights", "biases", mode="before")
    def as_arrays(cls, v):
        return [np.array(a, dtype=np.float64, copy=True) for a in v]

    @model_validator(mode="after")
    def shapes_chain(self):
        if not self.weights or len(self.weights) != len(self.biases):
            raise ValueError("one bias vector per weight matrix is required")
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise ValueError(f"layer {l}: bias shape {b.shape} does not match weights {w.shape}")
            if l and w.shape[0] != self.weights[l - 1].shape[1]:
                raise ValueError(f"layer {l}: fan-in {w.shape[0]} does not chain from the previous layer")
        if self.weights[-1].shape[1] != 1:
            raise ValueError("the output layer must have a single unit")
        return self

    @property
    def n_inputs(self) -> int:
        return int(self.weights[0].shape[0])

    @property
    def shapes(self) -> List[Tuple[int, int]]:
        return [tuple(int(s) for s in w.shape) for w in self.weights]

    def flatten(self) -> np.ndarray:
        return np.concatenate([np.concatenate([w.ravel(), b]) for w, b in zip(self.weights, self.biases)])

    def unflatten(self, flat: np.ndarray) -> "NnParams":
        weights, biases, pos = [], [], 0
        for w in self.weights:
            size = w.size
            weights.append(flat[pos:pos + size].reshape(w.shape))
            pos += size
            biases.append(flat[pos:pos + w.shape[1]])
            pos += w.shape[1]
        return NnParams(weights=weights, biases=biases)


class TrainConfig(BaseModel):
    max_epochs: int = Field(200, gt=0)
    learning_rate: float = Field(0.05, gt=0)
    batch_size: int = Field(64, gt=0)
    patience: int = Field(10, gt=0)
    seed: int = 0
    shuffle: bool = True

    class Config:
        frozen = True


class TrainedModel(BaseModel):
    spec: ModelSpec
    params: NnParams
    scaler: Optional[Scaler] = None
    gamma_l: float = Field(0.5, ge=0, le=1)
    loss_history: Tuple[float, ...] = ()

    class Config:
        arbitrary_types_allowed = True
