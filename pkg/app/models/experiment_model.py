import math
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, Field, field_validator, model_validator

from app.models.channel_model import CellConfig
from app.models.dataset_model import STOCHASTIC_COMBOS, FeatureCombo, SplitSpec
from app.models.learner_model import (
    MAX_HIDDEN_LAYERS,
    MAX_HIDDEN_NODES,
    ModelKind,
    ModelSpec,
    TrainConfig,
)
from app.models.tbba_model import DEFAULT_GAMMA_T

DEFAULT_LAYOUTS: Tuple[Tuple[int, ...], ...] = ((50,), (50, 50), (40, 30, 30), (25, 25, 25, 25))
DEFAULT_ALPHAS: Tuple[float, ...] = (0.05, 0.1, 0.15, 0.3, 0.5)
DEFAULT_GAMMA_STEP = 0.05
DEFAULT_CV_REPEATS = 5

# report row order
MODEL_ORDER: Tuple[str, ...] = ("nn", "gr", "lr", "tbba")


def gamma_grid_from_step(step: float) -> Tuple[float, ...]:
    n = int(round(1.0 / step))
    return tuple(round(i * step, 10) for i in range(n + 1) if i * step <= 1.0 + 1e-12)


class SearchSpace(BaseModel):
    kind: ModelKind = ModelKind.nn
    layouts: Tuple[Tuple[int, ...], ...] = DEFAULT_LAYOUTS
    alphas: Tuple[float, ...] = DEFAULT_ALPHAS
    gamma_grid: Tuple[float, ...] = gamma_grid_from_step(DEFAULT_GAMMA_STEP)
    cv_repeats: int = Field(DEFAULT_CV_REPEATS, ge=1)

    class Config:
        frozen = True

    @model_validator(mode="after")
    def valid_grids(self):
        if not self.alphas or any(a < 0 for a in self.alphas):
            raise ValueError("alpha grid must be non-empty and non-negative")
        if not self.gamma_grid or any(not 0 <= g <= 1 for g in self.gamma_grid):
            raise ValueError("gamma_l grid must be a non-empty subset of [0, 1]")
        if self.kind == ModelKind.nn:
            if not self.layouts:
                raise ValueError("an nn search space needs at least one layout")
            for layout in self.layouts:
                if not 1 <= len(layout) <= MAX_HIDDEN_LAYERS or sum(layout) > MAX_HIDDEN_NODES:
                    raise ValueError(
                        f"layout {list(layout)} exceeds {MAX_HIDDEN_LAYERS} layers / {MAX_HIDDEN_NODES} nodes")
        return self

    def candidate_layouts(self) -> Tuple[Tuple[int, ...], ...]:
        return self.layouts if self.kind == ModelKind.nn else ((),)


class CvOutcome(BaseModel):
    mean_ce: float
    gamma_grid: Tuple[float, ...]
    mean_errors: Tuple[float, ...]
    n_repeats: int
    n_diverged: int = 0

    class Config:
        frozen = True


class CandidateScore(BaseModel):
    hidden_layout: Tuple[int, ...]
    alpha: float
    mean_ce: float
    n_diverged: int = 0

    class Config:
        frozen = True

    @property
    def sort_key(self):
        # lower CE, then fewer nodes, fewer layers, smaller alpha
        return (self.mean_ce, sum(self.hidden_layout), len(self.hidden_layout), self.alpha)


class SelectionResult(BaseModel):
    spec: ModelSpec
    gamma_l: float = Field(ge=0, le=1)
    candidates: Tuple[CandidateScore, ...]
    gamma_grid: Tuple[float, ...]
    gamma_errors: Tuple[float, ...]

    class Config:
        frozen = True

    @model_validator(mode="after")
    def chosen_is_minimal(self):
        finite = [c.mean_ce for c in self.candidates if math.isfinite(c.mean_ce)]
        chosen = [c for c in self.candidates
                  if c.hidden_layout == self.spec.hidden_layout and c.alpha == self.spec.alpha]
        if not chosen or not finite or chosen[0].mean_ce != min(finite):
            raise ValueError("chosen candidate does not attain the minimum mean validation CE")
        return self


class StochasticBenchmarkSpec(BaseModel):
    n_cells: int = Field(1000, ge=1)
    cell: CellConfig = CellConfig()
    combos: Tuple[FeatureCombo, ...] = tuple(STOCHASTIC_COMBOS.values())
    models: Tuple[str, ...] = MODEL_ORDER
    split: SplitSpec = SplitSpec(train_fraction=0.65, validation_fraction_of_train=0.2)
    master_seed: int = 0
    learner_seed: Optional[int] = None  # defaults to master_seed
    spaces: Dict[ModelKind, SearchSpace] = {}
    train: TrainConfig = TrainConfig()
    gamma_t: float = Field(DEFAULT_GAMMA_T, ge=0, le=1)
    workers: int = Field(1, ge=1)

    class Config:
        frozen = True

    @field_validator("models")
    def known_models(cls, v):
        unknown = [m for m in v if m not in MODEL_ORDER]
        if unknown or not v:
            raise ValueError(f"models must be a non-empty subset of {MODEL_ORDER}")
        return v


class GeneralizationSpec(BaseModel):
    group_size: int = Field(50, ge=3)
    n_train: int = Field(30, ge=1)
    n_validation: int = Field(5, ge=1)
    n_test: int = Field(15, ge=1)
    n_groups: int = Field(20, ge=1)
    cell: CellConfig = CellConfig()
    combos: Tuple[FeatureCombo, ...] = (STOCHASTIC_COMBOS["c-1"], STOCHASTIC_COMBOS["c-2"],
                                        STOCHASTIC_COMBOS["c-6"])
    models: Tuple[str, ...] = MODEL_ORDER
    master_seed: int = 0
    learner_seed: Optional[int] = None
    spaces: Dict[ModelKind, SearchSpace] = {}
    train: TrainConfig = TrainConfig()
    gamma_t: float = Field(DEFAULT_GAMMA_T, ge=0, le=1)
    workers: int = Field(1, ge=1)

    class Config:
        frozen = True

    @model_validator(mode="after")
    def counts_fill_group(self):
        if self.n_train + self.n_validation + self.n_test != self.group_size:
            raise ValueError("train/validation/test realization counts must sum to group_size")
        return self


class UnitError(BaseModel):
    """Test error of one model on one combination in one work unit (cell, group or split)."""

    unit: int
    model: str
    combo: str
    error: float

    class Config:
        frozen = True


class ExcludedUnit(BaseModel):
    unit: int
    reason: str


class ReportRow(BaseModel):
    model: str
    combo: str
    mean: float
    std: float
    n: int = Field(ge=1)
    single_unit: bool = False


class BaselineRow(BaseModel):
    mean: float
    std: float
    n: int = Field(ge=1)


class ReportMetadata(BaseModel):
    study: str = ""
    master_seed: Optional[int] = None
    learner_seed: Optional[int] = None
    config_hash: str = ""
    grids: Dict[str, str] = {}
    overrides: Dict[str, str] = {}
    n_units: int = 0
    excluded_units: List[ExcludedUnit] = []
    extra: Dict[str, str] = {}


class ExperimentReport(BaseModel):
    rows: List[ReportRow]
    baseline: Optional[BaselineRow] = None
    metadata: ReportMetadata = ReportMetadata()

    def row(self, model: str, combo: str) -> ReportRow:
        for r in self.rows:
            if r.model == model and r.combo == combo:
                return r
        raise KeyError((model, combo))

    @property
    def models(self) -> List[str]:
        return list(dict.fromkeys(r.model for r in self.rows))

    @property
    def combos(self) -> List[str]:
        return list(dict.fromkeys(r.combo for r in self.rows))
