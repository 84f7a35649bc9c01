import hashlib
import json
from pathlib import Path
from typing import Dict, Tuple, Union

from dotenv import dotenv_values
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings

from app.models.channel_model import CellConfig
from app.models.dataset_model import SplitSpec
from app.models.experiment_model import DEFAULT_ALPHAS, DEFAULT_LAYOUTS, SearchSpace, gamma_grid_from_step
from app.models.learner_model import ModelKind, TrainConfig
from app.utils.exceptions import ConfigError


class Settings(BaseSettings):
    log_level: str = "INFO"
    workers: int = 1
    default_seed: int = 7

    class Config:
        env_file = ".env"
        extra = "ignore"


settings = Settings()


def _layouts_text(layouts) -> str:
    return ";".join(",".join(str(w) for w in layout) for layout in layouts)


def parse_layouts(text: str) -> Tuple[Tuple[int, ...], ...]:
    """'50;50,50' -> ((50,), (50, 50))"""
    return tuple(tuple(int(w) for w in part.split(",")) for part in text.split(";") if part.strip())


def parse_floats(text: str) -> Tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


class RunConfig(BaseModel):
    """Every tunable of a run; defaults reproduce the benchmark configuration."""

    class Config:
        extra = "forbid"
        frozen = True

    # cell
    f_c: float = 2.5e9
    f_m: float = 28e9
    w_c: float = 10e6
    w_m: float = 100e6
    p_tx_c: float = 15.0
    p_tx_m: float = 22.0
    eps: float = 4.0
    d_break: float = 50.0
    d_dcor_c: float = 25.0
    d_dcor_m: float = 24.0
    sigma_c: float = 5.0
    sigma_m: float = 7.0
    rho: float = 0.75
    noise_psd: float = -174.0
    cell_side: float = 500.0
    n_points: int = 2000

    # splits
    train_fraction: float = Field(0.65, gt=0, lt=1)
    validation_fraction: float = Field(0.2, gt=0, lt=1)
    external_train_fraction: float = Field(0.3, gt=0, lt=1)
    external_validation_fraction: float = Field(0.2, gt=0, lt=1)

    # selection
    layouts: str = _layouts_text(DEFAULT_LAYOUTS)
    alphas: str = ",".join(repr(a) for a in DEFAULT_ALPHAS)
    gamma_step: float = Field(0.05, gt=0, le=1)
    cv_repeats: int = Field(5, ge=1)
    acceptance_layout: str = "50,50"
    acceptance_alpha: float = Field(0.1, ge=0)
    acceptance_cells: int = Field(200, ge=1)

    # training
    learning_rate: float = Field(0.05, gt=0)
    batch_size: int = Field(64, gt=0)
    max_epochs: int = Field(200, gt=0)
    patience: int = Field(10, gt=0)

    # studies
    gamma_t: float = Field(0.5, ge=0, le=1)
    n_cells: int = Field(1000, ge=1)
    group_size: int = Field(50, ge=3)
    group_train: int = Field(30, ge=1)
    group_validation: int = Field(5, ge=1)
    group_test: int = Field(15, ge=1)
    n_groups: int = Field(20, ge=1)

    @field_validator("layouts", "acceptance_layout")
    def parsable_layouts(cls, v):
        try:
            if not parse_layouts(v):
                raise ValueError
        except ValueError:
            raise ValueError(f"not a layout list: {v!r} (use '50;50,50')")
        return v

    @field_validator("alphas")
    def parsable_alphas(cls, v):
        try:
            if not parse_floats(v):
                raise ValueError
        except ValueError:
            raise ValueError(f"not a comma-separated number list: {v!r}")
        return v

    @model_validator(mode="after")
    def consistent(self):
        try:
            self.cell_config()
            self.search_space(ModelKind.nn)
            self.search_space(ModelKind.nn, acceptance=True)
        except ValidationError as err:
            raise ValueError(str(err.errors()[0]["msg"]))
        if self.group_train + self.group_validation + self.group_test != self.group_size:
            raise ValueError("group_train + group_validation + group_test must equal group_size")
        return self

    def overrides(self) -> Dict[str, str]:
        defaults = RunConfig()
        return {k: str(v) for k, v in self.model_dump().items() if getattr(defaults, k) != v}

    def config_hash(self) -> str:
        payload = json.dumps({k: repr(v) for k, v in self.model_dump().items()}, sort_keys=True)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def cell_config(self) -> CellConfig:
        return CellConfig(**{k: getattr(self, k) for k in CellConfig.model_fields})

    def split_spec(self, external: bool = False) -> SplitSpec:
        if external:
            return SplitSpec(train_fraction=self.external_train_fraction,
                             validation_fraction_of_train=self.external_validation_fraction)
        return SplitSpec(train_fraction=self.train_fraction, validation_fraction_of_train=self.validation_fraction)

    def gamma_grid(self) -> Tuple[float, ...]:
        return gamma_grid_from_step(self.gamma_step)

    def search_space(self, kind: ModelKind, acceptance: bool = False) -> SearchSpace:
        if acceptance:
            layouts = parse_layouts(self.acceptance_layout)
            alphas: Tuple[float, ...] = (self.acceptance_alpha,)
        else:
            layouts, alphas = parse_layouts(self.layouts), parse_floats(self.alphas)
        return SearchSpace(kind=kind, layouts=layouts, alphas=alphas, gamma_grid=self.gamma_grid(),
                           cv_repeats=self.cv_repeats)

    def search_spaces(self, acceptance: bool = False) -> Dict[ModelKind, SearchSpace]:
        return {kind: self.search_space(kind, acceptance) for kind in ModelKind}

    def train_config(self, seed: int = 0) -> TrainConfig:
        return TrainConfig(max_epochs=self.max_epochs, learning_rate=self.learning_rate,
                           batch_size=self.batch_size, patience=self.patience, seed=seed)

    def grids(self, acceptance: bool = False) -> Dict[str, str]:
        space = self.search_space(ModelKind.nn, acceptance)
        return {
            "layouts": _layouts_text(space.layouts),
            "alphas": ",".join(repr(a) for a in space.alphas),
            "gamma_l": ",".join(repr(g) for g in space.gamma_grid),
            "cv_repeats": str(space.cv_repeats),
        }


def load_run_config(path: Union[str, Path, None] = None) -> RunConfig:
    """Read a key=value file; no path gives the defaults. Errors name the file and key."""
    if path is None:
        return RunConfig()
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"{path}: configuration file not found")
    values = dotenv_values(path)
    missing = [k for k, v in values.items() if v is None]
    if missing:
        raise ConfigError(f"{path}: key {missing[0]!r} has no value")
    try:
        return RunConfig(**values)
    except ValidationError as err:
        first = err.errors()[0]
        key = ".".join(str(p) for p in first["loc"]) or "?"
        reason = "unknown key" if first["type"] == "extra_forbidden" else first["msg"]
        raise ConfigError(f"{path}: key {key!r}: {reason}")
