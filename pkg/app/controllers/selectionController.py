import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from app.controllers.datasetController import apply_scaler, fit_scaler, split_train_validation
from app.controllers.learnerController import cross_entropy, error_metric, harden, predict_soft, train
from app.models.dataset_model import Dataset, FeatureCombo, SplitSpec
from app.models.experiment_model import (
    CandidateScore,
    CvOutcome,
    SearchSpace,
    SelectionResult,
    gamma_grid_from_step,
)
from app.models.learner_model import ModelSpec, TrainConfig, TrainedModel
from app.utils.exceptions import SelectionFailureError, TrainingDivergenceError
from app.utils.seeding import derive_seed

logger = logging.getLogger(__name__)

DEFAULT_GAMMA_GRID = gamma_grid_from_step(0.05)


def _combo_of(ds: Dataset) -> FeatureCombo:
    return FeatureCombo(included=frozenset(ds.features))


def _errors_over_grid(labels: np.ndarray, softs: np.ndarray, gamma_grid: Sequence[float]) -> np.ndarray:
    return np.array([error_metric(labels, harden(softs, g)) for g in gamma_grid])


def _fit_scaled(spec: ModelSpec, cfg: TrainConfig, train_part: Dataset, validation: Dataset) -> Tuple[TrainedModel, Dataset]:
    scaler = fit_scaler(train_part, _combo_of(train_part))
    val_scaled = apply_scaler(scaler, validation)
    model = train(spec, cfg, apply_scaler(scaler, train_part), val_scaled, scaler=scaler)
    return model, val_scaled


def mc_cross_validate(spec: ModelSpec, train_set: Dataset, split_spec: SplitSpec, repeats: int, seed: int,
                      train_cfg: Optional[TrainConfig] = None,
                      gamma_grid: Sequence[float] = DEFAULT_GAMMA_GRID) -> CvOutcome:
    """Average validation CE and error-vs-gamma_l curve over `repeats` random re-splits of the design set."""
    train_cfg = train_cfg or TrainConfig()
    ces: List[float] = []
    curves: List[np.ndarray] = []
    diverged = 0
    for r in range(repeats):
        split_seed = derive_seed(seed, "cv", r)
        part, validation = split_train_validation(train_set, split_spec.validation_fraction_of_train, split_seed)
        run_spec = spec.model_copy(update={"seed": derive_seed(spec.seed, "cv", r)})
        run_cfg = train_cfg.model_copy(update={"seed": derive_seed(train_cfg.seed, "cv", r)})
        try:
            model, val_scaled = _fit_scaled(run_spec, run_cfg, part, validation)
        except TrainingDivergenceError as err:
            diverged += 1
            logger.warning("CV repeat %d of %s diverged: %s", r, spec.kind.value, err.detail)
            continue
        softs = predict_soft(model, val_scaled)
        ces.append(cross_entropy(val_scaled.labels, softs))
        curves.append(_errors_over_grid(val_scaled.labels, softs, gamma_grid))
    if not ces:
        return CvOutcome(mean_ce=math.inf, gamma_grid=tuple(gamma_grid),
                         mean_errors=tuple(math.inf for _ in gamma_grid), n_repeats=repeats, n_diverged=diverged)
    return CvOutcome(mean_ce=math.fsum(ces) / len(ces), gamma_grid=tuple(gamma_grid),
                     mean_errors=tuple(float(v) for v in np.mean(curves, axis=0)),
                     n_repeats=repeats, n_diverged=diverged)


def select_gamma_l(gamma_grid: Sequence[float], mean_errors: Sequence[float]) -> float:
    """Grid value with the smallest mean validation error; ties go to the value closest to 0.5, then the smaller."""
    if not gamma_grid or len(gamma_grid) != len(mean_errors):
        raise SelectionFailureError("gamma_l curve is empty or misaligned")
    best = min(mean_errors)
    tied = [g for g, e in zip(gamma_grid, mean_errors) if e <= best + 1e-12]
    return min(tied, key=lambda g: (abs(g - 0.5), g))


def _pick(candidates: List[CandidateScore]) -> CandidateScore:
    finite = [c for c in candidates if math.isfinite(c.mean_ce)]
    if not finite:
        raise SelectionFailureError("every candidate diverged during cross-validation")
    return min(finite, key=lambda c: c.sort_key)


def grid_search(space: SearchSpace, train_set: Dataset, split_spec: SplitSpec, seed: int,
                train_cfg: Optional[TrainConfig] = None) -> SelectionResult:
    """Choose (layout, alpha) by mean validation CE, then gamma_l by mean validation error."""
    candidates: List[CandidateScore] = []
    outcomes = {}
    for layout in space.candidate_layouts():
        for alpha in space.alphas:
            spec = ModelSpec(kind=space.kind, hidden_layout=layout, alpha=alpha,
                             seed=derive_seed(seed, "init", *layout, str(alpha)))
            outcome = mc_cross_validate(spec, train_set, split_spec, space.cv_repeats,
                                        derive_seed(seed, "split"), train_cfg, space.gamma_grid)
            logger.debug("%s %s alpha=%g: mean validation CE %.5f", space.kind.value, list(layout), alpha,
                         outcome.mean_ce)
            candidates.append(CandidateScore(hidden_layout=layout, alpha=alpha, mean_ce=outcome.mean_ce,
                                             n_diverged=outcome.n_diverged))
            outcomes[(layout, alpha)] = (spec, outcome)
    best = _pick(candidates)
    spec, outcome = outcomes[(best.hidden_layout, best.alpha)]
    return SelectionResult(spec=spec, gamma_l=select_gamma_l(outcome.gamma_grid, outcome.mean_errors),
                           candidates=tuple(candidates), gamma_grid=outcome.gamma_grid,
                           gamma_errors=outcome.mean_errors)


def fit_full(spec: ModelSpec, gamma_l: float, full_train_set: Dataset, split_spec: SplitSpec, seed: int,
             train_cfg: Optional[TrainConfig] = None) -> TrainedModel:
    """Refit the selected structure on the whole design set; a fresh internal split drives early stopping."""
    train_cfg = train_cfg or TrainConfig()
    scaler = fit_scaler(full_train_set, _combo_of(full_train_set))
    part, validation = split_train_validation(full_train_set, split_spec.validation_fraction_of_train,
                                              derive_seed(seed, "refit"))
    model = train(spec, train_cfg.model_copy(update={"seed": derive_seed(train_cfg.seed, "refit")}),
                  apply_scaler(scaler, part), apply_scaler(scaler, validation), scaler=scaler)
    return model.model_copy(update={"gamma_l": gamma_l})


def select_on_holdout(space: SearchSpace, train_set: Dataset, validation: Dataset, seed: int,
                      train_cfg: Optional[TrainConfig] = None) -> Tuple[SelectionResult, TrainedModel]:
    """Selection against a fixed validation set (pooled validation cells); returns the chosen trained model."""
    train_cfg = train_cfg or TrainConfig()
    candidates: List[CandidateScore] = []
    fitted = {}
    for layout in space.candidate_layouts():
        for alpha in space.alphas:
            spec = ModelSpec(kind=space.kind, hidden_layout=layout, alpha=alpha,
                             seed=derive_seed(seed, "init", *layout, str(alpha)))
            try:
                model, val_scaled = _fit_scaled(spec, train_cfg, train_set, validation)
                softs = predict_soft(model, val_scaled)
                ce = cross_entropy(val_scaled.labels, softs)
                curve = _errors_over_grid(val_scaled.labels, softs, space.gamma_grid)
            except TrainingDivergenceError as err:
                logger.warning("%s %s alpha=%g diverged: %s", space.kind.value, list(layout), alpha, err.detail)
                candidates.append(CandidateScore(hidden_layout=layout, alpha=alpha, mean_ce=math.inf, n_diverged=1))
                continue
            candidates.append(CandidateScore(hidden_layout=layout, alpha=alpha, mean_ce=ce))
            fitted[(layout, alpha)] = (spec, model, curve)
    best = _pick(candidates)
    spec, model, curve = fitted[(best.hidden_layout, best.alpha)]
    gamma_l = select_gamma_l(space.gamma_grid, curve)
    result = SelectionResult(spec=spec, gamma_l=gamma_l, candidates=tuple(candidates),
                             gamma_grid=space.gamma_grid, gamma_errors=tuple(float(e) for e in curve))
    return result, model.model_copy(update={"gamma_l": gamma_l})
