import logging
import math
import re
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from itertools import repeat
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from app.controllers.channelController import generate_cell
from app.controllers.datasetController import (
    concat_datasets,
    majority_baseline_error,
    select_features,
    split_indices,
    subset,
)
from app.controllers.learnerController import error_metric, harden, predict_soft
from app.controllers.selectionController import fit_full, grid_search, select_on_holdout
from app.controllers.tbbaController import tbba_error
from app.models.channel_model import CellConfig
from app.models.dataset_model import EXTERNAL_COMBOS, Dataset, FeatureCombo, SplitSpec
from app.models.experiment_model import (
    MODEL_ORDER,
    BaselineRow,
    ExcludedUnit,
    ExperimentReport,
    GeneralizationSpec,
    ReportMetadata,
    ReportRow,
    SearchSpace,
    StochasticBenchmarkSpec,
    UnitError,
)
from app.models.learner_model import KIND_BY_REPORT_NAME, ModelKind, TrainConfig, TrainedModel
from app.models.tbba_model import DEFAULT_GAMMA_T
from app.utils.exceptions import BandAssignmentError, ReportError
from app.utils.seeding import derive_seed

logger = logging.getLogger(__name__)

UnitResult = Tuple[List[UnitError], Optional[float], Optional[ExcludedUnit]]
ModelSink = Callable[[str, str, TrainedModel], None]

TBBA = "tbba"
PROGRESS_EVERY = 10


def _model_rank(model: str):
    return (MODEL_ORDER.index(model), "") if model in MODEL_ORDER else (len(MODEL_ORDER), model)


def _combo_rank(combo: str):
    m = re.fullmatch(r"c-(\d+)", combo)
    return (0, int(m.group(1)), "") if m else (1, 0, combo)


def _mean_std(values: Sequence[float]) -> Tuple[float, float]:
    values = sorted(values)
    n = len(values)
    mean = math.fsum(values) / n
    if n < 2:
        return mean, 0.0
    return mean, math.sqrt(math.fsum((v - mean) ** 2 for v in values) / (n - 1))


def make_report_rows(unit_errors: Iterable[UnitError], baselines: Iterable[float] = (),
                     metadata: Optional[ReportMetadata] = None) -> ExperimentReport:
    """Mean, sample std and count per (model, combo); independent of the input order."""
    groups: Dict[Tuple[str, str], List[float]] = defaultdict(list)
    for ue in unit_errors:
        groups[(ue.model, ue.combo)].append(ue.error)
    if not groups:
        raise ReportError("no unit errors to aggregate")
    rows = []
    for model, combo in sorted(groups, key=lambda k: (_model_rank(k[0]), _combo_rank(k[1]))):
        values = groups[(model, combo)]
        mean, std = _mean_std(values)
        rows.append(ReportRow(model=model, combo=combo, mean=mean, std=std, n=len(values),
                              single_unit=len(values) == 1))
    baselines = [b for b in baselines if b is not None]
    baseline = None
    if baselines:
        mean, std = _mean_std(baselines)
        baseline = BaselineRow(mean=mean, std=std, n=len(baselines))
    return ExperimentReport(rows=rows, baseline=baseline, metadata=metadata or ReportMetadata())


def _space_for(spaces: Dict[ModelKind, SearchSpace], kind: ModelKind) -> SearchSpace:
    return spaces.get(kind) or SearchSpace(kind=kind)


def _learners(models: Sequence[str]) -> List[str]:
    return [m for m in models if m != TBBA]


def _select_and_fit(space: SearchSpace, design: Dataset, split: SplitSpec, seed: int,
                    train_cfg: TrainConfig) -> TrainedModel:
    cfg = train_cfg.model_copy(update={"seed": derive_seed(seed, "train")})
    selection = grid_search(space, design, split, seed, cfg)
    return fit_full(selection.spec, selection.gamma_l, design, split, seed, cfg)


def _test_error(model: TrainedModel, test: Dataset) -> float:
    return error_metric(test.labels, harden(predict_soft(model, test), model.gamma_l))


def _map_units(fn, spec, indices: Sequence[int], workers: int) -> List[UnitResult]:
    """Runs work units in order or on a process pool; results come back in index order either way."""
    if workers <= 1:
        results = []
        for done, i in enumerate(indices, start=1):
            results.append(fn(spec, i))
            if done % PROGRESS_EVERY == 0:
                logger.info("%d/%d units done", done, len(indices))
        return results
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, repeat(spec), indices))


def _collect(results: Sequence[UnitResult]):
    errors, baselines, excluded = [], [], []
    for unit_errors, baseline, skipped in results:
        errors.extend(unit_errors)
        if baseline is not None:
            baselines.append(baseline)
        if skipped is not None:
            excluded.append(skipped)
    return errors, baselines, excluded


def _cell_seed(master_seed: int, index: int) -> int:
    return derive_seed(master_seed, "cell", index)


def _stochastic_unit(spec: StochasticBenchmarkSpec, index: int) -> UnitResult:
    try:
        ds = generate_cell(spec.cell, _cell_seed(spec.master_seed, index))
        split = spec.split.model_copy(update={"seed": derive_seed(spec.master_seed, "split", index)})
        train_idx, val_idx, test_idx = split_indices(ds.N, split)
        design = subset(ds, np.concatenate([train_idx, val_idx]))
        test = subset(ds, test_idx)
        errors: List[UnitError] = []
        if TBBA in spec.models:
            # training-free and combination-independent: one evaluation fills every combo column
            e = tbba_error(test, spec.cell, spec.gamma_t)
            errors.extend(UnitError(unit=index, model=TBBA, combo=c.label, error=e) for c in spec.combos)
        learner_seed = spec.master_seed if spec.learner_seed is None else spec.learner_seed
        for combo in spec.combos:
            design_c, test_c = select_features(design, combo), select_features(test, combo)
            for name in _learners(spec.models):
                kind = KIND_BY_REPORT_NAME[name]
                model = _select_and_fit(_space_for(spec.spaces, kind), design_c, split,
                                        derive_seed(learner_seed, "learn", index, combo.label, name), spec.train)
                errors.append(UnitError(unit=index, model=name, combo=combo.label, error=_test_error(model, test_c)))
        return errors, majority_baseline_error(test), None
    except BandAssignmentError as err:
        logger.warning("cell %d excluded: %s", index, err.detail)
        return [], None, ExcludedUnit(unit=index, reason=err.detail)


def run_stochastic_benchmark(spec: StochasticBenchmarkSpec,
                             metadata: Optional[ReportMetadata] = None) -> ExperimentReport:
    """Per-cell train/validate/test over `n_cells` independent realizations."""
    logger.info("stochastic benchmark: %d cells, combos %s, models %s", spec.n_cells,
                [c.label for c in spec.combos], list(spec.models))
    results = _map_units(_stochastic_unit, spec, range(spec.n_cells), spec.workers)
    errors, baselines, excluded = _collect(results)
    meta = (metadata or ReportMetadata()).model_copy(update={
        "study": "stochastic", "master_seed": spec.master_seed,
        "learner_seed": spec.master_seed if spec.learner_seed is None else spec.learner_seed,
        "n_units": spec.n_cells, "excluded_units": excluded,
    })
    return make_report_rows(errors, baselines, meta)


def _generalization_unit(spec: GeneralizationSpec, group: int) -> UnitResult:
    try:
        first = group * spec.group_size
        cells = [generate_cell(spec.cell, _cell_seed(spec.master_seed, first + k)) for k in range(spec.group_size)]
        train_pool = concat_datasets(cells[:spec.n_train])
        val_pool = concat_datasets(cells[spec.n_train:spec.n_train + spec.n_validation])
        test_pool = concat_datasets(cells[spec.n_train + spec.n_validation:])
        errors: List[UnitError] = []
        if TBBA in spec.models:
            e = tbba_error(test_pool, spec.cell, spec.gamma_t)
            errors.extend(UnitError(unit=group, model=TBBA, combo=c.label, error=e) for c in spec.combos)
        learner_seed = spec.master_seed if spec.learner_seed is None else spec.learner_seed
        for combo in spec.combos:
            train_c = select_features(train_pool, combo)
            val_c = select_features(val_pool, combo)
            test_c = select_features(test_pool, combo)
            for name in _learners(spec.models):
                kind = KIND_BY_REPORT_NAME[name]
                seed = derive_seed(learner_seed, "group", group, combo.label, name)
                cfg = spec.train.model_copy(update={"seed": derive_seed(seed, "train")})
                _, model = select_on_holdout(_space_for(spec.spaces, kind), train_c, val_c, seed, cfg)
                errors.append(UnitError(unit=group, model=name, combo=combo.label, error=_test_error(model, test_c)))
        return errors, majority_baseline_error(test_pool), None
    except BandAssignmentError as err:
        logger.warning("group %d excluded: %s", group, err.detail)
        return [], None, ExcludedUnit(unit=group, reason=err.detail)


def run_generalization(spec: GeneralizationSpec, metadata: Optional[ReportMetadata] = None) -> ExperimentReport:
    """Train on pooled cells of a group, validate on others, test on the rest; average over groups."""
    logger.info("generalization: %d groups of %d cells (%d/%d/%d)", spec.n_groups, spec.group_size,
                spec.n_train, spec.n_validation, spec.n_test)
    results = _map_units(_generalization_unit, spec, range(spec.n_groups), spec.workers)
    errors, baselines, excluded = _collect(results)
    meta = (metadata or ReportMetadata()).model_copy(update={
        "study": "generalization", "master_seed": spec.master_seed,
        "learner_seed": spec.master_seed if spec.learner_seed is None else spec.learner_seed,
        "n_units": spec.n_groups, "excluded_units": excluded,
    })
    return make_report_rows(errors, baselines, meta)


def run_external(dataset: Dataset, combos: Optional[Sequence[FeatureCombo]] = None,
                 split: Optional[SplitSpec] = None, models: Sequence[str] = ("nn", "gr", "lr"),
                 spaces: Optional[Dict[ModelKind, SearchSpace]] = None, train_cfg: Optional[TrainConfig] = None,
                 seed: int = 0, n_splits: int = 1, model_sink: Optional[ModelSink] = None,
                 metadata: Optional[ReportMetadata] = None) -> ExperimentReport:
    """Single-dataset pipeline: small design set, Monte-Carlo CV selection, refit, test on the rest."""
    combos = list(combos or EXTERNAL_COMBOS.values())
    split = split or SplitSpec(train_fraction=0.3, validation_fraction_of_train=0.2)
    spaces = spaces or {}
    train_cfg = train_cfg or TrainConfig()
    for combo in combos:
        select_features(dataset, combo)
    learners = _learners(models)
    errors: List[UnitError] = []
    baselines: List[float] = []
    for s in range(n_splits):
        unit_split = split.model_copy(update={"seed": derive_seed(seed, "split", s)})
        train_idx, val_idx, test_idx = split_indices(dataset.N, unit_split)
        design = subset(dataset, np.concatenate([train_idx, val_idx]))
        test = subset(dataset, test_idx)
        baselines.append(majority_baseline_error(test))
        for combo in combos:
            design_c, test_c = select_features(design, combo), select_features(test, combo)
            for name in learners:
                kind = KIND_BY_REPORT_NAME[name]
                model = _select_and_fit(_space_for(spaces, kind), design_c, unit_split,
                                        derive_seed(seed, "learn", s, combo.label, name), train_cfg)
                errors.append(UnitError(unit=s, model=name, combo=combo.label, error=_test_error(model, test_c)))
                if model_sink is not None and s == 0:
                    model_sink(name, combo.label, model)
        logger.info("external split %d/%d done", s + 1, n_splits)
    meta = (metadata or ReportMetadata()).model_copy(update={"study": "external", "master_seed": seed,
                                                             "n_units": n_splits})
    return make_report_rows(errors, baselines, meta)


def _tbba_unit(args: Tuple[CellConfig, int, Tuple[float, ...], float], index: int) -> Tuple[List[float], float]:
    cfg, master_seed, gammas, offset = args
    ds = generate_cell(cfg, _cell_seed(master_seed, index))
    return [tbba_error(ds, cfg, g, offset) for g in gammas], majority_baseline_error(ds)


def _tbba_errors(cfg: CellConfig, n_cells: int, seed: int, gammas: Tuple[float, ...],
                 pathloss_offset_db: float, workers: int) -> List[Tuple[List[float], float]]:
    return _map_units(_tbba_unit, (cfg, seed, gammas, pathloss_offset_db), range(n_cells), workers)


def run_tbba_study(cfg: CellConfig, n_cells: int, seed: int, gamma_t: float = DEFAULT_GAMMA_T,
                   pathloss_offset_db: float = 0.0, workers: int = 1,
                   metadata: Optional[ReportMetadata] = None) -> ExperimentReport:
    """TBBA alone over every MS of `n_cells` cells (uses the same cell seeds as the benchmark)."""
    per_cell = _tbba_errors(cfg, n_cells, seed, (gamma_t,), pathloss_offset_db, workers)
    errors = [UnitError(unit=i, model=TBBA, combo="all", error=e[0]) for i, (e, _) in enumerate(per_cell)]
    baselines = [b for _, b in per_cell]
    meta = (metadata or ReportMetadata()).model_copy(update={
        "study": "tbba", "master_seed": seed, "n_units": n_cells,
        "extra": {"gamma_t": repr(gamma_t), "pathloss_offset_db": repr(pathloss_offset_db)},
    })
    return make_report_rows(errors, baselines, meta)


def gamma_t_sweep(cfg: CellConfig, n_cells: int, seed: int, gammas: Sequence[float],
                  pathloss_offset_db: float = 0.0, workers: int = 1) -> List[Tuple[float, float]]:
    """Mean TBBA error for each probability threshold in `gammas`."""
    per_cell = _tbba_errors(cfg, n_cells, seed, tuple(gammas), pathloss_offset_db, workers)
    return [(g, _mean_std([row[j] for row, _ in per_cell])[0]) for j, g in enumerate(gammas)]
