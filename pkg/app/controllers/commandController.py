import json
import logging
import sys
from argparse import Namespace
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from app.config import RunConfig, load_run_config, settings
from app.controllers.channelController import generate_cell
from app.controllers.datasetController import COMBO_FAMILIES, combo_by_name
from app.controllers.experimentController import (
    gamma_t_sweep,
    run_external,
    run_generalization,
    run_stochastic_benchmark,
    run_tbba_study,
)
from app.database.dataset_store import parse_dataset_csv, write_dataset_csv
from app.database.model_store import describe_model, save_model
from app.database.report_store import render_markdown, write_report, write_series_csv
from app.middlewares.errorMiddleware import handle_cli_errors
from app.models.dataset_model import FeatureCombo
from app.models.experiment_model import (
    MODEL_ORDER,
    ExperimentReport,
    GeneralizationSpec,
    ReportMetadata,
    StochasticBenchmarkSpec,
    gamma_grid_from_step,
)
from app.models.learner_model import TrainedModel
from app.utils.exceptions import UsageError
from app.utils.seeding import derive_seed

logger = logging.getLogger(__name__)

SWEEP_STEP = 0.05


def _seed(args: Namespace) -> int:
    return settings.default_seed if args.seed is None else args.seed


def _workers(args: Namespace) -> int:
    return settings.workers if args.workers is None else args.workers


def _combos(args: Namespace, family: str, default: Sequence[FeatureCombo]) -> Tuple[FeatureCombo, ...]:
    if not args.combos:
        return tuple(default)
    try:
        return tuple(combo_by_name(name.strip(), family) for name in args.combos.split(",") if name.strip())
    except ValueError as err:
        raise UsageError(f"--combos: {err}")


def _models(args: Namespace, allowed: Sequence[str]) -> Tuple[str, ...]:
    if not args.models:
        return tuple(allowed)
    models = tuple(m.strip() for m in args.models.split(",") if m.strip())
    unknown = [m for m in models if m not in allowed]
    if unknown or not models:
        raise UsageError(f"--models: unknown model(s) {unknown}; choose from {list(allowed)}")
    return models


def _metadata(cfg: RunConfig, acceptance: bool = False) -> ReportMetadata:
    return ReportMetadata(config_hash=cfg.config_hash(), overrides=cfg.overrides(), grids=cfg.grids(acceptance))


def _emit(report: ExperimentReport, out: Optional[str]) -> None:
    """Markdown to stdout without --out; otherwise the format follows the file suffix."""
    if out is None:
        sys.stdout.write(render_markdown(report))
        return
    fmt = "markdown" if Path(out).suffix.lower() in (".md", ".markdown") else "csv"
    write_report(report, fmt, out)


@handle_cli_errors
def gen_stochastic(args: Namespace) -> int:
    cfg = load_run_config(args.config)
    seed = _seed(args)
    n = args.cells or 1
    if args.out is None:
        raise UsageError("gen-stochastic needs --out (a file for one cell, a directory for several)")
    cell_cfg = cfg.cell_config()
    if n == 1:
        write_dataset_csv(generate_cell(cell_cfg, derive_seed(seed, "cell", 0)), args.out)
        return 0
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i in range(n):
        write_dataset_csv(generate_cell(cell_cfg, derive_seed(seed, "cell", i)), out / f"cell_{i:04d}.csv")
    logger.info("%d cells written to %s", n, out)
    return 0


@handle_cli_errors
def run_stochastic(args: Namespace) -> int:
    cfg = load_run_config(args.config)
    acceptance = args.acceptance_mode
    n_cells = args.cells or (cfg.acceptance_cells if acceptance else cfg.n_cells)
    spec = StochasticBenchmarkSpec(
        n_cells=n_cells, cell=cfg.cell_config(),
        combos=_combos(args, "stochastic", COMBO_FAMILIES["stochastic"].values()),
        models=_models(args, MODEL_ORDER), split=cfg.split_spec(), master_seed=_seed(args),
        learner_seed=args.learner_seed, spaces=cfg.search_spaces(acceptance), train=cfg.train_config(),
        gamma_t=cfg.gamma_t, workers=_workers(args),
    )
    _emit(run_stochastic_benchmark(spec, _metadata(cfg, acceptance)), args.out)
    return 0


@handle_cli_errors
def run_generalization_cmd(args: Namespace) -> int:
    cfg = load_run_config(args.config)
    acceptance = args.acceptance_mode
    default = GeneralizationSpec.model_fields["combos"].default
    spec = GeneralizationSpec(
        group_size=cfg.group_size, n_train=cfg.group_train, n_validation=cfg.group_validation,
        n_test=cfg.group_test, n_groups=args.groups or cfg.n_groups, cell=cfg.cell_config(),
        combos=_combos(args, "stochastic", default), models=_models(args, MODEL_ORDER),
        master_seed=_seed(args), learner_seed=args.learner_seed, spaces=cfg.search_spaces(acceptance),
        train=cfg.train_config(), gamma_t=cfg.gamma_t, workers=_workers(args),
    )
    _emit(run_generalization(spec, _metadata(cfg, acceptance)), args.out)
    return 0


@handle_cli_errors
def run_external_cmd(args: Namespace) -> int:
    if args.data is None:
        raise UsageError("run-external needs --data PATH")
    cfg = load_run_config(args.config)
    dataset = parse_dataset_csv(args.data)
    sink = None
    if args.models_dir:
        models_dir = Path(args.models_dir)
        models_dir.mkdir(parents=True, exist_ok=True)

        def sink(name: str, combo: str, model: TrainedModel) -> None:
            save_model(model, models_dir / f"{name}_{combo}.bamodel")

    report = run_external(
        dataset, combos=_combos(args, "external", COMBO_FAMILIES["external"].values()),
        split=cfg.split_spec(external=True), models=_models(args, ("nn", "gr", "lr")),
        spaces=cfg.search_spaces(args.acceptance_mode), train_cfg=cfg.train_config(), seed=_seed(args),
        n_splits=args.splits, model_sink=sink, metadata=_metadata(cfg, args.acceptance_mode),
    )
    _emit(report, args.out)
    return 0


@handle_cli_errors
def eval_tbba(args: Namespace) -> int:
    cfg = load_run_config(args.config)
    gamma_t = cfg.gamma_t if args.gamma_t is None else args.gamma_t
    if not 0 <= gamma_t <= 1:
        raise UsageError(f"--gamma-t must lie in [0, 1], got {gamma_t}")
    n_cells = args.cells or (cfg.acceptance_cells if args.acceptance_mode else cfg.n_cells)
    cell_cfg = cfg.cell_config()
    report = run_tbba_study(cell_cfg, n_cells, _seed(args), gamma_t, args.pathloss_offset_db, _workers(args),
                            metadata=_metadata(cfg, args.acceptance_mode))
    _emit(report, args.out)
    if args.series:
        grid = [g for g in gamma_grid_from_step(SWEEP_STEP) if 0 < g < 1]
        points: List[Tuple[float, float]] = gamma_t_sweep(cell_cfg, n_cells, _seed(args), grid,
                                                          args.pathloss_offset_db, _workers(args))
        write_series_csv(points, ("gamma_t", "mean_error"), args.series)
    return 0


@handle_cli_errors
def inspect_model(args: Namespace) -> int:
    if args.model is None:
        raise UsageError("inspect-model needs --model PATH")
    sys.stdout.write(json.dumps(describe_model(args.model), indent=2, sort_keys=True) + "\n")
    return 0
