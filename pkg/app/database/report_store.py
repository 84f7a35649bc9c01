import csv
import io
import logging
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Union

from pydantic import ValidationError

from app.database.dataset_store import format_float
from app.database.storage import atomic_write
from app.models.experiment_model import BaselineRow, ExperimentReport, ReportMetadata, ReportRow
from app.utils.exceptions import ReportError

logger = logging.getLogger(__name__)

REPORT_HEADER = ["model", "combo", "mean", "std", "n"]
BASELINE_MODEL = "baseline"
BASELINE_COMBO = "all"
FORMATS = ("csv", "markdown")


def metadata_path(path: Union[str, Path]) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta.json")


def _check(report: ExperimentReport) -> None:
    if not report.rows:
        raise ReportError("refusing to write an empty report")


def render_csv(report: ExperimentReport) -> str:
    _check(report)
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(REPORT_HEADER)
    for r in report.rows:
        writer.writerow([r.model, r.combo, format_float(r.mean), format_float(r.std), r.n])
    if report.baseline is not None:
        b = report.baseline
        writer.writerow([BASELINE_MODEL, BASELINE_COMBO, format_float(b.mean), format_float(b.std), b.n])
    return out.getvalue()


def render_markdown(report: ExperimentReport) -> str:
    """Models as rows, combinations as columns, cells 'mean ± std'."""
    _check(report)
    combos = report.combos
    meta = report.metadata
    lines = [f"# {meta.study or 'experiment'} report", ""]
    if meta.master_seed is not None:
        lines.append(f"seed {meta.master_seed}, config {meta.config_hash[:12] or 'n/a'}, {meta.n_units} units")
        lines.append("")
    lines.append("| model | " + " | ".join(combos) + " |")
    lines.append("|---|" + "---|" * len(combos))
    for model in report.models:
        cells = []
        for combo in combos:
            try:
                r = report.row(model, combo)
            except KeyError:
                cells.append("-")
                continue
            cell = f"{r.mean:.3f} ± {r.std:.3f}"
            cells.append(cell + " (n=1)" if r.single_unit else cell)
        lines.append(f"| {model} | " + " | ".join(cells) + " |")
    if report.baseline is not None:
        b = report.baseline
        lines += ["", f"cmWave-only baseline: {b.mean:.3f} ± {b.std:.3f} over {b.n} units"]
    if meta.excluded_units:
        lines += ["", f"excluded units: {', '.join(str(e.unit) for e in meta.excluded_units)}"]
    if meta.overrides:
        lines += ["", "overrides: " + ", ".join(f"{k}={v}" for k, v in sorted(meta.overrides.items()))]
    return "\n".join(lines) + "\n"


def write_report(report: ExperimentReport, fmt: str, path: Union[str, Path]) -> None:
    """Write the table plus a `<path>.meta.json` sidecar holding seeds, config hash and grids."""
    if fmt not in FORMATS:
        raise ReportError(f"unknown report format {fmt!r}; use one of {FORMATS}")
    body = render_csv(report) if fmt == "csv" else render_markdown(report)
    with atomic_write(path) as f:
        f.write(body)
    with atomic_write(metadata_path(path)) as f:
        f.write(report.metadata.model_dump_json(indent=2) + "\n")
    logger.info("report written to %s", path)


def read_report_csv(path: Union[str, Path]) -> ExperimentReport:
    rows: List[ReportRow] = []
    baseline: Optional[BaselineRow] = None
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != REPORT_HEADER:
            raise ReportError(f"{path}:1: expected header {REPORT_HEADER}")
        for record in reader:
            try:
                mean, std, n = float(record["mean"]), float(record["std"]), int(record["n"])
            except (TypeError, ValueError):
                raise ReportError(f"{path}:{reader.line_num}: malformed row")
            if record["model"] == BASELINE_MODEL:
                baseline = BaselineRow(mean=mean, std=std, n=n)
            else:
                rows.append(ReportRow(model=record["model"], combo=record["combo"], mean=mean, std=std, n=n,
                                      single_unit=n == 1))
    if not rows:
        raise ReportError(f"{path}: report has no rows")
    meta = ReportMetadata()
    sidecar = metadata_path(path)
    if sidecar.is_file():
        try:
            meta = ReportMetadata.model_validate_json(sidecar.read_text(encoding="utf-8"))
        except ValidationError as err:
            raise ReportError(f"{sidecar}: {err.errors()[0]['msg']}")
    return ExperimentReport(rows=rows, baseline=baseline, metadata=meta)


def write_series_csv(rows: Iterable[Sequence[float]], header: Sequence[str], path: Union[str, Path]) -> None:
    """Plot data: one header line, one line per point."""
    rows = list(rows)
    if not rows:
        raise ReportError("refusing to write an empty series")
    with atomic_write(path) as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_float(v) if isinstance(v, float) else v for v in row])
