import csv
import io
import logging
import math
from pathlib import Path
from typing import Dict, List, Union

import numpy as np
from pydantic import ValidationError

from app.database.storage import atomic_write
from app.models.dataset_model import FEATURE_NAMES, Dataset
from app.utils.exceptions import DatasetParseError

logger = logging.getLogger(__name__)

# file column -> feature name; units live in the column names
COLUMNS: Dict[str, str] = {
    "d_m": "d",
    "theta_rad": "theta",
    "cm_power_db": "cm_power",
    "delay_s": "delay",
    "mpc_power_dbm": "mpc_power",
}
LABEL_COLUMN = "label"
HEADER: List[str] = [*COLUMNS, LABEL_COLUMN]


def format_float(x: float) -> str:
    # repr is the shortest string that round-trips
    return "" if math.isnan(x) else repr(float(x))


def parse_dataset_csv(path: Union[str, Path]) -> Dataset:
    """Read a dataset file. Columns may come in any order; feature columns that are empty throughout are dropped."""
    path = str(path)
    blob = Path(path).read_bytes()
    try:
        text = blob.decode("utf-8-sig")
    except UnicodeDecodeError as err:
        line = blob.count(b"\n", 0, err.start) + 1
        raise DatasetParseError(path, line, f"not UTF-8 text (byte 0x{blob[err.start]:02x})")
    reader = csv.reader(io.StringIO(text, newline=""))
    try:
        header = next(reader, None)
        if header is None:
            raise DatasetParseError(path, 1, "missing header")
        header = [h.strip() for h in header]
        unknown = [h for h in header if h not in HEADER]
        if unknown or LABEL_COLUMN not in header or len(set(header)) != len(header):
            raise DatasetParseError(path, 1, f"bad header {header}; expected columns from {HEADER} including 'label'")
        feature_cols = [(header.index(c), COLUMNS[c]) for c in COLUMNS if c in header]
        label_col = header.index(LABEL_COLUMN)

        rows: List[List[float]] = []
        labels: List[int] = []
        lines: List[int] = []
        for record in reader:
            line = reader.line_num
            if not any(cell.strip() for cell in record):
                continue
            if len(record) != len(header):
                raise DatasetParseError(path, line, f"expected {len(header)} fields, got {len(record)}")
            raw_label = record[label_col].strip()
            if raw_label not in ("0", "1"):
                raise DatasetParseError(path, line, f"label must be 0 or 1, got {raw_label!r}")
            row = []
            for i, name in feature_cols:
                cell = record[i].strip()
                if not cell:
                    row.append(math.nan)
                    continue
                try:
                    value = float(cell)
                except ValueError:
                    raise DatasetParseError(path, line, f"malformed number {cell!r} in column {header[i]}")
                if not math.isfinite(value):
                    raise DatasetParseError(path, line, f"non-finite value in column {header[i]}")
                row.append(value)
            if all(math.isnan(v) for v in row):
                raise DatasetParseError(path, line, "no feature present")
            rows.append(row)
            labels.append(int(raw_label))
            lines.append(line)
    except csv.Error as err:
        raise DatasetParseError(path, reader.line_num or 1, f"malformed CSV ({err})")

    if not rows:
        raise DatasetParseError(path, 2, "no data rows")
    values = np.array(rows, dtype=np.float64)
    keep = [j for j in range(values.shape[1]) if not np.all(np.isnan(values[:, j]))]
    features = tuple(feature_cols[j][1] for j in keep)
    try:
        ds = Dataset(features=features, values=values[:, keep], labels=labels)
    except ValidationError as err:
        # row-level range violations (d <= 0, |theta| > pi): report the first offending row
        raise DatasetParseError(path, lines[_first_bad_row(values[:, keep], features)], err.errors()[0]["msg"])
    logger.info("loaded %d examples with features %s from %s", ds.N, list(features), path)
    return ds


def _first_bad_row(values: np.ndarray, features) -> int:
    for r, row in enumerate(values):
        for name, x in zip(features, row):
            if math.isnan(x):
                continue
            if (name in ("d", "delay") and x <= 0) or (name == "theta" and abs(x) > math.pi):
                return r
    return 0


def write_dataset_csv(ds: Dataset, path: Union[str, Path]) -> None:
    """All five feature columns are written; absent ones stay empty."""
    with atomic_write(path) as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(HEADER)
        for row, label in zip(ds.values, ds.labels):
            by_name = dict(zip(ds.features, row))
            writer.writerow([format_float(by_name.get(n, math.nan)) for n in FEATURE_NAMES] + [int(label)])
