import json
import logging
import struct
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np

from app.database.storage import atomic_write
from app.models.dataset_model import Scaler
from app.models.learner_model import ModelSpec, NnParams, TrainedModel
from app.utils.exceptions import ModelFormatError

logger = logging.getLogger(__name__)

MAGIC = b"BAMODEL1"
FORMAT_VERSION = 1
FLOAT = np.dtype("<f8")

# magic | uint32 LE header length | UTF-8 JSON header | per layer: W (row-major), b; all float64 LE


def model_header(model: TrainedModel) -> Dict[str, Any]:
    return {
        "version": FORMAT_VERSION,
        "kind": model.spec.kind.value,
        "hidden_layout": list(model.spec.hidden_layout),
        "alpha": model.spec.alpha,
        "seed": model.spec.seed,
        "gamma_l": model.gamma_l,
        "scaler": None if model.scaler is None else model.scaler.model_dump(mode="json"),
        "shapes": [list(s) for s in model.params.shapes],
    }


def encode_model(model: TrainedModel) -> bytes:
    header = json.dumps(model_header(model), sort_keys=True).encode("utf-8")
    payload = b"".join(
        np.ascontiguousarray(a, dtype=FLOAT).tobytes()
        for w, b in zip(model.params.weights, model.params.biases) for a in (w, b)
    )
    return MAGIC + struct.pack("<I", len(header)) + header + payload


def save_model(model: TrainedModel, path: Union[str, Path]) -> None:
    with atomic_write(path, "wb") as f:
        f.write(encode_model(model))
    logger.info("model saved to %s", path)


def read_header(blob: bytes, source: str = "<bytes>") -> Dict[str, Any]:
    if blob[:len(MAGIC)] != MAGIC:
        raise ModelFormatError(f"{source}: not a model file (bad magic)")
    if len(blob) < len(MAGIC) + 4:
        raise ModelFormatError(f"{source}: truncated header")
    (size,) = struct.unpack_from("<I", blob, len(MAGIC))
    start = len(MAGIC) + 4
    if len(blob) < start + size:
        raise ModelFormatError(f"{source}: truncated header")
    try:
        header = json.loads(blob[start:start + size].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as err:
        raise ModelFormatError(f"{source}: unreadable header ({err})")
    if header.get("version") != FORMAT_VERSION:
        raise ModelFormatError(f"{source}: unsupported format version {header.get('version')!r}")
    header["_payload_offset"] = start + size
    return header


def decode_model(blob: bytes, source: str = "<bytes>") -> TrainedModel:
    header = read_header(blob, source)
    offset = header.pop("_payload_offset")
    try:
        shapes = [(int(r), int(c)) for r, c in header["shapes"]]
        expected = sum(r * c + c for r, c in shapes) * FLOAT.itemsize
        if len(blob) - offset != expected:
            raise ModelFormatError(f"{source}: payload is {len(blob) - offset} bytes, shapes need {expected}")
        flat = np.frombuffer(blob, dtype=FLOAT, offset=offset)
        weights, biases, pos = [], [], 0
        for r, c in shapes:
            weights.append(flat[pos:pos + r * c].reshape(r, c))
            pos += r * c
            biases.append(flat[pos:pos + c])
            pos += c
        spec = ModelSpec(kind=header["kind"], hidden_layout=tuple(header["hidden_layout"]),
                         alpha=header["alpha"], seed=header["seed"])
        scaler = None if header["scaler"] is None else Scaler(**header["scaler"])
        return TrainedModel(spec=spec, params=NnParams(weights=weights, biases=biases), scaler=scaler,
                            gamma_l=header["gamma_l"])
    except (KeyError, TypeError, ValueError) as err:
        raise ModelFormatError(f"{source}: inconsistent header ({err})")


def load_model(path: Union[str, Path]) -> TrainedModel:
    return decode_model(Path(path).read_bytes(), str(path))


def describe_model(path: Union[str, Path]) -> Dict[str, Any]:
    """Header of a model file, validated against its payload."""
    blob = Path(path).read_bytes()
    decode_model(blob, str(path))
    header = read_header(blob, str(path))
    header.pop("_payload_offset")
    return header
