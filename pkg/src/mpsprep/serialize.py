"""JSON and CSV files for tensors, bases and reports.

Complex numbers are stored as ``[re, im]`` pairs. JSON output is sorted and uses Python's
shortest round-trip float repr, so equal inputs give byte-identical files; CSV floats are
written with 17 significant digits. Every file is written to a temporary sibling first and
renamed into place.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import ValidationError

from .bases import BasisValidationError, UnitaryErrorBasis
from .linalg import MpsprepError, ShapeError
from .mps import MPSTensor

logger = logging.getLogger(__name__)


class FormatError(MpsprepError):
    pass


# ---------------------------------------------------------------------------
# Encoding
# ---------------------------------------------------------------------------


def encode_complex(arr: np.ndarray) -> list:
    """Nested lists with each entry as ``[re, im]``."""
    arr = np.asarray(arr, dtype=np.complex128)
    return np.stack([arr.real, arr.imag], axis=-1).tolist()


def decode_complex(data, what: str = "array") -> np.ndarray:
    try:
        arr = np.asarray(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise FormatError(f"{what} is not a nested list of [re, im] pairs") from exc
    if arr.ndim == 0 or arr.shape[-1] != 2:
        raise FormatError(f"{what} entries must be [re, im] pairs, got shape {arr.shape}")
    return arr[..., 0] + 1j * arr[..., 1]


def _default(obj: Any):
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return encode_complex(obj)
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=_default) + "\n"


# ---------------------------------------------------------------------------
# Tensors and bases
# ---------------------------------------------------------------------------


def tensor_to_dict(a: MPSTensor) -> dict:
    return {"kind": "mps-tensor", "name": a.name, "shape": list(a.data.shape), "data": encode_complex(a.data)}


def tensor_from_dict(data: dict) -> MPSTensor:
    if not isinstance(data, dict) or "data" not in data:
        raise FormatError("tensor file needs a 'data' field")
    arr = decode_complex(data["data"], "tensor data")
    if "shape" in data and list(arr.shape) != list(data["shape"]):
        raise FormatError(f"tensor data has shape {list(arr.shape)}, header says {data['shape']}")
    try:
        return MPSTensor(data=arr, name=str(data.get("name", "custom")))
    except (ShapeError, ValidationError) as exc:
        raise FormatError(f"invalid tensor: {exc}") from exc


def basis_to_dict(basis: UnitaryErrorBasis) -> dict:
    return {
        "kind": "error-basis",
        "name": basis.name,
        "dim": basis.dim,
        "labels": [basis.label(k) for k in range(len(basis.elements))],
        "elements": [encode_complex(v) for v in basis.elements],
    }


def basis_from_dict(data: dict) -> UnitaryErrorBasis:
    if not isinstance(data, dict) or "elements" not in data:
        raise FormatError("basis file needs an 'elements' field")
    elements = [decode_complex(v, f"element {k}") for k, v in enumerate(data["elements"])]
    try:
        return UnitaryErrorBasis(
            dim=int(data.get("dim", elements[0].shape[0])),
            elements=elements,
            labels=data.get("labels"),
            name=str(data.get("name", "custom")),
        )
    except (BasisValidationError, ValidationError) as exc:
        raise FormatError(f"invalid basis: {exc}") from exc


def _read_json(path: str | Path) -> dict:
    path = Path(path)
    try:
        with open(path) as f:
            return json.load(f)
    except FileNotFoundError as exc:
        raise FormatError(f"file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path} is not valid JSON: {exc}") from exc


def load_tensor(path: str | Path) -> MPSTensor:
    data = _read_json(path)
    return tensor_from_dict(data.get("tensor", data) if isinstance(data, dict) else data)


def dump_tensor(a: MPSTensor, path: str | Path, extra: dict | None = None) -> Path:
    payload = tensor_to_dict(a)
    if extra:
        payload.update(extra)
    return write_text(path, dumps(payload))


def load_basis(path: str | Path) -> UnitaryErrorBasis:
    data = _read_json(path)
    return basis_from_dict(data.get("basis", data) if isinstance(data, dict) else data)


def dump_basis(basis: UnitaryErrorBasis, path: str | Path) -> Path:
    return write_text(path, dumps(basis_to_dict(basis)))


# ---------------------------------------------------------------------------
# Atomic file output
# ---------------------------------------------------------------------------


def write_text(path: str | Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    logger.debug("wrote %s (%d bytes)", path, len(text))
    return path


def dump_report(report: dict, path: str | Path) -> Path:
    return write_text(path, dumps(report))


def _cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    if value is None:
        return ""
    return str(value)


def csv_text(rows: list[dict], columns: list[str] | None = None) -> str:
    if columns is None:
        columns = list(rows[0]) if rows else []
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def write_csv(rows: list[dict], path: str | Path, columns: list[str] | None = None) -> Path:
    return write_text(path, csv_text(rows, columns))
