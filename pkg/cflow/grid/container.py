# cflow/grid/container.py
"""
Binary field container.

Layout:
  • 8-byte magic ``CFLOWFLD``
  • header length as unsigned 64-bit little-endian
  • UTF-8 JSON header {dims, lengths, rank, components, component_shape}
  • raw little-endian float64 payload, nodes row-major (axis 3 fastest) then components

Map snapshots additionally get a ``<name>.json`` sidecar with linear part and target.
"""

import json
import logging
import os
import struct
from typing import Any, Dict

import numpy as np

from cflow.exceptions import FieldError
from cflow.grid.field import Field
from cflow.grid.lattice import Grid4

logger = logging.getLogger(__name__)

MAGIC = b"CFLOWFLD"


def _header(field: Field) -> Dict[str, Any]:
    return {
        "dims":            list(field.grid.dims),
        "lengths":         list(field.grid.lengths),
        "rank":            field.rank,
        "components":      field.n_components,
        "component_shape": list(field.component_shape),
    }


def write_field(path: str, field: Field) -> None:
    head = json.dumps(_header(field), sort_keys=True).encode("utf-8")
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<Q", len(head)))
        f.write(head)
        f.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes(order="C"))
    logger.debug(f"wrote {field.rank} field {field.values.shape} -> {path}")


def read_field(path: str) -> Field:
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < 16 or blob[:8] != MAGIC:
        raise FieldError(f"{path}: not a cflow field container (bad magic or {len(blob)} bytes)")
    (n,) = struct.unpack("<Q", blob[8:16])
    try:
        head = json.loads(blob[16:16 + n].decode("utf-8"))
        grid  = Grid4(tuple(head["dims"]), tuple(head["lengths"]))
        shape = tuple(head["dims"]) + tuple(head["component_shape"])
        rank  = head["rank"]
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError) as e:
        raise FieldError(f"{path}: corrupt header ({type(e).__name__}: {e})") from e

    payload = blob[16 + n:]
    if len(payload) % 8:
        raise FieldError(f"{path}: payload of {len(payload)} bytes is not a whole number of f8 values")
    data = np.frombuffer(payload, dtype="<f8")
    if data.size != int(np.prod(shape, dtype=int)):
        raise FieldError(f"{path}: payload has {data.size} values, header implies {shape}")
    return Field(grid, rank, data.reshape(shape))


def write_sidecar(path: str, payload: Dict[str, Any]) -> None:
    with open(path, "w") as f:
        json.dump(payload, f, sort_keys=True)


def read_sidecar(path: str) -> Dict[str, Any]:
    with open(path, "r") as f:
        return json.load(f)
