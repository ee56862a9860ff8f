"""Binary file formats shared by all modules.

Every artifact file is a single line of JSON (the header, terminated by a
newline) followed by a little-endian float64 payload in C order. The header
always carries ``shape`` so the payload can be read back without other
context.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

_DTYPE = np.dtype("<f8")


def write_blob(path, header: dict, array) -> Path:
    path = Path(path)
    arr = np.ascontiguousarray(np.asarray(array, dtype=_DTYPE))
    head = dict(header)
    head["shape"] = list(arr.shape)
    line = json.dumps(head, sort_keys=True, separators=(",", ":"))
    if "\n" in line:
        raise ValueError("header must serialise to a single line")
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(line.encode("utf-8") + b"\n")
        fh.write(arr.tobytes(order="C"))
    return path


def read_blob(path) -> tuple[dict, np.ndarray]:
    with open(path, "rb") as fh:
        line = fh.readline()
        header = json.loads(line.decode("utf-8"))
        payload = fh.read()
    shape = tuple(header["shape"])
    expected = int(np.prod(shape, dtype=np.int64)) * _DTYPE.itemsize
    if len(payload) != expected:
        raise ValueError(
            f"{path}: payload has {len(payload)} bytes, header shape {shape} needs {expected}"
        )
    arr = np.frombuffer(payload, dtype=_DTYPE).reshape(shape).astype(np.float64)
    return header, arr
