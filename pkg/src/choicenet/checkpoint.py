"""Versioned checkpoint files for named float64 arrays.

Layout (magic string "CHKPT1"):

    CHKPT1\n
    <n_arrays>\n
    <name> <dim0> <dim1> ...\n      (one line per array; scalars have no dims)
    ...
    <raw float64 little-endian payload, arrays concatenated in header order>
"""

from __future__ import annotations

import numpy as np

from .errors import DataError

MAGIC = b"CHKPT1"


def save_checkpoint(path, arrays: dict[str, np.ndarray]):
    with open(path, "wb") as f:
        f.write(MAGIC + b"\n")
        f.write(f"{len(arrays)}\n".encode())
        for name, arr in arrays.items():
            if " " in name:
                raise DataError(f"checkpoint: array name may not contain spaces: {name!r}")
            dims = " ".join(str(d) for d in np.asarray(arr).shape)
            f.write(f"{name} {dims}".rstrip().encode() + b"\n")
        for arr in arrays.values():
            f.write(np.asarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as f:
        if f.readline().rstrip(b"\n") != MAGIC:
            raise DataError(f"checkpoint: bad magic in {path}")
        try:
            count = int(f.readline())
        except ValueError as e:
            raise DataError(f"checkpoint: bad array count in {path}") from e
        headers = []
        for _ in range(count):
            parts = f.readline().decode().split()
            if not parts:
                raise DataError(f"checkpoint: truncated header in {path}")
            headers.append((parts[0], tuple(int(d) for d in parts[1:])))
        out = {}
        for name, shape in headers:
            n = int(np.prod(shape)) if shape else 1
            buf = f.read(n * 8)
            if len(buf) != n * 8:
                raise DataError(f"checkpoint: truncated payload for {name!r} in {path}")
            out[name] = np.frombuffer(buf, dtype="<f8").reshape(shape).copy()
        return out
