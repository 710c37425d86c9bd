"""Flat binary checkpoint container.

A text manifest (one ``name,dim0 dim1 ...`` line per array) followed by a
``DATA`` marker line and the concatenated little-endian float64 payloads
in manifest order.
"""

from __future__ import annotations

import numpy as np

MAGIC = "qosdiff-checkpoint 1"


def save_arrays(path, arrays):
    """Write an ordered mapping of name -> float array."""
    with open(path, "wb") as f:
        lines = [MAGIC]
        for name, arr in arrays.items():
            dims = " ".join(str(s) for s in np.asarray(arr).shape)
            lines.append(f"{name},{dims}")
        lines.append("DATA")
        f.write(("\n".join(lines) + "\n").encode("ascii"))
        for arr in arrays.values():
            f.write(np.asarray(arr, dtype="<f8").tobytes())


def load_arrays(path):
    """Read a container written by :func:`save_arrays`."""
    with open(path, "rb") as f:
        blob = f.read()
    header_end = blob.index(b"DATA\n") + len(b"DATA\n")
    lines = blob[:header_end].decode("ascii").splitlines()
    if lines[0] != MAGIC:
        raise ValueError(f"{path} is not a checkpoint container")
    arrays = {}
    offset = header_end
    for line in lines[1:-1]:
        name, _, dims = line.partition(",")
        shape = tuple(int(s) for s in dims.split()) if dims.strip() else ()
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(
            blob, dtype="<f8", count=count, offset=offset
        ).reshape(shape)
        arrays[name] = arr.astype(np.float64)
        offset += count * 8
    return arrays
