"""SGSW container writer (trainer side).

Byte layout: magic "SGSW", version u32 LE, header-length u64 LE, UTF-8
JSON header {arch, alpha_bar, tensors:[{name, shape, dtype:"f32",
offset, nbytes}]}, then the raw little-endian float32 payload; offsets
are relative to the payload start.  Tensors are written sorted by name
and the JSON uses sorted keys with compact separators, so re-exporting
identical weights is byte-identical.
"""
from __future__ import annotations

import json
import os
import struct
import tempfile

import numpy as np

MAGIC = b"SGSW"
VERSION = 1


def export_weights(path, arch: dict, alpha_bar: np.ndarray, tensors: dict,
                   train_meta: dict | None = None) -> None:
    """Write the container atomically (partial files are cleaned up)."""
    manifest = []
    offset = 0
    blobs = []
    for name in sorted(tensors):
        arr = np.ascontiguousarray(np.asarray(tensors[name], dtype="<f4"))
        nbytes = arr.size * 4
        manifest.append({
            "name": name, "shape": list(arr.shape), "dtype": "f32",
            "offset": offset, "nbytes": nbytes,
        })
        blobs.append(arr.tobytes())
        offset += nbytes
    header = {
        "arch": arch,
        "alpha_bar": [float(a) for a in np.asarray(alpha_bar, dtype=np.float64)],
        "tensors": manifest,
    }
    if train_meta:
        header["train_meta"] = train_meta
    hbytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")

    path = os.fspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".",
                               prefix=".sgsw-partial-")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(MAGIC)
            f.write(struct.pack("<I", VERSION))
            f.write(struct.pack("<Q", len(hbytes)))
            f.write(hbytes)
            for b in blobs:
                f.write(b)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def export_model(path, model, alpha_bar, train_meta=None) -> None:
    export_weights(path, model.arch, alpha_bar, model.named_tensors(),
                   train_meta=train_meta)
