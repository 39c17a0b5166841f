"""Self-describing binary checkpoint container.

Layout: magic, uint32 little-endian JSON header length, UTF-8 JSON header,
then the named arrays concatenated as little-endian float32. The header
records the format version, arbitrary architecture metadata, and the name,
shape and order of every array, so a file can be loaded without outside
knowledge. Round-trips are bit-exact for float32 data.
"""

from __future__ import annotations

import json
import struct

import numpy as np

MAGIC = b"CDCKPT1\n"
FORMAT_VERSION = 1


def save_checkpoint(path, arrays: dict[str, np.ndarray], meta: dict | None = None):
    header = {
        "format_version": FORMAT_VERSION,
        "meta": meta or {},
        "arrays": [{"name": k, "shape": list(v.shape)} for k, v in arrays.items()],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for v in arrays.values():
            fh.write(np.ascontiguousarray(v, dtype="<f4").tobytes())


def load_checkpoint(path):
    """Returns (arrays, meta)."""
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise ValueError(f"{path}: not a checkpoint file")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        if header["format_version"] != FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint version "
                             f"{header['format_version']}")
        arrays = {}
        for spec in header["arrays"]:
            count = int(np.prod(spec["shape"])) if spec["shape"] else 1
            buf = fh.read(4 * count)
            arrays[spec["name"]] = np.frombuffer(buf, dtype="<f4").reshape(
                spec["shape"]).copy()
    return arrays, header["meta"]
