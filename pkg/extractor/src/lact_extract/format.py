"""LACT activation-file writer.

Layout: magic "LACT", then u32 version, u32 layer, u32 n, u32 d (all little
endian), then n*d float32 LE row-major activation values, then n label bytes
where 0xFF means unlabeled.
"""

import struct

import numpy as np

MAGIC = b"LACT"
VERSION = 1
UNLABELED = 0xFF


def write_lact(path, layer, values, labels=None):
    """Write one layer's activations; values is (n, d) float-convertible."""
    values = np.asarray(values, dtype=np.float32)
    if values.ndim != 2:
        raise ValueError(f"values must be (n, d), got shape {values.shape}")
    if not np.all(np.isfinite(values)):
        raise ValueError("activations must be finite")
    n, d = values.shape
    if labels is not None:
        labels = [int(l) for l in labels]
        if len(labels) != n:
            raise ValueError(f"{len(labels)} labels for {n} rows")
        if any(not 0 <= l < UNLABELED for l in labels):
            raise ValueError("labels must be in [0, 254]")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<4I", VERSION, layer, n, d))
        f.write(np.ascontiguousarray(values, dtype="<f4").tobytes())
        if labels is None:
            f.write(bytes([UNLABELED]) * n)
        else:
            f.write(bytes(labels))
