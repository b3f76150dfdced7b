"""Dataset access through the retrieval toolkit's public file format.

The trainer talks to the scheme-construction package only through files,
so it carries its own reader for the raw_f64 layout: bytes ``LPR1``, three
little-endian u64 (samples, files, symbols per file), then the float64
payload.
"""

from __future__ import annotations

import struct

import numpy as np

RAW_MAGIC = b"LPR1"


def load_raw_f64(path):
    """Read a raw_f64 dataset into an (n, M, beta) float64 array."""
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != RAW_MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}, expected {RAW_MAGIC!r}")
        header = f.read(24)
        if len(header) != 24:
            raise ValueError(f"{path}: truncated header")
        n, m, beta = struct.unpack("<QQQ", header)
        payload = f.read(n * m * beta * 8)
        if len(payload) != n * m * beta * 8:
            raise ValueError(f"{path}: truncated payload")
    return np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(n, m, beta)


def gaussian_benchmark(n, seed, sigma=3.0):
    """The four-file benchmark source, for self-contained test runs."""
    means = np.array(
        [[3, 3, 3], [3, -3, -3], [-3, 3, -3], [-3, -3, 3]], dtype=np.float64
    )
    rng = np.random.default_rng(seed)
    return means[None, :, :] + sigma * rng.standard_normal((n, 4, 3))
