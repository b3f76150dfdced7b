"""Binary file formats: datasets, codebooks, and serialized schemes.

Formats
-------
raw_f64 dataset
    bytes ``LPR1``, then three little-endian unsigned 64-bit integers
    ``n, M, beta``, then ``n*M*beta`` little-endian 64-bit floats.
IDX images
    the standard big-endian IDX3 layout with magic ``0x00000803`` (count,
    rows, cols, then unsigned bytes).  Pixels are rescaled to [-1, 1] via
    ``v / 127.5 - 1`` on load; each image becomes one single-file sample.
codebook
    bytes ``LPQ1``, little-endian u64 ``k`` and ``dim``, then ``k*dim``
    little-endian f64.
scheme container
    bytes ``LPS1``, little-endian u64 ``M, N, beta, k, n_codebooks``, then
    ``M*beta`` f64 file means, then ``n_codebooks`` codebooks of
    ``k * N*beta`` f64 each (1 codebook = shared across subsets,
    ``C(M, N)`` codebooks = one per ascending subset).
"""

from __future__ import annotations

import math
import os
import struct
import tempfile

import numpy as np

from .core import Dataset
from .errors import FormatError

RAW_MAGIC = b"LPR1"
CODEBOOK_MAGIC = b"LPQ1"
SCHEME_MAGIC = b"LPS1"
IDX_IMAGE_MAGIC = 0x00000803

_MAX_ELEMENTS = 1 << 40  # guards against corrupt headers allocating silly sizes


def _read_exact(f, count, what, offset):
    data = f.read(count)
    if len(data) != count:
        raise FormatError(
            f"truncated file while reading {what}: wanted {count} bytes, "
            f"got {len(data)}",
            offset=offset,
        )
    return data


def save_dataset_raw(path, ds):
    """Write a dataset in the raw_f64 format (atomically)."""
    n, m, beta = ds.values.shape
    header = RAW_MAGIC + struct.pack("<QQQ", n, m, beta)
    payload = np.ascontiguousarray(ds.values, dtype="<f8").tobytes()
    _atomic_write(path, header + payload)


def _load_raw_f64(path):
    with open(path, "rb") as f:
        magic = _read_exact(f, 4, "magic", 0)
        if magic != RAW_MAGIC:
            raise FormatError(
                f"bad magic {magic!r}, expected {RAW_MAGIC!r}", offset=0
            )
        n, m, beta = struct.unpack("<QQQ", _read_exact(f, 24, "header", 4))
        if n < 1 or m < 1 or beta < 1 or n * m * beta > _MAX_ELEMENTS:
            raise FormatError(
                f"header shape overflow or empty: n={n}, M={m}, beta={beta}",
                offset=4,
            )
        count = n * m * beta
        data = _read_exact(f, count * 8, "float payload", 28)
        extra = f.read(1)
        if extra:
            raise FormatError("trailing bytes after payload", offset=28 + count * 8)
    values = np.frombuffer(data, dtype="<f8").astype(np.float64)
    return Dataset(values.reshape(n, m, beta))


def _load_idx_images(path):
    with open(path, "rb") as f:
        raw = _read_exact(f, 4, "magic", 0)
        (magic,) = struct.unpack(">I", raw)
        if magic != IDX_IMAGE_MAGIC:
            raise FormatError(
                f"bad IDX magic 0x{magic:08x}, expected 0x{IDX_IMAGE_MAGIC:08x}",
                offset=0,
            )
        count, rows, cols = struct.unpack(">III", _read_exact(f, 12, "header", 4))
        if count < 1 or rows < 1 or cols < 1 or count * rows * cols > _MAX_ELEMENTS:
            raise FormatError(
                f"header shape overflow or empty: {count} x {rows} x {cols}",
                offset=4,
            )
        data = _read_exact(f, count * rows * cols, "pixel payload", 16)
    pixels = np.frombuffer(data, dtype=np.uint8).astype(np.float64)
    # single convention shared with the trainer: pixels map onto [-1, 1]
    values = pixels / 127.5 - 1.0
    values = values.reshape(count, 1, rows * cols)
    return Dataset(values, image_shape=(rows, cols, 1))


def load_dataset(path, format="raw_f64"):
    """Load a dataset file.

    ``format`` is ``"raw_f64"`` or ``"idx_images"``.  IDX pixels are
    rescaled to [-1, 1]; each image is exposed as a one-file sample of
    ``rows * cols`` symbols.
    """
    if format == "raw_f64":
        return _load_raw_f64(path)
    if format == "idx_images":
        return _load_idx_images(path)
    raise ValueError(f"unknown dataset format {format!r}")


def save_idx_images(path, images):
    """Write uint8 images (n, rows, cols) in the IDX3 format."""
    images = np.asarray(images)
    if images.ndim != 3:
        raise ValueError(f"images must have shape (n, rows, cols), got {images.shape}")
    if images.dtype != np.uint8:
        raise ValueError("images must be uint8")
    n, rows, cols = images.shape
    header = struct.pack(">IIII", IDX_IMAGE_MAGIC, n, rows, cols)
    _atomic_write(path, header + images.tobytes())


def save_codebook(path, codebook):
    """Write a codebook in the LPQ1 format."""
    vectors = np.ascontiguousarray(codebook.vectors, dtype="<f8")
    header = CODEBOOK_MAGIC + struct.pack("<QQ", codebook.k, codebook.dim)
    _atomic_write(path, header + vectors.tobytes())


def load_codebook(path):
    from .quantizer import Codebook

    with open(path, "rb") as f:
        magic = _read_exact(f, 4, "magic", 0)
        if magic != CODEBOOK_MAGIC:
            raise FormatError(
                f"bad magic {magic!r}, expected {CODEBOOK_MAGIC!r}", offset=0
            )
        k, dim = struct.unpack("<QQ", _read_exact(f, 16, "header", 4))
        if k < 1 or dim < 1 or k * dim > _MAX_ELEMENTS:
            raise FormatError(f"header shape overflow: k={k}, dim={dim}", offset=4)
        data = _read_exact(f, k * dim * 8, "vectors", 20)
    vectors = np.frombuffer(data, dtype="<f8").astype(np.float64).reshape(k, dim)
    return Codebook(vectors)


def save_scheme(path, scheme):
    """Write a compression scheme in the LPS1 container format."""
    from .quantizer import Codebook  # noqa: F401  (type of scheme.codebooks)

    books = scheme.all_codebooks()
    k = books[0].k
    header = SCHEME_MAGIC + struct.pack(
        "<QQQQQ", scheme.num_files, scheme.subset_size, scheme.beta, k, len(books)
    )
    parts = [header, np.ascontiguousarray(scheme.file_means, dtype="<f8").tobytes()]
    for book in books:
        parts.append(np.ascontiguousarray(book.vectors, dtype="<f8").tobytes())
    _atomic_write(path, b"".join(parts))


def load_scheme(path):
    from .quantizer import Codebook
    from .schemes import CompressionScheme

    with open(path, "rb") as f:
        magic = _read_exact(f, 4, "magic", 0)
        if magic != SCHEME_MAGIC:
            raise FormatError(
                f"bad magic {magic!r}, expected {SCHEME_MAGIC!r}", offset=0
            )
        m, n_sub, beta, k, n_books = struct.unpack(
            "<QQQQQ", _read_exact(f, 40, "header", 4)
        )
        expected_books = math.comb(m, n_sub)
        if n_books not in (1, expected_books):
            raise FormatError(
                f"codebook count {n_books} is neither 1 nor C({m},{n_sub})",
                offset=4,
            )
        if k < 1 or m < 1 or n_sub < 1 or n_sub > m or beta < 1:
            raise FormatError("header values out of range", offset=4)
        means = np.frombuffer(
            _read_exact(f, m * beta * 8, "file means", 44), dtype="<f8"
        ).astype(np.float64).reshape(m, beta)
        dim = n_sub * beta
        books = []
        offset = 44 + m * beta * 8
        for _ in range(n_books):
            data = _read_exact(f, k * dim * 8, "codebook", offset)
            books.append(
                Codebook(np.frombuffer(data, dtype="<f8").astype(np.float64).reshape(k, dim))
            )
            offset += k * dim * 8
    bits_total = int(round(math.log2(k)))
    if 2**bits_total != k:
        raise FormatError(f"codebook size {k} is not a power of two", offset=4)
    subset_books = None
    if n_books > 1:
        import itertools

        subsets = list(itertools.combinations(range(1, m + 1), n_sub))
        subset_books = dict(zip(subsets, books))
    return CompressionScheme(
        num_files=m,
        subset_size=n_sub,
        beta=beta,
        bits_total=bits_total,
        codebook=books[0],
        file_means=means,
        subset_codebooks=subset_books,
    )


def _atomic_write(path, data):
    """Write bytes to ``path`` via a temp file in the same directory."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_text_atomic(path, text):
    _atomic_write(path, text.encode("utf-8"))
