"""Luminance-chrominance preprocessing for color images.

The forward transform maps full-range RGB onto one brightness channel and
two zero-centered chroma channels (fixed BT.601-style matrix, neutral 0),
then decimates each chroma channel by replacing every 2x2 block with its
mean.  The inverse upsamples the chroma by replication and applies the
exact inverse matrix, so without quantization the only round-trip error is
the chroma decimation itself; the brightness channel always round-trips
exactly.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError
from .validation import as_float_array

# rows: Y, Cb, Cr;  Cb = (B - Y) / 1.772, Cr = (R - Y) / 1.402
_FORWARD = np.array(
    [
        [0.299, 0.587, 0.114],
        [-0.299 / 1.772, -0.587 / 1.772, 0.886 / 1.772],
        [0.701 / 1.402, -0.587 / 1.402, -0.114 / 1.402],
    ]
)
_INVERSE = np.linalg.inv(_FORWARD)


def _decimate2(channel):
    h, w = channel.shape
    return channel.reshape(h // 2, 2, w // 2, 2).mean(axis=(1, 3))


def _replicate2(channel):
    return np.repeat(np.repeat(channel, 2, axis=0), 2, axis=1)


def split_luma_chroma(image):
    """RGB (H, W, 3) -> (luma (H, W), chroma1 (H/2, W/2), chroma2 (H/2, W/2)).

    Requires even H and W.  Grayscale inputs (R == G == B) produce both
    chroma channels identically zero.
    """
    img = as_float_array(image, "image")
    if img.ndim != 3 or img.shape[2] != 3:
        raise DimensionError(f"expected an (H, W, 3) image, got {img.shape}")
    h, w, _ = img.shape
    if h % 2 or w % 2:
        raise DimensionError(f"image dimensions must be even, got {h}x{w}")
    ycc = img @ _FORWARD.T
    return ycc[:, :, 0], _decimate2(ycc[:, :, 1]), _decimate2(ycc[:, :, 2])


def merge_luma_chroma(luma, chroma1, chroma2):
    """Invert :func:`split_luma_chroma` (up to chroma decimation loss)."""
    luma = as_float_array(luma, "luma")
    chroma1 = as_float_array(chroma1, "chroma1")
    chroma2 = as_float_array(chroma2, "chroma2")
    if luma.ndim != 2:
        raise DimensionError(f"luma must be (H, W), got {luma.shape}")
    h, w = luma.shape
    if chroma1.shape != (h // 2, w // 2) or chroma2.shape != (h // 2, w // 2):
        raise DimensionError(
            f"chroma shapes {chroma1.shape}, {chroma2.shape} do not match "
            f"luma {luma.shape}"
        )
    ycc = np.stack([luma, _replicate2(chroma1), _replicate2(chroma2)], axis=2)
    return ycc @ _INVERSE.T
