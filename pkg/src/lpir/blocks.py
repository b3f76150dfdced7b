"""Block-mean scalar quantization for images.

An image is split into equal ``h x w`` blocks; every pixel of a block is
replaced by the block mean, and the mean is snapped to one of ``2**r``
scalar levels.  Encoding one ``H x W`` image therefore costs
``(H/h) * (W/w) * r`` bits, a rate of ``r / (h*w)`` bits per pixel per
channel.  Levels are either uniformly spaced over the pixel value range or
placed by a one-dimensional Lloyd pass over training block means.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import InvalidConfigError
from .quantizer import LloydConfig, _lloyd_single, lloyd_train
from .validation import as_float_array, check_positive_int


def block_means(image, block_h, block_w):
    """Mean of every ``block_h x block_w`` block of a (H, W) channel."""
    img = as_float_array(image, "image")
    if img.ndim != 2:
        raise InvalidConfigError(f"expected a (H, W) channel, got shape {img.shape}")
    h_img, w_img = img.shape
    if h_img % block_h or w_img % block_w:
        raise InvalidConfigError(
            f"block size {block_h}x{block_w} does not divide image {h_img}x{w_img}"
        )
    return img.reshape(
        h_img // block_h, block_h, w_img // block_w, block_w
    ).mean(axis=(1, 3))


def snap_to_levels(values, levels):
    """Nearest level for each value; ties snap to the lower level."""
    levels = np.asarray(levels, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    pos = np.searchsorted(levels, values)
    lo = np.clip(pos - 1, 0, len(levels) - 1)
    hi = np.clip(pos, 0, len(levels) - 1)
    pick_hi = (levels[hi] - values) < (values - levels[lo])
    return np.where(pick_hi, levels[hi], levels[lo])


def uniform_levels(num_levels, value_range):
    lo, hi = value_range
    if not hi > lo:
        raise InvalidConfigError(f"empty value range {value_range}")
    return np.linspace(lo, hi, num_levels)


def optimize_scalar_levels(population, r, seed, baseline_levels=None):
    """Place ``2**r`` scalar levels by a Lloyd pass over a population.

    ``baseline_levels``, when given, seeds one extra restart, so the result
    never quantizes the population worse than that baseline does.  Returns
    the levels sorted ascending.
    """
    pop = as_float_array(population, "population").reshape(-1, 1)
    k = 2 ** check_positive_int(r, "r")
    if len(np.unique(pop)) < k:
        raise InvalidConfigError(
            f"population has fewer than {k} distinct values"
        )
    cfg = LloydConfig(k=k, seed=seed)
    codebook, err, _ = lloyd_train(pop, cfg)
    centers = codebook.vectors
    if baseline_levels is not None:
        init = np.asarray(baseline_levels, dtype=np.float64).reshape(-1, 1)
        if init.shape[0] != k:
            raise InvalidConfigError(
                f"baseline has {init.shape[0]} levels, expected {k}"
            )
        seeded, history = _lloyd_single(
            pop, cfg, np.random.default_rng(seed), init=init
        )
        if history[-1] < err:
            centers, err = seeded, history[-1]
    return np.sort(centers.ravel())


class ScalarBlockQuantizer(TransformerMixin, BaseEstimator):
    """Image codec: block means snapped to ``2**bits_per_block`` levels.

    Parameters
    ----------
    block_h, block_w : int
        Block size; must divide the image dimensions.
    bits_per_block : int
        Bits spent per block, giving ``2**bits_per_block`` levels.
    placement : {"uniform", "lloyd_optimized"}
        Uniform levels span ``value_range``; optimized levels are fit to the
        training block-mean population (seeded from the uniform baseline, so
        they never do worse on the training data).
    value_range : (float, float)
        Pixel value range, ``(-1, 1)`` for loaded image datasets.
    seed : int

    Attributes
    ----------
    levels_ : ndarray of shape (2**bits_per_block,), sorted ascending.
    """

    def __init__(self, block_h=2, block_w=2, bits_per_block=2,
                 placement="uniform", value_range=(-1.0, 1.0), seed=0):
        self.block_h = block_h
        self.block_w = block_w
        self.bits_per_block = bits_per_block
        self.placement = placement
        self.value_range = value_range
        self.seed = seed

    @property
    def rate(self):
        """Bits per pixel per channel: r / (h * w)."""
        return self.bits_per_block / (self.block_h * self.block_w)

    def bit_cost(self, height, width, channels=1):
        """Bits to encode one image of the given geometry."""
        if height % self.block_h or width % self.block_w:
            raise InvalidConfigError(
                f"block size {self.block_h}x{self.block_w} does not divide "
                f"image {height}x{width}"
            )
        return (height // self.block_h) * (width // self.block_w) \
            * self.bits_per_block * channels

    def fit(self, images=None, y=None):
        """Set the levels; ``images`` (n, H, W) is required for
        ``lloyd_optimized`` placement and ignored otherwise."""
        check_positive_int(self.bits_per_block, "bits_per_block")
        check_positive_int(self.block_h, "block_h")
        check_positive_int(self.block_w, "block_w")
        k = 2 ** self.bits_per_block
        base = uniform_levels(k, self.value_range)
        if self.placement == "uniform":
            self.levels_ = base
        elif self.placement == "lloyd_optimized":
            if images is None:
                raise InvalidConfigError(
                    "lloyd_optimized placement needs training images"
                )
            imgs = as_float_array(images, "images")
            if imgs.ndim != 3:
                raise InvalidConfigError(
                    f"expected images of shape (n, H, W), got {imgs.shape}"
                )
            pop = np.concatenate(
                [block_means(im, self.block_h, self.block_w).ravel() for im in imgs]
            )
            self.levels_ = optimize_scalar_levels(
                pop, self.bits_per_block, self.seed, baseline_levels=base
            )
        else:
            raise InvalidConfigError(f"unknown placement {self.placement!r}")
        return self

    def transform(self, images):
        """Reconstruct (n, H, W) images through the codec."""
        self._check_fitted()
        imgs = as_float_array(images, "images")
        single = imgs.ndim == 2
        if single:
            imgs = imgs[None]
        out = np.stack([self._reconstruct(im) for im in imgs])
        return out[0] if single else out

    def _reconstruct(self, image):
        means = block_means(image, self.block_h, self.block_w)
        snapped = snap_to_levels(means, self.levels_)
        return np.kron(snapped, np.ones((self.block_h, self.block_w)))

    def _check_fitted(self):
        if not hasattr(self, "levels_"):
            raise InvalidConfigError("quantizer is not fitted; call fit first")


def block_mean_quantize(image, quantizer):
    """Run one channel through a fitted :class:`ScalarBlockQuantizer`.

    Returns ``(bit_cost, reconstructed image, per-symbol distortion)``.
    """
    quantizer._check_fitted()
    img = as_float_array(image, "image")
    if img.ndim != 2:
        raise InvalidConfigError(f"expected a (H, W) channel, got {img.shape}")
    recon = quantizer.transform(img)
    bits = quantizer.bit_cost(*img.shape)
    distortion = float(np.mean((img - recon) ** 2))
    return bits, recon, distortion
