"""Source models, datasets, the distortion measure, and the (rate, distortion,
leakage) point type shared by every other module.

A dataset holds ``n`` independent samples; each sample is a row of ``M`` files
of ``beta`` real symbols each.  All values are 64-bit floats.  Datasets and
source specs are immutable after construction and safe to share across
threads; generation is single-threaded per call so that a seed fully
determines the output.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError
from .validation import as_float_array, check_positive_int


class LeakageKind(enum.Enum):
    """How the leakage field of a scheme point is measured."""

    MAP_ACCURACY = "map_accuracy"
    MUTUAL_INFO = "mutual_info"


@dataclass(frozen=True)
class GaussianSourceSpec:
    """Synthetic source: ``num_files`` independent Gaussian files.

    File ``m`` is drawn from a multivariate normal with mean ``means[m]`` and
    covariance ``sigma**2 * I`` over ``dim`` coordinates.
    """

    num_files: int
    dim: int
    means: np.ndarray
    sigma: float

    def __post_init__(self):
        check_positive_int(self.num_files, "num_files")
        check_positive_int(self.dim, "dim")
        means = as_float_array(self.means, "means")
        if means.shape != (self.num_files, self.dim):
            raise DimensionError(
                f"means must have shape ({self.num_files}, {self.dim}), "
                f"got {means.shape}"
            )
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        means.setflags(write=False)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "sigma", float(self.sigma))


def paper_gaussian_spec():
    """The four-file benchmark source: mean pattern (+-3, +-3, +-3), sigma 3.

    The four means are (3,3,3), (3,-3,-3), (-3,3,-3), (-3,-3,3); every file
    has per-coordinate standard deviation 3.
    """
    means = np.array(
        [[3, 3, 3], [3, -3, -3], [-3, 3, -3], [-3, -3, 3]], dtype=np.float64
    )
    return GaussianSourceSpec(num_files=4, dim=3, means=means, sigma=3.0)


@dataclass(frozen=True)
class Dataset:
    """``num_samples`` rows of ``num_files`` files of ``dim`` symbols each.

    ``values`` has shape ``(num_samples, num_files, dim)``; sample-major
    layout because schemes iterate samples, not files.  ``image_shape`` is
    set when the symbols of each file are the pixels of an image, as
    ``(height, width, channels)`` with ``height * width * channels == dim``.
    """

    values: np.ndarray
    image_shape: tuple[int, int, int] | None = None

    def __post_init__(self):
        values = as_float_array(self.values, "values")
        if values.ndim != 3:
            raise DimensionError(
                f"values must have shape (n, M, beta), got {values.shape}"
            )
        if min(values.shape) < 1:
            raise ValueError("dataset axes must all be nonempty")
        if self.image_shape is not None:
            h, w, c = self.image_shape
            if c not in (1, 3):
                raise ValueError(f"channel count must be 1 or 3, got {c}")
            if h * w * c != values.shape[2]:
                raise DimensionError(
                    f"image shape {self.image_shape} does not match "
                    f"symbol count {values.shape[2]}"
                )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def num_samples(self):
        return self.values.shape[0]

    @property
    def num_files(self):
        return self.values.shape[1]

    @property
    def dim(self):
        return self.values.shape[2]

    def as_images(self):
        """View the symbols of each file as (n, M, H, W, C) image pixels."""
        if self.image_shape is None:
            raise ValueError("dataset has no image geometry attached")
        h, w, c = self.image_shape
        return self.values.reshape(self.num_samples, self.num_files, h, w, c)


class DistortionKind(enum.Enum):
    SQUARED_ERROR = "squared_error"


@dataclass(frozen=True)
class DistortionMeasure:
    """Per-symbol distortion.  Squared error is the only built-in kind; it is
    translation invariant: d(x+z, xhat+z) == d(x, xhat) for every shift z."""

    kind: DistortionKind = DistortionKind.SQUARED_ERROR

    def __call__(self, x, xhat):
        if self.kind is DistortionKind.SQUARED_ERROR:
            return per_symbol_distortion(x, xhat)
        raise NotImplementedError(self.kind)


def per_symbol_distortion(x, xhat):
    """Mean squared error per symbol between two equal-length vectors.

    Returns ``(1/beta) * sum_i (x_i - xhat_i)**2``.
    """
    x = np.asarray(x, dtype=np.float64)
    xhat = np.asarray(xhat, dtype=np.float64)
    if x.shape != xhat.shape:
        raise DimensionError(
            f"length mismatch: {x.shape} vs {xhat.shape}"
        )
    diff = x - xhat
    return float(np.mean(diff * diff))


def generate_gaussian_dataset(spec, n, seed):
    """Draw ``n`` independent samples of all files of ``spec``.

    Sample ``l``, file ``m`` is drawn from N(means[m], sigma**2 I); all draws
    are independent.  The same (spec, n, seed) always yields a bit-identical
    dataset.
    """
    check_positive_int(n, "n")
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((n, spec.num_files, spec.dim))
    values = spec.means[None, :, :] + spec.sigma * noise
    return Dataset(values)


def shift_by_file_means(ds):
    """Subtract each file's sample mean; returns (shifted dataset, means).

    The returned means array has shape (M, beta) and allows an exact undo via
    :func:`unshift_by_file_means`.
    """
    means = ds.values.mean(axis=0)
    shifted = Dataset(ds.values - means[None, :, :], image_shape=ds.image_shape)
    return shifted, means


def unshift_by_file_means(ds, means):
    """Invert :func:`shift_by_file_means`."""
    means = as_float_array(means, "means")
    if means.shape != (ds.num_files, ds.dim):
        raise DimensionError(
            f"means must have shape ({ds.num_files}, {ds.dim}), got {means.shape}"
        )
    return Dataset(ds.values + means[None, :, :], image_shape=ds.image_shape)


@dataclass(frozen=True)
class SchemePoint:
    """An achieved (rate, distortion, leakage) triple with metadata.

    ``rate`` is in bits per source symbol, ``distortion`` is per-symbol
    expected squared error, and ``leakage`` is either a MAP-adversary
    accuracy in (0, 1] or a mutual information in bits, depending on
    ``leakage_kind``.
    """

    rate: float
    distortion: float
    leakage: float
    leakage_kind: LeakageKind
    label: str = ""
    scheme: str = ""

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError(f"rate must be nonnegative, got {self.rate}")
        if self.distortion < 0:
            raise ValueError(f"distortion must be nonnegative, got {self.distortion}")
        if self.leakage_kind is LeakageKind.MAP_ACCURACY:
            if not 0 < self.leakage <= 1 + 1e-12:
                raise ValueError(
                    f"MAP-accuracy leakage must lie in (0, 1], got {self.leakage}"
                )
        elif self.leakage < 0:
            raise ValueError(
                f"mutual-information leakage must be nonnegative, got {self.leakage}"
            )
