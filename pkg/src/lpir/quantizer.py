"""Generalized Lloyd (LBG) vector quantization.

The trainer alternates a nearest-neighbor partition of the samples with a
centroid update until the mean quantization error stops improving, restarting
from several random initializations and keeping the best codebook.  The mean
error is nonincreasing across iterations within a restart, so every run
converges.

:class:`LloydVectorQuantizer` exposes the algorithm through the scikit-learn
estimator API (``fit`` / ``predict`` / ``transform`` / ``get_params``);
:func:`lloyd_train` and :func:`nearest` are thin functional surfaces over the
same computation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import DimensionError, InvalidConfigError
from .validation import as_sample_matrix, as_vector, check_positive_int

# Above this many (sample x codeword) pairs the assignment pass runs in
# float32: the argmin is unchanged except on near-exact ties, and the pass
# is memory-bound, so this halves the wall time of large trainings.  All
# statistics (centroids, reported error) stay in float64.
_F32_ASSIGN_THRESHOLD = 64 * 1024 * 1024

_ASSIGN_CHUNK = 512


@dataclass(frozen=True)
class Codebook:
    """A set of ``k`` quantization vectors over a ``dim``-dimensional space."""

    vectors: np.ndarray

    def __post_init__(self):
        vectors = as_sample_matrix(self.vectors, "vectors")
        vectors.setflags(write=False)
        object.__setattr__(self, "vectors", vectors)

    @property
    def k(self):
        return self.vectors.shape[0]

    @property
    def dim(self):
        return self.vectors.shape[1]

    def duplicate_groups(self):
        """Groups of indices holding identical vectors (diagnostic).

        Duplicate codewords are legal but usually indicate a wasted rate
        budget, so they are surfaced rather than silently kept.
        """
        seen = {}
        for i, v in enumerate(self.vectors):
            seen.setdefault(v.tobytes(), []).append(i)
        return [idx for idx in seen.values() if len(idx) > 1]


@dataclass(frozen=True)
class LloydConfig:
    """Training parameters for the generalized Lloyd algorithm.

    ``rel_threshold`` stops a run once the relative improvement of the mean
    quantization error between consecutive iterations falls below it.  The
    defaults are declared here rather than taken from any reference: 8
    restarts, threshold 1e-6, at most 500 iterations.
    """

    k: int
    rel_threshold: float = 1e-6
    max_iters: int = 500
    restarts: int = 8
    seed: int = 0

    def __post_init__(self):
        check_positive_int(self.k, "k")
        check_positive_int(self.max_iters, "max_iters")
        check_positive_int(self.restarts, "restarts")
        if not self.rel_threshold > 0:
            raise InvalidConfigError(
                f"rel_threshold must be positive, got {self.rel_threshold}"
            )


def nearest(cb, v):
    """Index and squared distance of the codeword closest to ``v``.

    Ties break toward the lowest index.
    """
    v = as_vector(v, "v")
    if v.shape[0] != cb.dim:
        raise DimensionError(
            f"vector has dimension {v.shape[0]}, codebook has {cb.dim}"
        )
    diff = cb.vectors - v[None, :]
    d2 = np.einsum("ij,ij->i", diff, diff)
    idx = int(np.argmin(d2))
    return idx, float(d2[idx])


def assign_nearest(vectors, codebook_vectors, work_dtype=None):
    """Vectorized nearest-codeword assignment.

    Returns the index array of shape (n,).  ``work_dtype`` overrides the
    precision of the distance pass; by default large passes use float32
    (see module note) and small ones float64.
    """
    X = np.ascontiguousarray(vectors)
    C = np.ascontiguousarray(codebook_vectors)
    n, k = X.shape[0], C.shape[0]
    if work_dtype is None:
        work_dtype = (
            np.float32 if n * k > _F32_ASSIGN_THRESHOLD else np.float64
        )
    Xw = X.astype(work_dtype, copy=False)
    Cw = C.astype(work_dtype, copy=False)
    # argmin ||x - c||^2 == argmax (x.c - ||c||^2 / 2); keeping chunks near
    # cache size dominates the cost of this memory-bound pass
    half_cn = 0.5 * np.einsum("ij,ij->i", Cw, Cw)
    labels = np.empty(n, dtype=np.int64)
    for s in range(0, n, _ASSIGN_CHUNK):
        scores = Xw[s : s + _ASSIGN_CHUNK] @ Cw.T
        scores -= half_cn
        labels[s : s + _ASSIGN_CHUNK] = np.argmax(scores, axis=1)
    return labels


def _mean_error_per_symbol(X, C, labels):
    diff = X - C[labels]
    return float(np.einsum("ij,ij->", diff, diff)) / X.size


def _centroid_update(X, labels, k):
    counts = np.bincount(labels, minlength=k)
    sums = np.empty((k, X.shape[1]))
    for d in range(X.shape[1]):
        sums[:, d] = np.bincount(labels, weights=X[:, d], minlength=k)
    return sums, counts


def _lloyd_single(X, cfg, rng, init=None):
    n, dim = X.shape
    if init is None:
        centers = X[rng.choice(n, size=cfg.k, replace=False)].copy()
    else:
        centers = np.array(init, dtype=np.float64, copy=True)
    history = []
    prev = np.inf
    labels = None
    for _ in range(cfg.max_iters):
        labels = assign_nearest(X, centers)
        error = _mean_error_per_symbol(X, centers, labels)
        history.append(error)
        if error == 0.0 or prev - error < cfg.rel_threshold * prev:
            break
        prev = error
        sums, counts = _centroid_update(X, labels, cfg.k)
        occupied = counts > 0
        centers[occupied] = sums[occupied] / counts[occupied, None]
        n_empty = int(np.count_nonzero(~occupied))
        if n_empty:
            # re-seed each empty cell with the sample currently farthest
            # from its codeword; descent stays monotone after re-partition
            diff = X - centers[labels]
            far = np.argsort(-np.einsum("ij,ij->i", diff, diff))
            centers[~occupied] = X[far[:n_empty]]
    return centers, history


def lloyd_train(samples, cfg):
    """Train a codebook with random restarts; best final error wins.

    Returns ``(Codebook, final mean per-symbol distortion)``.  The reported
    distortion is the mean of per-vector squared errors divided by the
    vector dimension.
    """
    X = as_sample_matrix(samples, "samples")
    if cfg.k > X.shape[0]:
        raise InvalidConfigError(
            f"k={cfg.k} exceeds the number of training vectors {X.shape[0]}"
        )
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)
    best = None
    best_history = None
    for seq in seeds:
        centers, history = _lloyd_single(X, cfg, np.random.default_rng(seq))
        if best is None or history[-1] < best[1]:
            best = (centers, history[-1])
            best_history = history
    codebook = Codebook(best[0])
    return codebook, best[1], best_history


class LloydVectorQuantizer(TransformerMixin, BaseEstimator):
    """Vector quantizer trained by the generalized Lloyd algorithm.

    Parameters
    ----------
    n_codewords : int
        Codebook size ``k``; must not exceed the number of training vectors.
    rel_threshold : float
        Relative-improvement stopping threshold on the mean quantization
        error.
    max_iters : int
        Iteration cap per restart.
    restarts : int
        Number of random initializations; the lowest final error wins.
    seed : int
        Seed controlling initialization; identical seeds give identical
        codebooks.

    Attributes
    ----------
    codebook_ : Codebook
    distortion_ : float
        Final mean per-symbol (per-coordinate) squared error on the
        training set.
    history_ : list of float
        Per-iteration mean error of the winning restart (nonincreasing).
    """

    def __init__(self, n_codewords=2, rel_threshold=1e-6, max_iters=500,
                 restarts=8, seed=0):
        self.n_codewords = n_codewords
        self.rel_threshold = rel_threshold
        self.max_iters = max_iters
        self.restarts = restarts
        self.seed = seed

    def _config(self):
        return LloydConfig(
            k=self.n_codewords,
            rel_threshold=self.rel_threshold,
            max_iters=self.max_iters,
            restarts=self.restarts,
            seed=self.seed,
        )

    def fit(self, X, y=None):
        X = as_sample_matrix(X, "X")
        self.codebook_, self.distortion_, self.history_ = lloyd_train(
            X, self._config()
        )
        return self

    def predict(self, X):
        """Nearest-codeword index for each row of ``X``."""
        self._check_fitted()
        X = as_sample_matrix(X, "X")
        self._check_dim(X)
        return assign_nearest(X, self.codebook_.vectors)

    def transform(self, X):
        """Quantize each row of ``X`` to its nearest codeword."""
        return self.codebook_.vectors[self.predict(X)]

    def inverse_transform(self, indices):
        """Codewords for an index array (decoder side)."""
        self._check_fitted()
        indices = np.asarray(indices)
        if indices.size and (indices.min() < 0 or indices.max() >= self.codebook_.k):
            raise ValueError("codeword index out of range")
        return self.codebook_.vectors[indices]

    def score(self, X, y=None):
        """Negative mean per-symbol quantization error (higher is better)."""
        self._check_fitted()
        X = as_sample_matrix(X, "X")
        self._check_dim(X)
        labels = assign_nearest(X, self.codebook_.vectors)
        return -_mean_error_per_symbol(X, self.codebook_.vectors, labels)

    def _check_fitted(self):
        if not hasattr(self, "codebook_"):
            raise InvalidConfigError("quantizer is not fitted; call fit first")

    def _check_dim(self, X):
        if X.shape[1] != self.codebook_.dim:
            raise DimensionError(
                f"X has dimension {X.shape[1]}, codebook has {self.codebook_.dim}"
            )
