"""Leakage metrics over labeled query samples.

Every estimator consumes a :class:`QuerySampleSet`: pairs ``(m, q)`` of a
requested file index and the query it produced.  Leakage depends only on
the conditional law of the query given the index, never on the labels'
values, so bijectively relabeling the queries leaves every metric here
unchanged.

Hard-decision leakage is the accuracy of a maximum-aposteriori adversary
(uniform prior over files); soft-decision leakage is the mutual information
between index and query, estimated by plug-in counts.  The expected
log-loss of any soft decoder lower-bounds the plug-in mutual information
and meets it exactly for the empirical posterior.
"""

from __future__ import annotations

import io as _stdio
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp
from sklearn.base import BaseEstimator, ClassifierMixin

from .errors import DimensionError, EstimationError
from .validation import as_float_array, check_positive_int

_KEY_DECIMALS = 9  # queries are hashable after rounding to 9 decimals


@dataclass(frozen=True)
class QuerySampleSet:
    """Labeled query samples: ``labels[i]`` is the 1-based requested index
    behind query row ``queries[i]``."""

    num_files: int
    labels: np.ndarray
    queries: np.ndarray
    source: str = ""

    def __post_init__(self):
        check_positive_int(self.num_files, "num_files")
        labels = np.asarray(self.labels, dtype=np.int64)
        queries = as_float_array(self.queries, "queries")
        if queries.ndim == 1:
            queries = queries.reshape(-1, 1)
        if queries.ndim != 2:
            raise DimensionError(
                f"queries must be (n, dim), got shape {queries.shape}"
            )
        if labels.ndim != 1 or len(labels) != len(queries):
            raise DimensionError("labels and queries must have equal length")
        if len(labels) == 0:
            raise ValueError("sample set is empty")
        if labels.min() < 1 or labels.max() > self.num_files:
            raise ValueError(
                f"labels must lie in [1, {self.num_files}]"
            )
        labels.setflags(write=False)
        queries.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "queries", queries)

    @property
    def num_samples(self):
        return len(self.labels)

    @property
    def dim(self):
        return self.queries.shape[1]

    def to_csv(self):
        buf = _stdio.StringIO()
        cols = ",".join(f"q_{i + 1}" for i in range(self.dim))
        buf.write(f"m,{cols}\n")
        for m, row in zip(self.labels, self.queries):
            buf.write(f"{m}," + ",".join(f"{v:.10g}" for v in row) + "\n")
        return buf.getvalue()

    def save_csv(self, path):
        from .io import write_text_atomic

        write_text_atomic(path, self.to_csv())

    @classmethod
    def from_csv(cls, path, num_files=None, source=""):
        rows = []
        with open(path) as f:
            header = f.readline().strip().split(",")
            if not header or header[0] != "m":
                raise ValueError(f"bad query CSV header {header!r} in {path}")
            dim = len(header) - 1
            for line in f:
                line = line.strip()
                if not line:
                    continue
                parts = line.split(",")
                if len(parts) != dim + 1:
                    raise ValueError(f"ragged row in {path}: {line!r}")
                rows.append([float(v) for v in parts])
        if not rows:
            raise ValueError(f"no samples in {path}")
        arr = np.array(rows)
        labels = arr[:, 0].astype(np.int64)
        if num_files is None:
            num_files = int(labels.max())
        return cls(num_files=num_files, labels=labels, queries=arr[:, 1:],
                   source=source or path)


def _query_keys(queries):
    rounded = np.round(queries, _KEY_DECIMALS)
    rounded += 0.0  # normalize -0.0
    return [row.tobytes() for row in rounded]


class MapAdversary(ClassifierMixin, BaseEstimator):
    """MAP decoder of the requested index from the query (uniform prior).

    Parameters
    ----------
    num_files : int
    estimator : {"empirical_discrete", "gaussian_kde"}
        Per-class density model.  The discrete estimator counts exact query
        values (rounded to 9 decimals); the continuous one uses a product
        Gaussian kernel with a per-coordinate Silverman bandwidth.
    max_fit_points : int
        Per-class cap on kernel centers for the KDE estimator (subsampled
        with ``seed``); keeps scoring tractable on large sample sets.
    seed : int

    Ties in the posterior argmax break toward the lowest index, so a query
    carrying no information yields class 1.
    """

    def __init__(self, num_files=2, estimator="empirical_discrete",
                 max_fit_points=4000, seed=0):
        self.num_files = num_files
        self.estimator = estimator
        self.max_fit_points = max_fit_points
        self.seed = seed

    def fit(self, Q, m):
        Q = as_float_array(Q, "Q")
        if Q.ndim == 1:
            Q = Q.reshape(-1, 1)
        m = np.asarray(m, dtype=np.int64)
        counts = np.bincount(m, minlength=self.num_files + 1)[1:]
        if (counts == 0).any():
            missing = int(np.argmin(counts)) + 1
            raise EstimationError(
                f"class {missing} has no fit samples"
            )
        if self.estimator == "empirical_discrete":
            self._fit_discrete(Q, m)
        elif self.estimator == "gaussian_kde":
            self._fit_kde(Q, m)
        else:
            raise ValueError(f"unknown estimator {self.estimator!r}")
        return self

    def _fit_discrete(self, Q, m):
        table = {}
        class_totals = np.zeros(self.num_files)
        for key, label in zip(_query_keys(Q), m):
            row = table.setdefault(key, np.zeros(self.num_files))
            row[label - 1] += 1
            class_totals[label - 1] += 1
        self._table = {k: v / class_totals for k, v in table.items()}
        self._dim = Q.shape[1]

    def _fit_kde(self, Q, m):
        rng = np.random.default_rng(self.seed)
        self._kde = []
        for c in range(1, self.num_files + 1):
            pts = Q[m == c]
            if len(pts) > self.max_fit_points:
                pts = pts[rng.choice(len(pts), self.max_fit_points,
                                     replace=False)]
            n, d = pts.shape
            std = pts.std(axis=0, ddof=1) if n > 1 else np.zeros(d)
            factor = (4.0 / (d + 2.0)) ** (1.0 / (d + 4.0)) \
                * n ** (-1.0 / (d + 4.0))
            bw = np.maximum(std * factor, 1e-9)
            self._kde.append((pts / bw, bw, n))
        self._dim = Q.shape[1]

    def _log_density(self, Q):
        """(n, M) per-class log densities."""
        out = np.empty((len(Q), self.num_files))
        for c, (scaled_pts, bw, n) in enumerate(self._kde):
            y = Q / bw
            const = -np.log(bw).sum() - 0.5 * len(bw) * np.log(2 * np.pi) \
                - np.log(n)
            col = np.empty(len(Q))
            for s in range(0, len(Q), 512):
                chunk = y[s:s + 512]
                d2 = (
                    (chunk * chunk).sum(1)[:, None]
                    - 2.0 * chunk @ scaled_pts.T
                    + (scaled_pts * scaled_pts).sum(1)[None, :]
                )
                col[s:s + 512] = logsumexp(-0.5 * d2, axis=1)
            out[:, c] = col + const
        return out

    def predict(self, Q):
        Q = as_float_array(Q, "Q")
        if Q.ndim == 1:
            Q = Q.reshape(-1, 1)
        if Q.shape[1] != self._dim:
            raise DimensionError(
                f"queries have arity {Q.shape[1]}, fitted on {self._dim}"
            )
        if self.estimator == "empirical_discrete":
            zeros = np.zeros(self.num_files)
            scores = np.array([
                self._table.get(key, zeros) for key in _query_keys(Q)
            ])
        else:
            scores = self._log_density(Q)
        return np.argmax(scores, axis=1) + 1  # ties resolve to lowest index

    def score(self, Q, m):
        """Fraction of holdout queries whose MAP guess equals the label."""
        m = np.asarray(m, dtype=np.int64)
        return float(np.mean(self.predict(Q) == m))


def map_accuracy(qs, estimator="empirical_discrete", holdout_fraction=0.2,
                 seed=0, max_fit_points=4000):
    """MAP-adversary accuracy, fit on one split and scored on a holdout.

    The sample set is shuffled with ``seed`` and split
    ``(1 - holdout_fraction) / holdout_fraction``; per-class densities are
    fit on the first part and the reported value is the fraction of
    holdout samples whose posterior argmax recovers the true index.
    """
    if not 0.0 < holdout_fraction < 1.0:
        raise ValueError(
            f"holdout_fraction must lie in (0, 1), got {holdout_fraction}"
        )
    rng = np.random.default_rng(seed)
    n = qs.num_samples
    perm = rng.permutation(n)
    n_hold = max(1, int(round(n * holdout_fraction)))
    if n_hold >= n:
        raise EstimationError("not enough samples to split")
    hold, fit = perm[:n_hold], perm[n_hold:]
    adversary = MapAdversary(
        num_files=qs.num_files, estimator=estimator,
        max_fit_points=max_fit_points, seed=seed,
    ).fit(qs.queries[fit], qs.labels[fit])
    return adversary.score(qs.queries[hold], qs.labels[hold])


def _discretize_equiprobable(queries, bins):
    """Per-coordinate equiprobable binning for plug-in entropy estimates."""
    out = np.empty_like(queries, dtype=np.int64)
    for d in range(queries.shape[1]):
        col = queries[:, d]
        edges = np.quantile(col, np.linspace(0, 1, bins + 1)[1:-1])
        out[:, d] = np.searchsorted(edges, col, side="right")
    return out


def _is_discrete(queries):
    rounded = np.round(queries, _KEY_DECIMALS)
    return bool(np.all(rounded == np.round(rounded)))


def mutual_info_discrete(qs, mode="auto", continuous_bins=64):
    """Plug-in estimate of I(M; Q) in bits from empirical joint counts.

    ``mode`` selects how query rows become symbols: ``"discrete"`` hashes
    the rounded rows directly, ``"binned"`` first quantizes every
    coordinate to ``continuous_bins`` equiprobable bins, and ``"auto"``
    picks ``"discrete"`` for integer-valued queries and ``"binned"``
    otherwise.
    """
    if qs.num_samples == 0:
        raise EstimationError("empty sample set")
    if mode == "auto":
        mode = "discrete" if _is_discrete(qs.queries) else "binned"
    if mode == "binned":
        symbols = _discretize_equiprobable(qs.queries, continuous_bins)
    elif mode == "discrete":
        symbols = qs.queries
    else:
        raise ValueError(f"unknown mode {mode!r}")
    keys = _query_keys(np.asarray(symbols, dtype=np.float64))
    index = {}
    ids = np.fromiter((index.setdefault(k, len(index)) for k in keys),
                      dtype=np.int64, count=len(keys))
    joint = np.zeros((qs.num_files, len(index)))
    np.add.at(joint, (qs.labels - 1, ids), 1.0)
    joint /= joint.sum()
    return mutual_info_from_joint(joint)


def mutual_info_from_joint(joint):
    """Exact I(M; Q) in bits of a joint probability table (M x Q)."""
    joint = np.asarray(joint, dtype=np.float64)
    pm = joint.sum(axis=1, keepdims=True)
    pq = joint.sum(axis=0, keepdims=True)
    mask = joint > 0
    ratio = np.ones_like(joint)
    ratio[mask] = joint[mask] / (pm @ pq)[mask]
    return float((joint[mask] * np.log2(ratio[mask])).sum())


def mutual_info_from_conditional(cond, prior=None):
    """Exact I(M; Q) in bits from P(q | m) rows and a prior over m."""
    cond = np.asarray(cond, dtype=np.float64)
    if prior is None:
        prior = np.full(cond.shape[0], 1.0 / cond.shape[0])
    return mutual_info_from_joint(prior[:, None] * cond)


class UniformDecoder:
    """Soft decoder ignoring the query: posterior uniform over files."""

    def __init__(self, num_files):
        self.num_files = num_files

    def posterior(self, queries):
        n = len(np.atleast_2d(queries))
        return np.full((n, self.num_files), 1.0 / self.num_files)


class TableDecoder:
    """Soft decoder from an explicit query -> posterior table.

    ``mapping`` maps rounded query rows (as tuples) to length-M posterior
    vectors; unseen queries fall back to the uniform posterior.
    """

    def __init__(self, num_files, mapping):
        self.num_files = num_files
        self.mapping = {
            tuple(np.round(np.atleast_1d(k), _KEY_DECIMALS)): np.asarray(v, float)
            for k, v in mapping.items()
        }
        for v in self.mapping.values():
            if v.shape != (num_files,) or abs(v.sum() - 1.0) > 1e-9 or (v < 0).any():
                raise ValueError("posterior rows must be length-M distributions")

    def posterior(self, queries):
        queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
        uniform = np.full(self.num_files, 1.0 / self.num_files)
        return np.array([
            self.mapping.get(tuple(np.round(row, _KEY_DECIMALS)), uniform)
            for row in queries
        ])


def empirical_posterior_decoder(qs):
    """The plug-in posterior P(m | q) of a sample set, as a TableDecoder."""
    keys = _query_keys(qs.queries)
    table = {}
    for key, label, row in zip(keys, qs.labels, np.round(qs.queries, _KEY_DECIMALS)):
        entry = table.setdefault(key, [np.zeros(qs.num_files), tuple(row)])
        entry[0][label - 1] += 1
    mapping = {
        row: counts / counts.sum() for counts, row in table.values()
    }
    return TableDecoder(qs.num_files, mapping)


@dataclass(frozen=True)
class LoglossResult:
    """Expected log-loss value plus the count of samples the decoder
    assigned zero posterior (which drive the value to -inf)."""

    value: float
    num_zero_posterior: int


def expected_logloss(qs, decoder):
    """Expected log-loss ``H(M) + mean log2 F(m | q)`` of a soft decoder.

    ``H(M)`` is the entropy of the empirical label distribution, so the
    loss is exactly zero for the uniform decoder on balanced labels, and
    equals the plug-in mutual information when ``decoder`` is the
    empirical posterior of the same sample set.  Samples with zero decoder
    posterior are counted and force the value to ``-inf``.
    """
    post = decoder.posterior(qs.queries)
    post = np.asarray(post, dtype=np.float64)
    if post.shape != (qs.num_samples, qs.num_files):
        raise DimensionError(
            f"decoder returned shape {post.shape}, expected "
            f"({qs.num_samples}, {qs.num_files})"
        )
    picked = post[np.arange(qs.num_samples), qs.labels - 1]
    zero = picked <= 0.0
    counts = np.bincount(qs.labels - 1, minlength=qs.num_files).astype(float)
    pm = counts / counts.sum()
    h_m = -np.sum(pm[pm > 0] * np.log2(pm[pm > 0]))
    if zero.any():
        return LoglossResult(value=float("-inf"),
                             num_zero_posterior=int(zero.sum()))
    value = h_m + float(np.mean(np.log2(picked)))
    return LoglossResult(value=value, num_zero_posterior=0)


def query_variance(qs):
    """Unbiased per-coordinate sample variance of the query given each
    requested index; shape (num_files, dim)."""
    out = np.empty((qs.num_files, qs.dim))
    for c in range(1, qs.num_files + 1):
        rows = qs.queries[qs.labels == c]
        if len(rows) < 2:
            raise EstimationError(
                f"class {c} has {len(rows)} samples; need at least 2"
            )
        out[c - 1] = rows.var(axis=0, ddof=1)
    return out
