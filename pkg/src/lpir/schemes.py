"""Achievable retrieval schemes and frontier construction.

A compression-based scheme hides the requested file index among a sorted
subset of ``N`` indices (the other ``N - 1`` drawn uniformly at random), and
jointly quantizes the ``N`` mean-shifted files with one trained codebook.
Its download rate is ``bits_total / beta`` bits per symbol and its
hard-decision leakage is exactly ``1 / N`` by construction.

The module also provides the large-file-limit Gaussian scheme
(``sigma**2 * 2**(-2 R L)``), its convexification over pairs of reciprocal
leakage levels with an optimized rate split, time-sharing of arbitrary
points, and the lower convex envelope of a fixed-rate point set.
"""

from __future__ import annotations

import itertools
import math
import zlib
from dataclasses import dataclass

import numpy as np

from .core import (
    Dataset,
    LeakageKind,
    SchemePoint,
    shift_by_file_means,
)
from .errors import DimensionError, InvalidConfigError
from .quantizer import Codebook, LloydConfig, assign_nearest, lloyd_train
from .validation import as_float_array, check_positive_int


@dataclass(frozen=True)
class CompressionScheme:
    """A trained N-subset compression scheme.

    ``codebook`` spans the ``subset_size * beta``-dimensional concatenated
    file space.  ``subset_codebooks`` optionally maps each ascending subset
    of 1-based file indices to its own codebook (one encoder per subset);
    when absent the single shared codebook serves every subset.
    """

    num_files: int
    subset_size: int
    beta: int
    bits_total: int
    codebook: Codebook
    file_means: np.ndarray
    subset_codebooks: dict | None = None

    def __post_init__(self):
        if not 1 <= self.subset_size <= self.num_files:
            raise InvalidConfigError(
                f"subset size {self.subset_size} outside [1, {self.num_files}]"
            )
        means = as_float_array(self.file_means, "file_means")
        if means.shape != (self.num_files, self.beta):
            raise DimensionError(
                f"file_means must have shape ({self.num_files}, {self.beta}), "
                f"got {means.shape}"
            )
        if self.codebook.dim != self.subset_size * self.beta:
            raise DimensionError(
                f"codebook dimension {self.codebook.dim} != N*beta = "
                f"{self.subset_size * self.beta}"
            )
        means.setflags(write=False)
        object.__setattr__(self, "file_means", means)

    @property
    def rate(self):
        """Bits per source symbol: bits_total / beta."""
        return self.bits_total / self.beta

    @property
    def leakage(self):
        """Hard-decision leakage of the honest protocol: exactly 1/N."""
        return 1.0 / self.subset_size

    @property
    def k(self):
        return self.codebook.k

    @property
    def answer_bits(self):
        """Logical answer length in bits (fixed-length code)."""
        return self.bits_total

    @property
    def scheme_id(self):
        """Deterministic 32-bit identifier derived from the scheme content."""
        h = zlib.crc32(
            np.array(
                [self.num_files, self.subset_size, self.beta, self.bits_total]
            ).tobytes()
        )
        h = zlib.crc32(self.file_means.tobytes(), h)
        for book in self.all_codebooks():
            h = zlib.crc32(book.vectors.tobytes(), h)
        return h & 0xFFFFFFFF

    def all_codebooks(self):
        if self.subset_codebooks is None:
            return [self.codebook]
        subsets = itertools.combinations(range(1, self.num_files + 1),
                                         self.subset_size)
        return [self.subset_codebooks[s] for s in subsets]

    def codebook_for(self, subset):
        """Codebook used for a sorted 1-based subset tuple."""
        if self.subset_codebooks is None:
            return self.codebook
        try:
            return self.subset_codebooks[tuple(subset)]
        except KeyError:
            raise InvalidConfigError(f"no codebook for subset {tuple(subset)}")


@dataclass(frozen=True)
class TimeSharedScheme:
    """Mixture of two schemes selected by a public coin with P(1) = lam.

    The coin value is sent as an explicit prefix of every query, so the
    composed scheme achieves the linear mixture of the component (rate,
    distortion, leakage) triples for hard-decision leakage.
    """

    scheme0: CompressionScheme
    scheme1: CompressionScheme
    lam: float

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise InvalidConfigError(f"lam must lie in [0, 1], got {self.lam}")
        if (self.scheme0.num_files != self.scheme1.num_files
                or self.scheme0.beta != self.scheme1.beta):
            raise InvalidConfigError(
                "time-shared components must share file count and file size"
            )

    @property
    def num_files(self):
        return self.scheme0.num_files

    @property
    def beta(self):
        return self.scheme0.beta

    @property
    def rate(self):
        return self.lam * self.scheme1.rate + (1 - self.lam) * self.scheme0.rate

    @property
    def leakage(self):
        return self.lam * self.scheme1.leakage + (1 - self.lam) * self.scheme0.leakage

    @property
    def scheme_id(self):
        h = zlib.crc32(b"timeshare")
        h = zlib.crc32(np.float64(self.lam).tobytes(), h)
        h = zlib.crc32(np.array([self.scheme0.scheme_id,
                                 self.scheme1.scheme_id]).tobytes(), h)
        return h & 0xFFFFFFFF

    def component(self, coin):
        return self.scheme1 if coin else self.scheme0


def _subset_training_vectors(shifted, subset_size):
    """All ascending N-subsets of each sample, concatenated: (C(M,N)*n, N*beta)."""
    n, m, beta = shifted.shape
    parts = [
        shifted[:, s, :].reshape(n, subset_size * beta)
        for s in itertools.combinations(range(m), subset_size)
    ]
    return np.concatenate(parts, axis=0)


def build_compression_scheme(train, subset_size, bits_total, cfg=None,
                             per_subset_encoders=False):
    """Train an N-subset compression scheme on a dataset.

    The training set is every ascending ``subset_size``-subset of each
    mean-shifted sample, concatenated to ``subset_size * beta`` symbols;
    the codebook holds ``2**bits_total`` vectors.  ``cfg`` defaults to
    ``LloydConfig(k=2**bits_total)``.

    ``per_subset_encoders`` trains a separate codebook for every subset
    instead of one shared codebook; sharing is the default construction.
    ``bits_total = 0`` builds the degenerate zero-rate scheme (one
    codeword, the training mean).
    """
    if not isinstance(bits_total, (int, np.integer)) or bits_total < 0:
        raise InvalidConfigError(
            f"bits_total must be a nonnegative integer, got {bits_total!r}"
        )
    bits_total = int(bits_total)
    m = train.num_files
    if not 1 <= subset_size <= m:
        raise InvalidConfigError(f"subset size {subset_size} outside [1, {m}]")
    k = 2 ** bits_total
    if cfg is None:
        cfg = LloydConfig(k=k)
    elif cfg.k != k:
        raise InvalidConfigError(
            f"cfg.k = {cfg.k} does not match 2**bits_total = {k}"
        )
    total_vectors = math.comb(m, subset_size) * train.num_samples
    if k > total_vectors:
        raise InvalidConfigError(
            f"2**bits_total = {k} exceeds the {total_vectors} training vectors"
        )
    shifted, means = shift_by_file_means(train)
    if per_subset_encoders:
        books = {}
        n, _, beta = shifted.values.shape
        for s in itertools.combinations(range(m), subset_size):
            vecs = shifted.values[:, s, :].reshape(n, subset_size * beta)
            if k > len(vecs):
                raise InvalidConfigError(
                    f"2**bits_total = {k} exceeds the {len(vecs)} vectors "
                    f"of subset {s}"
                )
            book, _, _ = lloyd_train(vecs, cfg)
            books[tuple(i + 1 for i in s)] = book
        shared = books[tuple(range(1, subset_size + 1))]
        return CompressionScheme(
            num_files=m, subset_size=subset_size, beta=train.dim,
            bits_total=bits_total, codebook=shared, file_means=means,
            subset_codebooks=books,
        )
    vectors = _subset_training_vectors(shifted.values, subset_size)
    codebook, _, _ = lloyd_train(vectors, cfg)
    return CompressionScheme(
        num_files=m, subset_size=subset_size, beta=train.dim,
        bits_total=bits_total, codebook=codebook, file_means=means,
    )


def draw_subsets(num_files, requested, subset_size, rng):
    """Uniform sorted subsets containing each requested index (vectorized).

    ``requested`` holds 0-based file indices; the returned array has shape
    (len(requested), subset_size) with 0-based sorted rows.
    """
    trials = len(requested)
    keys = rng.random((trials, num_files))
    keys[np.arange(trials), requested] = -1.0  # force the requested file in
    order = np.argsort(keys, axis=1)
    return np.sort(order[:, :subset_size], axis=1)


def eval_scheme(scheme, test, trials, seed):
    """Monte-Carlo (rate, distortion, leakage) of a compression scheme.

    Each trial draws a uniform request and uniform dummies, quantizes the
    shifted subset, reconstructs the requested slot, and re-adds the stored
    file mean.  Distortion is averaged over trials; leakage is reported
    analytically as ``1 / subset_size`` (hard-decision kind).
    """
    check_positive_int(trials, "trials")
    _check_test_shape(scheme, test)
    rng = np.random.default_rng(seed)
    m = scheme.num_files
    n_sub = scheme.subset_size
    beta = scheme.beta
    requested = rng.integers(0, m, size=trials)
    sample_idx = rng.integers(0, test.num_samples, size=trials)
    subsets = draw_subsets(m, requested, n_sub, rng)
    shifted = test.values - scheme.file_means[None, :, :]

    distortion_sum = 0.0
    for subset in sorted({tuple(row) for row in subsets}):
        mask = np.all(subsets == np.array(subset), axis=1)
        rows = shifted[sample_idx[mask]][:, subset, :].reshape(-1, n_sub * beta)
        book = scheme.codebook_for(tuple(i + 1 for i in subset))
        labels = assign_nearest(rows, book.vectors)
        recon = book.vectors[labels].reshape(-1, n_sub, beta)
        pos = np.searchsorted(np.array(subset), requested[mask])
        est = recon[np.arange(len(rows)), pos] + scheme.file_means[requested[mask]]
        truth = test.values[sample_idx[mask], requested[mask]]
        distortion_sum += float(((truth - est) ** 2).sum())
    distortion = distortion_sum / (trials * beta)
    return SchemePoint(
        rate=scheme.rate,
        distortion=distortion,
        leakage=scheme.leakage,
        leakage_kind=LeakageKind.MAP_ACCURACY,
        label=f"N={n_sub} bits={scheme.bits_total}",
        scheme="compression",
    )


def _check_test_shape(scheme, test):
    if test.num_files != scheme.num_files or test.dim != scheme.beta:
        raise DimensionError(
            f"dataset shape ({test.num_files} files x {test.dim}) does not "
            f"match scheme ({scheme.num_files} x {scheme.beta})"
        )


def shannon_gaussian_distortion(sigma, rate, leakage):
    """Large-file-limit distortion ``sigma**2 * 2**(-2 * rate * leakage)``.

    ``leakage`` must be the reciprocal of a positive integer (the honest
    subset size); the result is clamped above at ``sigma**2``.
    """
    if rate < 0:
        raise ValueError(f"rate must be nonnegative, got {rate}")
    _reciprocal_subset_size(leakage)
    return min(sigma**2, sigma**2 * 2.0 ** (-2.0 * rate * leakage))


def _reciprocal_subset_size(leakage, tol=1e-9):
    if leakage <= 0:
        raise ValueError(f"leakage must be positive, got {leakage}")
    n = 1.0 / leakage
    if abs(n - round(n)) > tol * n:
        raise ValueError(
            f"leakage {leakage} is not the reciprocal of an integer subset size"
        )
    return int(round(n))


def _golden_min(f, lo, hi, tol=1e-9):
    """Golden-section minimum of a unimodal function on [lo, hi]."""
    invphi = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    x = (a + b) / 2
    return x, f(x)


def convexify_shannon(sigma, rate, leakage, num_files):
    """Best mixture of two reciprocal-leakage Gaussian schemes at total
    rate ``rate`` and mixed leakage ``leakage``.

    Minimizes ``lam * D(R1, L1) + (1 - lam) * D(R0, L0)`` over reciprocal
    levels ``L0 > leakage > L1`` (with ``lam`` pinned by the leakage mix)
    and over the rate split ``rate = lam * R1 + (1 - lam) * R0``; the split
    is convex in ``R1``, so a golden-section search solves it.  Exact
    reciprocal leakages fall back to the pure scheme when mixing does not
    help.
    """
    if rate < 0:
        raise ValueError(f"rate must be nonnegative, got {rate}")
    check_positive_int(num_files, "num_files")
    lo_leak = 1.0 / num_files
    if not lo_leak - 1e-12 <= leakage <= 1.0 + 1e-12:
        raise ValueError(
            f"leakage {leakage} outside [1/{num_files}, 1]"
        )
    var = sigma**2
    nodes = [1.0 / n for n in range(1, num_files + 1)]
    best = math.inf
    for node in nodes:
        if abs(node - leakage) <= 1e-12:
            best = min(best, var * 2.0 ** (-2.0 * rate * node))
    for l0, l1 in itertools.permutations(nodes, 2):
        if not l1 < leakage < l0:
            continue
        lam = (l0 - leakage) / (l0 - l1)

        def mix(r1, l0=l0, l1=l1, lam=lam):
            r0 = (rate - lam * r1) / (1 - lam)
            return (lam * var * 2.0 ** (-2.0 * r1 * l1)
                    + (1 - lam) * var * 2.0 ** (-2.0 * r0 * l0))

        _, value = _golden_min(mix, 0.0, rate / lam)
        best = min(best, value)
    return best


def time_share(p0, p1, lam):
    """Linear mixture of two scheme points via a public time-sharing coin.

    For hard-decision (MAP-accuracy) leakage the mixed leakage is exact;
    for mutual-information leakage it is only an upper bound (the metric is
    convex, not linear), which the label records.
    """
    if p0.leakage_kind is not p1.leakage_kind:
        raise ValueError(
            f"leakage kinds differ: {p0.leakage_kind} vs {p1.leakage_kind}"
        )
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lam must lie in [0, 1], got {lam}")
    label = f"time-share lam={lam:g}"
    if p0.leakage_kind is LeakageKind.MUTUAL_INFO:
        label += " (leakage is an upper bound)"
    return SchemePoint(
        rate=lam * p1.rate + (1 - lam) * p0.rate,
        distortion=lam * p1.distortion + (1 - lam) * p0.distortion,
        leakage=lam * p1.leakage + (1 - lam) * p0.leakage,
        leakage_kind=p0.leakage_kind,
        label=label,
        scheme="time-share",
    )


@dataclass(frozen=True)
class Frontier:
    """A set of scheme points sharing a leakage kind, sorted by
    (leakage, rate)."""

    points: tuple
    kind: LeakageKind

    def __post_init__(self):
        pts = tuple(sorted(self.points, key=lambda p: (p.leakage, p.rate)))
        for p in pts:
            if p.leakage_kind is not self.kind:
                raise ValueError("frontier points must share the leakage kind")
        object.__setattr__(self, "points", pts)

    def to_csv(self):
        lines = ["rate,distortion,leakage,leakage_kind,scheme,label"]
        for p in self.points:
            lines.append(
                f"{p.rate:.9g},{p.distortion:.9g},{p.leakage:.9g},"
                f"{p.leakage_kind.value},{p.scheme},{p.label}"
            )
        return "\n".join(lines) + "\n"


def lower_hull(points, rate=None):
    """Lower convex envelope in (leakage, distortion) at a fixed rate.

    Every point's distortion is replaced by the best time-sharing mixture
    of the other points at the same rate and leakage; the result is the
    lower convex hull of the set.  All points must share the rate and the
    leakage kind.
    """
    points = list(points)
    if not points:
        raise ValueError("no points to convexify")
    kind = points[0].leakage_kind
    rates = {round(p.rate, 12) for p in points}
    if len(rates) > 1:
        raise InvalidConfigError(f"points mix rates {sorted(rates)}")
    if rate is not None and abs(points[0].rate - rate) > 1e-9:
        raise InvalidConfigError(
            f"points have rate {points[0].rate}, expected {rate}"
        )
    xs = np.array([p.leakage for p in points])
    ys = np.array([p.distortion for p in points])
    hull_x, hull_y = _lower_envelope(xs, ys)
    new_d = np.minimum(ys, np.interp(xs, hull_x, hull_y))
    out = [
        SchemePoint(
            rate=p.rate, distortion=float(d), leakage=p.leakage,
            leakage_kind=p.leakage_kind, label=p.label, scheme=p.scheme,
        )
        for p, d in zip(points, new_d)
    ]
    return Frontier(points=tuple(out), kind=kind)


def _lower_envelope(xs, ys):
    """Vertices of the lower convex hull of the 2-D point set, by x."""
    order = np.lexsort((ys, xs))
    hull = []
    for i in order:
        # at equal x keep only the lowest y
        if hull and xs[hull[-1]] == xs[i]:
            continue
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            cross = (xs[b] - xs[a]) * (ys[i] - ys[a]) \
                - (ys[b] - ys[a]) * (xs[i] - xs[a])
            if cross <= 0:  # b above or on the chord a->i
                hull.pop()
            else:
                break
        hull.append(i)
    return xs[hull], ys[hull]
