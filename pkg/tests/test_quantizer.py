import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from lpir.errors import DimensionError, InvalidConfigError
from lpir.quantizer import (
    Codebook,
    LloydConfig,
    LloydVectorQuantizer,
    lloyd_train,
    nearest,
)


def test_nearest_basic():
    cb = Codebook(np.array([[0.0], [10.0]]))
    assert nearest(cb, [4.0]) == (0, 16.0)


def test_nearest_exact_codeword():
    cb = Codebook(np.array([[1.0, 2.0], [3.0, 4.0]]))
    idx, dist = nearest(cb, [3.0, 4.0])
    assert idx == 1 and dist == 0.0


def test_nearest_tie_breaks_low():
    cb = Codebook(np.array([[1.0], [1.0]]))
    idx, _ = nearest(cb, [0.0])
    assert idx == 0


def test_nearest_dimension_mismatch():
    cb = Codebook(np.array([[0.0, 0.0]]))
    with pytest.raises(DimensionError):
        nearest(cb, [1.0])


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_nearest_matches_plain_scan(seed):
    rng = np.random.default_rng(seed)
    k, dim = int(rng.integers(1, 12)), int(rng.integers(1, 5))
    cb = Codebook(rng.normal(size=(k, dim)))
    v = rng.normal(size=dim)
    # independent scan: plain python loop, no vectorized shortcuts
    best_idx, best_d = 0, math.inf
    for j in range(k):
        d = sum((v[t] - cb.vectors[j, t]) ** 2 for t in range(dim))
        if d < best_d:
            best_idx, best_d = j, d
    idx, dist = nearest(cb, v)
    assert idx == best_idx
    assert dist == pytest.approx(best_d)


def test_lloyd_exact_fit_on_k_points():
    pts = np.array([[0.0, 0.0], [5.0, 5.0], [-4.0, 3.0], [2.0, -7.0]])
    cb, dist, hist = lloyd_train(pts, LloydConfig(k=4, restarts=4, seed=1))
    assert dist == 0.0
    got = {tuple(v) for v in cb.vectors}
    assert got == {tuple(p) for p in pts}


def test_lloyd_one_bit_gaussian_matches_closed_form():
    rng = np.random.default_rng(7)
    samples = rng.standard_normal((100_000, 1))
    cb, dist, _ = lloyd_train(samples, LloydConfig(k=2, restarts=3, seed=2))
    levels = np.sort(cb.vectors.ravel())
    optimum = math.sqrt(2.0 / math.pi)
    assert levels[0] == pytest.approx(-optimum, rel=0.02)
    assert levels[1] == pytest.approx(optimum, rel=0.02)
    assert dist == pytest.approx(1.0 - 2.0 / math.pi, rel=0.02)


def test_lloyd_history_nonincreasing():
    rng = np.random.default_rng(1)
    samples = rng.normal(size=(4000, 3))
    for seed in range(3):
        _, _, hist = lloyd_train(
            samples, LloydConfig(k=17, restarts=1, seed=seed)
        )
        assert all(b <= a + 1e-15 for a, b in zip(hist, hist[1:]))
        assert hist[-1] <= hist[0]


def test_lloyd_k1_is_sample_mean():
    rng = np.random.default_rng(9)
    samples = rng.normal(size=(500, 2))
    cb, _, _ = lloyd_train(samples, LloydConfig(k=1, restarts=1, seed=0))
    assert np.max(np.abs(cb.vectors[0] - samples.mean(axis=0))) < 1e-12


def test_lloyd_empty_cells_never_nan():
    # many duplicated points force empty cells after the first update
    base = np.repeat(np.array([[0.0], [1.0], [2.0]]), 40, axis=0)
    cb, dist, _ = lloyd_train(base, LloydConfig(k=16, restarts=2, seed=3))
    assert np.all(np.isfinite(cb.vectors))
    assert dist >= 0.0


def test_lloyd_k_exceeds_samples():
    with pytest.raises(InvalidConfigError):
        lloyd_train(np.zeros((3, 1)), LloydConfig(k=4))


def test_lloyd_deterministic_given_seed():
    rng = np.random.default_rng(4)
    samples = rng.normal(size=(800, 2))
    cfg = LloydConfig(k=8, restarts=2, seed=11)
    a, da, _ = lloyd_train(samples, cfg)
    b, db, _ = lloyd_train(samples, cfg)
    assert a.vectors.tobytes() == b.vectors.tobytes()
    assert da == db


def test_codebook_duplicate_diagnostics():
    cb = Codebook(np.array([[1.0], [2.0], [1.0]]))
    groups = cb.duplicate_groups()
    assert groups == [[0, 2]]
    assert Codebook(np.array([[1.0], [2.0]])).duplicate_groups() == []


class TestEstimatorApi:
    def test_fit_predict_transform(self):
        rng = np.random.default_rng(0)
        x = np.concatenate([
            rng.normal(-5, 0.1, size=(200, 2)),
            rng.normal(5, 0.1, size=(200, 2)),
        ])
        vq = LloydVectorQuantizer(n_codewords=2, restarts=2, seed=0).fit(x)
        labels = vq.predict(x)
        assert set(labels.tolist()) == {0, 1}
        quantized = vq.transform(x)
        assert quantized.shape == x.shape
        assert np.max(np.abs(quantized - vq.codebook_.vectors[labels])) == 0.0
        assert vq.score(x) == pytest.approx(-vq.distortion_, rel=1e-9)

    def test_get_params_and_clone(self):
        vq = LloydVectorQuantizer(n_codewords=5, restarts=3, seed=9)
        params = vq.get_params()
        assert params["n_codewords"] == 5 and params["restarts"] == 3
        dup = clone(vq)
        assert dup.get_params() == params

    def test_unfitted_errors(self):
        with pytest.raises(InvalidConfigError):
            LloydVectorQuantizer().predict(np.zeros((1, 1)))

    def test_inverse_transform(self):
        rng = np.random.default_rng(2)
        vq = LloydVectorQuantizer(n_codewords=3, seed=0).fit(rng.normal(size=(50, 2)))
        idx = vq.predict(rng.normal(size=(5, 2)))
        assert vq.inverse_transform(idx).shape == (5, 2)
        with pytest.raises(ValueError):
            vq.inverse_transform(np.array([99]))
