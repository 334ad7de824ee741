import itertools
import math

import numpy as np
import pytest

from sosdecoder import gf2, noise


def test_weights():
    assert noise.weights_from_priors(0.5)[0] == pytest.approx(0.0, abs=1e-15)
    assert noise.weights_from_priors(0.05)[0] == pytest.approx(math.log(19), rel=1e-14)
    p = np.array([0.1, 0.3])
    assert np.allclose(noise.weights_from_priors(p), -noise.weights_from_priors(1 - p))
    with pytest.raises(ValueError):
        noise.weights_from_priors([0.0])


def test_sampling_extremes_and_mean():
    stream = noise.trial_stream(1, 0)
    assert not noise.sample_error(20, 0.0, stream).any()
    assert noise.sample_error(20, 1.0, stream).all()
    e = noise.sample_error(100_000, 0.1, noise.trial_stream(7, 3))
    sigma = math.sqrt(0.1 * 0.9 / 100_000)
    assert abs(e.mean() - 0.1) <= 4 * sigma


def test_streams_are_reproducible_and_distinct():
    a = noise.sample_error(64, 0.5, noise.trial_stream(3, 5))
    b = noise.sample_error(64, 0.5, noise.trial_stream(3, 5))
    c = noise.sample_error(64, 0.5, noise.trial_stream(3, 6))
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_syndrome_linearity(rng):
    h = (rng.random((4, 9)) < 0.5).astype(np.uint8)
    assert not noise.syndrome(h, np.zeros(9, dtype=np.uint8)).any()
    e = np.zeros(9, dtype=np.uint8)
    e[4] = 1
    assert np.array_equal(noise.syndrome(h, e), h[:, 4])
    e1 = (rng.random(9) < 0.5).astype(np.uint8)
    e2 = (rng.random(9) < 0.5).astype(np.uint8)
    assert np.array_equal(noise.syndrome(h, e1 ^ e2), noise.syndrome(h, e1) ^ noise.syndrome(h, e2))


def test_classical_to_syndrome_examples():
    h = np.array([[1, 1, 0], [0, 1, 1]], dtype=np.uint8)
    w = np.array([1.0, 2.0, 3.0])
    lam, off, s = noise.classical_to_syndrome(h, np.zeros(3, dtype=np.uint8), w)
    assert np.array_equal(lam, w) and off == 0.0 and not s.any()
    lam, off, s = noise.classical_to_syndrome(h, np.ones(3, dtype=np.uint8), np.full(3, 2.0))
    assert np.array_equal(lam, np.full(3, -2.0)) and off == 6.0


def test_classical_to_syndrome_brute_force(rng):
    for _ in range(20):
        n = int(rng.integers(2, 8))
        h = (rng.random((3, n)) < 0.5).astype(np.uint8)
        y = (rng.random(n) < 0.5).astype(np.uint8)
        w = rng.uniform(0.1, 2.0, n)
        lam, off, s = noise.classical_to_syndrome(h, y, w)
        pts = [np.array(b, dtype=np.uint8) for b in itertools.product([0, 1], repeat=n)]
        left = min(lam @ x + off for x in pts if not gf2.matvec(h, x).any())
        right = min(w @ e for e in pts if np.array_equal(gf2.matvec(h, e), s))
        assert left == pytest.approx(right, abs=1e-12)
