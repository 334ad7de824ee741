import itertools

import numpy as np
import pytest

from sosdecoder import kernels


def _brute(h, s, c):
    best, arg = np.inf, None
    for bits in itertools.product([0, 1], repeat=h.shape[1]):
        e = np.array(bits, dtype=np.uint8)
        if np.array_equal(h @ e % 2, s):
            v = kernels.canonical_cost(c, e)
            if v < best:
                best, arg = v, e
    return best, arg


def test_canonical_cost_is_sequential_sum():
    c = np.array([0.1, 0.2, 0.3])
    assert kernels.canonical_cost(c, [1, 1, 1]) == (0.1 + 0.2) + 0.3
    assert kernels.canonical_cost(c, [0, 0, 0]) == 0.0


def test_brute_force_matches_enumeration(kernel_path, rng):
    for _ in range(30):
        n = int(rng.integers(1, 9))
        h = (rng.random((3, n)) < 0.5).astype(np.uint8)
        s = h @ (rng.random(n) < 0.4).astype(np.uint8) % 2
        c = rng.uniform(-1, 3, n)
        found, e, val = kernels.brute_force_mld(h, s, c)
        ref, _ = _brute(h, s, c)
        assert found and val == ref and np.array_equal(h @ e % 2, s)


def test_brute_force_reports_inconsistent(kernel_path):
    found, _, _ = kernels.brute_force_mld(np.array([[1, 1], [1, 1]]), np.array([1, 0]), np.ones(2))
    assert not found


def test_min_over_span_lexicographic_ties(kernel_path):
    # two optimal errors of equal cost: (1,0,0) and (0,1,0); lexicographic minimum wins
    base = np.array([1, 0, 0], dtype=np.uint8)
    gens = np.array([[1, 1, 0]], dtype=np.uint8)
    e, val = kernels.min_over_span(base, gens, np.ones(3))
    assert e.tolist() == [0, 1, 0] and val == 1.0


def test_paths_agree(monkeypatch, rng):
    from sosdecoder import _accel

    if not _accel.HAVE_NUMBA:
        pytest.skip("numba not installed")
    for _ in range(20):
        n = int(rng.integers(4, 12))
        k = int(rng.integers(0, 8))
        base = (rng.random(n) < 0.5).astype(np.uint8)
        gens = (rng.random((k, n)) < 0.5).astype(np.uint8)
        c = np.round(rng.uniform(0, 2, n), 1)  # rounding produces ties
        q = rng.normal(size=(6, 6))
        out = {}
        for flag in (True, False):
            monkeypatch.setattr(_accel, "USE_NUMBA", flag)
            out[flag] = (kernels.min_over_span(base, gens, c), kernels.qubo_scan(q + q.T))
        (e1, v1), (b1, c1) = out[True]
        (e2, v2), (b2, c2) = out[False]
        assert np.array_equal(e1, e2) and v1 == v2
        assert abs(b1 - b2) < 1e-9 and np.array_equal(c1, c2)


def test_qubo_scan_all_minimizers(kernel_path):
    best, codes = kernels.qubo_scan(np.zeros((3, 3)))
    assert best == 0.0 and codes.tolist() == list(range(8))
    best, codes = kernels.qubo_scan(np.diag([1.0, 2.0]))
    assert best == 0.0 and codes.tolist() == [0]
