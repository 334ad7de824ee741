import itertools

import numpy as np
import pytest

from sosdecoder import MldInstance, build_rotated_surface, to_polynomial, to_qubo
from sosdecoder.exact import brute_force
from sosdecoder.problem import brute_force_qubo, css_qubo, default_penalty, slack_bits

from conftest import random_instance


def test_slack_form_small():
    poly = to_polynomial(MldInstance([[1, 1]], [1], [1.0, 2.0]))
    assert poly.num_vars == 3 and poly.n_error == 2
    assert poly.equalities[0] == {(0,): 1.0, (1,): 1.0, (2,): -2.0, (): -1.0}


def test_slack_counts_surface():
    code = build_rotated_surface(3)
    inst = MldInstance(code.hz, np.zeros(4, dtype=np.uint8), np.ones(9))
    poly = to_polynomial(inst)
    for j, grp in enumerate(poly.slack_groups):
        assert len(grp) == (2 if code.hz[j].sum() == 4 else 1)
    assert slack_bits(4) == 2 and slack_bits(2) == 1 and slack_bits(1) == 0 and slack_bits(6) == 2


def test_zero_syndrome_feasible():
    inst = MldInstance([[1, 1, 0], [0, 1, 1]], [0, 0], [1.0, 1.0, 1.0])
    val, res = to_polynomial(inst).evaluate(np.zeros(to_polynomial(inst).num_vars))
    assert val == 0.0 and not res.any()


@pytest.mark.parametrize("encoding", ["slack_binary", "product_parity"])
def test_encodings_exact_on_binary_points(rng, encoding):
    for _ in range(10):
        inst = random_instance(rng, n_range=(2, 6), max_vars=12)
        poly = to_polynomial(inst, encoding)
        best = np.inf
        for bits in itertools.product([0, 1], repeat=poly.num_vars):
            x = np.array(bits)
            val, res = poly.evaluate(x)
            if np.allclose(res, 0):
                assert inst.satisfied(x[: inst.n].astype(np.uint8))
                best = min(best, val)
        assert best == pytest.approx(brute_force(inst).value)


def test_qubo_small_example():
    poly = to_polynomial(MldInstance([[1, 1]], [1], [1.0, 2.0]))
    argmins, val = brute_force_qubo(to_qubo(poly, xi=10.0))
    assert argmins.tolist() == [[1, 0, 0]] and val == pytest.approx(1.0)


def test_qubo_penalty_vanishes_on_feasible_points():
    inst = MldInstance([[1, 1, 0], [0, 1, 1]], [1, 0], [1.0, 2.0, 3.0])
    poly = to_polynomial(inst)
    x = np.zeros(poly.num_vars)
    x[0] = 1
    for xi in (0.5, 10.0, 1e3):
        assert to_qubo(poly, xi).value(x) == pytest.approx(poly.objective @ x)


def test_qubo_trivial_matrices():
    from sosdecoder.problem import QuboMatrix

    argmins, val = brute_force_qubo(QuboMatrix(np.zeros((3, 3)), 0.0, 3))
    assert val == 0.0 and len(argmins) == 8
    argmins, val = brute_force_qubo(QuboMatrix(np.diag([1.0, 2.0]), 0.0, 2))
    assert argmins.tolist() == [[0, 0]]


def test_css_qubo_block_structure(rng):
    for _ in range(5):
        n = int(rng.integers(2, 5))
        hx = (rng.random((2, n)) < 0.5).astype(np.uint8)
        hz = (rng.random((1, n)) < 0.6).astype(np.uint8)
        ix = MldInstance(hx, hx @ (rng.random(n) < 0.5).astype(np.uint8) % 2, rng.uniform(0.5, 2, n))
        iz = MldInstance(hz, hz @ (rng.random(n) < 0.5).astype(np.uint8) % 2, rng.uniform(0.5, 2, n))
        joint = css_qubo(ix, iz)
        _, vj = brute_force_qubo(joint)
        _, vx = brute_force_qubo(to_qubo(to_polynomial(ix)))
        _, vz = brute_force_qubo(to_qubo(to_polynomial(iz)))
        assert vj == pytest.approx(vx + vz)
        assert vj == pytest.approx(brute_force(ix).value + brute_force(iz).value)


def test_zero_syndromes_css_qubo():
    h = np.array([[1, 1, 0], [0, 1, 1]], dtype=np.uint8)
    inst = MldInstance(h, [0, 0], np.ones(3))
    argmins, val = brute_force_qubo(css_qubo(inst, inst))
    assert val == pytest.approx(0.0) and not argmins[0].any()


def test_instance_validation():
    with pytest.raises(ValueError):
        MldInstance([[1, 1]], [1, 0], [1.0, 1.0])
    with pytest.raises(ValueError):
        MldInstance([[1, 1]], [1], [1.0])
    with pytest.raises(ValueError):
        to_polynomial(MldInstance([[1, 1]], [1], [1.0, 1.0]), "bogus")
    assert default_penalty(np.array([1.0, -2.0])) == 4.0
