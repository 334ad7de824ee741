import itertools

import numpy as np
import pytest

from sosdecoder import sdp


def _eig_problem(c):
    return sdp.SdpStandardForm([c.shape[0]], [c], [np.eye(c.shape[0]).reshape(1, -1)], [1.0])


def test_small_eigenvalue_examples():
    s = sdp.solve_sdp(_eig_problem(np.diag([1.0, 2.0])))
    assert s.status == sdp.OPTIMAL
    assert s.primal_value == pytest.approx(1.0, abs=1e-7)
    assert np.allclose(s.x[0], np.diag([1.0, 0.0]), atol=1e-6)
    s = sdp.solve_sdp(_eig_problem(np.array([[0.0, 1.0], [1.0, 0.0]])))
    assert s.primal_value == pytest.approx(-1.0, abs=1e-7)


def test_random_eigenvalues(rng):
    for _ in range(10):
        c = rng.normal(size=(5, 5))
        c = c + c.T
        p = _eig_problem(c)
        s = sdp.solve_sdp(p, tol=1e-8)
        assert s.status == sdp.OPTIMAL
        assert s.primal_value == pytest.approx(np.linalg.eigvalsh(c)[0], abs=1e-7)
        kkt = sdp.kkt_residuals(p, s)
        assert max(kkt.values()) <= 1e-8


def test_lp_vertex():
    p = sdp.SdpStandardForm([-2], [np.array([1.0, 2.0])], [np.array([[1.0, 1.0]])], [1.0])
    s = sdp.solve_sdp(p)
    assert s.status == sdp.OPTIMAL and s.primal_value == pytest.approx(1.0, abs=1e-7)


def _vertex_min(a, b, c):
    m, n = a.shape
    best = np.inf
    for cols in itertools.combinations(range(n), m):
        sub = a[:, cols]
        if abs(np.linalg.det(sub)) < 1e-10:
            continue
        xb = np.linalg.solve(sub, b)
        if np.all(xb >= -1e-12):
            best = min(best, float(c[list(cols)] @ xb))
    return best


def test_random_lps_match_vertex_enumeration(rng):
    for _ in range(15):
        n = int(rng.integers(3, 11))
        m = int(rng.integers(1, min(n, 4) + 1))
        a = np.vstack([np.ones(n), rng.normal(size=(m - 1, n))])
        x0 = rng.dirichlet(np.ones(n))
        b = a @ x0
        c = rng.normal(size=n)
        p = sdp.SdpStandardForm([-n], [c], [a], b)
        s = sdp.solve_sdp(p, tol=1e-8)
        assert s.status == sdp.OPTIMAL
        assert s.primal_value == pytest.approx(_vertex_min(a, b, c), abs=1e-7)
        assert max(sdp.kkt_residuals(p, s).values()) <= 1e-8


def test_infeasible_and_unbounded():
    p = sdp.SdpStandardForm([-2], [np.array([1.0, 2.0])], [np.array([[1.0, 1.0]])], [-1.0])
    assert sdp.solve_sdp(p).status == sdp.INFEASIBLE
    p = sdp.SdpStandardForm([-2], [np.array([-1.0, 0.0])], [np.array([[1.0, -1.0]])], [0.0])
    assert sdp.solve_sdp(p).status == sdp.UNBOUNDED


def test_presolve_duplicates():
    a = np.array([[1.0, 1.0], [1.0, 1.0]])
    p = sdp.SdpStandardForm([-2], [np.array([1.0, 2.0])], [a], [1.0, 1.0])
    reduced, kept = sdp.presolve(p)
    assert reduced.m == 1 and kept.size == 1
    assert sdp.solve_sdp(p).primal_value == pytest.approx(1.0, abs=1e-7)
    with pytest.raises(sdp.SdpError):
        sdp.presolve(sdp.SdpStandardForm([-2], [np.array([1.0, 2.0])], [a], [1.0, 2.0]))


def test_mixed_blocks():
    # min x11 + x22 + t  s.t. x12 = 1 (so X needs trace >= 2), t = 0.5
    a0 = np.zeros((2, 2))
    a0[0, 1] = a0[1, 0] = 0.5
    p = sdp.SdpStandardForm(
        [2, -1], [np.eye(2), np.array([1.0])],
        [np.array([a0.ravel(), np.zeros(4)]), np.array([[0.0], [1.0]])], [1.0, 0.5],
    )
    s = sdp.solve_sdp(p)
    assert s.status == sdp.OPTIMAL and s.primal_value == pytest.approx(2.5, abs=1e-7)


def test_free_form_box():
    # min -u s.t. 0 <= u <= 1 (as an LP) and [[1, u], [u, 1]] PSD
    g = np.array([[-1.0], [1.0]])
    h = np.array([0.0, 1.0])
    f_lin = np.zeros((2, 2, 1))
    f_lin[0, 1, 0] = f_lin[1, 0, 0] = 1.0
    res = sdp.solve_free_form(np.array([-1.0]), np.zeros((0, 1)), np.zeros(0), lp=(g, h),
                              psd=[(np.eye(2), f_lin)])
    assert res.usable and res.value == pytest.approx(-1.0, abs=1e-6)


def test_standard_form_validation():
    with pytest.raises(ValueError):
        sdp.SdpStandardForm([2], [np.array([[0.0, 1.0], [0.0, 0.0]])], [np.zeros((1, 4))], [1.0])
    with pytest.raises(ValueError):
        sdp.SdpStandardForm([2], [np.eye(2)], [np.zeros((1, 3))], [1.0])
