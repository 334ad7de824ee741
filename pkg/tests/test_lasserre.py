import numpy as np
import pytest

from sosdecoder import MldInstance, build_rotated_surface, exact, gf2, lasserre
from sosdecoder.problem import to_polynomial
from sosdecoder.relaxations import lp_relax

from conftest import random_instance

TOL = 1e-6


def test_basis_sizes():
    b = lasserre.build_basis(2, 1)
    assert b.monomials == ((), (0,), (1,))
    assert lasserre.build_basis(9, 1).size == 10
    assert lasserre.build_basis(3, 2).size == 7
    with pytest.raises(ValueError):
        lasserre.build_basis(3, 0)
    with pytest.raises(ValueError):
        lasserre.build_basis(200, 4)


def test_cliques():
    poly = to_polynomial(MldInstance([[1, 1]], [1], [1.0, 2.0]))
    assert lasserre.correlative_cliques(poly).cliques == ((0, 1, 2),)
    poly = to_polynomial(MldInstance([[1, 1, 0, 0], [0, 0, 1, 1]], [1, 1], np.ones(4)))
    assert len(lasserre.correlative_cliques(poly).cliques) == 2
    code = build_rotated_surface(3)
    poly = to_polynomial(MldInstance(code.hz, np.zeros(code.hz.shape[0]), np.ones(9)))
    dec = lasserre.correlative_cliques(poly)
    assert set().union(*map(set, dec.cliques)) == set(range(poly.num_vars))
    for sup in poly.supports():
        assert dec.owners(sup)


def test_single_variable_no_checks():
    poly = to_polynomial(MldInstance(np.zeros((0, 1), dtype=np.uint8), np.zeros(0, dtype=np.uint8), [1.0]))
    sol = lasserre.solve_level(poly, 1)
    assert sol.lam == pytest.approx(0.0, abs=1e-7)
    assert sol.y((0,)) == pytest.approx(0.0, abs=1e-6)


def test_two_bit_check_level1():
    inst = MldInstance([[1, 1]], [1], [1.0, 2.0])
    lam = lasserre.solve_level(to_polynomial(inst), 1).lam
    assert lp_relax(inst).value - TOL <= lam <= 1.0 + TOL


@pytest.mark.parametrize("level", [1, 2])
def test_zero_syndrome(level):
    code = build_rotated_surface(3)
    inst = MldInstance(code.hz, np.zeros(4, dtype=np.uint8), np.ones(9))
    r = lasserre.decode(inst, level)
    assert r.lam == pytest.approx(0.0, abs=1e-6) and r.feasible and not r.e_hat.any()
    if level >= 2:
        assert r.rank_loop


def test_monotone_and_bounded(rng):
    for _ in range(12):
        inst = random_instance(rng, n_range=(2, 7), v_range=(1, 3), max_vars=9)
        poly = to_polynomial(inst)
        opt = exact.brute_force(inst).value
        lams = [lasserre.solve_level(poly, lvl).lam for lvl in (1, 2, 3)]
        assert lams[0] <= lams[1] + TOL <= lams[2] + 2 * TOL
        assert lams[2] <= opt + TOL


def test_moment_matrix_structure(rng):
    inst = random_instance(rng, n_range=(3, 6), v_range=(1, 3), max_vars=8)
    sol = lasserre.solve_level(to_polynomial(inst), 2)
    assert sol.y(()) == 1.0
    mm = sol.moment_matrix()
    assert np.allclose(mm, mm.T)
    assert np.linalg.eigvalsh(mm)[0] >= -1e-6
    first = sol.first_moments(inst.n)
    assert np.all(first >= -1e-6) and np.all(first <= 1 + 1e-6)


def test_rank_examples():
    code = build_rotated_surface(3)
    inst = MldInstance(code.hz, np.zeros(4, dtype=np.uint8), np.ones(9))
    sol = lasserre.solve_level(to_polynomial(inst), 2)
    assert lasserre.moment_rank(sol) == 1 and lasserre.rank_loop(sol)
    with pytest.raises(ValueError):
        lasserre.rank_loop(lasserre.solve_level(to_polynomial(inst), 1))
    with pytest.raises(ValueError):
        lasserre.moment_rank(sol, 3)


def test_surface_single_errors_level2():
    code = build_rotated_surface(3)
    gamma = np.full(9, np.log(19.0))
    for q in range(9):
        e = np.zeros(9, dtype=np.uint8)
        e[q] = 1
        inst = MldInstance(code.hz, gf2.matvec(code.hz, e), gamma)
        r = lasserre.decode(inst, 2)
        ref = exact.mld_coset(inst)
        assert r.feasible and inst.cost(r.e_hat) == pytest.approx(ref.value)


def test_certified_instances_are_exact(rng):
    code = build_rotated_surface(3)
    gamma = np.full(9, np.log(9.0))
    certified = 0
    for _ in range(15):
        e = (rng.random(9) < 0.15).astype(np.uint8)
        inst = MldInstance(code.hz, gf2.matvec(code.hz, e), gamma)
        r = lasserre.decode(inst, 2)
        if r.rank_loop:
            certified += 1
            opt = exact.mld_coset(inst).value
            assert abs(r.lam - opt) <= 1e-5
            assert r.feasible and inst.cost(r.e_hat) == pytest.approx(opt)
    assert certified > 0


def test_sparse_matches_dense(rng):
    for _ in range(5):
        inst = random_instance(rng, n_range=(4, 8), v_range=(2, 4), density=0.3, max_vars=11)
        poly = to_polynomial(inst)
        dense1 = lasserre.solve_level(poly, 1, "dense").lam
        sparse1 = lasserre.solve_level(poly, 1, "sparse").lam
        assert sparse1 == pytest.approx(dense1, abs=1e-6)
        dense2 = lasserre.solve_level(poly, 2, "dense").lam
        sparse2 = lasserre.solve_level(poly, 2, "sparse").lam
        assert sparse2 <= dense2 + 1e-6


def test_inconsistent_syndrome_never_feasible():
    # the real relaxation can stay feasible, but no bit vector passes the check
    inst = MldInstance([[1, 1], [1, 1]], [1, 0], [1.0, 1.0])
    for level in (1, 2):
        assert not lasserre.decode(inst, level).feasible
