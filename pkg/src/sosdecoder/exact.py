"""Exact minimum-cost decoding: coset enumeration and LP-based branch and bound."""

from dataclasses import dataclass

import numpy as np

from . import gf2, kernels, sdp

MAX_COSET_DIM = 26


class BudgetExceeded(ValueError):
    pass


class InconsistentSyndrome(ValueError):
    pass


@dataclass
class ExactResult:
    e_star: np.ndarray
    value: float
    nodes_explored: int = 0


def mld_coset(inst):
    """Enumerate ``solve(h, s) ^ span(ker h)``; ties go to the lexicographically smallest error."""
    base = gf2.solve(inst.h, inst.s)
    if base is None:
        raise InconsistentSyndrome("syndrome is not in the column space of h")
    gens = gf2.nullspace_basis(inst.h)
    if gens.shape[0] > MAX_COSET_DIM:
        raise BudgetExceeded(f"coset dimension {gens.shape[0]} exceeds {MAX_COSET_DIM}")
    e, val = kernels.min_over_span(base, gens, inst.gamma)
    return ExactResult(e, val, 0)


def brute_force(inst):
    """Exhaustive search over all ``2^n`` error vectors (test oracle)."""
    found, e, val = kernels.brute_force_mld(inst.h, inst.s, inst.gamma)
    if not found:
        raise InconsistentSyndrome("syndrome is not in the column space of h")
    return ExactResult(e, val, 2 ** inst.n)


def _completable(inst, fixed):
    """Whether the fixed error bits extend to a solution of ``h e = s``."""
    if not fixed:
        return inst.consistent
    idx = np.array(sorted(fixed))
    vals = np.array([fixed[i] for i in idx], dtype=np.uint8)
    free = np.setdiff1d(np.arange(inst.n), idx)
    rhs = inst.s ^ gf2.matvec(inst.h[:, idx], vals)
    if free.size == 0:
        return not rhs.any()
    return gf2.solve(inst.h[:, free], rhs) is not None


def mld_branch_and_bound(inst, tol=1e-8, max_nodes=1_000_000):
    """Depth-first branch and bound with LP lower bounds.

    Branches on the error bit whose LP value is closest to 1/2 and explores
    the child nearer the LP value first. Nodes whose fixed bits cannot be
    completed over GF(2) are cut before solving their LP. The optimal value
    matches :func:`mld_coset`; with tied optima the returned error may differ.
    """
    from .problem import to_polynomial
    from .relaxations import lp_relax

    if not inst.consistent:
        raise InconsistentSyndrome("syndrome is not in the column space of h")
    poly = to_polynomial(inst, "slack_binary")
    n = inst.n
    scale = 1.0 + float(np.abs(inst.gamma).sum())
    margin = 1e-6 * scale
    best_e, best_val = None, np.inf
    stack = [{}]
    nodes = 0

    def offer(e):
        nonlocal best_e, best_val
        if not inst.satisfied(e):
            return
        v = inst.cost(e)
        if v < best_val or (v == best_val and kernels._lex_less(e, best_e)):
            best_e, best_val = e.copy(), v

    while stack:
        fixed = stack.pop()
        nodes += 1
        if nodes > max_nodes:
            raise BudgetExceeded(f"branch and bound exceeded {max_nodes} nodes")
        if len(fixed) == n:
            offer(np.array([fixed[i] for i in range(n)], dtype=np.uint8))
            continue
        rv = lp_relax(poly, fixed, tol)
        # only a converged LP gives a trustworthy bound
        if rv.status in (sdp.OPTIMAL, sdp.NEAR_OPTIMAL) and rv.value > best_val + margin:
            continue
        x = np.clip(rv.fractional_solution, 0.0, 1.0)
        free = [i for i in range(n) if i not in fixed]
        frac = np.abs(x - 0.5)
        integral = np.all(frac[free] > 0.5 - 1e-7)
        rounded = (x > 0.5).astype(np.uint8)
        if integral and inst.satisfied(rounded):
            offer(rounded)
            continue
        if integral:
            bad = gf2.matvec(inst.h, rounded) != inst.s
            cand = [i for i in free if bad.any() and inst.h[bad, i].any()] or free
            pick = cand[0]
        else:
            pick = min(free, key=lambda i: (frac[i], i))
        first = int(x[pick] > 0.5)
        for val in (1 - first, first):
            child = dict(fixed)
            child[pick] = val
            if _completable(inst, child):
                stack.append(child)
    if best_e is None:
        raise InconsistentSyndrome("no feasible error found")
    return ExactResult(best_e, best_val, nodes)
