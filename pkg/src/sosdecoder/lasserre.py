"""Moment (Lasserre) relaxations of binary polynomial programs.

Moments are indexed by variable subsets: for binary variables ``x_i^2 = x_i``
so every monomial is multilinear and ``y(S)`` stands for ``E[prod_{i in S} x_i]``.
At level ``l`` the moment matrix is indexed by subsets of size ``<= l`` with
``M[S, T] = y(S | T)``; each equality ``h`` contributes the localizing
equalities ``sum_m h_m y(m | U) = 0`` for every ``U`` with
``|U| + deg(h) <= 2l``.

Assembly eliminates the linear equalities (``y = y0 + B z``) and, per PSD
block, restricts the moment matrix to the orthogonal complement of the
vectors ``h * x^S`` that every feasible moment matrix annihilates. The
remaining program is handed to :mod:`sosdecoder.sdp` in dual form, so the
moment matrix is the dual slack and the primal carries the SOS certificate.
"""

import functools
import itertools
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import gf2, sdp
from .problem import to_polynomial

MAX_BASIS = 1_000_000
DEFAULT_RANK_TOL = 1e-6


def subsets_upto(variables, k):
    """All sorted sub-tuples of ``variables`` with at most ``k`` elements, graded-lex."""
    variables = tuple(sorted(variables))
    for r in range(min(k, len(variables)) + 1):
        yield from itertools.combinations(variables, r)


def _union(a, b):
    if not a:
        return b
    if not b:
        return a
    return tuple(sorted(set(a).union(b)))


@dataclass(frozen=True)
class MomentBasis:
    level: int
    variables: tuple
    monomials: tuple
    index: dict = field(repr=False)

    @property
    def size(self):
        return len(self.monomials)

    def upto(self, r):
        """Number of leading monomials of degree ``<= r``."""
        return sum(math.comb(len(self.variables), k) for k in range(min(r, len(self.variables)) + 1))


def build_basis(n_vars, level, variables=None):
    """Multilinear monomial basis of degree ``<= level``; position 0 is the empty set."""
    if level < 1:
        raise ValueError("level must be at least 1")
    variables = tuple(range(n_vars)) if variables is None else tuple(sorted(variables))
    size = sum(math.comb(len(variables), k) for k in range(min(level, len(variables)) + 1))
    if size > MAX_BASIS:
        raise ValueError(f"moment basis of size {size} exceeds the limit {MAX_BASIS}")
    monomials = tuple(subsets_upto(variables, level))
    return MomentBasis(level, variables, monomials, {m: i for i, m in enumerate(monomials)})


@dataclass(frozen=True)
class CliqueDecomposition:
    cliques: tuple

    def owners(self, support):
        """Indices of the cliques containing ``support``."""
        s = set(support)
        return [k for k, c in enumerate(self.cliques) if s.issubset(c)]


def correlative_cliques(poly):
    """Maximal cliques of a chordal extension of the correlative sparsity graph.

    Variables are adjacent when they appear in a common equality. The
    extension follows a minimum-degree elimination order (ties broken by the
    smaller variable index).
    """
    nv = poly.num_vars
    adj = {i: set() for i in range(nv)}
    for sup in poly.supports():
        for a, b in itertools.combinations(sup, 2):
            adj[a].add(b)
            adj[b].add(a)
    remaining = set(range(nv))
    work = {i: set(nb) for i, nb in adj.items()}
    candidates = []
    while remaining:
        v = min(remaining, key=lambda i: (len(work[i]), i))
        nbrs = work[v]
        candidates.append(tuple(sorted(nbrs | {v})))
        for a, b in itertools.combinations(nbrs, 2):
            work[a].add(b)
            work[b].add(a)
        for u in nbrs:
            work[u].discard(v)
        remaining.discard(v)
        del work[v]
    sets = [set(c) for c in candidates]
    maximal = []
    for i, c in enumerate(sets):
        if any(c < d for d in sets) or any(c == d for d in sets[:i]):
            continue
        maximal.append(tuple(sorted(c)))
    maximal.sort(key=lambda c: (c[0], c))
    return CliqueDecomposition(tuple(maximal))


@dataclass
class MomentSdp:
    """Assembled moment relaxation; independent of the objective coefficients."""

    level: int
    mode: str
    num_vars: int
    moments: list
    index: dict
    cliques: CliqueDecomposition
    bases: list
    labels: list
    projections: list
    y0: np.ndarray
    directions: np.ndarray
    consistent: bool
    c_blocks: list
    a_blocks: list
    n_equalities: int = 0

    def moment_objective(self, objective):
        """Objective over the moment vector for a linear objective over variables."""
        cvec = np.zeros(len(self.moments))
        for i, coef in enumerate(objective):
            if coef:
                cvec[self.index[(i,)]] += coef
        return cvec

    def standard_form(self, objective):
        b = -(self.directions.T @ self.moment_objective(objective))
        blocks = [p.shape[1] for p in self.projections]
        return sdp.SdpStandardForm(blocks, self.c_blocks, self.a_blocks, b)


def _localizing_sets(clique, eq, level):
    deg = max(len(m) for m in eq)
    return subsets_upto(clique, 2 * level - deg)


def assemble_moment_sdp(poly, level, mode="dense"):
    """Build the level-``level`` moment relaxation of ``poly`` (dense or clique-sparse)."""
    if level < 1:
        raise ValueError("level must be at least 1")
    if mode not in ("dense", "sparse"):
        raise ValueError(f"unknown mode {mode!r}")
    for eq in poly.equalities:
        deg = max((len(m) for m in eq), default=0)
        if math.ceil(deg / 2) > level:
            raise ValueError(f"level {level} is too low for a degree-{deg} constraint")
    nv = poly.num_vars
    if mode == "dense" or nv == 0:
        cliques = CliqueDecomposition((tuple(range(nv)),))
    else:
        cliques = correlative_cliques(poly)

    index = {}
    moments = []
    for clique in cliques.cliques:
        for s in subsets_upto(clique, 2 * level):
            if s not in index:
                index[s] = len(moments)
                moments.append(s)

    # linear equalities: normalization and localizing rows, in every clique
    # holding the equality's support (needed for the per-clique face)
    rows, cols, vals, rhs = [0], [index[()]], [1.0], [1.0]
    nrow = 1
    supports = poly.supports()
    seen = set()
    for j, eq in enumerate(poly.equalities):
        for k in cliques.owners(supports[j]):
            for u in _localizing_sets(cliques.cliques[k], eq, level):
                if (j, u) in seen:
                    continue
                seen.add((j, u))
                acc = {}
                for mono, coef in eq.items():
                    col = index[_union(mono, u)]
                    acc[col] = acc.get(col, 0.0) + coef
                acc = {c: v for c, v in acc.items() if v != 0.0}
                if not acc:
                    continue
                for c, v in acc.items():
                    rows.append(nrow)
                    cols.append(c)
                    vals.append(v)
                rhs.append(0.0)
                nrow += 1
    e_mat = np.zeros((nrow, len(moments)))
    np.add.at(e_mat, (np.array(rows), np.array(cols)), np.array(vals))
    y0, directions, consistent = sdp.equality_nullspace(e_mat, np.array(rhs))

    bases, labels, projections, c_blocks, a_blocks = [], [], [], [], []
    for clique in cliques.cliques:
        basis = build_basis(nv, level, clique)
        lab = np.empty((basis.size, basis.size), dtype=np.int64)
        for i, a in enumerate(basis.monomials):
            for j in range(i, basis.size):
                lab[i, j] = lab[j, i] = index[_union(a, basis.monomials[j])]
        proj = _face_projection(poly, basis, clique, supports, level)
        bases.append(basis)
        labels.append(lab)
        projections.append(proj)
        r = proj.shape[1]
        c0 = proj.T @ y0[lab] @ proj
        g = directions[lab]  # (N, N, k)
        t = np.tensordot(proj, g, axes=([0], [0]))  # (r, N, k)
        t = np.tensordot(t, proj, axes=([1], [0]))  # (r, k, r)
        amat = -np.ascontiguousarray(np.transpose(t, (1, 0, 2))).reshape(directions.shape[1], r * r)
        c_blocks.append(0.5 * (c0 + c0.T))
        a_blocks.append(amat)
    return MomentSdp(
        level, mode, nv, moments, index, cliques, bases, labels, projections,
        y0, directions, consistent, c_blocks, a_blocks, nrow,
    )


def _face_projection(poly, basis, clique, supports, level):
    """Orthonormal basis of the complement of the forced kernel of a moment block."""
    cset = set(clique)
    vecs = []
    for j, eq in enumerate(poly.equalities):
        if not set(supports[j]) <= cset:
            continue
        deg = max(len(m) for m in eq)
        for s in subsets_upto(clique, level - deg):
            q = np.zeros(basis.size)
            for mono, coef in eq.items():
                q[basis.index[_union(mono, s)]] += coef
            if np.any(q):
                vecs.append(q)
    if not vecs:
        return np.eye(basis.size)
    kmat = np.array(vecs)
    _, sv, vt = np.linalg.svd(kmat, full_matrices=True)
    rank = int(np.sum(sv > 1e-9 * sv[0]))
    return vt[rank:].T.copy()


@functools.lru_cache(maxsize=64)
def _cached_assembly(h_bytes, shape, s_bytes, level, mode, encoding):
    from .problem import MldInstance

    h = np.frombuffer(h_bytes, dtype=np.uint8).reshape(shape)
    s = np.frombuffer(s_bytes, dtype=np.uint8)
    inst = MldInstance(h, s, np.zeros(shape[1]))
    poly = to_polynomial(inst, encoding)
    return poly, assemble_moment_sdp(poly, level, mode)


def assembly_for(inst, level, mode="dense", encoding="slack_binary"):
    """Cached assembly for an instance; only the syndrome and check matrix matter."""
    poly, asm = _cached_assembly(inst.h.tobytes(), inst.h.shape, inst.s.tobytes(), level, mode, encoding)
    return to_polynomial(inst, encoding), asm


# ---------------------------------------------------------------------------
# solutions
# ---------------------------------------------------------------------------


@dataclass
class MomentSolution:
    level: int
    mode: str
    moments: list
    values: np.ndarray
    index: dict
    lam: float
    status: str
    cliques: CliqueDecomposition
    bases: list
    labels: list
    sdp_solution: object = None

    def y(self, subset):
        """Moment of ``subset`` (any iterable of variable indices), ``None`` if not tracked."""
        key = tuple(sorted(set(subset)))
        k = self.index.get(key)
        return None if k is None else float(self.values[k])

    def moment_matrix(self, block=0, r=None):
        lab = self.labels[block]
        if r is not None:
            k = self.bases[block].upto(r)
            lab = lab[:k, :k]
        return self.values[lab]

    def first_moments(self, n):
        return np.array([self.y((i,)) if self.y((i,)) is not None else 0.0 for i in range(n)])

    def to_dict(self):
        return {
            "level": self.level,
            "mode": self.mode,
            "lambda": self.lam,
            "status": self.status,
            "moments": {",".join(map(str, s)): float(v) for s, v in zip(self.moments, self.values)},
        }


def solve_assembled(asm, objective, tol=1e-8, max_iter=200):
    if not asm.consistent:
        return MomentSolution(
            asm.level, asm.mode, asm.moments, asm.y0.copy(), asm.index, np.inf, sdp.INFEASIBLE,
            asm.cliques, asm.bases, asm.labels,
        )
    cvec = asm.moment_objective(objective)
    const = float(cvec @ asm.y0)
    if asm.directions.shape[1] == 0:
        values = asm.y0.copy()
        values[asm.index[()]] = 1.0
        return MomentSolution(
            asm.level, asm.mode, asm.moments, values, asm.index, const, sdp.OPTIMAL,
            asm.cliques, asm.bases, asm.labels,
        )
    form = asm.standard_form(objective)
    sol = sdp.solve_sdp(form, tol=tol, max_iter=max_iter, presolve_rows=False)
    values = asm.y0 + asm.directions @ sol.y
    values[asm.index[()]] = 1.0
    lam = const - sol.dual_value
    status = sol.status
    if status != sdp.OPTIMAL and sdp.usable(sol):
        status = sdp.NEAR_OPTIMAL
    return MomentSolution(
        asm.level, asm.mode, asm.moments, values, asm.index, lam, status,
        asm.cliques, asm.bases, asm.labels, sol,
    )


def solve_level(poly, level, mode="dense", tol=1e-8, max_iter=200):
    """Assemble and solve; ``lam`` is the relaxation's optimal value."""
    asm = assemble_moment_sdp(poly, level, mode)
    return solve_assembled(asm, poly.objective, tol, max_iter)


def _numerical_rank(mat, rel_tol):
    if mat.size == 0:
        return 0, np.zeros(0)
    sv = np.linalg.svd(mat, compute_uv=False)
    if sv[0] <= 0:
        return 0, sv
    return int(np.sum(sv > rel_tol * sv[0])), sv


def moment_rank(sol, r=None, rel_tol=DEFAULT_RANK_TOL):
    """Numerical rank of the degree-``r`` moment matrix (summed over cliques)."""
    r = sol.level if r is None else r
    if r > sol.level or r < 0:
        raise ValueError(f"rank level {r} outside 0..{sol.level}")
    return sum(_numerical_rank(sol.moment_matrix(b, r), rel_tol)[0] for b in range(len(sol.bases)))


def rank_report(sol, rel_tol=DEFAULT_RANK_TOL):
    """Per-level ranks with the singular values on either side of the cutoff."""
    out = []
    for r in range(sol.level + 1):
        for b in range(len(sol.bases)):
            rk, sv = _numerical_rank(sol.moment_matrix(b, r), rel_tol)
            below = float(sv[rk]) if rk < sv.size else 0.0
            above = float(sv[rk - 1]) if rk > 0 else 0.0
            out.append({"level": r, "block": b, "rank": rk, "last_kept": above, "first_dropped": below})
    return out


def rank_loop(sol, rel_tol=DEFAULT_RANK_TOL):
    """Flat-extension certificate ``rank M_l == rank M_{l-1}``.

    In sparse mode every clique must be flat and every pairwise clique
    intersection must carry a rank-one moment matrix.
    """
    if sol.level < 2:
        raise ValueError("the rank loop needs level >= 2")
    if sol.status not in (sdp.OPTIMAL, sdp.NEAR_OPTIMAL):
        return False
    for b in range(len(sol.bases)):
        full = _numerical_rank(sol.moment_matrix(b, sol.level), rel_tol)[0]
        prev = _numerical_rank(sol.moment_matrix(b, sol.level - 1), rel_tol)[0]
        if full != prev:
            return False
    cl = sol.cliques.cliques
    for i, j in itertools.combinations(range(len(cl)), 2):
        common = sorted(set(cl[i]) & set(cl[j]))
        if not common:
            continue
        mons = list(subsets_upto(common, sol.level))
        mat = np.array([[sol.y(_union(a, b)) for b in mons] for a in mons])
        if _numerical_rank(mat, rel_tol)[0] != 1:
            return False
    return True


# ---------------------------------------------------------------------------
# rounding
# ---------------------------------------------------------------------------


def _round(values):
    return (np.asarray(values) > 0.5).astype(np.uint8)


def _greedy_repair(e, moments, h, s):
    e = e.copy()
    flipped = np.zeros(e.size, dtype=bool)
    for _ in range(e.size):
        bad = gf2.matvec(h, e) != s
        if not bad.any():
            break
        touched = np.flatnonzero(h[bad].any(axis=0) & ~flipped)
        if touched.size == 0:
            break
        dist = np.abs(moments[touched] - 0.5)
        pick = touched[np.argmin(dist)]
        e[pick] ^= 1
        flipped[pick] = True
    return e, bool(np.array_equal(gf2.matvec(h, e), s))


def _condition_extract(sol, n, max_depth, atol=1e-4):
    """Round the moments conditioned on a growing set of variables being 1."""
    cond = []
    base = 1.0
    for _ in range(max_depth + 1):
        vals = []
        for i in range(n):
            v = sol.y(tuple(cond) + (i,))
            if v is None:
                return None
            vals.append(v / base)
        vals = np.array(vals)
        frac = (vals > atol) & (vals < 1.0 - atol)
        if not frac.any():
            return _round(vals)
        if len(cond) == max_depth:
            return None
        cand = np.flatnonzero(frac)
        pick = int(cand[np.argmax(vals[cand])])
        nxt = sol.y(tuple(cond) + (pick,))
        if nxt is None or nxt <= 1e-9:
            return None
        cond.append(pick)
        base = nxt
    return None


def extract_error(sol, inst, certified=False, tol=1e-6):
    """Estimated error from the first moments of the error variables.

    Rounds at 1/2 (ties to 0). When the result violates the syndrome, or the
    solution is certified exact but the rounded point is not optimal, the
    moments conditioned on chosen variables are rounded instead; failing
    that, a greedy repair flips the bits closest to 1/2 touching unsatisfied
    checks. Returns ``(e_hat, feasible)``.
    """
    n = inst.n
    first = sol.first_moments(n)
    e = _round(first)
    ok = inst.satisfied(e)
    need_better = certified and ok and inst.cost(e) > sol.lam + tol * (1.0 + abs(sol.lam))
    if ok and not need_better:
        return e, True
    alt = _condition_extract(sol, n, 2 * sol.level - 1)
    if alt is not None and inst.satisfied(alt):
        if not ok or inst.cost(alt) < inst.cost(e):
            return alt, True
    if ok:
        return e, True
    return _greedy_repair(e, first, inst.h, inst.s)


@dataclass
class DecodeResult:
    e_hat: np.ndarray
    lam: float
    feasible: bool
    moment_rank: int
    rank_loop: bool
    level: int
    status: str
    timings: dict = field(default_factory=dict)
    solution: MomentSolution = field(default=None, repr=False)


def decode(inst, level, mode="dense", tol=1e-8, encoding="slack_binary", rel_tol=DEFAULT_RANK_TOL, keep_solution=False):
    """Level-``level`` moment decoder for one instance."""
    t0 = time.perf_counter()
    poly, asm = assembly_for(inst, level, mode, encoding)
    t1 = time.perf_counter()
    sol = solve_assembled(asm, poly.objective, tol)
    t2 = time.perf_counter()
    if sol.status == sdp.INFEASIBLE or not np.isfinite(sol.lam):
        e = np.zeros(inst.n, dtype=np.uint8)
        return DecodeResult(e, sol.lam, False, 0, False, level, sol.status,
                            {"assemble": t1 - t0, "solve": t2 - t1}, sol if keep_solution else None)
    loop = rank_loop(sol, rel_tol) if level >= 2 else False
    rank = moment_rank(sol, level, rel_tol)
    e, feasible = extract_error(sol, inst, certified=loop)
    t3 = time.perf_counter()
    return DecodeResult(
        e, sol.lam, feasible, rank, loop, level, sol.status,
        {"assemble": t1 - t0, "solve": t2 - t1, "extract": t3 - t2}, sol if keep_solution else None,
    )
