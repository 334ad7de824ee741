"""Decoding instances, their binary polynomial form and QUBO encodings."""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import gf2, kernels

MAX_QUBO_VARS = 24


@dataclass(frozen=True, eq=False)
class MldInstance:
    """Find the cheapest ``e`` with ``h e = s (mod 2)`` under costs ``gamma``."""

    h: np.ndarray
    s: np.ndarray
    gamma: np.ndarray
    consistent: bool = field(init=False)

    def __post_init__(self):
        h = gf2.as_bits(self.h, ndim=2)
        s = gf2.as_bits(np.atleast_1d(self.s), ndim=1)
        gamma = np.array(self.gamma, dtype=np.float64).reshape(-1)
        if s.shape[0] != h.shape[0]:
            raise ValueError(f"syndrome length {s.shape[0]} does not match {h.shape[0]} checks")
        if gamma.shape[0] != h.shape[1]:
            raise ValueError(f"{gamma.shape[0]} weights for {h.shape[1]} variables")
        if not np.all(np.isfinite(gamma)):
            raise ValueError("weights must be finite")
        gamma.flags.writeable = False
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "consistent", gf2.solve(h, s) is not None)

    @property
    def n(self):
        return self.h.shape[1]

    @property
    def v(self):
        return self.h.shape[0]

    def cost(self, e):
        return kernels.canonical_cost(self.gamma, e)

    def satisfied(self, e):
        return bool(np.array_equal(gf2.matvec(self.h, e), self.s))


@dataclass(frozen=True, eq=False)
class PolyProblem:
    """Binary polynomial program ``min objective . x`` s.t. ``equalities == 0``.

    Variables ``0..n_error-1`` are the error bits, the rest are slack bits.
    Each equality is a dict from a sorted monomial (tuple of variable indices,
    ``()`` for the constant) to its coefficient; every variable is binary so
    monomials are multilinear.
    """

    num_vars: int
    n_error: int
    objective: np.ndarray
    equalities: tuple
    encoding: str = "slack_binary"
    slack_groups: tuple = ()
    consistent: bool = True

    @property
    def degree(self):
        return max((len(m) for eq in self.equalities for m in eq), default=0)

    def supports(self):
        """Variable support of each equality, as sorted tuples."""
        return [tuple(sorted({i for m in eq for i in m})) for eq in self.equalities]

    def affine_rows(self):
        """Equalities as ``(a, c)`` with ``a @ x + c == 0`` (affine encodings only)."""
        if self.degree > 1:
            raise ValueError("equalities are not affine")
        rows = []
        for eq in self.equalities:
            a = np.zeros(self.num_vars)
            c = 0.0
            for mono, coef in eq.items():
                if mono:
                    a[mono[0]] += coef
                else:
                    c += coef
            rows.append((a, c))
        return rows

    def evaluate(self, x):
        x = np.asarray(x)
        residuals = np.array(
            [sum(coef * (np.prod(x[list(m)]) if m else 1.0) for m, coef in eq.items()) for eq in self.equalities]
        )
        return float(self.objective @ x), residuals


def slack_bits(weight):
    """Binary slack bits for a check of ``weight``: enough to count up to ``weight // 2``.

    The count does not depend on the syndrome bit, so every syndrome of a
    code lowers to a program of the same size.
    """
    top = weight // 2
    if top <= 0:
        return 0
    return math.ceil(math.log2(top + 1))


def to_polynomial(inst, encoding="slack_binary"):
    """Lower an instance to a binary polynomial program.

    ``slack_binary``: ``H_j e - 2 * sum_b 2^b k_jb - s_j = 0`` with binary
    slack bits ``k_jb``; restricted to binary points it holds iff
    ``H_j e = s_j (mod 2)``.
    ``product_parity``: ``prod_{i in H_j} (1 - 2 e_i) - (1 - 2 s_j) = 0``, no slacks.
    """
    n = inst.n
    eqs = []
    groups = []
    if encoding == "slack_binary":
        nxt = n
        for j in range(inst.v):
            row = np.flatnonzero(inst.h[j])
            nb = slack_bits(len(row))
            eq = {(int(i),): 1.0 for i in row}
            slacks = tuple(range(nxt, nxt + nb))
            for b, k in enumerate(slacks):
                eq[(k,)] = -2.0 * 2**b
            eq[()] = -float(inst.s[j])
            groups.append(slacks)
            nxt += nb
            eqs.append(eq)
        num_vars = nxt
    elif encoding == "product_parity":
        for j in range(inst.v):
            row = [int(i) for i in np.flatnonzero(inst.h[j])]
            eq = {}
            for k in range(len(row) + 1):
                for sub in itertools.combinations(row, k):
                    eq[sub] = eq.get(sub, 0.0) + (-2.0) ** k
            eq[()] = eq.get((), 0.0) - (1.0 - 2.0 * float(inst.s[j]))
            eqs.append({m: c for m, c in eq.items() if c != 0.0})
            groups.append(())
        num_vars = n
    else:
        raise ValueError(f"unknown parity encoding {encoding!r}")
    objective = np.zeros(num_vars)
    objective[:n] = inst.gamma
    return PolyProblem(num_vars, n, objective, tuple(eqs), encoding, tuple(groups), inst.consistent)


@dataclass(frozen=True, eq=False)
class QuboMatrix:
    """``x^T q x + constant`` over binary ``x``; the first ``n_error`` entries are error bits."""

    q: np.ndarray
    constant: float
    n_error: int

    def value(self, x):
        x = np.asarray(x, dtype=np.float64)
        return float(x @ self.q @ x + self.constant)


def default_penalty(gamma):
    """Smallest safe penalty: any parity violation then outweighs the whole objective range."""
    return 1.0 + float(np.abs(gamma).sum())


def _penalized(objective, rows, xi, n_error):
    nv = objective.shape[0]
    q = np.diag(objective.astype(np.float64))
    constant = 0.0
    for a, c in rows:
        # xi * (a.x + c)^2 with x_i^2 = x_i folded onto the diagonal
        q += xi * np.outer(a, a)
        q[np.diag_indices(nv)] += xi * 2.0 * c * a
        constant += xi * c * c
    return QuboMatrix(q, constant, n_error)


def to_qubo(source, xi=None, form=None):
    """QUBO of an instance or of its slack polynomial.

    ``form="literal"`` (default for an ``MldInstance``) penalizes the integer
    equality ``H e = s``; ``form="parity"`` (default for a ``PolyProblem``)
    penalizes the slack-augmented equalities and so reproduces GF(2) decoding.
    """
    if isinstance(source, MldInstance):
        form = form or "literal"
        if form == "parity":
            return to_qubo(to_polynomial(source, "slack_binary"), xi)
        if form != "literal":
            raise ValueError(f"unknown QUBO form {form!r}")
        gamma = source.gamma
        xi = default_penalty(gamma) if xi is None else float(xi)
        rows = [(source.h[j].astype(np.float64), -float(source.s[j])) for j in range(source.v)]
        return _penalized(gamma, rows, xi, source.n)
    if isinstance(source, PolyProblem):
        if form not in (None, "parity"):
            raise ValueError("a polynomial program only has the parity-faithful QUBO form")
        if source.encoding != "slack_binary":
            raise ValueError("QUBO needs the affine slack encoding")
        xi = default_penalty(source.objective) if xi is None else float(xi)
        if xi <= 0:
            raise ValueError("penalty must be positive")
        return _penalized(source.objective, source.affine_rows(), xi, source.n_error)
    raise TypeError(f"cannot build a QUBO from {type(source).__name__}")


def css_qubo(inst_x, inst_z, xi=None):
    """Block-diagonal QUBO over both error sectors (each with its own slacks)."""
    if inst_x.n != inst_z.n:
        raise ValueError("both sectors must act on the same number of qubits")
    qx = to_qubo(to_polynomial(inst_x), xi)
    qz = to_qubo(to_polynomial(inst_z), xi)
    nx, nz = qx.q.shape[0], qz.q.shape[0]
    q = np.zeros((nx + nz, nx + nz))
    q[:nx, :nx] = qx.q
    q[nx:, nx:] = qz.q
    return QuboMatrix(q, qx.constant + qz.constant, qx.n_error)


def brute_force_qubo(qubo):
    """All minimizers (rows of a 0/1 array) and the minimum value, by exhaustion."""
    nv = qubo.q.shape[0]
    if nv > MAX_QUBO_VARS:
        raise ValueError(f"brute force limited to {MAX_QUBO_VARS} variables, got {nv}")
    best, codes = kernels.qubo_scan(qubo.q)
    argmins = ((codes[:, None] >> np.arange(nv, dtype=np.int64)) & 1).astype(np.uint8)
    return argmins, best + qubo.constant
