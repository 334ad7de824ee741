"""Dense linear algebra over GF(2).

Matrices and vectors are numpy ``uint8`` arrays holding 0/1; row operations
are vectorized XORs on whole rows. Desk-scale codes (n up to a few hundred)
never need a sparse representation.
"""

import numpy as np


def as_bits(a, ndim=None):
    """Validate and copy ``a`` into a 0/1 ``uint8`` array."""
    arr = np.array(a, dtype=np.int64, copy=True)
    if ndim is not None and arr.ndim != ndim:
        raise ValueError(f"expected a {ndim}-dimensional bit array, got shape {arr.shape}")
    if arr.size and (arr.min() < 0 or arr.max() > 1):
        raise ValueError("bit arrays may only contain 0 and 1")
    out = arr.astype(np.uint8)
    out.flags.writeable = False
    return out


def matvec(h, e):
    """``h @ e`` over GF(2)."""
    h = np.asarray(h)
    e = np.asarray(e)
    if h.shape[1] != e.shape[0]:
        raise ValueError(f"dimension mismatch: matrix has {h.shape[1]} columns, vector has length {e.shape[0]}")
    return ((h.astype(np.int64) @ e.astype(np.int64)) % 2).astype(np.uint8)


def matmul(a, b):
    """``a @ b`` over GF(2)."""
    return ((np.asarray(a, dtype=np.int64) @ np.asarray(b, dtype=np.int64)) % 2).astype(np.uint8)


def rref(m):
    """Reduced row echelon form.

    Returns ``(reduced, pivots, rank)`` where ``pivots`` lists the pivot
    column of each nonzero row of ``reduced``.
    """
    r = np.array(m, dtype=np.uint8, copy=True)
    if r.ndim != 2:
        raise ValueError("rref expects a matrix")
    rows, cols = r.shape
    pivots = []
    row = 0
    for col in range(cols):
        if row == rows:
            break
        hits = np.flatnonzero(r[row:, col])
        if hits.size == 0:
            continue
        p = row + hits[0]
        if p != row:
            r[[row, p]] = r[[p, row]]
        others = np.flatnonzero(r[:, col])
        others = others[others != row]
        r[others] ^= r[row]
        pivots.append(col)
        row += 1
    return r, pivots, len(pivots)


def rank(m):
    return rref(m)[2]


def solve(h, s):
    """A particular solution of ``h e = s`` (free variables zero), or ``None``."""
    h = np.asarray(h, dtype=np.uint8)
    s = np.asarray(s, dtype=np.uint8)
    if h.ndim != 2 or s.ndim != 1 or h.shape[0] != s.shape[0]:
        raise ValueError(f"dimension mismatch: H is {h.shape}, s has shape {s.shape}")
    aug = np.concatenate([h, s[:, None]], axis=1)
    red, pivots, rk = rref(aug)
    n = h.shape[1]
    if n in pivots:
        return None
    e = np.zeros(n, dtype=np.uint8)
    for i, col in enumerate(pivots):
        e[col] = red[i, n]
    return e


def nullspace_basis(h):
    """Basis of ``{x : h x = 0}`` as the rows of a ``(n - rank, n)`` array."""
    h = np.asarray(h, dtype=np.uint8)
    n = h.shape[1]
    red, pivots, rk = rref(h)
    pivset = set(pivots)
    free = [c for c in range(n) if c not in pivset]
    basis = np.zeros((len(free), n), dtype=np.uint8)
    for k, f in enumerate(free):
        basis[k, f] = 1
        for i, col in enumerate(pivots):
            basis[k, col] = red[i, f]
    return basis


def rowspace_basis(h):
    red, _, rk = rref(h)
    return red[:rk]


def in_rowspace(h, v):
    """True iff ``v`` is a GF(2) combination of the rows of ``h``."""
    h = np.asarray(h, dtype=np.uint8)
    v = np.asarray(v, dtype=np.uint8)
    if v.shape[0] != h.shape[1]:
        raise ValueError(f"dimension mismatch: rows have length {h.shape[1]}, vector has length {v.shape[0]}")
    return rank(np.vstack([h, v[None, :]])) == rank(h)
