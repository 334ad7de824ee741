"""Enumeration kernels behind the exact decoders and the QUBO oracle.

Each kernel has a numba implementation (Gray-code walks with incremental
updates) and a chunked numpy implementation with identical results. The
dispatching functions at the bottom pick one according to
``sosdecoder._accel.USE_NUMBA``; both variants stay importable so the
benchmark and the tests can compare them directly.

Costs are always reported as the left-to-right sequential sum
``((g[0]*e[0]) + g[1]*e[1]) + ...`` so that every decoder produces
bit-identical values for the same error vector.
"""

import numpy as np

from . import _accel
from ._accel import optional_njit

# incremental sums are only used to screen candidates; exact comparison
# is redone with the canonical sum
_SCREEN_TOL = 1e-9
_CHUNK = 1 << 15


def canonical_cost(costs, e):
    """Sequential (left-to-right) sum of ``costs[i]`` over the support of ``e``."""
    e = np.asarray(e)
    if e.ndim == 1:
        if e.size == 0:
            return 0.0
        return float(np.cumsum(np.where(e.astype(bool), costs, 0.0))[-1])
    if e.shape[1] == 0:
        return np.zeros(e.shape[0])
    return np.cumsum(np.where(e.astype(bool), costs[None, :], 0.0), axis=1)[:, -1]


# ---------------------------------------------------------------------------
# numba kernels
# ---------------------------------------------------------------------------


@optional_njit(cache=True)
def _seq_cost(costs, e):
    acc = 0.0
    for i in range(e.shape[0]):
        if e[i]:
            acc = acc + costs[i]
        else:
            acc = acc + 0.0
    return acc


@optional_njit(cache=True)
def _lex_less(a, b):
    for i in range(a.shape[0]):
        if a[i] != b[i]:
            return a[i] < b[i]
    return False


@optional_njit(cache=True)
def _gray_flip_index(step):
    # index of the lowest set bit of step (step >= 1)
    j = 0
    while (step >> j) & 1 == 0:
        j += 1
    return j


@optional_njit(cache=True)
def _min_over_span_nb(base, gens, costs):
    n = base.shape[0]
    k = gens.shape[0]
    cur = base.copy()
    inc = 0.0
    for i in range(n):
        if cur[i]:
            inc += costs[i]
    best = cur.copy()
    best_val = _seq_cost(costs, cur)
    best_inc = inc
    total = 1 << k
    for step in range(1, total):
        j = _gray_flip_index(step)
        for i in range(n):
            if gens[j, i]:
                if cur[i]:
                    inc -= costs[i]
                    cur[i] = 0
                else:
                    inc += costs[i]
                    cur[i] = 1
        if inc <= best_inc + _SCREEN_TOL * (1.0 + abs(best_inc)):
            val = _seq_cost(costs, cur)
            if val < best_val or (val == best_val and _lex_less(cur, best)):
                best_val = val
                best_inc = inc
                for i in range(n):
                    best[i] = cur[i]
            elif inc < best_inc:
                best_inc = inc
    return best, best_val


@optional_njit(cache=True)
def _brute_force_mld_nb(h_cols, s_mask, costs):
    # h_cols[i] = syndrome bitmask of a single flip on bit i
    n = costs.shape[0]
    cur = np.zeros(n, dtype=np.uint8)
    best = np.zeros(n, dtype=np.uint8)
    syn = np.int64(0)
    found = False
    best_val = np.inf
    inc = 0.0
    best_inc = np.inf
    if syn == s_mask:
        found = True
        best_val = 0.0
        best_inc = 0.0
    total = np.int64(1) << n
    for step in range(1, total):
        j = _gray_flip_index(step)
        syn ^= h_cols[j]
        if cur[j]:
            cur[j] = 0
            inc -= costs[j]
        else:
            cur[j] = 1
            inc += costs[j]
        if syn != s_mask:
            continue
        if (not found) or inc <= best_inc + _SCREEN_TOL * (1.0 + abs(best_inc)):
            val = _seq_cost(costs, cur)
            if (not found) or val < best_val or (val == best_val and _lex_less(cur, best)):
                found = True
                best_val = val
                for i in range(n):
                    best[i] = cur[i]
            if inc < best_inc:
                best_inc = inc
    return found, best, best_val


@optional_njit(cache=True)
def _qubo_scan_nb(q, tol):
    # returns (min value, codes of all assignments within tol of it)
    n = q.shape[0]
    x = np.zeros(n, dtype=np.uint8)
    field = np.zeros(n)
    val = 0.0
    best = 0.0
    cap = 1024
    codes = np.empty(cap, dtype=np.int64)
    vals = np.empty(cap)
    count = 1
    codes[0] = 0
    vals[0] = 0.0
    code = np.int64(0)
    total = np.int64(1) << n
    for step in range(1, total):
        j = _gray_flip_index(step)
        if x[j]:
            val -= 2.0 * field[j] - q[j, j]
            x[j] = 0
            sign = -1.0
            code ^= np.int64(1) << j
        else:
            val += 2.0 * field[j] + q[j, j]
            x[j] = 1
            sign = 1.0
            code ^= np.int64(1) << j
        for i in range(n):
            field[i] += sign * q[i, j]
        thr = tol * (1.0 + abs(best))
        if val < best - thr:
            best = val
            count = 0
        if val <= best + thr:
            if count == cap:
                cap *= 2
                nc = np.empty(cap, dtype=np.int64)
                nv = np.empty(cap)
                nc[:count] = codes[:count]
                nv[:count] = vals[:count]
                codes = nc
                vals = nv
            codes[count] = code
            vals[count] = val
            count += 1
            if val < best:
                best = val
    return best, codes[:count], vals[:count]


# ---------------------------------------------------------------------------
# numpy kernels
# ---------------------------------------------------------------------------


def _bits_of(codes, width):
    return ((codes[:, None] >> np.arange(width, dtype=np.int64)) & 1).astype(np.uint8)


def _pick_best(cands, vals, best, best_val):
    """Fold a chunk of candidates into the running (lexicographic) optimum."""
    m = vals.min()
    if best is not None and m > best_val:
        return best, best_val
    rows = cands[vals == m]
    # lexicographic minimum of the tied rows
    order = np.lexsort(rows.T[::-1])
    cand = rows[order[0]]
    if best is None or m < best_val or (m == best_val and tuple(cand) < tuple(best)):
        return cand.copy(), float(m)
    return best, best_val


def _min_over_span_np(base, gens, costs):
    k = gens.shape[0]
    best, best_val = None, np.inf
    total = 1 << k
    for start in range(0, total, _CHUNK):
        codes = np.arange(start, min(total, start + _CHUNK), dtype=np.int64)
        coeffs = _bits_of(codes, k)
        cands = (coeffs.astype(np.int64) @ gens.astype(np.int64) + base) % 2
        cands = cands.astype(np.uint8)
        vals = canonical_cost(costs, cands)
        best, best_val = _pick_best(cands, vals, best, best_val)
    return best, best_val


def _brute_force_mld_np(h, s, costs):
    n = h.shape[1]
    best, best_val = None, np.inf
    total = 1 << n
    for start in range(0, total, _CHUNK):
        codes = np.arange(start, min(total, start + _CHUNK), dtype=np.int64)
        cands = _bits_of(codes, n)
        ok = np.all((cands.astype(np.int64) @ h.T.astype(np.int64)) % 2 == s, axis=1)
        if not ok.any():
            continue
        cands = cands[ok]
        vals = canonical_cost(costs, cands)
        best, best_val = _pick_best(cands, vals, best, best_val)
    if best is None:
        return False, np.zeros(n, dtype=np.uint8), np.inf
    return True, best, best_val


def _qubo_scan_np(q, tol):
    n = q.shape[0]
    all_codes, all_vals = [], []
    best = np.inf
    total = 1 << n
    for start in range(0, total, _CHUNK):
        codes = np.arange(start, min(total, start + _CHUNK), dtype=np.int64)
        x = _bits_of(codes, n).astype(float)
        vals = np.einsum("ij,jk,ik->i", x, q, x)
        best = min(best, float(vals.min()))
        keep = vals <= best + tol * (1.0 + abs(best))
        all_codes.append(codes[keep])
        all_vals.append(vals[keep])
    codes = np.concatenate(all_codes)
    vals = np.concatenate(all_vals)
    keep = vals <= best + tol * (1.0 + abs(best))
    return best, codes[keep], vals[keep]


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------


def min_over_span(base, gens, costs):
    """Minimum canonical cost over ``base ^ span(gens)``; ties -> lexicographic minimum."""
    base = np.ascontiguousarray(base, dtype=np.uint8)
    gens = np.ascontiguousarray(gens, dtype=np.uint8).reshape(-1, base.shape[0])
    costs = np.ascontiguousarray(costs, dtype=np.float64)
    if _accel.USE_NUMBA:
        best, val = _min_over_span_nb(base, gens, costs)
    else:
        best, val = _min_over_span_np(base, gens, costs)
    return best.astype(np.uint8), float(val)


def brute_force_mld(h, s, costs):
    """Exhaustive minimum of ``costs . e`` over all ``e`` with ``h e = s (mod 2)``.

    Returns ``(found, e, value)``; limited to ``h.shape[0] <= 62`` checks.
    """
    h = np.ascontiguousarray(h, dtype=np.uint8)
    s = np.ascontiguousarray(s, dtype=np.uint8)
    costs = np.ascontiguousarray(costs, dtype=np.float64)
    if _accel.USE_NUMBA:
        weights = np.int64(1) << np.arange(h.shape[0], dtype=np.int64)
        h_cols = (h.astype(np.int64) * weights[:, None]).sum(axis=0).astype(np.int64)
        s_mask = np.int64((s.astype(np.int64) * weights).sum())
        found, best, val = _brute_force_mld_nb(h_cols, s_mask, costs)
    else:
        found, best, val = _brute_force_mld_np(h, s, costs)
    return bool(found), best.astype(np.uint8), float(val)


def qubo_scan(q, tol=1e-9):
    """Minimum of ``x^T q x`` over binary ``x`` and the integer codes of all minimizers."""
    q = np.ascontiguousarray(q, dtype=np.float64)
    if _accel.USE_NUMBA:
        best, codes, vals = _qubo_scan_nb(q, tol)
        thr = tol * (1.0 + abs(best))
        codes = codes[vals <= best + thr]
    else:
        best, codes, _ = _qubo_scan_np(q, tol)
    return float(best), np.sort(codes)
