"""Linear and lift-and-project relaxations: LP, Sherali-Adams, Lovasz-Schrijver.

Every method works on the slack-augmented affine system produced by
:func:`sosdecoder.problem.to_polynomial`, so all of them bound the same GF(2)
decoding problem. Lifted variables ``Y[S]`` stand for ``prod_{i in S} x_i``
over subsets ``S`` of the binary variables (error bits and slack bits).
"""

import csv
import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from . import lasserre, sdp
from .problem import MldInstance, PolyProblem, to_polynomial

SA_MAX_LEVEL = 8
SA_MAX_LIFTED = 200_000


@dataclass
class RelaxationValue:
    method: str
    level: int
    value: float
    fractional_solution: np.ndarray
    status: str = sdp.OPTIMAL


def _as_poly(source):
    if isinstance(source, PolyProblem):
        return source
    if isinstance(source, MldInstance):
        return to_polynomial(source, "slack_binary")
    raise TypeError(f"expected an instance or a polynomial program, got {type(source).__name__}")


def lp_relax(source, fixed=None, tol=1e-8):
    """LP relaxation: ``0 <= x <= 1`` plus the affine equalities.

    ``fixed`` maps variable indices to 0/1 values (used by branch and bound).
    """
    poly = _as_poly(source)
    rows = poly.affine_rows()
    nv = poly.num_vars
    fixed = fixed or {}
    e_rows = [a for a, _ in rows]
    f = [-c for _, c in rows]
    for i, v in sorted(fixed.items()):
        r = np.zeros(nv)
        r[i] = 1.0
        e_rows.append(r)
        f.append(float(v))
    e_mat = np.array(e_rows).reshape(-1, nv)
    g = np.vstack([-np.eye(nv), np.eye(nv)])
    h = np.concatenate([np.zeros(nv), np.ones(nv)])
    res = sdp.solve_free_form(poly.objective, e_mat, np.array(f), lp=(g, h), tol=tol)
    return RelaxationValue("lp", 0, float(res.value), res.u[: poly.n_error].copy(), res.quality)


class _LiftedSpace:
    """Index of the lifted variables ``Y[S]`` and row builders over them."""

    def __init__(self, nv, max_size):
        self.nv = nv
        self.subsets = list(lasserre.subsets_upto(range(nv), max_size))
        if len(self.subsets) > SA_MAX_LIFTED:
            raise ValueError(f"{len(self.subsets)} lifted variables exceed the budget {SA_MAX_LIFTED}")
        self.index = {s: k for k, s in enumerate(self.subsets)}

    def product_row(self, terms, s_set, t_set):
        """Coefficients of ``(sum_m c_m x^m) * prod_S x * prod_T (1 - x)``."""
        out = {}
        for k in range(len(t_set) + 1):
            for sub in itertools.combinations(t_set, k):
                sign = -1.0 if k % 2 else 1.0
                base = set(s_set).union(sub)
                for mono, coef in terms.items():
                    key = tuple(sorted(base.union(mono)))
                    col = self.index[key]
                    out[col] = out.get(col, 0.0) + sign * coef
        return {c: v for c, v in out.items() if v != 0.0}


def _dense_rows(space, rows):
    mat = np.zeros((len(rows), len(space.subsets)))
    for r, row in enumerate(rows):
        for c, v in row.items():
            mat[r, c] = v
    return mat


def _dedupe(rows):
    seen = set()
    out = []
    for row in rows:
        if not row:
            continue
        key = tuple(sorted((c, round(v, 12)) for c, v in row.items()))
        if key not in seen:
            seen.add(key)
            out.append(row)
    return out


def _solve_lifted(space, poly, eq_rows, ge_rows, psd=(), tol=1e-8):
    eq_rows = [{space.index[()]: 1.0}] + _dedupe(eq_rows)
    f = np.zeros(len(eq_rows))
    f[0] = 1.0
    ge_rows = _dedupe(ge_rows)
    cost = np.zeros(len(space.subsets))
    for i in range(poly.num_vars):
        cost[space.index[(i,)]] = poly.objective[i]
    g = -_dense_rows(space, ge_rows) if ge_rows else None
    e_mat = _dense_rows(space, eq_rows)
    if not psd:
        # pure LPs: lifted rows are highly degenerate, so use a simplex solver
        return _solve_lp_highs(space, poly, cost, e_mat, f, g)
    lp = None
    if ge_rows:
        tight = _implicit_equalities(e_mat, f, g, np.zeros(g.shape[0]))
        if tight is None:
            return float("inf"), sdp.INFEASIBLE, np.full(poly.n_error, np.nan)
        e_mat = np.vstack([e_mat, g[tight]])
        f = np.concatenate([f, np.zeros(int(tight.sum()))])
        if not tight.all():
            lp = (g[~tight], np.zeros(int((~tight).sum())))
    res = sdp.solve_free_form(cost, e_mat, f, lp=lp, psd=psd, tol=tol)
    first = np.array([res.u[space.index[(i,)]] for i in range(poly.n_error)])
    return float(res.value), res.quality, first


def _implicit_equalities(e_mat, f, g, h):
    """Mask of the rows of ``g u <= h`` that hold with equality on the whole polytope.

    Repeatedly maximizes the total slack ``sum t_i`` (``0 <= t_i <= 1``) over
    rows not yet shown to be loose; rows with positive slack are loose, and
    once the maximum is zero the rest are tight. Returns ``None`` when the
    polytope is empty. Handing tight rows to the interior-point solver as
    equalities restores a strictly feasible interior.
    """
    m, nv = g.shape
    unknown = np.ones(m, dtype=bool)
    while unknown.any():
        k = int(unknown.sum())
        sel = np.zeros((m, k))
        sel[np.flatnonzero(unknown), np.arange(k)] = 1.0
        a_ub = np.hstack([g, sel])
        a_eq = np.hstack([e_mat, np.zeros((e_mat.shape[0], k))])
        c = np.concatenate([np.zeros(nv), -np.ones(k)])
        bounds = [(None, None)] * nv + [(0.0, 1.0)] * k
        res = linprog(c, A_ub=a_ub, b_ub=h, A_eq=a_eq, b_eq=f, bounds=bounds, method="highs")
        if res.status == 2:
            return None
        if res.status != 0:
            # keep every row an inequality: always valid, only less well posed
            return np.zeros(m, dtype=bool)
        loose = res.x[nv:] > 1e-9
        if not loose.any():
            return unknown
        idx = np.flatnonzero(unknown)
        unknown[idx[loose]] = False
    return unknown


def _solve_lp_highs(space, poly, cost, e_mat, f, g):
    res = linprog(cost, A_ub=g, b_ub=None if g is None else np.zeros(g.shape[0]),
                  A_eq=e_mat, b_eq=f, bounds=(None, None), method="highs")
    if res.status == 0:
        u = res.x
        first = np.array([u[space.index[(i,)]] for i in range(poly.n_error)])
        return float(res.fun), sdp.OPTIMAL, first
    status = {2: sdp.INFEASIBLE, 3: sdp.UNBOUNDED}.get(res.status, sdp.NUMERICAL_FAILURE)
    return float("nan"), status, np.full(poly.n_error, np.nan)


def sherali_adams(source, t, tol=1e-8):
    """Level-``t`` Sherali-Adams LP over ``Y[S]``, ``|S| <= t + 1``.

    Constraints: ``Y[()] = 1``; ``Y[S] >= 0``; ``Y[S + i] <= Y[S]`` for
    ``|S| <= t``; and every affine equality multiplied by ``Y[S]`` for
    ``|S| <= t`` (the largest sets that keep all terms inside the lifted
    space).
    """
    if t < 1 or t > SA_MAX_LEVEL:
        raise ValueError(f"Sherali-Adams level must lie in 1..{SA_MAX_LEVEL}")
    poly = _as_poly(source)
    nv = poly.num_vars
    space = _LiftedSpace(nv, t + 1)
    eq_rows, ge_rows = [], []
    for s_set in space.subsets:
        col = space.index[s_set]
        if s_set:
            ge_rows.append({col: 1.0})
        if len(s_set) > t:
            continue
        for i in range(nv):
            if i not in s_set:
                ge_rows.append({col: 1.0, space.index[tuple(sorted(s_set + (i,)))]: -1.0})
        for terms in poly.equalities:
            eq_rows.append(space.product_row(terms, s_set, ()))
    value, status, first = _solve_lifted(space, poly, eq_rows, ge_rows, tol=tol)
    return RelaxationValue("sa", t, value, first, status)


def lovasz_schrijver(source, plus=False, tol=1e-8):
    """Level-one Lovasz-Schrijver relaxation with protection matrix ``Y``.

    ``Y`` is indexed by ``0`` (the constant) and the variables, with
    ``Y[0, 0] = 1`` and ``Y[0, i] = Y[i, i] = x_i``; each row ``Y_i`` and each
    ``Y_0 - Y_i`` satisfies the homogenized equalities, and
    ``0 <= Y[i, j] <= Y[0, i]``. With ``plus=True`` ``Y`` is also PSD.
    """
    poly = _as_poly(source)
    nv = poly.num_vars
    space = _LiftedSpace(nv, 2)
    eq_rows, ge_rows = [], []
    for i in range(nv):
        for terms in poly.equalities:
            eq_rows.append(space.product_row(terms, (i,), ()))
            eq_rows.append(space.product_row(terms, (), (i,)))
        yi = space.index[(i,)]
        for j in range(nv):
            yij = space.index[tuple(sorted({i, j}))]
            ge_rows.append({yij: 1.0})
            if i != j:
                ge_rows.append({yi: 1.0, yij: -1.0})
    psd = ()
    if plus:
        mons = [()] + [(i,) for i in range(nv)]
        f_lin = np.zeros((nv + 1, nv + 1, len(space.subsets)))
        for a, ma in enumerate(mons):
            for b, mb in enumerate(mons):
                f_lin[a, b, space.index[tuple(sorted(set(ma) | set(mb)))]] = 1.0
        psd = [(np.zeros((nv + 1, nv + 1)), f_lin)]
    value, status, first = _solve_lifted(space, poly, eq_rows, ge_rows, psd=psd, tol=tol)
    return RelaxationValue("ls_plus" if plus else "ls", 1, value, first, status)


def lasserre_value(source, level, mode="dense", tol=1e-8):
    poly = _as_poly(source)
    sol = lasserre.solve_level(poly, level, mode, tol)
    return RelaxationValue("lasserre", level, float(sol.lam), sol.first_moments(poly.n_error), sol.status)


COMPARE_COLUMNS = ("instance_id", "method", "level", "value", "exact_value", "gap")


def compare_relaxations(inst, t, instance_id=0, exact_value=None, tol=1e-8):
    """Values of every relaxation on one instance, plus the ordering checks.

    Returns ``(rows, checks)``: one dict per method (CSV columns
    ``COMPARE_COLUMNS`` plus ``status``) and a dict of boolean ordering
    checks. Sub-solver failures are recorded in the row, not raised.
    """
    from .exact import mld_coset

    if exact_value is None:
        exact_value = mld_coset(inst).value
    poly = to_polynomial(inst, "slack_binary")
    runs = [
        ("lp", 0, lambda: lp_relax(poly, tol=tol)),
        ("ls", 1, lambda: lovasz_schrijver(poly, False, tol)),
        ("ls_plus", 1, lambda: lovasz_schrijver(poly, True, tol)),
        ("sa", t, lambda: sherali_adams(poly, t, tol)),
        ("lasserre", t, lambda: lasserre_value(poly, t, tol=tol)),
    ]
    rows = []
    values = {}
    for method, level, fn in runs:
        try:
            rv = fn()
            value, status = rv.value, rv.status
        except (ValueError, sdp.SdpError) as exc:
            value, status = float("nan"), f"error: {exc}"
        values[method] = value
        rows.append({
            "instance_id": instance_id, "method": method, "level": level, "value": value,
            "exact_value": exact_value, "gap": exact_value - value, "status": status,
        })
    rows.append({
        "instance_id": instance_id, "method": "exact", "level": 0, "value": exact_value,
        "exact_value": exact_value, "gap": 0.0, "status": sdp.OPTIMAL,
    })
    eps = 1e-6
    checks = {
        "lasserre_ge_sa": values["lasserre"] >= values["sa"] - eps,
        "ls_plus_ge_ls": values["ls_plus"] >= values["ls"] - eps,
        "all_below_exact": all(v <= exact_value + eps for v in values.values()),
        # reported, not asserted
        "sa_ge_ls": values["sa"] >= values["ls"] - eps,
    }
    return rows, checks


def write_compare_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COMPARE_COLUMNS)
        for r in rows:
            w.writerow([r["instance_id"], r["method"], r["level"], repr(float(r["value"])),
                        repr(float(r["exact_value"])), repr(float(r["gap"]))])
