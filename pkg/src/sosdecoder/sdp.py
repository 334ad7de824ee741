"""Dense primal-dual interior-point solver for block-diagonal SDPs.

Standard form::

    minimize   sum_b <C_b, X_b>
    subject to sum_b <A_ib, X_b> = b_i,   X_b >= 0

with dual ``maximize b.y  s.t.  Z_b = C_b - sum_i y_i A_ib >= 0``.

Block sizes follow the SDPA convention: a positive size ``N`` is an ``N x N``
PSD block, a negative size ``-k`` is a block of ``k`` nonnegative scalars
(an LP cone). Per block, ``c[b]`` is the ``(N, N)`` objective matrix (or a
length-``k`` vector) and ``a[b]`` stacks the constraint matrices row-wise as
``(m, N*N)`` (or ``(m, k)``), dense or scipy-sparse.

The iteration is infeasible-start path following with Nesterov-Todd
scaling and a Mehrotra predictor-corrector step.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

log = logging.getLogger(__name__)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
MAX_ITERATIONS = "max_iterations"
NUMERICAL_FAILURE = "numerical_failure"
# reported by the front ends only, never by solve_sdp
NEAR_OPTIMAL = "near_optimal"

_DENSE_LIMIT = 60_000_000
NEAR_OPTIMAL_PRES = 1e-5
NEAR_OPTIMAL_GAP = 1e-6


class SdpError(RuntimeError):
    pass


@dataclass
class SdpStandardForm:
    blocks: tuple
    c: list
    a: list
    b: np.ndarray

    def __post_init__(self):
        self.blocks = tuple(int(s) for s in self.blocks)
        self.b = np.asarray(self.b, dtype=np.float64).reshape(-1)
        if len(self.c) != len(self.blocks) or len(self.a) != len(self.blocks):
            raise ValueError("need one objective and one constraint array per block")
        if self.b.size < 1:
            raise ValueError("at least one constraint is required")
        m = self.b.size
        cs, as_ = [], []
        for size, cb, ab in zip(self.blocks, self.c, self.a):
            if size == 0:
                raise ValueError("empty block")
            dim = size * size if size > 0 else -size
            cb = np.asarray(cb, dtype=np.float64)
            if size > 0:
                cb = cb.reshape(size, size)
                if not np.allclose(cb, cb.T, atol=1e-12, rtol=0):
                    raise ValueError("objective block is not symmetric")
            else:
                cb = cb.reshape(-size)
            ab = ab.tocsr().astype(np.float64) if sp.issparse(ab) else np.asarray(ab, dtype=np.float64).reshape(m, dim)
            if ab.shape != (m, dim):
                raise ValueError(f"constraint block has shape {ab.shape}, expected {(m, dim)}")
            cs.append(cb)
            as_.append(ab)
        self.c, self.a = cs, as_

    @property
    def m(self):
        return self.b.size

    def apply(self, xs):
        """``A(X)``: the vector of ``<A_i, X>``."""
        out = np.zeros(self.m)
        for ab, xb in zip(self.a, xs):
            out += ab @ np.ravel(xb)
        return out

    def adjoint(self, y):
        """``A*(y)`` block by block."""
        out = []
        for size, ab in zip(self.blocks, self.a):
            v = ab.T @ y
            v = np.asarray(v).ravel()
            if size > 0:
                v = v.reshape(size, size)
                v = 0.5 * (v + v.T)
            out.append(v)
        return out

    def objective(self, xs):
        return float(sum(np.vdot(cb, xb) for cb, xb in zip(self.c, xs)))

    def dump(self, path):
        """Sparse text dump, one ``constraint block row col value`` line per nonzero.

        Constraint 0 is the objective; blocks, rows and columns count from 1
        and only the upper triangle of each PSD block is written.
        """
        with open(path, "w") as fh:
            fh.write(f"{self.m} {len(self.blocks)} " + " ".join(str(s) for s in self.blocks) + "\n")
            fh.write(" ".join(repr(float(v)) for v in self.b) + "\n")
            for bi, (size, cb, ab) in enumerate(zip(self.blocks, self.c, self.a), start=1):
                dense = ab.toarray() if sp.issparse(ab) else ab
                mats = [cb.ravel()] + [dense[i] for i in range(self.m)]
                for ci, vec in enumerate(mats):
                    if size > 0:
                        mat = vec.reshape(size, size)
                        rows, cols = np.nonzero(np.triu(mat))
                        for r, c in zip(rows, cols):
                            fh.write(f"{ci} {bi} {r + 1} {c + 1} {mat[r, c]!r}\n")
                    else:
                        for r in np.flatnonzero(vec):
                            fh.write(f"{ci} {bi} {r + 1} {r + 1} {vec[r]!r}\n")


@dataclass
class SdpSolution:
    x: list
    y: np.ndarray
    z: list
    primal_value: float
    dual_value: float
    status: str
    iterations: int = 0
    primal_residual: float = np.inf
    dual_residual: float = np.inf
    info: dict = field(default_factory=dict)

    @property
    def gap(self):
        return abs(self.primal_value - self.dual_value)


# ---------------------------------------------------------------------------
# presolve
# ---------------------------------------------------------------------------


def presolve(p, threshold=1e-10):
    """Drop linearly dependent equality rows.

    Returns ``(reduced, kept)``; ``kept`` indexes the surviving rows of ``p``.
    Raises ``SdpError`` when a dependent row contradicts the others.
    """
    rows = []
    for size, ab in zip(p.blocks, p.a):
        dense = ab.toarray() if sp.issparse(ab) else ab
        if size > 0:
            # symmetric part only; off-diagonal pairs merged
            sym = dense.reshape(p.m, size, size)
            sym = 0.5 * (sym + sym.transpose(0, 2, 1))
            iu = np.triu_indices(size)
            scale = np.where(iu[0] == iu[1], 1.0, 2.0)
            rows.append(sym[:, iu[0], iu[1]] * scale)
        else:
            rows.append(dense)
    mat = np.concatenate(rows, axis=1)
    if mat.shape[1] == 0:
        raise SdpError("no variables")
    _, r, perm = sla.qr(mat.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag.size == 0 or diag[0] == 0.0:
        kept = np.array([], dtype=int)
    else:
        rank = int(np.sum(diag > threshold * diag[0]))
        kept = np.sort(perm[:rank])
    dropped = np.setdiff1d(np.arange(p.m), kept)
    if dropped.size:
        base = mat[kept]
        coef, *_ = np.linalg.lstsq(base.T, mat[dropped].T, rcond=None)
        implied = coef.T @ p.b[kept]
        bad = np.abs(implied - p.b[dropped]) > 1e-8 * (1.0 + np.abs(p.b[dropped]))
        if np.any(bad):
            raise SdpError("dependent equality constraints with conflicting right-hand sides")
    if kept.size == p.m:
        return p, kept
    a = [ab[kept] for ab in p.a]
    return SdpStandardForm(p.blocks, p.c, a, p.b[kept]), kept


# ---------------------------------------------------------------------------
# interior point
# ---------------------------------------------------------------------------


class _Blocks:
    """Dense working copies of the constraint data."""

    def __init__(self, p):
        self.sizes = p.blocks
        self.m = p.m
        self.a3 = []
        for size, ab in zip(p.blocks, p.a):
            if size > 0:
                if p.m * size * size > _DENSE_LIMIT:
                    raise SdpError("problem too large for the dense solver")
                dense = ab.toarray() if sp.issparse(ab) else np.array(ab)
                a3 = dense.reshape(p.m, size, size)
                self.a3.append(0.5 * (a3 + a3.transpose(0, 2, 1)))
            else:
                self.a3.append(ab.toarray() if sp.issparse(ab) else np.array(ab))

    def apply(self, xs):
        """``A(X)``: the vector of ``<A_i, X>``."""
        out = np.zeros(self.m)
        for ab, xb in zip(self.a, xs):
            out += ab @ np.ravel(xb)
        return out

    def adjoint(self, y):
        """``A*(y)`` block by block."""
        out = []
        for size, ab in zip(self.blocks, self.a):
            v = ab.T @ y
            v = np.asarray(v).ravel()
            if size > 0:
                v = v.reshape(size, size)
                v = 0.5 * (v + v.T)
            out.append(v)
        return out

    def objective(self, xs):
        return float(sum(np.vdot(cb, xb) for cb, xb in zip(self.c, xs)))

    def dump(self, path):
        """Sparse text dump, one ``constraint block row col value`` line per nonzero.

        Constraint 0 is the objective; blocks, rows and columns count from 1
        and only the upper triangle of each PSD block is written.
        """
        with open(path, "w") as fh:
            fh.write(f"{self.m} {len(self.blocks)} " + " ".join(str(s) for s in self.blocks) + "\n")
            fh.write(" ".join(repr(float(v)) for v in self.b) + "\n")
            for bi, (size, cb, ab) in enumerate(zip(self.blocks, self.c, self.a), start=1):
                dense = ab.toarray() if sp.issparse(ab) else ab
                mats = [cb.ravel()] + [dense[i] for i in range(self.m)]
                for ci, vec in enumerate(mats):
                    if size > 0:
                        mat = vec.reshape(size, size)
                        rows, cols = np.nonzero(np.triu(mat))
                        for r, c in zip(rows, cols):
                            fh.write(f"{ci} {bi} {r + 1} {c + 1} {mat[r, c]!r}\n")
                    else:
                        for r in np.flatnonzero(vec):
                            fh.write(f"{ci} {bi} {r + 1} {r + 1} {vec[r]!r}\n")


@dataclass
class SdpSolution:
    x: list
    y: np.ndarray
    z: list
    primal_value: float
    dual_value: float
    status: str
    iterations: int = 0
    primal_residual: float = np.inf
    dual_residual: float = np.inf
    info: dict = field(default_factory=dict)

    @property
    def gap(self):
        return abs(self.primal_value - self.dual_value)


# ---------------------------------------------------------------------------
# presolve
# ---------------------------------------------------------------------------


def presolve(p, threshold=1e-10):
    """Drop linearly dependent equality rows.

    Returns ``(reduced, kept)``; ``kept`` indexes the surviving rows of ``p``.
    Raises ``SdpError`` when a dependent row contradicts the others.
    """
    rows = []
    for size, ab in zip(p.blocks, p.a):
        dense = ab.toarray() if sp.issparse(ab) else ab
        if size > 0:
            # symmetric part only; off-diagonal pairs merged
            sym = dense.reshape(p.m, size, size)
            sym = 0.5 * (sym + sym.transpose(0, 2, 1))
            iu = np.triu_indices(size)
            scale = np.where(iu[0] == iu[1], 1.0, 2.0)
            rows.append(sym[:, iu[0], iu[1]] * scale)
        else:
            rows.append(dense)
    mat = np.concatenate(rows, axis=1)
    if mat.shape[1] == 0:
        raise SdpError("no variables")
    _, r, perm = sla.qr(mat.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag.size == 0 or diag[0] == 0.0:
        kept = np.array([], dtype=int)
    else:
        rank = int(np.sum(diag > threshold * diag[0]))
        kept = np.sort(perm[:rank])
    dropped = np.setdiff1d(np.arange(p.m), kept)
    if dropped.size:
        base = mat[kept]
        coef, *_ = np.linalg.lstsq(base.T, mat[dropped].T, rcond=None)
        implied = coef.T @ p.b[kept]
        bad = np.abs(implied - p.b[dropped]) > 1e-8 * (1.0 + np.abs(p.b[dropped]))
        if np.any(bad):
            raise SdpError("dependent equality constraints with conflicting right-hand sides")
    if kept.size == p.m:
        return p, kept
    a = [ab[kept] for ab in p.a]
    return SdpStandardForm(p.blocks, p.c, a, p.b[kept]), kept


# ---------------------------------------------------------------------------
# interior point
# ---------------------------------------------------------------------------


class _Blocks:
    """Dense working copies of the constraint data."""

    def __init__(self, p):
        self.sizes = p.blocks
        self.m = p.m
        self.a3 = []
        for size, ab in zip(p.blocks, p.a):
            if size > 0:
                if p.m * size * size > _DENSE_LIMIT:
                    raise SdpError("problem too large for the dense solver")
                dense = ab.toarray() if sp.issparse(ab) else np.array(ab)
                a3 = dense.reshape(p.m, size, size)
                self.a3.append(0.5 * (a3 + a3.transpose(0, 2, 1)))
            else:
                self.a3.append(ab.toarray() if sp.issparse(ab) else np.array(ab))

        stacked = np.concatenate([ab.reshape(self.m, -1) for ab in self.a3], axis=1)
        self.gram_r = _root_factor(stacked.T, self.m)

    def project(self, r):
        """Least-norm ``D`` with ``A(D) = r`` (``A`` has full row rank after presolve)."""
        return self.adjoint(_root_solve(self.gram_r, r))

    def apply(self, xs):
        out = np.zeros(self.m)
        for size, ab, xb in zip(self.sizes, self.a3, xs):
            if size > 0:
                out += ab.reshape(self.m, -1) @ xb.ravel()
            else:
                out += ab @ xb
        return out

    def adjoint(self, y):
        out = []
        for size, ab in zip(self.sizes, self.a3):
            if size > 0:
                out.append(np.tensordot(y, ab, axes=1))
            else:
                out.append(ab.T @ y)
        return out


def _sym(m):
    return 0.5 * (m + m.T)


def _max_step(chol_lower, d):
    """Largest ``t`` with ``X + t dX`` PSD given ``X = L L^T``."""
    tmp = sla.solve_triangular(chol_lower, d, lower=True)
    tmp = sla.solve_triangular(chol_lower, tmp.T, lower=True)
    lam = np.linalg.eigvalsh(_sym(tmp))[0]
    return np.inf if lam >= 0 else -1.0 / lam


def _max_step_lp(x, dx):
    neg = dx < 0
    if not np.any(neg):
        return np.inf
    return float(np.min(-x[neg] / dx[neg]))


def _inner(us, vs):
    return float(sum(np.vdot(u, v) for u, v in zip(us, vs)))


def solve_sdp(p, tol=1e-8, max_iter=200, presolve_rows=True, verbose=False):
    """Solve ``p``; see the module docstring for the conventions."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    kept = np.arange(p.m)
    work = p
    if presolve_rows:
        try:
            work, kept = presolve(p)
        except SdpError:
            return _infeasible_stub(p)
    sol = _ipm(work, tol, max_iter, verbose)
    if kept.size != p.m:
        y = np.zeros(p.m)
        y[kept] = sol.y
        sol.y = y
    return sol


def _infeasible_stub(p):
    xs = [np.zeros((s, s)) if s > 0 else np.zeros(-s) for s in p.blocks]
    return SdpSolution(xs, np.zeros(p.m), [x.copy() for x in xs], np.nan, np.nan, INFEASIBLE)


def _ipm(p, tol, max_iter, verbose):
    blk = _Blocks(p)
    sizes = p.blocks
    m = p.m
    b = p.b
    c = p.c
    nu = sum(s if s > 0 else -s for s in sizes)

    norm_b = max(1.0, float(np.linalg.norm(b)))
    norm_c = max(1.0, float(np.sqrt(sum(np.vdot(cb, cb) for cb in c))))
    # work on a normalized copy; undone when results are reported
    bs = b / norm_b
    cs = [cb / norm_c for cb in c]

    xs, zs = [], []
    for size, ab, cb in zip(sizes, blk.a3, cs):
        dim = size if size > 0 else -size
        a_norms = np.linalg.norm(ab.reshape(m, -1), axis=1)
        xi = max(10.0, np.sqrt(dim), dim * float(np.max((1.0 + np.abs(bs)) / (1.0 + a_norms))))
        eta = max(10.0, np.sqrt(dim), float(a_norms.max()), float(np.linalg.norm(cb)))
        if size > 0:
            xs.append(xi * np.eye(size))
            zs.append(eta * np.eye(size))
        else:
            xs.append(np.full(dim, xi))
            zs.append(np.full(dim, eta))
    y = np.zeros(m)

    status = MAX_ITERATIONS
    best = None
    it = 0
    stall = 0
    for it in range(1, max_iter + 1):
        ax = blk.apply(xs)
        aty = blk.adjoint(y)
        rp = bs - ax
        rd = [cb - zb - ab for cb, zb, ab in zip(cs, zs, aty)]
        mu = _inner(xs, zs) / nu
        pobj = _inner(cs, xs) * norm_b * norm_c
        dobj = float(bs @ y) * norm_b * norm_c
        pres = float(np.max(np.abs(rp * norm_b) / (1.0 + np.abs(b))))
        dres = float(max(np.abs(r).max() if r.size else 0.0 for r in rd)) * norm_c
        gap = abs(pobj - dobj) / (1.0 + abs(pobj))
        merit = max(pres, dres / max(1.0, max(np.abs(cb).max() for cb in c)), gap)
        if best is None or merit < best[0]:
            best = (merit, [x.copy() for x in xs], y.copy(), [z.copy() for z in zs], pobj, dobj, pres, dres)
        elif best[0] < 1e-6 and merit > 1e4 * max(best[0], tol):
            # iterates drifting away from a near-optimal point
            status = NUMERICAL_FAILURE
            break
        if verbose:
            log.info("it %3d pobj %.10e dobj %.10e pres %.2e dres %.2e gap %.2e mu %.2e", it, pobj, dobj, pres, dres, gap, mu)
        if pres <= tol and dres <= tol * max(1.0, max(np.abs(cb).max() for cb in c)) and gap <= tol:
            status = OPTIMAL
            break
        # infeasibility certificates from diverging iterates
        by = float(bs @ y)
        if by > 0:
            if by > 1e6 and all(_min_eig(-a / by, size) >= -1e-8 for a, size in zip(aty, sizes)):
                status = INFEASIBLE
                break
        cx = _inner(cs, xs)
        if cx < 0 and -cx > 1e6 and np.linalg.norm(ax) / -cx <= 1e-8:
            status = UNBOUNDED
            break

        try:
            scal = [_scaling(size, xb, zb) for size, xb, zb in zip(sizes, xs, zs)]
            bmat = _schur_root(blk, sizes, scal)
            rfac = _root_factor(bmat, m)
            xscal = [{"g": s["lx"], "w": s["lx"] @ s["lx"].T} if size > 0 else {"w": xb * xb}
                     for size, s, xb in zip(sizes, scal, xs)]
            xfac = _root_factor(_schur_root(blk, sizes, xscal), m)
        except (np.linalg.LinAlgError, sla.LinAlgError, ValueError):
            status = NUMERICAL_FAILURE
            break

        def direction(rcs):
            # rcs: right-hand side of  dX + W dZ W = rc  (per block)
            wrdw = [_apply_w(size, s, r) for size, s, r in zip(sizes, scal, rd)]
            rhs = rp - blk.apply(rcs) + blk.apply(wrdw)
            dy = _root_solve(rfac, rhs)
            for _ in range(2):
                # refinement against the unsquared factor B (H = B^T B)
                dy = dy + _root_solve(rfac, rhs - bmat.T @ (bmat @ dy))
            atdy = blk.adjoint(dy)
            dz = [r - a for r, a in zip(rd, atdy)]
            dx = [rc - _apply_w(size, s, d) for size, s, rc, d in zip(sizes, scal, rcs, dz)]
            dx = [_sym(d) if size > 0 else d for size, d in zip(sizes, dx)]
            # dx is formed through W, which loses the accuracy of A(dx) = rp
            # once W is badly scaled; correct it by a projection in the metric
            # of X, which keeps the corrected step inside the cone
            dyx = _root_solve(xfac, rp - blk.apply(dx))
            fix = [_apply_w(size, s, a) for size, s, a in zip(sizes, xscal, blk.adjoint(dyx))]
            dx = [d + f for d, f in zip(dx, fix)]
            dz = [_sym(d) if size > 0 else d for size, d in zip(sizes, dz)]
            return dx, dy, dz

        # predictor
        rc_pred = [-xb for xb in xs]
        dx, dy, dz = direction(rc_pred)
        ap = min(1.0, _step(sizes, scal, xs, dx, "x"))
        ad = min(1.0, _step(sizes, scal, zs, dz, "z"))
        mu_aff = _inner([x + ap * d for x, d in zip(xs, dx)], [z + ad * d for z, d in zip(zs, dz)]) / nu
        sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3)) if mu > 0 else 0.0

        # corrector
        rc_corr = [
            _corrector(size, s, xb, zb, dxa, dza, sigma * mu)
            for size, s, xb, zb, dxa, dza in zip(sizes, scal, xs, zs, dx, dz)
        ]
        dx, dy, dz = direction(rc_corr)
        frac = 0.9 + 0.09 * min(ap, ad)
        ap = min(1.0, frac * _step(sizes, scal, xs, dx, "x"))
        ad = min(1.0, frac * _step(sizes, scal, zs, dz, "z"))
        if not (np.isfinite(ap) and np.isfinite(ad)):
            status = NUMERICAL_FAILURE
            break
        xs = [x + ap * d for x, d in zip(xs, dx)]
        zs = [z + ad * d for z, d in zip(zs, dz)]
        y = y + ad * dy
        if max(ap, ad) < 1e-8:
            stall += 1
            if stall >= 3:
                status = NUMERICAL_FAILURE
                break
        else:
            stall = 0
        if any(not np.all(np.isfinite(x)) for x in xs) or not np.all(np.isfinite(y)):
            status = NUMERICAL_FAILURE
            break

    if status in (OPTIMAL, INFEASIBLE, UNBOUNDED):
        pobj = _inner(cs, xs) * norm_b * norm_c
        dobj = float(bs @ y) * norm_b * norm_c
        ax = blk.apply(xs)
        pres = float(np.max(np.abs((bs - ax) * norm_b) / (1.0 + np.abs(b))))
        aty = blk.adjoint(y)
        dres = float(max(np.abs(cb - zb - ab).max() for cb, zb, ab in zip(cs, zs, aty))) * norm_c
        out_x, out_y, out_z = xs, y, zs
    else:
        _, out_x, out_y, out_z, pobj, dobj, pres, dres = best
        xs, y, zs = out_x, out_y, out_z
    x_final = [x * norm_b for x in xs]
    z_final = [z * norm_c for z in zs]
    y_final = y * norm_c
    gap = abs(pobj - dobj) / (1.0 + abs(pobj))
    cmax = max(1.0, max(np.abs(cb).max() for cb in c))
    info = {
        "mu": _inner(xs, zs) / nu * norm_b * norm_c,
        # the dual iterate is feasible and the gap closed but the primal
        # residual stalled (typical when the dual has no interior point)
        "near_optimal": status == OPTIMAL or (
            status in (MAX_ITERATIONS, NUMERICAL_FAILURE)
            and pres <= NEAR_OPTIMAL_PRES and dres <= tol * cmax and gap <= NEAR_OPTIMAL_GAP
        ),
    }
    return SdpSolution(x_final, y_final, z_final, pobj, dobj, status, it, pres, dres, info)


def usable(sol):
    """Whether a solution's dual value can be reported (optimal or near optimal)."""
    return sol.status == OPTIMAL or bool(sol.info.get("near_optimal"))


def _min_eig(mat, size):
    if size > 0:
        return float(np.linalg.eigvalsh(_sym(mat))[0])
    return float(mat.min()) if mat.size else 0.0


def _scaling(size, xb, zb):
    if size < 0:
        return {"w": xb / zb, "d": np.sqrt(xb * zb)}
    lx = np.linalg.cholesky(_sym(xb))
    lz = np.linalg.cholesky(_sym(zb))
    u, d, vt = np.linalg.svd(lz.T @ lx)
    g = lx @ vt.T / np.sqrt(d)
    ginv = (np.sqrt(d)[:, None] * vt) @ sla.solve_triangular(lx, np.eye(size), lower=True)
    return {"g": g, "ginv": ginv, "w": g @ g.T, "d": d, "lx": lx, "lz": lz}


def _apply_w(size, s, m):
    if size < 0:
        return s["w"] * m
    w = s["w"]
    return w @ m @ w


def _schur_root(blk, sizes, scal):
    """``B`` with Schur complement ``H = B^T B``, never forming ``H`` itself.

    Row blocks are ``vec(G^T A_i G)`` for PSD blocks (``W = G G^T``) and
    ``sqrt(w) * a`` for LP blocks. Factoring ``B`` by QR keeps the accuracy
    that explicitly squaring it would lose near degenerate optima.
    """
    m = blk.m
    parts = []
    for size, ab, s in zip(sizes, blk.a3, scal):
        if size > 0:
            g = s["g"]
            t = np.matmul(np.matmul(g.T, ab), g)
            parts.append(t.reshape(m, -1).T)
        else:
            parts.append((ab * np.sqrt(s["w"])).T)
    return np.vstack(parts)


def _root_factor(bmat, m):
    if bmat.shape[0] < m:
        bmat = np.vstack([bmat, np.zeros((m - bmat.shape[0], m))])
    r = np.linalg.qr(bmat, mode="r")[:m]
    d = np.abs(np.diag(r))
    floor = 1e-14 * max(float(d.max()), 1e-300)
    small = d < floor
    if np.any(small):
        # tiny pivots: directions the current scaling cannot see
        r = r.copy()
        r[small, small] = floor
    if not np.all(np.isfinite(r)):
        raise ValueError("non-finite Schur factor")
    return r


def _root_solve(r, rhs):
    t = sla.solve_triangular(r, rhs, trans="T", lower=False)
    return sla.solve_triangular(r, t, lower=False)


def _step(sizes, scal, vs, ds, which):
    alpha = np.inf
    for size, s, v, d in zip(sizes, scal, vs, ds):
        if size > 0:
            alpha = min(alpha, _max_step(s["lx"] if which == "x" else s["lz"], d))
        else:
            alpha = min(alpha, _max_step_lp(v, d))
    return alpha


def _corrector(size, s, xb, zb, dxa, dza, target):
    if size < 0:
        return (target - xb * zb - dxa * dza) / zb
    g, ginv, d = s["g"], s["ginv"], s["d"]
    dxt = ginv @ dxa @ ginv.T
    dzt = g.T @ dza @ g
    rhs = -(dxt @ dzt + dzt @ dxt) / 2.0
    rhs[np.diag_indices(size)] += target - d * d
    rt = 2.0 * rhs / (d[:, None] + d[None, :])
    return g @ rt @ g.T


def kkt_residuals(p, sol):
    """Primal, dual and gap residuals of a solution against the original data.

    primal: max_i |<A_i, X> - b_i| / (1 + |b_i|)
    dual:   max(0, -lambda_min(C - A*(y)))
    gap:    |primal - dual| / (1 + |primal|)
    psd:    max(0, -lambda_min(X))
    """
    ax = p.apply(sol.x)
    primal = float(np.max(np.abs(ax - p.b) / (1.0 + np.abs(p.b))))
    slack = [cb - ab for cb, ab in zip(p.c, p.adjoint(sol.y))]
    dual = max(0.0, -min(_min_eig(s, size) for s, size in zip(slack, p.blocks)))
    psd = max(0.0, -min(_min_eig(x, size) for x, size in zip(sol.x, p.blocks)))
    pv = p.objective(sol.x)
    dv = float(p.b @ sol.y)
    return {"primal": primal, "dual": dual, "gap": abs(pv - dv) / (1.0 + abs(pv)), "psd": psd}


# ---------------------------------------------------------------------------
# free-variable front end
# ---------------------------------------------------------------------------


@dataclass
class FreeFormResult:
    u: np.ndarray
    value: float
    status: str
    sdp: SdpSolution = None
    slacks: list = None

    @property
    def usable(self):
        return self.status == OPTIMAL or (self.sdp is not None and usable(self.sdp))

    @property
    def quality(self):
        """``status``, with stalled but near-optimal solves reported as ``near_optimal``."""
        if self.status != OPTIMAL and self.usable:
            return NEAR_OPTIMAL
        return self.status


def equality_nullspace(e_mat, f, threshold=1e-10):
    """Particular solution and orthonormal nullspace basis of ``E u = f``.

    Returns ``(u0, basis, consistent)``; ``basis`` has one column per free
    direction.
    """
    e_mat = e_mat.toarray() if sp.issparse(e_mat) else np.asarray(e_mat, dtype=np.float64)
    nvar = e_mat.shape[1]
    if e_mat.shape[0] == 0:
        return np.zeros(nvar), np.eye(nvar), True
    q, r, perm = sla.qr(e_mat.T, pivoting=True)
    diag = np.abs(np.diag(r))
    rank = int(np.sum(diag > threshold * diag[0])) if diag.size and diag[0] > 0 else 0
    fp = np.asarray(f, dtype=np.float64)[perm]
    w = sla.solve_triangular(r[:rank, :rank].T, fp[:rank], lower=True) if rank else np.zeros(0)
    u0 = q[:, :rank] @ w
    resid = e_mat @ u0 - f
    consistent = bool(np.all(np.abs(resid) <= 1e-8 * (1.0 + np.abs(f))))
    return u0, q[:, rank:], consistent


def _affine_face(c0, amat, rel=1e-10):
    """Orthonormal basis orthogonal to the common kernel of ``c0`` and every ``amat[:, :, k]``.

    Such vectors lie in the kernel of every matrix in the affine family, so
    restricting the PSD constraint to their complement is exact and removes
    the part of the block with no interior. ``None`` when nothing is forced.
    """
    size = c0.shape[0]
    stack = np.concatenate([c0[None], np.moveaxis(amat, 2, 0)], axis=0).reshape(-1, size)
    _, sv, vt = np.linalg.svd(stack, full_matrices=True)
    scale = sv[0] if sv.size and sv[0] > 0 else 1.0
    rank = int(np.sum(sv > rel * scale))
    if rank == size:
        return None
    return vt[:rank].T.copy()


def solve_free_form(cost, e_mat, f, lp=None, psd=(), tol=1e-8, max_iter=200):
    """Minimize ``cost . u`` over free ``u`` with ``E u = f`` and conic rows.

    ``lp = (G, h)`` imposes ``h - G u >= 0``. Each entry of ``psd`` is
    ``(F0, F)`` with ``F`` of shape ``(N, N, len(u))`` and imposes
    ``F0 + F @ u >= 0`` (PSD). The equalities are eliminated and the rest is
    solved as the dual of a standard-form program.
    """
    cost = np.asarray(cost, dtype=np.float64)
    u0, basis, consistent = equality_nullspace(e_mat, f)
    if not consistent:
        return FreeFormResult(u0, np.inf, INFEASIBLE)
    k = basis.shape[1]
    const = float(cost @ u0)
    blocks, cs, as_ = [], [], []
    for f0, flin in psd:
        c0 = f0 + flin @ u0
        amat = -np.tensordot(flin, basis, axes=([2], [0]))  # (N, N, k)
        proj = _affine_face(c0, amat)
        if proj is not None:
            c0 = proj.T @ c0 @ proj
            amat = np.einsum("ar,abk,bs->rsk", proj, amat, proj)
        size = c0.shape[0]
        if size == 0:
            continue
        blocks.append(size)
        cs.append(_sym(c0))
        as_.append(np.ascontiguousarray(np.moveaxis(amat, 2, 0).reshape(k, size * size)))
    if lp is not None:
        g, h = lp
        g = g.toarray() if sp.issparse(g) else np.asarray(g, dtype=np.float64)
        h0 = np.asarray(h, dtype=np.float64) - g @ u0
        gb = g @ basis
        # rows fixed by the equalities carry no free direction; they have no
        # interior and would stall the solver, so check and drop them
        live = np.abs(gb).max(axis=1, initial=0.0) > 1e-12 * (1.0 + np.abs(g).max(axis=1, initial=0.0))
        if np.any(h0[~live] < -1e-9 * (1.0 + np.abs(np.asarray(h, dtype=np.float64)[~live]))):
            return FreeFormResult(u0, np.inf, INFEASIBLE)
        if np.any(live):
            blocks.append(-int(live.sum()))
            cs.append(h0[live])
            as_.append(np.ascontiguousarray(gb[live].T))
    if k == 0:
        # fully determined; check the cones directly
        ok = all(_min_eig(c0, s) >= -tol for c0, s in zip(cs, blocks))
        return FreeFormResult(u0, const if ok else np.inf, OPTIMAL if ok else INFEASIBLE)
    if not blocks:
        # no cone: linear objective over an affine set
        if np.allclose(basis.T @ cost, 0.0, atol=1e-12):
            return FreeFormResult(u0, const, OPTIMAL)
        return FreeFormResult(u0, -np.inf, UNBOUNDED)
    b = -(basis.T @ cost)
    prob = SdpStandardForm(blocks, cs, as_, b if np.any(b) else b)
    sol = solve_sdp(prob, tol=tol, max_iter=max_iter, presolve_rows=False)
    u = u0 + basis @ sol.y
    value = const - sol.dual_value
    return FreeFormResult(u, value, sol.status, sol, sol.z)
