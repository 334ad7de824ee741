"""Monte-Carlo logical error rates, threshold fits and result files."""

import csv
import itertools
import json
import logging
import math
import signal
import threading
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import exact, gf2, lasserre, noise, relaxations, sdp
from .problem import MldInstance

log = logging.getLogger(__name__)

DECODERS = ("none", "exact", "bnb", "lp", "sa", "ls", "lsplus", "sos")
RESULT_COLUMNS = (
    "family", "distance", "p", "decoder", "level", "mode", "trials", "failures", "p_L",
    "stderr", "mean_rank", "rank_loop_fraction", "mean_gap", "mean_wall_ms", "seed",
)
DEFAULT_TIMEOUT = 60.0


class DecodeTimeout(RuntimeError):
    pass


@dataclass(frozen=True)
class DecoderConfig:
    method: str = "sos"
    level: int = 2
    mode: str = "dense"
    tol: float = 1e-8
    timeout: float = DEFAULT_TIMEOUT

    def __post_init__(self):
        if self.method not in DECODERS:
            raise ValueError(f"unknown decoder {self.method!r}; choose from {', '.join(DECODERS)}")
        if self.mode not in ("dense", "sparse"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.method in ("sos", "sa") and self.level < 1:
            raise ValueError("hierarchy level must be at least 1")


@dataclass
class DecodeOutcome:
    e_hat: np.ndarray
    feasible: bool
    bound: float = float("nan")
    rank: float = float("nan")
    rank_loop: float = float("nan")
    status: str = sdp.OPTIMAL
    timed_out: bool = False
    solution: object = field(default=None, repr=False)


@dataclass
class TrialStats:
    code_id: str
    family: str
    distance: int
    decoder: DecoderConfig
    p: float
    trials: int
    failures: int
    mean_rank: float
    rank_loop_fraction: float
    mean_gap: float
    mean_wall_ms: float
    seed: int
    timeouts: int = 0
    solver_failures: int = 0

    @property
    def p_l(self):
        return self.failures / self.trials if self.trials else 0.0

    @property
    def stderr(self):
        if not self.trials:
            return 0.0
        q = self.p_l
        return math.sqrt(q * (1.0 - q) / self.trials)

    def wilson(self, z=1.96):
        return wilson_interval(self.failures, self.trials, z)

    def row(self):
        def num(x):
            return "nan" if x is None or not np.isfinite(x) else repr(float(x))

        return {
            "family": self.family, "distance": self.distance, "p": repr(float(self.p)),
            "decoder": self.decoder.method, "level": self.decoder.level, "mode": self.decoder.mode,
            "trials": self.trials, "failures": self.failures, "p_L": repr(self.p_l),
            "stderr": repr(self.stderr), "mean_rank": num(self.mean_rank),
            "rank_loop_fraction": num(self.rank_loop_fraction), "mean_gap": num(self.mean_gap),
            "mean_wall_ms": num(self.mean_wall_ms), "seed": self.seed,
        }


def wilson_interval(failures, trials, z=1.96):
    if trials == 0:
        return 0.0, 1.0
    q = failures / trials
    den = 1.0 + z * z / trials
    mid = (q + z * z / (2 * trials)) / den
    half = z * math.sqrt(q * (1 - q) / trials + z * z / (4 * trials * trials)) / den
    return max(0.0, mid - half), min(1.0, mid + half)


# ---------------------------------------------------------------------------
# scoring and decoding
# ---------------------------------------------------------------------------


def logical_failure(code, e_true, e_hat, feasible, kind="x"):
    """Whether ``e_true ^ e_hat`` flips a logical of the sector ``kind``."""
    e_true = np.asarray(e_true, dtype=np.uint8)
    e_hat = np.asarray(e_hat, dtype=np.uint8)
    if e_true.shape != (code.n,) or e_hat.shape != (code.n,):
        raise ValueError(f"error vectors must have length {code.n}")
    if not feasible:
        return True
    _, _, logicals = code.sector(kind)
    residual = e_true ^ e_hat
    return bool(gf2.matvec(logicals, residual).any())


class _Alarm:
    """Wall-clock limit through SIGALRM; a no-op off the main thread or without SIGALRM."""

    def __init__(self, seconds):
        self.seconds = seconds
        self.active = (
            seconds and seconds > 0 and hasattr(signal, "setitimer")
            and threading.current_thread() is threading.main_thread()
        )

    def _fire(self, signum, frame):
        raise DecodeTimeout(f"decode exceeded {self.seconds} s")

    def __enter__(self):
        if self.active:
            self.prev = signal.signal(signal.SIGALRM, self._fire)
            signal.setitimer(signal.ITIMER_REAL, self.seconds)
        return self

    def __exit__(self, *exc):
        if self.active:
            signal.setitimer(signal.ITIMER_REAL, 0)
            signal.signal(signal.SIGALRM, self.prev)
        return False


def _round_relaxation(inst, rv):
    first = np.nan_to_num(np.asarray(rv.fractional_solution, dtype=np.float64), nan=0.0)
    e = (first > 0.5).astype(np.uint8)
    if not inst.satisfied(e):
        e, _ = lasserre._greedy_repair(e, first, inst.h, inst.s)
    return DecodeOutcome(e, inst.satisfied(e), rv.value, status=rv.status)


def decode_instance(inst, config, keep_solution=False):
    """Run one decoder on one instance. Solver errors propagate to the caller."""
    m = config.method
    if m == "none":
        return DecodeOutcome(np.zeros(inst.n, dtype=np.uint8), True)
    if m == "exact":
        r = exact.mld_coset(inst)
        return DecodeOutcome(r.e_star, True, r.value)
    if m == "bnb":
        r = exact.mld_branch_and_bound(inst, config.tol)
        return DecodeOutcome(r.e_star, True, r.value)
    if m == "lp":
        return _round_relaxation(inst, relaxations.lp_relax(inst, tol=config.tol))
    if m == "sa":
        return _round_relaxation(inst, relaxations.sherali_adams(inst, config.level, config.tol))
    if m in ("ls", "lsplus"):
        return _round_relaxation(inst, relaxations.lovasz_schrijver(inst, m == "lsplus", config.tol))
    r = lasserre.decode(inst, config.level, config.mode, config.tol, keep_solution=keep_solution)
    return DecodeOutcome(r.e_hat, r.feasible, r.lam, float(r.moment_rank), float(r.rank_loop),
                         r.status, solution=r.solution)


def _exact_value(inst):
    try:
        return exact.mld_coset(inst).value
    except exact.BudgetExceeded:
        return float("nan")


def _decode_guarded(inst, config):
    """Decode with the time limit; failures become an infeasible outcome."""
    zero = np.zeros(inst.n, dtype=np.uint8)
    try:
        with _Alarm(config.timeout):
            out = decode_instance(inst, config)
    except DecodeTimeout:
        return DecodeOutcome(zero, False, status="timeout", timed_out=True)
    except (ValueError, sdp.SdpError, np.linalg.LinAlgError) as exc:
        log.warning("decoder %s failed: %s", config.method, exc)
        return DecodeOutcome(zero, False, status=f"error: {exc}")
    return out


def _trial_chunk(code, config, p, seed, indices, kind, timing):
    """Sums over one chunk of trials: independent of chunking and order."""
    h, _, _ = code.sector(kind)
    gamma = noise.uniform_weights(code.n, p) if 0.0 < p < 1.0 else np.ones(code.n)
    memo = {}
    acc = {"failures": 0, "rank_sum": 0.0, "rank_n": 0, "loop_sum": 0.0, "gap_sum": 0.0,
           "gap_n": 0, "wall": 0.0, "timeouts": 0, "solver_failures": 0}
    for t in indices:
        e_true = noise.sample_error(code.n, p, noise.trial_stream(seed, t))
        s = noise.syndrome(h, e_true)
        key = s.tobytes()
        if key not in memo:
            inst = MldInstance(h, s, gamma)
            t0 = time.perf_counter()
            out = _decode_guarded(inst, config)
            wall = time.perf_counter() - t0
            gap = float("nan")
            if np.isfinite(out.bound) and config.method not in ("none", "exact", "bnb"):
                gap = _exact_value(inst) - out.bound
            elif config.method in ("exact", "bnb") and not out.timed_out:
                gap = 0.0
            memo[key] = (out, wall, gap)
        out, wall, gap = memo[key]
        acc["failures"] += logical_failure(code, e_true, out.e_hat, out.feasible, kind)
        if timing:
            acc["wall"] += wall
        acc["timeouts"] += out.timed_out
        acc["solver_failures"] += out.status not in (sdp.OPTIMAL, sdp.NEAR_OPTIMAL)
        if np.isfinite(out.rank):
            acc["rank_sum"] += out.rank
            acc["loop_sum"] += out.rank_loop
            acc["rank_n"] += 1
        if np.isfinite(gap):
            acc["gap_sum"] += gap
            acc["gap_n"] += 1
    return acc


def run_trials(code, config, p, trials, master_seed, kind="x", timing=False, workers=1):
    """Logical error statistics for ``trials`` samples at bit-flip rate ``p``.

    Trial ``t`` draws its error from ``trial_stream(master_seed, t)``, so the
    same seed gives every decoder the same errors. Decodes are memoized per
    syndrome (the decoders are deterministic). Decoder errors and timeouts
    count as failures. ``timing=False`` leaves ``mean_wall_ms`` as NaN so
    that result files are reproducible byte for byte.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    if trials < 0:
        raise ValueError("trials must be nonnegative")
    idx = np.arange(trials)
    if workers > 1 and trials > 1:
        chunks = np.array_split(idx, workers)
        with ProcessPoolExecutor(workers) as pool:
            parts = list(pool.map(_trial_chunk, itertools.repeat(code), itertools.repeat(config),
                                  itertools.repeat(p), itertools.repeat(master_seed), chunks,
                                  itertools.repeat(kind), itertools.repeat(timing)))
    else:
        parts = [_trial_chunk(code, config, p, master_seed, idx, kind, timing)]
    tot = {k: sum(part[k] for part in parts) for k in parts[0]}
    nan = float("nan")
    return TrialStats(
        code.name, code.family, code.distance, config, float(p), int(trials), int(tot["failures"]),
        tot["rank_sum"] / tot["rank_n"] if tot["rank_n"] else nan,
        tot["loop_sum"] / tot["rank_n"] if tot["rank_n"] else nan,
        tot["gap_sum"] / tot["gap_n"] if tot["gap_n"] else nan,
        1000.0 * tot["wall"] / trials if timing and trials else nan,
        int(master_seed), int(tot["timeouts"]), int(tot["solver_failures"]),
    )


def sweep(codes, config, p_grid, trials, seed, kind="x", timing=False, workers=1):
    """``run_trials`` over every (code, p) pair, in the given order."""
    out = []
    for code in codes:
        for p in p_grid:
            out.append(run_trials(code, config, float(p), trials, seed, kind, timing, workers))
    return out


def write_results(path, stats):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=RESULT_COLUMNS, lineterminator="\n")
        w.writeheader()
        for st in stats:
            w.writerow(st.row())


def read_results(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        for k in ("distance", "trials", "failures", "level", "seed"):
            r[k] = int(r[k])
        for k in ("p", "p_L", "stderr", "mean_rank", "rank_loop_fraction", "mean_gap", "mean_wall_ms"):
            r[k] = float(r[k])
    return rows


# ---------------------------------------------------------------------------
# threshold fit
# ---------------------------------------------------------------------------


@dataclass
class ThresholdFit:
    p_th: float
    nu: float
    a: float
    b: float
    c: float
    residual: float
    converged: bool
    covariance: list = None
    message: str = ""

    def predict(self, p, d):
        x = np.asarray(d, dtype=np.float64) ** (1.0 / self.nu) * (np.asarray(p, dtype=np.float64) - self.p_th)
        return self.a + self.b * x + self.c * x * x

    def to_json(self):
        keys = ("p_th", "nu", "a", "b", "c", "residual", "converged")
        return {k: getattr(self, k) for k in keys}


def _fit_arrays(data):
    p, d, y, sig = [], [], [], []
    for r in data:
        p.append(float(r["p"]))
        d.append(float(r["distance"]))
        y.append(float(r["p_L"]))
        se = float(r.get("stderr", 0.0) or 0.0)
        trials = int(r.get("trials", 0) or 0)
        if not se > 0.0:
            # zero observed failures: fall back to the one-failure scale
            se = 1.0 / trials if trials else 1e-6
        sig.append(se)
    return np.array(p), np.array(d), np.array(y), np.array(sig)


def _inner(p, d, y, w, p_th, nu):
    x = d ** (1.0 / nu) * (p - p_th)
    design = np.stack([np.ones_like(x), x, x * x], axis=1) * w[:, None]
    coef, *_ = np.linalg.lstsq(design, y * w, rcond=None)
    res = design @ coef - y * w
    return float(res @ res), coef


def fit_threshold(data, p_starts=5, nu_grid=(0.5, 1.0, 1.5, 2.0, 3.0), n_best=3):
    """Weighted finite-size scaling fit ``p_L = f(d^(1/nu) (p - p_th))`` with quadratic ``f``.

    ``data`` is a sequence of rows with ``distance``, ``p``, ``p_L`` and
    ``stderr`` (and optionally ``trials``). ``(a, b, c)`` are solved in closed
    form for each ``(p_th, nu)``; the outer problem runs Nelder-Mead from the
    best points of a start grid. The fit is flagged non-converged when the
    optimizer fails or ``p_th`` leaves the data range.
    """
    p, d, y, sig = _fit_arrays(data)
    dists = np.unique(d)
    if dists.size < 2:
        raise ValueError("threshold fit needs at least two distances")
    for dist in dists:
        if np.unique(p[d == dist]).size < 4:
            raise ValueError(f"distance {int(dist)} has fewer than four p values")
    w = 1.0 / sig
    lo, hi = float(p.min()), float(p.max())

    def obj(theta):
        p_th, nu = theta
        if not (nu > 0.05 and nu < 50.0):
            return 1e300
        return _inner(p, d, y, w, p_th, nu)[0]

    starts = [(pt, nu) for pt in np.linspace(lo, hi, p_starts) for nu in nu_grid]
    starts.sort(key=obj)
    best = None
    for st in starts[:n_best]:
        res = minimize(obj, np.array(st), method="Nelder-Mead",
                       options={"xatol": 1e-12, "fatol": 1e-16, "maxiter": 20000, "maxfev": 40000})
        if best is None or res.fun < best.fun:
            best = res
    p_th, nu = (float(v) for v in best.x)
    resid, coef = _inner(p, d, y, w, p_th, nu)
    cov = _covariance(obj, best.x)
    in_range = lo <= p_th <= hi
    converged = bool(best.success and in_range and np.isfinite(resid))
    msg = "" if converged else ("p_th outside the data range" if not in_range else str(best.message))
    return ThresholdFit(p_th, nu, *(float(c) for c in coef), resid, converged, cov, msg)


def _covariance(obj, theta, rel=1e-4):
    """Inverse of half the finite-difference Hessian of the chi-square at ``theta``."""
    theta = np.asarray(theta, dtype=np.float64)
    h = rel * np.maximum(np.abs(theta), 1e-3)
    hess = np.zeros((2, 2))
    f0 = obj(theta)
    for i in range(2):
        for j in range(2):
            ei = np.eye(2)[i] * h[i]
            ej = np.eye(2)[j] * h[j]
            hess[i, j] = (obj(theta + ei + ej) - obj(theta + ei) - obj(theta + ej) + f0) / (h[i] * h[j])
    try:
        return np.linalg.inv(0.5 * hess).tolist()
    except np.linalg.LinAlgError:
        return None


def write_fit(path, fit):
    with open(path, "w") as fh:
        json.dump(fit.to_json(), fh, indent=2)
        fh.write("\n")


def stats_dict(st):
    out = asdict(st)
    out["decoder"] = asdict(st.decoder)
    out["p_L"] = st.p_l
    out["stderr"] = st.stderr
    return out
