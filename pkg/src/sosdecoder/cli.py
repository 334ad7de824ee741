"""Command-line interface: ``sosdecoder <subcommand> ...``.

Exit codes: 0 success, 2 bad arguments, 3 solver or budget failure.
"""

import argparse
import json
import logging
import sys

import numpy as np

from . import exact, experiments, noise, relaxations, sdp
from .codes import CssCode, build_code
from .problem import MldInstance

EXIT_OK, EXIT_ARGS, EXIT_SOLVER = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ARGS, f"{self.prog}: error: {message}\n")


def _unit_interval(text):
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"{text} is not in [0, 1]")
    return v


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"{text} is not a positive integer")
    return v


def _decoder_args(p, with_level=True):
    p.add_argument("--decoder", choices=experiments.DECODERS, default="sos")
    if with_level:
        p.add_argument("--level", type=int, default=2)
    p.add_argument("--mode", choices=("dense", "sparse"), default="dense")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--timeout", type=float, default=experiments.DEFAULT_TIMEOUT, help="seconds per decode")
    p.add_argument("--sector", choices=("x", "z"), default="x")


def build_parser():
    ap = _Parser(prog="sosdecoder", description="Moment-hierarchy decoding of CSS codes.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("build-code", help="write a code's check matrices to JSON")
    p.add_argument("--family", choices=("surface", "color"), required=True)
    p.add_argument("--distance", type=int, required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("decode-one", help="sample one error and decode it")
    p.add_argument("--code", required=True)
    p.add_argument("--p", type=_unit_interval, required=True)
    p.add_argument("--seed", type=int, default=0)
    _decoder_args(p)
    p.add_argument("--dump-moments", metavar="FILE")

    p = sub.add_parser("run", help="Monte-Carlo logical error rate at one p")
    p.add_argument("--code", required=True)
    _decoder_args(p)
    p.add_argument("--p", type=_unit_interval, required=True)
    p.add_argument("--trials", type=_positive_int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=_positive_int, default=1)
    p.add_argument("--timing", action="store_true", help="record mean_wall_ms (output no longer reproducible)")
    p.add_argument("--out", required=True)

    p = sub.add_parser("sweep", help="run over several codes and a p grid")
    p.add_argument("--codes", required=True, help="comma-separated code files")
    _decoder_args(p)
    p.add_argument("--p-min", type=_unit_interval, required=True)
    p.add_argument("--p-max", type=_unit_interval, required=True)
    p.add_argument("--p-steps", type=_positive_int, required=True)
    p.add_argument("--trials", type=_positive_int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=_positive_int, default=1)
    p.add_argument("--timing", action="store_true")
    p.add_argument("--out", required=True)

    p = sub.add_parser("fit-threshold", help="finite-size scaling fit of a results file")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--decoder", choices=experiments.DECODERS, help="restrict to one decoder")

    p = sub.add_parser("compare", help="relaxation values on sampled syndromes")
    p.add_argument("--code", required=True)
    p.add_argument("--instances", type=_positive_int, default=10)
    p.add_argument("--level", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--p", type=_unit_interval, default=0.1)
    p.add_argument("--sector", choices=("x", "z"), default="x")
    p.add_argument("--out", required=True)
    return ap


class _Usage(Exception):
    pass


def _load_code(path):
    try:
        return CssCode.load(path)
    except (OSError, ValueError, KeyError) as exc:
        raise _Usage(f"cannot read code file {path}: {exc}") from exc


def _config(args):
    level = getattr(args, "level", 0)
    try:
        return experiments.DecoderConfig(args.decoder, level, args.mode, args.tol, args.timeout)
    except ValueError as exc:
        raise _Usage(str(exc)) from exc


def _cmd_build_code(args):
    try:
        code = build_code(args.family, args.distance)
    except ValueError as exc:
        raise _Usage(str(exc)) from exc
    code.save(args.out)
    print(json.dumps({"code": code.name, "n": code.n, "k": code.k, "out": args.out}))
    return EXIT_OK


def _cmd_decode_one(args):
    code = _load_code(args.code)
    cfg = _config(args)
    if args.dump_moments and cfg.method != "sos":
        raise _Usage("--dump-moments needs --decoder sos")
    h, _, _ = code.sector(args.sector)
    e_true = noise.sample_error(code.n, args.p, noise.trial_stream(args.seed, 0))
    s = noise.syndrome(h, e_true)
    gamma = noise.uniform_weights(code.n, args.p) if 0.0 < args.p < 1.0 else np.ones(code.n)
    inst = MldInstance(h, s, gamma)
    out = experiments.decode_instance(inst, cfg, keep_solution=bool(args.dump_moments))
    fail = experiments.logical_failure(code, e_true, out.e_hat, out.feasible, args.sector)
    report = {
        "code": code.name, "decoder": cfg.method, "level": cfg.level, "mode": cfg.mode,
        "e_true": e_true.astype(int).tolist(), "syndrome": s.astype(int).tolist(),
        "e_hat": np.asarray(out.e_hat).astype(int).tolist(), "feasible": bool(out.feasible),
        "logical_failure": fail, "bound": None if not np.isfinite(out.bound) else out.bound,
        "cost": inst.cost(out.e_hat), "status": out.status,
    }
    if cfg.method == "sos":
        report["moment_rank"] = int(out.rank)
        report["rank_loop"] = bool(out.rank_loop)
    if args.dump_moments:
        with open(args.dump_moments, "w") as fh:
            json.dump(out.solution.to_dict(), fh)
    print(json.dumps(report))
    ok = out.status in (sdp.OPTIMAL, sdp.NEAR_OPTIMAL)
    return EXIT_OK if ok else EXIT_SOLVER


def _cmd_run(args):
    code = _load_code(args.code)
    st = experiments.run_trials(code, _config(args), args.p, args.trials, args.seed,
                                args.sector, args.timing, args.workers)
    experiments.write_results(args.out, [st])
    print(json.dumps({"p_L": st.p_l, "stderr": st.stderr, "failures": st.failures,
                      "timeouts": st.timeouts, "solver_failures": st.solver_failures}))
    return EXIT_OK


def _cmd_sweep(args):
    if args.p_min > args.p_max:
        raise _Usage("--p-min exceeds --p-max")
    codes = [_load_code(c) for c in args.codes.split(",") if c]
    if not codes:
        raise _Usage("no code files given")
    grid = np.linspace(args.p_min, args.p_max, args.p_steps)
    stats = experiments.sweep(codes, _config(args), grid, args.trials, args.seed,
                              args.sector, args.timing, args.workers)
    experiments.write_results(args.out, stats)
    print(json.dumps({"rows": len(stats), "out": args.out}))
    return EXIT_OK


def _cmd_fit(args):
    try:
        rows = experiments.read_results(args.inp)
    except (OSError, KeyError, ValueError) as exc:
        raise _Usage(f"cannot read results file {args.inp}: {exc}") from exc
    if args.decoder:
        rows = [r for r in rows if r["decoder"] == args.decoder]
    try:
        fit = experiments.fit_threshold(rows)
    except ValueError as exc:
        raise _Usage(str(exc)) from exc
    experiments.write_fit(args.out, fit)
    print(json.dumps(fit.to_json()))
    return EXIT_OK if fit.converged else EXIT_SOLVER


def _cmd_compare(args):
    code = _load_code(args.code)
    if args.level < 1 or args.level > relaxations.SA_MAX_LEVEL:
        raise _Usage(f"--level must lie in 1..{relaxations.SA_MAX_LEVEL}")
    h, _, _ = code.sector(args.sector)
    gamma = noise.uniform_weights(code.n, args.p) if 0.0 < args.p < 1.0 else np.ones(code.n)
    rows = []
    failed = 0
    for k in range(args.instances):
        e = noise.sample_error(code.n, args.p, noise.trial_stream(args.seed, k))
        inst = MldInstance(h, noise.syndrome(h, e), gamma)
        r, _ = relaxations.compare_relaxations(inst, args.level, k, tol=1e-8)
        failed += sum(row["status"] not in (sdp.OPTIMAL, sdp.NEAR_OPTIMAL) for row in r)
        rows.extend(r)
    relaxations.write_compare_csv(args.out, rows)
    print(json.dumps({"rows": len(rows), "solver_failures": failed, "out": args.out}))
    return EXIT_OK if failed == 0 else EXIT_SOLVER


_COMMANDS = {
    "build-code": _cmd_build_code, "decode-one": _cmd_decode_one, "run": _cmd_run,
    "sweep": _cmd_sweep, "fit-threshold": _cmd_fit, "compare": _cmd_compare,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except _Usage as exc:
        print(f"sosdecoder: error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except (exact.BudgetExceeded, sdp.SdpError) as exc:
        print(f"sosdecoder: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
