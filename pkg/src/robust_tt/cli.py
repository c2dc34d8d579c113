"""Command-line entry point: ``robust-tt <subcommand>``.

Subcommands
-----------
make-problem CONFIG   write a PRB1 bundle (JSON) with TTF ground truth and y
recover BUNDLE        initialize, run a solver, write TTF result + trace CSV
experiment SPEC       run or resume a sweep into a results directory
rip-check CONFIG      RIP and sharpness probes, JSON report
plot RESULTS_DIR      SVG charts for every trace and success grid
"""

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .analysis import recovery_error
from .errors import ConfigurationError, SolverAbort, StructureError
from .harness import ExperimentSpec, HarnessError, run_experiment, write_trace_csv
from .io import read_bundle, read_ttf, write_bundle, write_ttf
from .plotting import plot_results
from .rng import derive_seed
from .sensing import (
    SQRT_2_OVER_PI,
    make_problem,
    rip_probe,
    sharpness_bound,
    sharpness_probe,
)
from .solvers import (
    SolverConfig,
    StepSchedule,
    TraceRecord,
    frsubgm_run,
    loss_l1,
    psubgm_run,
    truncated_spectral_init,
)
from .tt import left_orthogonalize, tt_to_dense

log = logging.getLogger("robust_tt")

EXIT_OK, EXIT_USAGE, EXIT_ABORT = 0, 1, 2


def _load_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON ({exc})") from None


def _dims_ranks(cfg):
    if "dims" in cfg:
        dims = tuple(cfg["dims"])
    else:
        dims = (cfg["d"],) * cfg["N"]
    if "ranks" in cfg:
        ranks = tuple(cfg["ranks"])
    else:
        ranks = (cfg["r"],) * (len(dims) - 1)
    return dims, ranks


# --------------------------------------------------------------------------
# make-problem


def cmd_make_problem(args):
    cfg = _load_json(args.config)
    dims, ranks = _dims_ranks(cfg)
    seed = int(cfg.get("master_seed", 0))
    prob = make_problem(
        dims, ranks, int(cfg["m"]), float(cfg.get("p_s", 0.0)),
        xstar_seed=int(cfg.get("xstar_seed", derive_seed(seed, 0))),
        master_seed=seed,
        support_seed=int(cfg.get("support_seed", derive_seed(seed, 1))),
        value_seed=int(cfg.get("value_seed", derive_seed(seed, 2))),
        outlier_sigma2=float(cfg.get("outlier_sigma2", 10.0)),
        storage=args.storage or cfg.get("storage", "auto"),
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_bundle(out, prob, xstar_file=out.stem + ".xstar.ttf", y_file=out.stem + ".y.bin")
    print(f"wrote {out} (storage={prob.ensemble.storage}, outliers={prob.measurements.support.size})")
    return EXIT_OK


# --------------------------------------------------------------------------
# recover


def cmd_recover(args):
    if args.init == "provided" and args.x0 is None:
        raise ConfigurationError("--init provided needs --x0")
    if args.init == "truncated" and args.x0 is not None:
        raise ConfigurationError("--x0 is only used with --init provided")
    if args.iters < 0:
        raise ConfigurationError("--iters must be >= 0")
    b = read_bundle(args.bundle, storage=args.storage)
    A, y, ranks = b.ensemble, b.y, b.ranks
    if args.init == "truncated":
        alpha = b.model.p_s if args.alpha is None else args.alpha
        x0 = truncated_spectral_init(A, y, ranks, alpha)
    else:
        x0 = read_ttf(args.x0)
        if args.solver == "frsubgm":
            x0 = left_orthogonalize(x0)

    x_star = tt_to_dense(b.x_star) if hasattr(b.x_star, "factors") else b.x_star
    star_norm = np.linalg.norm(x_star)
    code = EXIT_OK
    if args.iters == 0:
        x = tt_to_dense(x0)
        result = x0
        trace = [TraceRecord(0, loss_l1(A, x, y), float(np.linalg.norm(x - x_star) / star_norm), None)]
    else:
        cfg = SolverConfig(StepSchedule(args.lam, args.q), max_iters=args.iters,
                           target_rel_error=args.target, trace_every=args.trace_every,
                           sigma_bar_mode=args.sigma_bar_mode, sigma_bar=args.sigma_bar)
        run = psubgm_run if args.solver == "psubgm" else frsubgm_run
        try:
            result, trace = run(A, y, ranks, x0, cfg, x_star=x_star)
        except SolverAbort as exc:
            print(f"solver aborted: {exc}", file=sys.stderr)
            result, trace, code = None, exc.trace, EXIT_ABORT

    if args.trace:
        write_trace_csv(args.trace, [rec.as_row() for rec in trace])
    if result is not None:
        write_ttf(args.out, result)
        err = recovery_error(result, x_star)
        print(f"{args.solver}: t={trace[-1].t} objective={trace[-1].objective:.3e} "
              f"rel_sq_error={err:.3e}")
    return code


# --------------------------------------------------------------------------
# experiment


def cmd_experiment(args):
    spec = ExperimentSpec.load(args.spec)
    summary = run_experiment(spec, args.out, workers=args.workers, max_cells=args.max_cells)
    for c in summary["cells"]:
        print(f"{c['cell_id']}: N={c['N']} d={c['d']} r={c['r']} m={c['m']} p_s={c['p_s']} "
              f"success={c['success_rate']:.2f}")
    if not summary["complete"]:
        print("sweep incomplete; rerun the same command to resume")
    return EXIT_OK


# --------------------------------------------------------------------------
# rip-check


def rip_report(cfg):
    dims, ranks = _dims_ranks(cfg)
    trials = int(cfg.get("trials", 50))
    if trials < 1:
        raise ConfigurationError("trials must be >= 1")
    seed = int(cfg.get("master_seed", 0))
    p_s = float(cfg.get("p_s", 0.0))
    prob = make_problem(dims, ranks, int(cfg["m"]), p_s,
                        xstar_seed=derive_seed(seed, 0), master_seed=seed,
                        support_seed=derive_seed(seed, 1), value_seed=derive_seed(seed, 2),
                        outlier_sigma2=float(cfg.get("outlier_sigma2", 10.0)))
    rs = rip_probe(prob.ensemble, dims, ranks, trials, derive_seed(seed, 3))
    report = {
        "target": SQRT_2_OVER_PI,
        "rip": {"mean": rs.mean, "min": rs.min, "max": rs.max,
                "max_deviation": rs.max_deviation, "mean_deviation": rs.mean_deviation,
                "mean_relative_deviation": rs.mean_deviation / SQRT_2_OVER_PI},
    }
    sharp_trials = int(cfg.get("sharpness_trials", trials))
    if sharp_trials > 0:
        delta = float(cfg.get("delta", 0.0))
        bound = sharpness_bound(p_s, delta)
        ss = sharpness_probe(prob.ensemble, prob.y, prob.x_star, ranks, sharp_trials, derive_seed(seed, 4))
        report["sharpness"] = {
            "p_s": p_s, "min": ss.min, "mean": ss.mean, "bound": bound,
            "regime": "positive bound" if bound > 0 else "nonpositive bound",
            "bound_holds": bool(ss.min >= bound),
        }
    return report


def cmd_rip_check(args):
    report = rip_report(_load_json(args.config))
    text = json.dumps(report, indent=2, sort_keys=True)
    print(text)
    if report.get("sharpness", {}).get("regime") == "nonpositive bound":
        print("note: p_s leaves a nonpositive sharpness bound; no recovery guarantee applies")
    if args.out:
        Path(args.out).write_text(text + "\n")
    return EXIT_OK


# --------------------------------------------------------------------------
# plot


def cmd_plot(args):
    paths = plot_results(args.results, args.out)
    for p in paths:
        print(p)
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="robust-tt", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    mp = sub.add_parser("make-problem", help="generate a problem bundle")
    mp.add_argument("config")
    mp.add_argument("--out", default="problem.json")
    mp.add_argument("--storage", choices=["auto", "materialized", "streamed"])
    mp.set_defaults(func=cmd_make_problem)

    rc = sub.add_parser("recover", help="run a solver on a bundle")
    rc.add_argument("bundle")
    rc.add_argument("--solver", choices=["psubgm", "frsubgm"], default="psubgm")
    rc.add_argument("--lambda", dest="lam", type=float, default=0.5)
    rc.add_argument("--q", type=float, default=0.9)
    rc.add_argument("--iters", type=int, default=1000)
    rc.add_argument("--init", choices=["truncated", "provided"], default="truncated")
    rc.add_argument("--alpha", type=float, help="truncation fraction (default: bundle p_s)")
    rc.add_argument("--x0", help="TTF initial point for --init provided")
    rc.add_argument("--target", type=float, default=0.0, help="early-stop relative error")
    rc.add_argument("--trace-every", type=int, default=1)
    rc.add_argument("--sigma-bar-mode", choices=["from_init", "true_value", "user_override"],
                    default="from_init")
    rc.add_argument("--sigma-bar", type=float)
    rc.add_argument("--storage", choices=["auto", "materialized", "streamed"], default="auto")
    rc.add_argument("--out", default="result.ttf")
    rc.add_argument("--trace", default="trace.csv")
    rc.set_defaults(func=cmd_recover)

    ex = sub.add_parser("experiment", help="run or resume a sweep")
    ex.add_argument("spec")
    ex.add_argument("--out", default="results")
    ex.add_argument("--workers", type=int, help="pool size (default: TTR_THREADS or CPU count)")
    ex.add_argument("--max-cells", type=int, help="stop after this many new cells")
    ex.set_defaults(func=cmd_experiment)

    rp = sub.add_parser("rip-check", help="RIP concentration and sharpness probes")
    rp.add_argument("config")
    rp.add_argument("--out")
    rp.set_defaults(func=cmd_rip_check)

    pl = sub.add_parser("plot", help="render SVG charts from a results directory")
    pl.add_argument("results")
    pl.add_argument("--out")
    pl.set_defaults(func=cmd_plot)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigurationError, StructureError, HarnessError, OSError, KeyError) as exc:
        msg = f"missing config key {exc}" if isinstance(exc, KeyError) else str(exc)
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
