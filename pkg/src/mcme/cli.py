"""Command-line entry point: ``mcme fit``, ``mcme bench`` and ``mcme oracle``."""

import argparse
import json
import logging
import math
import sys

import numpy as np

from . import __version__
from .bench import PROBLEMS, parse_ratios, primary_error, run_sweep, summarize, to_csv
from .core import DegenerateError, DomainError, FitConfig, MCMEError, beta_from_tau, beta_rigid
from .geometry import quat_rotmat
from .io import (ParseError, read_cloud, read_correspondences_csv, read_linear_csv,
                 read_pairs_csv)
from .models import LinearModel, PointPairSet, homography_geometric, linearize_projective
from .solver import fit
from .svg import line_plot

EXIT_OK, EXIT_FAIL, EXIT_PARSE, EXIT_DEGENERATE = 0, 1, 2, 3
SCHEMA = 1

log = logging.getLogger("mcme")


def build_parser():
    p = argparse.ArgumentParser(prog="mcme", description="Joint consensus maximization and model fitting.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log solver warnings")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="fit one model to a data file")
    f.add_argument("problem", choices=["linear", "homography", "affinity", "rotation", "euclidean"])
    f.add_argument("--input", required=True,
                   help="CSV (a1..ad,b / x,y,x2,y2 / ax,ay,az,bx,by,bz) or a source cloud (XYZ/PLY)")
    f.add_argument("--target", help="target cloud (XYZ/PLY) paired row by row with --input")
    f.add_argument("--tau", type=float, help="inlier threshold on the residual")
    f.add_argument("--beta", type=float, help="per-outlier cost (default from tau or sigma)")
    f.add_argument("--sigma", type=float, help="rigid problems: inlier noise level for beta")
    f.add_argument("--init", choices=["ransac", "l1", "random"], default=None,
                   help="initializer (default: l1 for linear, ransac otherwise)")
    f.add_argument("--geometric", action="store_true",
                   help="homography: fit the transfer error instead of the algebraic residual")
    f.add_argument("--rank", type=int, help="factorization rank p")
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--out", required=True, help="result JSON path")

    b = sub.add_parser("bench", help="outlier-ratio sweeps")
    b.add_argument("problem", choices=PROBLEMS)
    b.add_argument("--ratios", default="0:0.05:0.95", help="start:step:stop or a comma list")
    b.add_argument("--runs", type=int, default=20)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--n", type=int, help="number of measurements")
    b.add_argument("--sigma", type=float, help="inlier noise level")
    b.add_argument("--out", required=True, help="CSV path")
    b.add_argument("--svg", help="optional plot of the mean error per ratio")
    b.add_argument("--timing", action="store_true", help="fill the wall_ms column")

    o = sub.add_parser("oracle", help="brute-force verification")
    o.add_argument("action", choices=["verify"])
    o.add_argument("--instances", type=int, default=100)
    o.add_argument("--seed", type=int, default=0)
    return p


def _default_beta(args):
    rigid = args.problem in ("rotation", "euclidean")
    if args.beta is not None:
        beta = args.beta
    elif rigid and args.sigma is not None:
        beta = beta_rigid(args.sigma)
    elif args.tau is not None:
        beta = beta_from_tau(args.tau)
    else:
        raise DomainError("give --tau (or --sigma for rigid problems) or --beta")
    tau = args.tau if args.tau is not None else math.sqrt(beta)
    return beta, tau


def _load_model(args):
    if args.problem == "linear":
        A, b = read_linear_csv(args.input)
        return LinearModel(A, b)
    if args.problem in ("homography", "affinity"):
        x, xp = read_correspondences_csv(args.input)
        if args.problem == "homography" and args.geometric:
            return homography_geometric(x, xp)
        return linearize_projective(args.problem, x, xp)
    if args.target:
        a, b = read_cloud(args.input), read_cloud(args.target)
        if a.shape != b.shape:
            raise DomainError(f"{args.input} has {len(a)} points but {args.target} has {len(b)}")
    else:
        a, b = read_pairs_csv(args.input)
    return PointPairSet(a, b, with_translation=args.problem == "euclidean")


def cmd_fit(args):
    beta, tau = _default_beta(args)
    model = _load_model(args)
    init = args.init or ("l1" if args.problem == "linear" else "ransac")
    cfg = FitConfig(beta=beta, rank_p=args.rank, rng_seed=args.seed)
    if args.geometric and init != "ransac":
        raise DomainError("the geometric homography model needs --init ransac")
    res = fit(model, beta, tau, init=init, cfg=cfg, seed=args.seed)
    out = {
        "schema": SCHEMA,
        "problem": args.problem,
        "init": init,
        "beta": beta,
        "tau": tau,
        "theta": [float(v) for v in res.theta],
        "selection": [int(v) for v in res.selection],
        "consensus": res.consensus,
        "objective": res.objective,
        "objective_trace": [float(v) for v in res.objective_trace],
        "iterations": res.iterations,
        "converged": bool(res.converged),
        "degenerate": bool(res.degenerate),
        "wall_time": res.wall_time,
    }
    if hasattr(model, "matrix"):
        out["matrix"] = np.asarray(model.matrix(res.theta)).tolist()
    if isinstance(model, PointPairSet):
        q, t = model.split(res.theta)
        out["quaternion_xyzw"] = q.tolist()
        out["rotation"] = quat_rotmat(q).tolist()
        if model.with_translation:
            out["translation"] = t.tolist()
    with open(args.out, "w") as fh:
        json.dump(out, fh, indent=2)
        fh.write("\n")
    print(f"{args.problem}: consensus {res.consensus}/{model.n}, objective {res.objective:.6g}, "
          f"{res.iterations} iterations -> {args.out}")
    return EXIT_DEGENERATE if res.degenerate else EXIT_OK


def cmd_bench(args):
    ratios = parse_ratios(args.ratios)
    if args.runs < 1:
        raise DomainError("--runs must be positive")
    rows = run_sweep(args.problem, ratios, args.runs, seed=args.seed, n=args.n, sigma=args.sigma)
    with open(args.out, "w", newline="") as fh:
        fh.write(to_csv(rows, timing=args.timing))
    key = primary_error(args.problem)
    summary = summarize(rows, key)
    print(f"{'method':<10} {'ratio':>6} {'mean ' + key:>18} {'std':>12}")
    for method, (rs, means, stds) in summary.items():
        for r, mu, sd in zip(rs, means, stds):
            print(f"{method:<10} {r:>6.2f} {mu:>18.6g} {sd:>12.4g}")
    if args.svg:
        series = {m: (rs, means) for m, (rs, means, _) in summary.items()}
        with open(args.svg, "w") as fh:
            fh.write(line_plot(series, title=f"{args.problem} sweep", xlabel="outlier ratio",
                               ylabel=key, logy=True))
    return EXIT_OK


def cmd_oracle(args):
    from .oracle import verify_suite

    c = verify_suite(args.instances, args.seed)
    n = c["instances"]
    checks = [
        ("truncated-loss identity", c["truncated_identity"], n),
        ("consensus size bound", c["consensus_bound"], n),
        ("residual bound", c["residual_bound"], n),
        ("strict residual bound", c["residual_strict"], c["residual_strict_cases"]),
    ]
    ok = True
    for name, got, want in checks:
        flag = "PASS" if got == want else "FAIL"
        ok &= got == want
        print(f"{flag} {name}: {got}/{want}")
    print(f"INFO ACS within 1% of the exhaustive optimum: {c['acs_within_1pct']}/{n}")
    return EXIT_OK if ok else EXIT_FAIL


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"fit": cmd_fit, "bench": cmd_bench, "oracle": cmd_oracle}[args.command]
    try:
        return handler(args)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except DegenerateError as exc:
        print(f"degenerate problem: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except MCMEError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
