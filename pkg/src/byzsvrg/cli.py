"""Command line entry point: ``byzsvrg {run,sweep,tune,verify}``."""
import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, runner, verification
from .adversary import AttackSpec
from .config import OUTPUT_DIR_ENV, parse_config
from .errors import ConfigError
from .problems import BoundedNoiseQuadratic
from .tuning import suggest_schedule, validate

LEMMAS = ("concentration", "error_moment", "geom_telescope", "pinelis")


def _read_config(path):
    try:
        return parse_config(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise SystemExit(f"cannot read config {path}: {exc}")


def cmd_run(args):
    cfg = _read_config(args.config)
    summary, _, code = runner.execute(cfg, output_dir=args.output_dir, name=args.name)
    print(json.dumps({k: summary.get(k) for k in (
        "status", "exit_code", "min_grad_norm_sq", "final_grad_norm_sq",
        "total_server_samples", "total_worker_samples", "artifacts")}, indent=2, sort_keys=True))
    return code


def cmd_sweep(args):
    text = Path(args.grid).read_text(encoding="utf-8")
    rows = runner.sweep(text, jobs=args.jobs)
    out = runner.sweep_csv(rows)
    if args.output:
        Path(args.output).parent.mkdir(parents=True, exist_ok=True)
        Path(args.output).write_text(out, encoding="utf-8")
    else:
        sys.stdout.write(out)
    return 0


def cmd_tune(args):
    cfg = _read_config(args.config)
    problem = cfg.problem()
    epsilon = args.epsilon or cfg.epsilon
    report = {
        "given": {"K": cfg.K, "B": cfg.B, "delta": cfg.delta,
                  "constraints": validate(cfg.K, cfg.B, cfg.delta).verdicts()},
        "problem": {"L": problem.smoothness, "V": problem.deviation_bound,
                    "f_gap": problem.gradient_gap(np.broadcast_to(np.asarray(cfg.x0, float), (cfg.d,)))},
    }
    if epsilon is not None:
        hp = suggest_schedule(epsilon, cfg.K, cfg.alpha, problem.smoothness,
                              problem.deviation_bound, report["problem"]["f_gap"])
        report["schedule"] = hp.as_dict()
    print(json.dumps(report, indent=2, sort_keys=True))
    feasible = report["schedule"]["feasible"] if "schedule" in report else all(report["given"]["constraints"].values())
    return 0 if feasible else runner.EXIT_INFEASIBLE


def cmd_verify(args):
    rng_seed = args.seed
    lemmas = args.lemma or list(LEMMAS)
    problem = BoundedNoiseQuadratic(args.dim, noise_radius=args.noise)
    x = np.ones(args.dim)
    delta = args.delta or 1.0 / (25.0 * args.K * args.B)
    ok = True
    out_dir = Path(args.output_dir) if args.output_dir else None
    for i, lemma in enumerate(lemmas):
        rng = np.random.default_rng([rng_seed, i])
        if lemma == "concentration":
            rep = verification.check_concentration(problem, x, args.K, args.B, delta, args.trials, rng)
        elif lemma == "error_moment":
            attack = AttackSpec(args.attack, args.magnitude,
                                "omniscient" if args.attack in ("inside_threshold_drift", "median_copycat") else "blind")
            scenario = verification.ErrorMomentScenario(
                problem, x, args.K, args.alpha, attack, args.B, delta, seed=rng_seed)
            rep = verification.check_error_moment(scenario, args.trials)
        elif lemma == "geom_telescope":
            rep = verification.check_geom_telescope(args.B, args.sequence, args.trials, rng)
        else:
            rep = verification.check_pinelis(args.noise, args.pinelis_n, args.dim, delta, args.trials, rng)
        text = json.dumps(rep.to_dict(), sort_keys=True)
        print(text)
        if out_dir:
            out_dir.mkdir(parents=True, exist_ok=True)
            (out_dir / f"{lemma}.json").write_text(text + "\n", encoding="utf-8")
        ok &= rep.passed
    return 0 if ok else 1


def build_parser():
    p = argparse.ArgumentParser(prog="byzsvrg", description=__doc__)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one simulation from a config file")
    r.add_argument("config")
    r.add_argument("--output-dir", default=None, help=f"defaults to run.output_dir or ${OUTPUT_DIR_ENV}")
    r.add_argument("--name", default="run", help="artifact file prefix")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="run a grid of simulations")
    s.add_argument("grid")
    s.add_argument("-o", "--output", default=None, help="aggregated CSV path (stdout if omitted)")
    s.add_argument("-j", "--jobs", type=int, default=1)
    s.set_defaults(func=cmd_sweep)

    t = sub.add_parser("tune", help="check constraints and suggest B, T, delta")
    t.add_argument("config")
    t.add_argument("--epsilon", type=float, default=None)
    t.set_defaults(func=cmd_tune)

    v = sub.add_parser("verify", help="Monte Carlo lemma checks (one JSON line each)")
    v.add_argument("--lemma", action="append", choices=LEMMAS)
    v.add_argument("--trials", type=int, default=10000)
    v.add_argument("--K", type=int, default=10)
    v.add_argument("--B", type=int, default=64)
    v.add_argument("--delta", type=float, default=None, help="defaults to 1/(25 K B)")
    v.add_argument("--alpha", type=float, default=0.0)
    v.add_argument("--attack", default="gaussian_blast")
    v.add_argument("--magnitude", type=float, default=1000.0)
    v.add_argument("--dim", type=int, default=4)
    v.add_argument("--noise", type=float, default=1.0)
    v.add_argument("--sequence", default="geometric:0.5")
    v.add_argument("--pinelis-n", type=int, default=100)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--output-dir", default=None)
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        for err in exc.errors:
            print(f"config error: {err}", file=sys.stderr)
        return runner.EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
