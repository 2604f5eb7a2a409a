"""Command-line front end: generate / solve / oracle / experiment / export."""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction
from pathlib import Path

from . import harness
from .archive import MODE_LITERAL, MODE_STRICT
from .harness import ALGORITHMS, ExperimentConfig, run_experiment
from .instances import (
    GENERATOR_CLASSES,
    GeneratorSpec,
    generate,
    manifest_entry,
    parse_instance,
    write_instance,
    write_manifest,
)
from .oracles import brute_force_opt, dp_by_profit, dp_by_weight, fptas
from .qd import TerminationCriteria, fpras_gamma


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"expected a rational like 3/2 or 25, got {text!r}")


def _positive_fraction(text: str) -> Fraction:
    f = _fraction(text)
    if f <= 0:
        raise argparse.ArgumentTypeError(f"value must be positive, got {text!r}")
    return f


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="knapelites")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate benchmark instances")
    g.add_argument("--class", dest="klass", choices=GENERATOR_CLASSES, required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--r", type=int, default=1000, help="coefficient range R")
    cap = g.add_mutually_exclusive_group(required=True)
    cap.add_argument("--capacity", type=int)
    cap.add_argument("--rho", type=float, help="capacity as a fraction of total weight")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--count", type=int, default=1)
    g.add_argument("--out", required=True, help="output file (or prefix with --count > 1)")

    s = sub.add_parser("solve", help="run one algorithm on one instance")
    s.add_argument("--instance", required=True)
    s.add_argument("--algo", choices=ALGORITHMS, required=True)
    s.add_argument("--gamma", type=_positive_fraction, default=Fraction(1))
    s.add_argument("--mode", choices=(MODE_STRICT, MODE_LITERAL), default=MODE_STRICT)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--mu", type=int, default=50)
    s.add_argument("--max-evals", type=int)
    s.add_argument("--max-seconds", type=float)
    s.add_argument("--target", type=int)
    s.add_argument("--target-opt", action="store_true", help="stop at the DP optimum")
    s.add_argument("--out", help="write the run record JSON here")
    s.add_argument("--map-out", help="write the final archive snapshot CSV here")

    o = sub.add_parser("oracle", help="exact optimum or approximation of an instance")
    o.add_argument("--instance", required=True)
    o.add_argument(
        "--method", choices=("dp-weight", "dp-profit", "brute", "fptas"), default="dp-weight"
    )
    o.add_argument("--fptas", action="store_true", help="shorthand for --method fptas")
    o.add_argument("--epsilon", type=_positive_fraction, default=Fraction(1, 10))

    e = sub.add_parser("experiment", help="run a full experiment grid")
    e.add_argument("--instance", action="append", required=True)
    e.add_argument("--algo", action="append", required=True, choices=ALGORITHMS)
    e.add_argument("--gamma", action="append", type=_positive_fraction)
    e.add_argument("--mode", choices=(MODE_STRICT, MODE_LITERAL), default=MODE_STRICT)
    e.add_argument("--reps", type=int, default=30)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--mu", type=int, default=50)
    e.add_argument("--max-evals", type=int, help="evaluation cap (default: C*n^2)")
    e.add_argument("--no-eval-cap", action="store_true")
    e.add_argument("--max-seconds", type=float, default=7200.0)
    e.add_argument("--no-target-opt", action="store_true")
    e.add_argument("--target", type=int)
    e.add_argument("--no-maps", action="store_true")
    e.add_argument("--workers", type=int, default=1)
    e.add_argument("--force", action="store_true")
    e.add_argument("--out", required=True, help="output directory")

    x = sub.add_parser("export", help="rebuild stats/trajectory CSVs from run JSON")
    x.add_argument("--runs", required=True, help="experiment output directory")

    return parser


def _cmd_generate(args) -> int:
    entries = []
    for i in range(args.count):
        spec = GeneratorSpec(
            klass=args.klass,
            n=args.n,
            coefficient_range=args.r,
            capacity=args.capacity,
            capacity_fraction=args.rho,
            seed=args.seed + i,
        )
        inst = generate(spec)
        if args.count == 1:
            path = Path(args.out)
        else:
            base = Path(args.out)
            path = base.with_name(f"{base.stem}-{i:02d}{base.suffix or '.txt'}")
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(write_instance(inst))
        entries.append(manifest_entry(str(path), inst, klass=args.klass))
        print(f"wrote {path} (n={inst.n} C={inst.capacity} Q={inst.total_profit})")
    if args.count > 1:
        mpath = Path(args.out).with_name(Path(args.out).stem + "-manifest.json")
        mpath.write_text(write_manifest(entries))
        print(f"wrote {mpath}")
    return 0


def _cmd_solve(args) -> int:
    instance = parse_instance(Path(args.instance).read_text())
    target = args.target
    opt = None
    if args.target_opt:
        opt = dp_by_weight(instance).opt_profit
        target = opt
    if args.max_evals is None and args.max_seconds is None and target is None:
        raise ValueError("set at least one of --max-evals / --max-seconds / --target(-opt)")
    term = TerminationCriteria(
        max_evaluations=args.max_evals, target_profit=target, max_wall_clock=args.max_seconds
    )
    result, seconds = harness.execute_run(
        instance, args.algo, args.gamma, args.mode, term, args.seed, args.mu
    )
    print(f"B={result.best_profit}")
    print(f"evaluations={result.evaluations_used}")
    print(f"hit_target={str(result.hit_target).lower()}")
    print(f"seconds={seconds:.3f}")
    if args.out:
        record = harness.run_record_dict(
            result, instance, Path(args.instance).stem, args.algo, args.gamma,
            args.mode, args.seed, term, opt,
            Path(args.map_out).name if args.map_out else None,
        )
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(harness._json_text(record))
        print(f"wrote {out}")
    if args.map_out:
        harness.export_map_csv(result, args.map_out)
        print(f"wrote {args.map_out}")
    return 0


def _cmd_oracle(args) -> int:
    instance = parse_instance(Path(args.instance).read_text())
    method = "fptas" if args.fptas else args.method
    if method == "brute":
        res = brute_force_opt(instance)
    elif method == "dp-weight":
        res = dp_by_weight(instance)
    elif method == "dp-profit":
        res = dp_by_profit(instance)
    else:
        res = fptas(instance, args.epsilon)
        gamma = fpras_gamma(args.epsilon, instance).gamma
        print(f"profit={res.opt_profit}")
        print(f"witness={res.witness.to_string()}")
        print(f"epsilon={args.epsilon}")
        print(f"matching_niche_width={gamma.numerator}/{gamma.denominator}")
        return 0
    print(f"OPT={res.opt_profit}")
    print(f"witness={res.witness.to_string()}")
    return 0


def _cmd_experiment(args) -> int:
    config = ExperimentConfig(
        instances=tuple(args.instance),
        algorithms=tuple(dict.fromkeys(args.algo)),
        gammas=tuple(args.gamma) if args.gamma else (Fraction(1),),
        repetitions=args.reps,
        mode=args.mode,
        base_seed=args.seed,
        mu=args.mu,
        target_opt=not args.no_target_opt,
        target_profit=args.target,
        max_evaluations=args.max_evals,
        no_eval_cap=args.no_eval_cap,
        max_wall_clock=args.max_seconds,
        write_maps=not args.no_maps,
    )
    stats = run_experiment(config, args.out, workers=args.workers, force=args.force)
    for s in stats:
        ratio = "-" if s.success_ratio is None else f"{s.success_ratio:.1f}%"
        print(f"{s.cell}: ratio={ratio} mean_evals={s.mean_evaluations:.3g}")
    print(f"wrote {args.out}/stats.csv")
    return 0


def _cmd_export(args) -> int:
    stats = harness.rebuild_exports(args.runs)
    print(f"rebuilt stats.csv and {len(stats)} trajectory CSVs in {args.runs}")
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "solve": _cmd_solve,
    "oracle": _cmd_oracle,
    "experiment": _cmd_experiment,
    "export": _cmd_export,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, OSError, MemoryError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
