"""Command-line interface: ``tgasched {gen,solve,train,eval,validate}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import env
from .bench import (
    SOLVERS, evaluate, gen_random_jsp, gen_random_mtsp, load_best_known, load_taillard_set, read_instance,
    solver_problem, summarize, write_instance, write_records_csv, write_summary_csv,
)
from .bench.evaluate import make_solver
from .env.core import Solution, validate


def _common(p: argparse.ArgumentParser, seed=0):
    p.add_argument("--seed", type=int, default=seed, help=f"random seed (default {seed})")
    p.add_argument("--threads", type=int, default=1, help="worker threads for per-instance work")
    p.add_argument("--out", default=None, help="output file or directory (default: stdout where sensible)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tgasched", description="Multi-agent scheduling toolkit (mTSP / JSP).")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write random instance files")
    _common(p)
    p.add_argument("--problem", choices=("mtsp", "jsp"), required=True)
    p.add_argument("--tasks", type=int, required=True, help="cities (mTSP) or jobs (JSP)")
    p.add_argument("--agents", type=int, required=True, help="salesmen (mTSP) or machines (JSP)")
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--time-range", type=int, nargs=2, default=(1, 99), metavar=("LO", "HI"),
                   help="JSP processing-time range")

    p = sub.add_parser("solve", help="solve one instance and print the makespan and solution")
    _common(p)
    p.add_argument("instance", help=".tsp (mTSP) or Taillard-format (JSP) file")
    p.add_argument("--solver", choices=SOLVERS, required=True)
    p.add_argument("--problem", choices=("mtsp", "jsp"), default=None,
                   help="expected problem; checked against the file and the solver")
    p.add_argument("--checkpoint", default=None, help="policy checkpoint for --solver policy")
    p.add_argument("--salesmen", type=int, default=None, help="override the salesmen count of a .tsp file")
    p.add_argument("--depot", type=int, default=1, help="1-based depot node of a .tsp file")

    p = sub.add_parser("train", help="train a policy from a JSON config")
    _common(p, seed=None)
    p.add_argument("--config", default=None, help="JSON file with training options")
    p.add_argument("--steps", type=int, default=None, help="override the number of update steps")

    p = sub.add_parser("eval", help="evaluate a solver over a dataset and write a CSV")
    _common(p)
    p.add_argument("--solver", choices=SOLVERS, required=True)
    p.add_argument("--data", nargs="*", default=None,
                   help="instance files or directories (default: the bundled Taillard set)")
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--reference", default="best-known",
                   help="'best-known' (bundled table), 'oracle', 'none' or a CSV path")
    p.add_argument("--summary", default=None, help="also write a per-solver summary CSV here")
    p.add_argument("--timing", action="store_true", help="add a wall-clock column (not reproducible)")

    p = sub.add_parser("validate", help="check a solution file against an instance")
    _common(p)
    p.add_argument("instance")
    p.add_argument("solution", help="solution JSON as written by 'solve --out'")
    return parser


def _load_policy(parser, path):
    from .policy import Policy
    if path is None:
        parser.error("--solver policy needs --checkpoint")
    return Policy.load(path)


def _open_out(path):
    if path is None or path == "-":
        return sys.stdout, False
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    return open(path, "w", newline=""), True


def cmd_gen(args, parser):
    if args.tasks < 1 or args.agents < 1 or args.count < 1:
        parser.error("--tasks, --agents and --count must be positive")
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    for i in range(args.count):
        seed = args.seed + i
        if args.problem == "mtsp":
            inst = gen_random_mtsp(args.tasks, args.agents, seed)
            path = out / f"{inst.name}.tsp"
        else:
            inst = gen_random_jsp(args.tasks, args.agents, seed, tuple(args.time_range))
            path = out / f"{inst.name}.txt"
        write_instance(inst, path)
        print(path)
    return 0


def _read(parser, path, salesmen=None, depot=1):
    from .bench.formats import ParseError, tsplib_instance
    try:
        if Path(path).suffix == ".tsp":
            return tsplib_instance(Path(path).read_text(), salesmen, depot)
        return read_instance(path)
    except (OSError, ParseError, ValueError) as exc:
        parser.error(f"cannot read {path}: {exc}")


def cmd_solve(args, parser):
    inst = _read(parser, args.instance, args.salesmen, args.depot)
    prob = env.problem_name(inst)
    if args.problem is not None and args.problem != prob:
        parser.error(f"{args.instance} is a {prob} instance, not {args.problem}")
    want = solver_problem(args.solver)
    if want is not None and want != (args.problem or prob):
        parser.error(f"solver {args.solver!r} applies to {want} instances, not {args.problem or prob}")
    policy = _load_policy(parser, args.checkpoint) if args.solver == "policy" else None
    if policy is not None and policy.config.problem != prob:
        parser.error(f"checkpoint was trained for {policy.config.problem}, not {prob}")
    sol = make_solver(args.solver, policy, args.seed)(inst)
    print(f"makespan {sol.makespan!r}")
    text = json.dumps(sol.to_dict(), indent=1)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return 0


def cmd_train(args, parser):
    from .train import TrainConfig, train
    try:
        cfg = TrainConfig.from_file(args.config) if args.config else TrainConfig()
    except (OSError, ValueError, TypeError) as exc:
        parser.error(f"bad training config: {exc}")
    if args.seed is not None:
        cfg.seed = args.seed
    if args.steps is not None:
        cfg.steps = args.steps
    out = Path(args.out or "runs/train")
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=1) + "\n")
    train(cfg, out / "metrics.csv", out)
    print(out / "final.npz")
    return 0


def _dataset(parser, paths):
    if not paths:
        return load_taillard_set()
    files = []
    for p in map(Path, paths):
        files += sorted(f for f in p.iterdir() if f.suffix in (".tsp", ".txt", ".jsp")) if p.is_dir() else [p]
    return [_read(parser, f) for f in files]


def cmd_eval(args, parser):
    instances = _dataset(parser, args.data)
    policy = _load_policy(parser, args.checkpoint) if args.solver == "policy" else None
    want = solver_problem(args.solver) or (policy.config.problem if policy else None)
    for inst in instances:
        if want is not None and env.problem_name(inst) != want:
            parser.error(f"solver {args.solver!r} applies to {want} instances; {inst.name} is not one")
    if args.reference == "none":
        ref = None
    elif args.reference == "oracle":
        ref = "oracle"
    elif args.reference == "best-known":
        ref = load_best_known()
    else:
        ref = load_best_known(args.reference)
    records = evaluate(instances, args.solver, policy=policy, reference=ref, seed=args.seed,
                       threads=max(1, args.threads))
    fh, close = _open_out(args.out)
    try:
        write_records_csv(records, fh, timing=args.timing)
    finally:
        if close:
            fh.close()
    if args.summary:
        with open(args.summary, "w", newline="") as sfh:
            write_summary_csv({args.solver: summarize(records)}, sfh)
    return 0 if all(r.ok for r in records) else 1


def cmd_validate(args, parser):
    inst = _read(parser, args.instance)
    try:
        sol = Solution.from_dict(json.loads(Path(args.solution).read_text()))
    except (OSError, ValueError, KeyError, TypeError) as exc:
        parser.error(f"cannot read solution {args.solution}: {exc}")
    rep = validate(inst, sol)
    lines = [f"{v.kind}: {v.detail}" for v in rep.violations]
    lines.append(f"{'valid' if rep.ok else 'INVALID'} makespan {rep.makespan!r}")
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    return 0 if rep.ok else 1


COMMANDS = {"gen": cmd_gen, "solve": cmd_solve, "train": cmd_train, "eval": cmd_eval, "validate": cmd_validate}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads < 1:
        parser.error("--threads must be at least 1")
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    return COMMANDS[args.command](args, parser)


if __name__ == "__main__":
    sys.exit(main())
