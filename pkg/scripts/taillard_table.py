"""Per-instance and mean optimality gaps of dispatching rules (and optionally a policy) on ta01-ta10."""

import argparse

import numpy as np

from tgasched.bench import evaluate, load_best_known, load_taillard_set
from tgasched.policy import Policy


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--checkpoint", default=None, help="also evaluate a JSP policy checkpoint")
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    insts = load_taillard_set()
    best = load_best_known()
    solvers = {"mor": None, "fifo": None, "spt": None}
    if args.checkpoint:
        solvers["policy"] = Policy.load(args.checkpoint)
    print("instance  " + "  ".join(f"{s:>7}" for s in solvers))
    cols = {s: evaluate(insts, s, policy=p, reference=best, threads=args.threads) for s, p in solvers.items()}
    for k, inst in enumerate(insts):
        print(f"{inst.name:8}  " + "  ".join(f"{cols[s][k].gap:7.3f}" for s in solvers))
    print(f"{'mean':8}  " + "  ".join(f"{np.mean([r.gap for r in cols[s]]):7.3f}" for s in solvers))


if __name__ == "__main__":
    main()
