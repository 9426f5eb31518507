"""Greedy makespan of an mTSP policy on complete vs sparsified graphs."""

import argparse

import numpy as np

from tgasched.bench import gen_random_mtsp
from tgasched.policy import Policy, PolicyConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--checkpoint", default=None, help="mTSP policy (default: random init)")
    ap.add_argument("--cities", type=int, default=100)
    ap.add_argument("--agents", type=int, default=10)
    ap.add_argument("--count", type=int, default=6)
    ap.add_argument("--neighbours", type=int, nargs=2, action="append", metavar=("N_R", "N_T"),
                    help="agent and task neighbour counts; repeatable (default: 5 15)")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    pol = Policy.load(args.checkpoint) if args.checkpoint else Policy.create(PolicyConfig(), args.seed)
    insts = [gen_random_mtsp(args.cities, args.agents, args.seed + i) for i in range(args.count)]
    full = np.array([e.makespan for e in pol.run(insts)])
    print(f"complete        mean makespan {full.mean():.4f}")
    for n_r, n_t in args.neighbours or [(5, 15)]:
        sparse = np.array([e.makespan for e in pol.run(insts, sparsity=(n_r, n_t))])
        print(f"N_r={n_r:<3} N_t={n_t:<4} mean makespan {sparse.mean():.4f}  ratio {sparse.mean() / full.mean():.4f}")


if __name__ == "__main__":
    main()
