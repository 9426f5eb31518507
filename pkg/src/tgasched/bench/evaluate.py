"""Solver registry, optimality gaps and dataset evaluation sweeps."""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .. import env
from ..env.core import validate
from ..heuristics import DispatchRule, InsertionRule, brute_force, dispatch_solve, two_phase_solve

DISPATCH_SOLVERS = tuple(r.value for r in DispatchRule)
INSERTION_SOLVERS = tuple(r.value for r in InsertionRule)
SOLVERS = ("policy", "oracle") + DISPATCH_SOLVERS + INSERTION_SOLVERS


class SolverMismatchError(ValueError):
    """Solver does not apply to the instance's problem."""


def optimality_gap(m: float, m_star: float) -> float:
    if not m_star > 0:
        raise ValueError(f"reference makespan must be positive, got {m_star}")
    return m / m_star


def solver_problem(name: str) -> str | None:
    """Problem a solver is restricted to, or ``None`` when it handles both."""
    if name in DISPATCH_SOLVERS:
        return "jsp"
    if name in INSERTION_SOLVERS:
        return "mtsp"
    if name in ("policy", "oracle"):
        return None
    raise ValueError(f"unknown solver {name!r}; choose from {', '.join(SOLVERS)}")


def make_solver(name: str, policy=None, seed: int = 0, sparsity=None):
    """Return ``solve(instance) -> Solution``.

    ``policy`` (a :class:`~tgasched.policy.Policy`) is required for ``"policy"``
    and is rolled out greedily.
    """
    restricted = solver_problem(name)

    def check(instance):
        prob = env.problem_name(instance)
        if restricted is not None and prob != restricted:
            raise SolverMismatchError(f"solver {name!r} solves {restricted} instances, not {prob}")
        if name == "policy" and policy.config.problem != prob:
            raise SolverMismatchError(f"policy was trained for {policy.config.problem}, not {prob}")

    if name == "policy":
        if policy is None:
            raise ValueError("the policy solver needs a checkpoint")

        def solve(instance):
            check(instance)
            ep = policy.run([instance], "greedy", sparsity=sparsity)[0]
            return env.solution(ep.final_state)
    elif name == "oracle":
        def solve(instance):
            return brute_force(instance)
    elif restricted == "jsp":
        def solve(instance):
            check(instance)
            return dispatch_solve(instance, name)
    else:
        def solve(instance):
            check(instance)
            return two_phase_solve(instance, name, seed)
    return solve


@dataclass
class EvalRecord:
    instance: str
    solver: str
    makespan: float
    reference: float | None = None
    gap: float | None = None
    seconds: float | None = None
    seed: int = 0
    error: str = ""

    @property
    def ok(self) -> bool:
        return not self.error


RECORD_FIELDS = ("instance", "solver", "seed", "makespan", "reference", "gap", "error")


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def evaluate(instances, solver: str, *, policy=None, reference=None, seed: int = 0, threads: int = 1,
             sparsity=None, check: bool = True) -> list:
    """Solve every instance and score it.

    ``reference`` maps instance name to ``M*``; the string ``"oracle"`` computes
    it with the exhaustive solver.  A failing instance yields a record with
    ``error`` set and the sweep continues.  Records keep the input order.
    """
    solve = make_solver(solver, policy, seed, sparsity)

    def one(inst):
        t0 = time.perf_counter()
        try:
            sol = solve(inst)
            if check:
                rep = validate(inst, sol)
                if not rep.ok:
                    raise RuntimeError(f"invalid solution: {rep.violations[0]}")
        except Exception as exc:  # recorded, sweep continues
            return EvalRecord(inst.name, solver, float("nan"), seconds=time.perf_counter() - t0, seed=seed,
                              error=f"{type(exc).__name__}: {exc}")
        secs = time.perf_counter() - t0
        ref = None
        if reference == "oracle":
            ref = brute_force(inst).makespan
        elif reference is not None:
            ref = reference.get(inst.name)
        gap = optimality_gap(sol.makespan, ref) if ref is not None else None
        return EvalRecord(inst.name, solver, sol.makespan, ref, gap, secs, seed)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, instances))
    return [one(inst) for inst in instances]


def summarize(records) -> dict:
    good = [r for r in records if r.ok]
    ms = np.array([r.makespan for r in good])
    gaps = np.array([r.gap for r in good if r.gap is not None])
    return {
        "count": len(records), "failed": len(records) - len(good),
        "mean_makespan": float(ms.mean()) if len(ms) else float("nan"),
        "std_makespan": float(ms.std()) if len(ms) else float("nan"),
        "mean_gap": float(gaps.mean()) if len(gaps) else float("nan"),
        "std_gap": float(gaps.std()) if len(gaps) else float("nan"),
    }


def write_records_csv(records, fh, timing: bool = False):
    """One row per (instance, solver); wall-clock only when ``timing`` is set."""
    cols = RECORD_FIELDS + (("seconds",) if timing else ())
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(cols)
    for r in records:
        row = {"instance": r.instance, "solver": r.solver, "seed": r.seed, "makespan": r.makespan,
               "reference": r.reference, "gap": r.gap, "error": r.error,
               "seconds": r.seconds}
        w.writerow([_fmt(row[c]) for c in cols])


def write_summary_csv(summaries: dict, fh):
    """``summaries`` maps solver name to :func:`summarize` output."""
    cols = ("solver", "count", "failed", "mean_makespan", "std_makespan", "mean_gap", "std_gap")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(cols)
    for name, s in summaries.items():
        w.writerow([name] + [_fmt(s[c]) for c in cols[1:]])


__all__ = [
    "EvalRecord", "SOLVERS", "SolverMismatchError", "evaluate", "make_solver", "optimality_gap",
    "solver_problem", "summarize", "write_records_csv", "write_summary_csv",
]
