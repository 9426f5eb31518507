"""Exhaustive optimal solvers for tiny instances (test oracle)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import env
from ..env.core import WAIT, Solution
from ..env.instances import JspInstance, MtspInstance
from .mtsp import tours_to_solution


class LimitExceededError(ValueError):
    pass


@dataclass(frozen=True)
class OracleLimits:
    max_cities: int = 8
    max_agents: int = 3
    max_ops: int = 10


def held_karp(dist, depot: int, cities) -> tuple:
    """Optimal closed tour from ``depot`` over every subset of ``cities``.

    Returns ``(length, order)`` arrays indexed by subset bitmask.
    """
    n = len(cities)
    full = 1 << n
    d = np.asarray(dist)
    # best[mask][j]: shortest depot -> ... -> cities[j] path covering mask
    best = np.full((full, n), np.inf)
    parent = np.full((full, n), -1, dtype=int)
    for j in range(n):
        best[1 << j, j] = d[depot, cities[j]]
    for mask in range(1, full):
        for j in range(n):
            if not mask >> j & 1 or not np.isfinite(best[mask, j]):
                continue
            for k in range(n):
                if mask >> k & 1:
                    continue
                nm = mask | 1 << k
                cand = best[mask, j] + d[cities[j], cities[k]]
                if cand < best[nm, k]:
                    best[nm, k] = cand
                    parent[nm, k] = j
    length = np.zeros(full)
    last = np.full(full, -1, dtype=int)
    for mask in range(1, full):
        closing = best[mask] + np.array([d[cities[j], depot] for j in range(n)])
        last[mask] = int(np.argmin(closing))
        length[mask] = closing[last[mask]]

    def order(mask):
        out, j = [], last[mask]
        while mask:
            out.append(cities[j])
            pj = parent[mask, j]
            mask &= ~(1 << j)
            j = pj
        return out[::-1]

    return length, order


def _brute_force_mtsp(instance: MtspInstance) -> Solution:
    n, m = instance.num_cities, instance.num_agents
    length, order = held_karp(instance.dist, n, list(range(n)))
    full = (1 << n) - 1
    # cost[k][mask]: best max tour length covering mask with at most k agents
    cost = [length.copy()]
    choice = [np.arange(full + 1)]
    for _ in range(1, m):
        prev = cost[-1]
        cur = prev.copy()
        pick = np.full(full + 1, -1)
        for mask in range(1, full + 1):
            low = mask & -mask
            sub = mask
            while sub:
                if sub & low:
                    v = max(length[sub], prev[mask ^ sub])
                    if v < cur[mask]:
                        cur[mask] = v
                        pick[mask] = sub
                sub = (sub - 1) & mask
        cost.append(cur)
        choice.append(pick)
    tours, mask = [], full
    for k in range(m - 1, 0, -1):
        sub = int(choice[k][mask])
        if sub <= 0:
            continue
        tours.append(order(sub))
        mask ^= sub
    if mask:
        tours.append(order(mask))
    tours += [[] for _ in range(m - len(tours))]
    return tours_to_solution(instance, tours)


def _lower_bound(s) -> float:
    inst = s.instance
    lb = float(np.nanmax(s.op_end)) if np.any(~np.isnan(s.op_end)) else 0.0
    for j in range(inst.num_jobs):
        k = s.job_next[j]
        if k < inst.job_len[j]:
            o = inst.job_offset[j]
            rest = inst.op_duration[o + k:o + inst.job_len[j]].sum()
            lb = max(lb, max(s.clock, s.job_ready[j]) + rest)
    unstarted = np.isnan(s.op_start)
    for mc in range(inst.num_machines):
        rest = inst.op_duration[unstarted & (inst.op_machine == mc)].sum()
        if rest:
            lb = max(lb, max(s.clock, s.machine_free[mc]) + rest)
    return lb


def _brute_force_jsp(instance: JspInstance) -> Solution:
    best = [np.inf, None]

    def dfs(s):
        if s.done:
            mk = env.makespan(s)
            if mk < best[0]:
                best[0], best[1] = mk, s
            return
        if _lower_bound(s) >= best[0]:
            return
        # try real operations before waiting so good incumbents appear early
        acts = sorted(env.feasible_actions(s), key=lambda a: a.task == WAIT)
        for a in acts:
            dfs(env.step(s, a))

    dfs(env.reset(instance))
    return env.solution(best[1])


def brute_force(instance, limits: OracleLimits = OracleLimits()) -> Solution:
    """Optimal solution by exhaustive search; raises :class:`LimitExceededError` when too large."""
    if isinstance(instance, MtspInstance):
        if instance.num_cities > limits.max_cities or instance.num_agents > limits.max_agents:
            raise LimitExceededError(
                f"mTSP oracle limited to {limits.max_cities} cities and {limits.max_agents} agents")
        return _brute_force_mtsp(instance)
    if isinstance(instance, JspInstance):
        if instance.num_ops > limits.max_ops:
            raise LimitExceededError(f"JSP oracle limited to {limits.max_ops} operations")
        return _brute_force_jsp(instance)
    raise TypeError(f"unsupported instance type {type(instance).__name__}")
