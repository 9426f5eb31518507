"""Priority dispatching rules for the job shop, run through the event-driven environment."""

from __future__ import annotations

from enum import Enum

from .. import env
from ..env.core import Solution
from ..env.instances import JspInstance


class DispatchRule(str, Enum):
    MOR = "mor"
    FIFO = "fifo"
    SPT = "spt"


def priority_key(state, op: int, rule: DispatchRule) -> tuple:
    """Sort key; the smallest key is dispatched.  Ties fall to the lowest job id."""
    inst = state.instance
    job = int(inst.op_job[op])
    if rule is DispatchRule.MOR:
        return (-(inst.job_len[job] - inst.op_pos[op]), job)
    if rule is DispatchRule.SPT:
        return (inst.op_duration[op], job)
    # FIFO: time the op joined the available set = finish of its predecessor
    return (state.job_ready[job], job)


def dispatch_choice(rule):
    rule = rule if isinstance(rule, DispatchRule) else DispatchRule(str(rule).lower())

    def choose(state, actions):
        ops = [a for a in actions if not a.is_wait]
        return min(ops, key=lambda a: priority_key(state, a.task, rule))

    return choose


def dispatch_solve(instance: JspInstance, rule="mor") -> Solution:
    """Non-delay schedule: every decision starts an operation, never waits."""
    final = env.rollout(instance, dispatch_choice(rule))
    return env.solution(final)
