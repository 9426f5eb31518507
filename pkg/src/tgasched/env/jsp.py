"""Event-driven semi-MDP for the job-shop scheduling problem.

Machines are the agents and operations the tasks.  An operation is
*available* when all earlier operations of its job have finished and it has
not started.  A decision is requested for the lowest-id idle machine that has
an available operation; idle machines with nothing available are parked
automatically until the next completion.  The policy may also choose ``WAIT``,
which parks the target machine until the next completion event.  ``WAIT`` is
only offered while it cannot deadlock the shop: either some machine is busy
(so a completion is pending) or another idle machine still has work it can
start right now.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    WAIT,
    Action,
    EntityState,
    InfeasibleActionError,
    NotTerminalError,
    ScheduledTask,
    Solution,
    TerminalStateError,
)
from .instances import JspInstance


@dataclass
class JspState:
    instance: JspInstance
    clock: float = 0.0
    event_index: int = 0
    done: bool = False
    target: int = -1
    job_next: np.ndarray = None     # position of the next unstarted op per job
    job_ready: np.ndarray = None    # time the job's last started op finishes (or 0)
    op_start: np.ndarray = None
    op_end: np.ndarray = None
    machine_op: np.ndarray = None   # op in process per machine, -1 when idle
    machine_free: np.ndarray = None
    waiting: np.ndarray = None
    machine_left: np.ndarray = None  # unstarted ops per machine
    num_completed: int = 0
    num_waits: int = 0
    history: list = field(default_factory=list)

    def copy(self) -> "JspState":
        return JspState(
            self.instance, self.clock, self.event_index, self.done, self.target,
            self.job_next.copy(), self.job_ready.copy(), self.op_start.copy(), self.op_end.copy(),
            self.machine_op.copy(), self.machine_free.copy(), self.waiting.copy(),
            self.machine_left.copy(), self.num_completed, self.num_waits,
            [list(h) for h in self.history],
        )

    @property
    def num_agents(self) -> int:
        return self.instance.num_machines

    def op_completed(self) -> np.ndarray:
        return ~np.isnan(self.op_end) & (self.op_end <= self.clock)

    def available_ops(self, machine: int | None = None) -> np.ndarray:
        """Ops whose predecessors are done and that have not started."""
        inst = self.instance
        jobs = np.flatnonzero((self.job_next < inst.job_len) & (self.job_ready <= self.clock))
        ops = inst.job_offset[jobs] + self.job_next[jobs]
        if machine is not None:
            ops = ops[inst.op_machine[ops] == machine]
        return ops

    def wait_allowed(self) -> bool:
        if np.any(self.machine_op >= 0):
            return True
        for mc in range(self.num_agents):
            if mc != self.target and self.machine_op[mc] < 0 and not self.waiting[mc] \
                    and len(self.available_ops(mc)):
                return True
        return False

    def entities(self) -> list:
        """Machines then operations as :class:`EntityState` records."""
        inst = self.instance
        out = []
        for mc in range(inst.num_machines):
            busy = self.machine_op[mc] >= 0
            out.append(EntityState(
                position=None, active=bool(self.machine_left[mc] > 0 or busy), assigned=bool(busy),
                target=int(self.machine_op[mc]) if busy else None,
                completion=float(self.machine_free[mc]) if busy else None,
                waiting=bool(self.waiting[mc]),
            ))
        avail = set(self.available_ops().tolist())
        done = self.op_completed()
        for o in range(inst.num_ops):
            started = not np.isnan(self.op_start[o])
            processable = self.target >= 0 and inst.op_machine[o] == self.target and not started
            out.append(EntityState(
                position=None, active=not bool(done[o]), assigned=started and not done[o],
                processable=bool(processable), accessible=bool(processable and o in avail), waiting=False,
            ))
        return out


def reset(instance: JspInstance) -> JspState:
    m, n_ops = instance.num_machines, instance.num_ops
    s = JspState(
        instance,
        job_next=np.zeros(instance.num_jobs, dtype=int), job_ready=np.zeros(instance.num_jobs),
        op_start=np.full(n_ops, np.nan), op_end=np.full(n_ops, np.nan),
        machine_op=np.full(m, -1), machine_free=np.zeros(m), waiting=np.zeros(m, dtype=bool),
        machine_left=np.bincount(instance.op_machine, minlength=m),
        history=[[] for _ in range(m)],
    )
    _advance(s)
    return s


def feasible_actions(state: JspState) -> list:
    if state.done:
        raise TerminalStateError("no actions in a terminal state")
    acts = [Action(state.target, int(o)) for o in np.sort(state.available_ops(state.target))]
    if state.wait_allowed():
        acts.append(Action(state.target, WAIT))
    return acts


def step(state: JspState, action: Action) -> JspState:
    if state.done:
        raise TerminalStateError("episode is finished")
    mc, op = action
    if mc != state.target:
        raise InfeasibleActionError(f"machine {mc} is not the idle target machine {state.target}")
    inst = state.instance
    s = state.copy()
    if op == WAIT:
        if not state.wait_allowed():
            raise InfeasibleActionError("waiting would leave no pending event (deadlock)")
        s.waiting[mc] = True
        s.num_waits += 1
    else:
        if not 0 <= op < inst.num_ops:
            raise InfeasibleActionError(f"unknown operation {op}")
        if inst.op_machine[op] != mc:
            raise InfeasibleActionError(
                f"operation {op} needs machine {inst.op_machine[op]} (agent-sharing constraint)")
        if not np.isnan(state.op_start[op]):
            raise InfeasibleActionError(f"operation {op} has already started")
        j = inst.op_job[op]
        if inst.job_offset[j] + state.job_next[j] != op or state.job_ready[j] > state.clock:
            raise InfeasibleActionError(f"operation {op} violates the precedence constraint of job {j}")
        end = s.clock + inst.op_duration[op]
        s.op_start[op], s.op_end[op] = s.clock, end
        s.job_next[j] += 1
        s.job_ready[j] = end
        s.machine_op[mc], s.machine_free[mc] = op, end
        s.machine_left[mc] -= 1
        s.history[mc].append(int(op))
    s.event_index += 1
    s.target = -1
    _advance(s)
    return s


def makespan(state: JspState) -> float:
    if not state.done:
        raise NotTerminalError("makespan is only defined for terminal states")
    return float(state.clock)


def solution(state: JspState) -> Solution:
    mk = makespan(state)
    seqs = [[ScheduledTask(o, float(state.op_start[o]), float(state.op_end[o])) for o in h] for h in state.history]
    return Solution(seqs, mk)


def _advance(s: JspState):
    inst = s.instance
    while True:
        for mc in range(inst.num_machines):
            if s.machine_op[mc] >= 0 or s.waiting[mc] or s.machine_left[mc] == 0:
                continue
            if len(s.available_ops(mc)):
                s.target = mc
                return
            s.waiting[mc] = True
        busy = np.flatnonzero(s.machine_op >= 0)
        if not len(busy):
            if s.num_completed != inst.num_ops:
                raise RuntimeError("job shop deadlocked with unfinished operations")
            s.done = True
            s.target = -1
            return
        t_next = s.machine_free[busy].min()
        s.clock = max(s.clock, float(t_next))
        for mc in busy:
            if s.machine_free[mc] == t_next:
                s.machine_op[mc] = -1
                s.num_completed += 1
        s.waiting[:] = False
