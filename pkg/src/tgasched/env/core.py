"""Actions, solutions and solution validation shared by both environments."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .instances import JspInstance, MtspInstance

WAIT = -1
"""Task id of the JSP waiting action."""

TIME_TOL = 1e-9


class EnvError(RuntimeError):
    """Base class for environment misuse."""


class TerminalStateError(EnvError):
    pass


class InfeasibleActionError(EnvError):
    pass


class NotTerminalError(EnvError):
    pass


class EntityState(NamedTuple):
    """Read-only view of one agent or task.  JSP-only flags stay ``None`` for mTSP."""

    position: tuple | None
    active: bool
    assigned: bool
    target: int | None = None
    completion: float | None = None
    processable: bool | None = None
    accessible: bool | None = None
    waiting: bool | None = None


class Action(NamedTuple):
    agent: int
    task: int

    @property
    def is_wait(self) -> bool:
        return self.task == WAIT


class ScheduledTask(NamedTuple):
    task: int
    start: float
    end: float


@dataclass
class Solution:
    """Per-agent task sequences with timing.

    For mTSP ``start``/``end`` are the departure and arrival times of the leg that
    reaches the city; the closing leg back to the depot is implied.  For JSP they
    are the processing interval of the operation on the machine.
    """

    sequences: list
    makespan: float

    def to_dict(self) -> dict:
        return {
            "makespan": self.makespan,
            "sequences": [[list(t) for t in seq] for seq in self.sequences],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Solution":
        seqs = [[ScheduledTask(int(t), float(s), float(e)) for t, s, e in seq] for seq in d["sequences"]]
        return cls(seqs, float(d["makespan"]))


class Violation(NamedTuple):
    kind: str
    detail: str


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)
    makespan: float = float("nan")

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, kind: str, detail: str):
        self.violations.append(Violation(kind, detail))


def validate(instance, solution: Solution) -> ValidationReport:
    """Check every constraint of ``solution`` and recompute its makespan."""
    if isinstance(instance, MtspInstance):
        return _validate_mtsp(instance, solution)
    if isinstance(instance, JspInstance):
        return _validate_jsp(instance, solution)
    raise TypeError(f"unsupported instance type {type(instance).__name__}")


def tour_length(instance: MtspInstance, tour) -> float:
    """Closed depot-to-depot length of a city sequence."""
    d = instance.dist
    depot = instance.num_cities
    length, prev = 0.0, depot
    for c in tour:
        length += d[prev, c]
        prev = c
    return float(length + d[prev, depot])


def _validate_mtsp(instance: MtspInstance, solution: Solution) -> ValidationReport:
    rep = ValidationReport()
    n = instance.num_cities
    if len(solution.sequences) != instance.num_agents:
        rep.add("agents", f"{len(solution.sequences)} sequences for {instance.num_agents} agents")
    counts = np.zeros(n, dtype=int)
    lengths = []
    for a, seq in enumerate(solution.sequences):
        tour = []
        for st in seq:
            if not 0 <= st.task < n:
                rep.add("unknown-task", f"agent {a} visits unknown city {st.task}")
                continue
            counts[st.task] += 1
            tour.append(st.task)
        # legs must be contiguous at unit speed
        clock, prev = 0.0, n
        for st in seq:
            if not 0 <= st.task < n:
                continue
            leg = instance.dist[prev, st.task]
            if abs(st.start - clock) > 1e-6 or abs(st.end - st.start - leg) > 1e-6:
                rep.add("timing", f"agent {a} leg to city {st.task} timed [{st.start}, {st.end}], expected "
                                  f"[{clock}, {clock + leg}]")
            clock, prev = clock + leg, st.task
        lengths.append(tour_length(instance, tour))
    for c in np.flatnonzero(counts == 0):
        rep.add("coverage", f"city {c} is never visited")
    for c in np.flatnonzero(counts > 1):
        rep.add("duplication", f"city {c} is visited {counts[c]} times")
    rep.makespan = max(lengths) if lengths else 0.0
    if abs(rep.makespan - solution.makespan) > 1e-6 * max(1.0, rep.makespan):
        rep.add("makespan", f"reported {solution.makespan}, recomputed {rep.makespan}")
    return rep


def _validate_jsp(instance: JspInstance, solution: Solution) -> ValidationReport:
    rep = ValidationReport()
    n_ops = instance.num_ops
    start = np.full(n_ops, np.nan)
    end = np.full(n_ops, np.nan)
    if len(solution.sequences) != instance.num_machines:
        rep.add("agents", f"{len(solution.sequences)} sequences for {instance.num_machines} machines")
    for mc, seq in enumerate(solution.sequences):
        for st in seq:
            o = st.task
            if not 0 <= o < n_ops:
                rep.add("unknown-task", f"machine {mc} runs unknown operation {o}")
                continue
            if instance.op_machine[o] != mc:
                rep.add("machine", f"operation {o} needs machine {instance.op_machine[o]}, ran on {mc}")
            if not np.isnan(start[o]):
                rep.add("duplication", f"operation {o} scheduled more than once")
                continue
            if abs(st.end - st.start - instance.op_duration[o]) > TIME_TOL * max(1.0, st.end):
                rep.add("duration", f"operation {o} runs {st.end - st.start}, needs {instance.op_duration[o]}")
            if st.start < -TIME_TOL:
                rep.add("timing", f"operation {o} starts before time 0")
            start[o], end[o] = st.start, st.end
        ordered = sorted((st for st in seq if 0 <= st.task < n_ops), key=lambda st: st.start)
        for a, b in zip(ordered, ordered[1:]):
            if b.start < a.end - TIME_TOL:
                rep.add("overlap", f"machine {mc} runs operations {a.task} and {b.task} simultaneously")
    for o in np.flatnonzero(np.isnan(start)):
        rep.add("coverage", f"operation {o} is never scheduled")
    for j in range(instance.num_jobs):
        off = instance.job_offset[j]
        for k in range(1, instance.job_len[j]):
            prev, cur = off + k - 1, off + k
            if not (np.isnan(end[prev]) or np.isnan(start[cur])) and start[cur] < end[prev] - TIME_TOL:
                rep.add("precedence", f"job {j} op {k} starts at {start[cur]} before op {k - 1} ends at {end[prev]}")
    rep.makespan = float(np.nanmax(end)) if np.any(~np.isnan(end)) else 0.0
    if abs(rep.makespan - solution.makespan) > 1e-6 * max(1.0, rep.makespan):
        rep.add("makespan", f"reported {solution.makespan}, recomputed {rep.makespan}")
    return rep
