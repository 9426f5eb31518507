"""Problem instances for the two scheduling problems."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


class InstanceError(ValueError):
    """Raised for malformed or degenerate problem instances."""


@dataclass(frozen=True, eq=False)
class MtspInstance:
    """Single-depot min-max mTSP: ``num_agents`` salesmen visit every city once."""

    depot: np.ndarray
    cities: np.ndarray
    num_agents: int
    name: str = ""

    def __post_init__(self):
        depot = np.asarray(self.depot, dtype=float).reshape(2)
        cities = np.asarray(self.cities, dtype=float)
        if cities.ndim != 2 or cities.shape[1] != 2:
            raise InstanceError(f"cities must be an (N, 2) array, got shape {cities.shape}")
        if len(cities) == 0:
            raise InstanceError("mTSP instance needs at least one city")
        if int(self.num_agents) < 1:
            raise InstanceError("mTSP instance needs at least one agent")
        if not (np.all(np.isfinite(cities)) and np.all(np.isfinite(depot))):
            raise InstanceError("coordinates must be finite")
        object.__setattr__(self, "depot", depot)
        object.__setattr__(self, "cities", cities)
        object.__setattr__(self, "num_agents", int(self.num_agents))

    @property
    def num_cities(self) -> int:
        return len(self.cities)

    @cached_property
    def points(self) -> np.ndarray:
        """Cities followed by the depot, shape (N + 1, 2)."""
        return np.vstack([self.cities, self.depot[None, :]])

    @cached_property
    def dist(self) -> np.ndarray:
        """Euclidean distances over :attr:`points`; index N is the depot."""
        p = self.points
        return np.sqrt(((p[:, None, :] - p[None, :, :]) ** 2).sum(-1))


@dataclass(frozen=True, eq=False)
class JspInstance:
    """Job-shop instance.

    ``jobs[j]`` is the ordered route of job ``j`` as ``(machine, duration)`` pairs;
    the order is the precedence chain.  Operations get global ids in job-major
    order, so op ``k`` of job ``j`` has id ``job_offset[j] + k``.
    """

    jobs: tuple
    num_machines: int
    name: str = ""
    op_machine: np.ndarray = field(init=False, repr=False)
    op_duration: np.ndarray = field(init=False, repr=False)
    op_job: np.ndarray = field(init=False, repr=False)
    op_pos: np.ndarray = field(init=False, repr=False)
    job_offset: np.ndarray = field(init=False, repr=False)
    job_len: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        jobs = tuple(tuple((int(mc), float(p)) for mc, p in route) for route in self.jobs)
        m = int(self.num_machines)
        if not jobs or m < 1:
            raise InstanceError("JSP instance needs at least one job and one machine")
        for j, route in enumerate(jobs):
            if not route:
                raise InstanceError(f"job {j} has no operations")
            for mc, p in route:
                if not 0 <= mc < m:
                    raise InstanceError(f"job {j} uses machine {mc} outside [0, {m})")
                if not (p > 0 and np.isfinite(p)):
                    raise InstanceError(f"job {j} has nonpositive processing time {p}")
        object.__setattr__(self, "jobs", jobs)
        object.__setattr__(self, "num_machines", m)
        lens = np.array([len(r) for r in jobs])
        object.__setattr__(self, "job_len", lens)
        object.__setattr__(self, "job_offset", np.concatenate([[0], np.cumsum(lens)[:-1]]))
        object.__setattr__(self, "op_machine", np.array([mc for r in jobs for mc, _ in r]))
        object.__setattr__(self, "op_duration", np.array([p for r in jobs for _, p in r]))
        object.__setattr__(self, "op_job", np.repeat(np.arange(len(jobs)), lens))
        object.__setattr__(self, "op_pos", np.concatenate([np.arange(n) for n in lens]))

    @classmethod
    def from_matrices(cls, machines, durations, name: str = "", num_machines=None) -> "JspInstance":
        machines = np.asarray(machines, dtype=int)
        durations = np.asarray(durations)
        jobs = [list(zip(mr, dr)) for mr, dr in zip(machines, durations)]
        if num_machines is None:
            num_machines = int(machines.max()) + 1
        return cls(jobs, num_machines, name)

    @property
    def num_jobs(self) -> int:
        return len(self.jobs)

    @property
    def num_ops(self) -> int:
        return len(self.op_machine)
