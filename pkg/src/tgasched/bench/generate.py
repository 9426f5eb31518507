"""Seeded random instance generators."""

from __future__ import annotations

import numpy as np

from ..env.instances import InstanceError, JspInstance, MtspInstance


def gen_random_mtsp(num_cities: int, num_agents: int, seed: int, name: str = "") -> MtspInstance:
    """Depot and cities uniform in the unit square."""
    if num_cities < 1 or num_agents < 1:
        raise InstanceError("need at least one city and one agent")
    rng = np.random.default_rng(seed)
    depot = rng.random(2)
    cities = rng.random((num_cities, 2))
    return MtspInstance(depot, cities, num_agents, name or f"mtsp_n{num_cities}_m{num_agents}_s{seed}")


def gen_random_jsp(num_jobs: int, num_machines: int, seed: int, time_range=(1, 99), name: str = "") -> JspInstance:
    """Every job visits every machine once in a shuffled order; integer times in ``time_range``."""
    if num_jobs < 1 or num_machines < 1:
        raise InstanceError("need at least one job and one machine")
    lo, hi = time_range
    if not 0 < lo <= hi:
        raise InstanceError(f"bad processing-time range {time_range}")
    rng = np.random.default_rng(seed)
    machines = np.stack([rng.permutation(num_machines) for _ in range(num_jobs)])
    durations = rng.integers(lo, hi + 1, size=(num_jobs, num_machines))
    return JspInstance.from_matrices(machines, durations, name or f"jsp_n{num_jobs}_m{num_machines}_s{seed}",
                                     num_machines=num_machines)
