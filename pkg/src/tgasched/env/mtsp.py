"""Event-driven semi-MDP for the min-max mTSP.

Agents move at unit speed, so a leg of length ``d`` started at time ``t`` ends
at ``t + d``.  A decision is requested whenever an agent is idle and some city
is still unassigned; the clock only moves when no agent is idle.  Once every
city has been handed out, idle agents head back to the depot on their own.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    Action,
    EntityState,
    InfeasibleActionError,
    NotTerminalError,
    ScheduledTask,
    Solution,
    TerminalStateError,
)
from .instances import MtspInstance

IDLE = -1


@dataclass
class MtspState:
    instance: MtspInstance
    clock: float = 0.0
    event_index: int = 0
    done: bool = False
    target: int = -1
    # leg bookkeeping: agent a travels from origin[a] (a point index) to dest[a]
    origin: np.ndarray = None
    dest: np.ndarray = None
    depart: np.ndarray = None
    arrive: np.ndarray = None
    home: np.ndarray = None
    visited: np.ndarray = None
    assigned: np.ndarray = None
    history: list = field(default_factory=list)
    legs: list = field(default_factory=list)

    def copy(self) -> "MtspState":
        return MtspState(
            self.instance, self.clock, self.event_index, self.done, self.target,
            self.origin.copy(), self.dest.copy(), self.depart.copy(), self.arrive.copy(),
            self.home.copy(), self.visited.copy(), self.assigned.copy(),
            [list(h) for h in self.history], [list(l) for l in self.legs],
        )

    @property
    def num_agents(self) -> int:
        return self.instance.num_agents

    def agent_positions(self) -> np.ndarray:
        """Current (interpolated) agent coordinates, shape (m, 2)."""
        pts = self.instance.points
        pos = pts[self.origin].copy()
        moving = self.dest != IDLE
        if np.any(moving):
            span = self.arrive[moving] - self.depart[moving]
            frac = np.where(span > 0, (self.clock - self.depart[moving]) / np.where(span > 0, span, 1.0), 1.0)
            frac = np.clip(frac, 0.0, 1.0)[:, None]
            pos[moving] = pos[moving] + frac * (pts[self.dest[moving]] - pos[moving])
        return pos

    def entities(self) -> list:
        """Agents then cities as :class:`EntityState` records."""
        out = []
        pos = self.agent_positions()
        for a in range(self.num_agents):
            busy = bool(self.dest[a] != IDLE)
            out.append(EntityState(
                position=tuple(pos[a]), active=not bool(self.home[a]), assigned=busy,
                target=int(self.dest[a]) if busy else None,
                completion=float(self.arrive[a]) if busy else None,
            ))
        for c in range(self.instance.num_cities):
            out.append(EntityState(
                position=tuple(self.instance.cities[c]), active=not bool(self.visited[c]),
                assigned=bool(self.assigned[c]),
            ))
        return out


def reset(instance: MtspInstance) -> MtspState:
    m, n = instance.num_agents, instance.num_cities
    s = MtspState(
        instance,
        origin=np.full(m, n), dest=np.full(m, IDLE), depart=np.zeros(m), arrive=np.zeros(m),
        home=np.zeros(m, dtype=bool), visited=np.zeros(n, dtype=bool), assigned=np.zeros(n, dtype=bool),
        history=[[] for _ in range(m)], legs=[[] for _ in range(m)],
    )
    _advance(s)
    return s


def feasible_actions(state: MtspState) -> list:
    if state.done:
        raise TerminalStateError("no actions in a terminal state")
    free = np.flatnonzero(~state.visited & ~state.assigned)
    return [Action(state.target, int(c)) for c in free]


def step(state: MtspState, action: Action) -> MtspState:
    if state.done:
        raise TerminalStateError("episode is finished")
    agent, city = action
    if agent != state.target:
        raise InfeasibleActionError(f"agent {agent} is not the idle target agent {state.target}")
    if not 0 <= city < state.instance.num_cities:
        raise InfeasibleActionError(f"unknown city {city}")
    if state.visited[city]:
        raise InfeasibleActionError(f"city {city} was already visited")
    if state.assigned[city]:
        raise InfeasibleActionError(f"city {city} is already assigned to another agent")
    s = state.copy()
    _depart(s, agent, city)
    s.assigned[city] = True
    s.event_index += 1
    s.target = -1
    _advance(s)
    return s


def makespan(state: MtspState) -> float:
    if not state.done:
        raise NotTerminalError("makespan is only defined for terminal states")
    return float(state.clock)


def solution(state: MtspState) -> Solution:
    """Solution view of a terminal state."""
    mk = makespan(state)
    return Solution([[ScheduledTask(*leg) for leg in legs] for legs in state.legs], mk)


def _depart(s: MtspState, agent: int, point: int):
    s.dest[agent] = point
    s.depart[agent] = s.clock
    s.arrive[agent] = s.clock + s.instance.dist[s.origin[agent], point]


def _advance(s: MtspState):
    n = s.instance.num_cities
    while True:
        idle = np.flatnonzero((s.dest == IDLE) & ~s.home)
        if len(idle):
            if np.any(~s.visited & ~s.assigned):
                s.target = int(idle[0])
                return
            for a in idle:
                _depart(s, a, n)
        moving = np.flatnonzero(s.dest != IDLE)
        if not len(moving):
            s.done = True
            s.target = -1
            return
        t_next = s.arrive[moving].min()
        s.clock = max(s.clock, float(t_next))
        for a in moving:
            if s.arrive[a] == t_next:
                dest = s.dest[a]
                if dest == n:
                    s.home[a] = True
                else:
                    s.visited[dest] = True
                    s.assigned[dest] = False
                    s.history[a].append(int(dest))
                    s.legs[a].append((int(dest), float(s.depart[a]), float(s.arrive[a])))
                s.origin[a] = dest
                s.dest[a] = IDLE
