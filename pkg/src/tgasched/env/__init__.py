"""Semi-MDP scheduling environments.

The functions here dispatch on the instance/state type, so callers can drive
either problem through one interface::

    state = reset(instance)
    while not state.done:
        state = step(state, policy(state, feasible_actions(state)))
    makespan(state)
"""

from __future__ import annotations

from . import jsp, mtsp
from .core import (
    WAIT,
    Action,
    EntityState,
    EnvError,
    InfeasibleActionError,
    NotTerminalError,
    ScheduledTask,
    Solution,
    TerminalStateError,
    ValidationReport,
    Violation,
    tour_length,
    validate,
)
from .instances import InstanceError, JspInstance, MtspInstance
from .jsp import JspState
from .mtsp import MtspState

SimState = MtspState | JspState


def _module(obj):
    if isinstance(obj, (MtspInstance, MtspState)):
        return mtsp
    if isinstance(obj, (JspInstance, JspState)):
        return jsp
    raise TypeError(f"unsupported problem object {type(obj).__name__}")


def problem_name(obj) -> str:
    return "mtsp" if _module(obj) is mtsp else "jsp"


def reset(instance):
    return _module(instance).reset(instance)


def feasible_actions(state) -> list:
    return _module(state).feasible_actions(state)


def step(state, action):
    return _module(state).step(state, Action(*action))


def makespan(state) -> float:
    return _module(state).makespan(state)


def solution(state) -> Solution:
    return _module(state).solution(state)


def rollout(instance, choose):
    """Run one episode; ``choose(state, actions)`` returns one of ``actions``."""
    state = reset(instance)
    while not state.done:
        state = step(state, choose(state, feasible_actions(state)))
    return state


__all__ = [
    "WAIT", "Action", "EntityState", "EnvError", "InfeasibleActionError", "InstanceError",
    "JspInstance", "JspState", "MtspInstance", "MtspState", "NotTerminalError", "ScheduledTask",
    "SimState", "Solution", "TerminalStateError", "ValidationReport", "Violation",
    "feasible_actions", "makespan", "problem_name", "reset", "rollout", "solution", "step",
    "tour_length", "validate",
]
