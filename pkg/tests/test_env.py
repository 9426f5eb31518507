import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tgasched import env
from tgasched.env import (
    WAIT, Action, InfeasibleActionError, InstanceError, JspInstance, MtspInstance, NotTerminalError, ScheduledTask,
    Solution, TerminalStateError, validate,
)


def random_rollout(instance, seed):
    rng = np.random.default_rng(seed)
    return env.rollout(instance, lambda s, acts: acts[int(rng.integers(len(acts)))])


# ---------------------------------------------------------------- mTSP

def test_mtsp_reset_state():
    s = env.reset(MtspInstance((0, 0), [(0, 3)], 1))
    assert s.target == 0 and s.clock == 0.0
    ents = s.entities()
    assert ents[0].position == (0.0, 0.0) and not ents[0].assigned
    assert ents[1].active and not ents[1].assigned


def test_mtsp_rejects_degenerate():
    with pytest.raises(InstanceError):
        MtspInstance((0, 0), np.zeros((0, 2)), 1)
    with pytest.raises(InstanceError):
        MtspInstance((0, 0), [(1, 1)], 0)


def test_mtsp_feasible_actions_are_unassigned_cities():
    s = env.reset(MtspInstance((0, 0), [(1, 0), (2, 0), (3, 0)], 2))
    assert [a.task for a in env.feasible_actions(s)] == [0, 1, 2]
    s = env.step(s, Action(0, 1))
    assert s.target == 1
    assert [a.task for a in env.feasible_actions(s)] == [0, 2]


def test_mtsp_event_advances_to_earliest_arrival():
    inst = MtspInstance((0, 0), [(3, 0), (0, 5), (9, 9)], 2)
    s = env.step(env.reset(inst), Action(0, 0))
    s = env.step(s, Action(1, 1))
    assert s.clock == pytest.approx(3.0) and s.target == 0
    np.testing.assert_allclose(s.agent_positions(), [[3, 0], [0, 3]])


def test_mtsp_single_city_out_and_back():
    s = env.step(env.reset(MtspInstance((0, 0), [(0, 1)], 1)), Action(0, 0))
    assert s.done and env.makespan(s) == pytest.approx(2.0)


def test_mtsp_two_agents_two_cities():
    # each agent takes one city: both tours have length 2
    s = env.reset(MtspInstance((0, 0), [(0, 1), (1, 0)], 2))
    s = env.step(env.step(s, Action(0, 0)), Action(1, 1))
    assert env.makespan(s) == pytest.approx(2.0)


def test_mtsp_returns_home_once_everything_is_assigned():
    s = env.step(env.reset(MtspInstance((0, 0), [(1, 0)], 3)), Action(0, 0))
    assert s.done
    assert s.history == [[0], [], []]


def test_mtsp_step_errors():
    inst = MtspInstance((0, 0), [(1, 0), (2, 0)], 2)
    s = env.reset(inst)
    with pytest.raises(InfeasibleActionError, match="target"):
        env.step(s, Action(1, 0))
    s1 = env.step(s, Action(0, 0))
    with pytest.raises(InfeasibleActionError, match="already assigned"):
        env.step(s1, Action(1, 0))
    end = env.step(s1, Action(1, 1))
    with pytest.raises(TerminalStateError):
        env.step(end, Action(0, 0))
    with pytest.raises(TerminalStateError):
        env.feasible_actions(end)
    with pytest.raises(NotTerminalError):
        env.makespan(s)


def test_mtsp_visited_city_rejected():
    # agent 0 arrives at city 0 and is idle again: revisiting it must fail
    s = env.step(env.reset(MtspInstance((0, 0), [(1, 0), (5, 0), (6, 0)], 1)), Action(0, 0))
    with pytest.raises(InfeasibleActionError, match="visited"):
        env.step(s, Action(0, 0))


def test_step_does_not_mutate_input():
    s = env.reset(MtspInstance((0, 0), [(1, 0), (2, 0)], 1))
    before = (s.clock, s.assigned.copy(), s.visited.copy())
    env.step(s, Action(0, 1))
    assert s.clock == before[0] and np.array_equal(s.assigned, before[1]) and np.array_equal(s.visited, before[2])


mtsp_instances = st.builds(
    lambda n, m, seed: MtspInstance(np.random.default_rng(seed).random(2), np.random.default_rng(seed + 1).random((n, 2)), m),
    st.integers(1, 9), st.integers(1, 4), st.integers(0, 10_000),
)


@settings(max_examples=60, deadline=None)
@given(mtsp_instances, st.integers(0, 1000))
def test_mtsp_random_rollouts_are_valid(inst, seed):
    final = random_rollout(inst, seed)
    sol = env.solution(final)
    rep = validate(inst, sol)
    assert rep.ok, rep.violations
    assert rep.makespan == pytest.approx(env.makespan(final))
    # one decision per city
    assert final.event_index == inst.num_cities


# ---------------------------------------------------------------- JSP

def test_jsp_rejects_bad_instances():
    with pytest.raises(InstanceError):
        JspInstance([[(0, 0)]], 1)
    with pytest.raises(InstanceError):
        JspInstance([[(2, 3)]], 2)
    with pytest.raises(InstanceError):
        JspInstance([], 1)


def test_jsp_reset_two_by_two():
    inst = JspInstance([[(0, 3), (1, 2)], [(1, 4), (0, 1)]], 2)
    s = env.reset(inst)
    assert s.target == 0
    assert set(s.available_ops().tolist()) == {0, 2}
    assert np.all(s.machine_op == -1)


def test_jsp_serial_chain():
    s = env.rollout(JspInstance([[(0, 5), (1, 3)]], 2), lambda s, a: a[0])
    assert env.makespan(s) == pytest.approx(8.0)


def test_jsp_wait_offered_only_when_safe():
    # machine 0 and machine 1 both have work: machine 0 may wait
    inst = JspInstance([[(0, 3)], [(1, 4)]], 2)
    s = env.reset(inst)
    acts = env.feasible_actions(s)
    assert acts == [Action(0, 0), Action(0, WAIT)]
    s = env.step(s, Action(0, WAIT))
    assert s.target == 1 and s.waiting[0]
    # nothing is busy and machine 0 waits, so machine 1 may not wait as well
    assert env.feasible_actions(s) == [Action(1, 1)]
    with pytest.raises(InfeasibleActionError, match="deadlock"):
        env.step(s, Action(1, WAIT))


def test_jsp_wait_reserves_until_next_event():
    inst = JspInstance([[(0, 3)], [(1, 4), (0, 1)]], 2)
    s = env.step(env.reset(inst), Action(0, WAIT))
    s = env.step(s, Action(1, 1))          # machine 1 busy until t=4
    assert s.clock == pytest.approx(4.0)   # machine 0 stayed reserved until the completion
    assert s.target == 0
    tasks = {a.task for a in env.feasible_actions(s)}
    assert tasks - {WAIT} == {0, 2}


def test_jsp_step_errors():
    inst = JspInstance([[(0, 3), (1, 2)], [(1, 4), (0, 1)]], 2)
    s = env.reset(inst)
    with pytest.raises(InfeasibleActionError, match="agent-sharing"):
        env.step(s, Action(0, 2))
    with pytest.raises(InfeasibleActionError, match="precedence"):
        env.step(s, Action(0, 3))
    with pytest.raises(InfeasibleActionError, match="target"):
        env.step(s, Action(1, 2))


jsp_instances = st.builds(
    lambda n, m, seed: JspInstance.from_matrices(
        np.stack([np.random.default_rng(seed + j).permutation(m) for j in range(n)]),
        np.random.default_rng(seed).integers(1, 10, size=(n, m)), num_machines=m),
    st.integers(1, 5), st.integers(1, 4), st.integers(0, 10_000),
)


@settings(max_examples=60, deadline=None)
@given(jsp_instances, st.integers(0, 1000))
def test_jsp_random_rollouts_are_valid(inst, seed):
    final = random_rollout(inst, seed)
    rep = validate(inst, env.solution(final))
    assert rep.ok, rep.violations
    assert rep.makespan == pytest.approx(env.makespan(final))


# ---------------------------------------------------------------- validator

def test_validator_flags_duplicate_city():
    inst = MtspInstance((0, 0), [(0, 1), (1, 0)], 1)
    sol = Solution([[ScheduledTask(0, 0.0, 1.0), ScheduledTask(0, 1.0, 1.0)]], 2.0)
    kinds = {v.kind for v in validate(inst, sol).violations}
    assert {"duplication", "coverage"} <= kinds


def test_validator_flags_precedence():
    inst = JspInstance([[(0, 3), (1, 2)]], 2)
    sol = Solution([[ScheduledTask(0, 0.0, 3.0)], [ScheduledTask(1, 1.0, 3.0)]], 3.0)
    assert "precedence" in {v.kind for v in validate(inst, sol).violations}


def test_validator_flags_machine_overlap():
    inst = JspInstance([[(0, 3)], [(0, 2)]], 1)
    sol = Solution([[ScheduledTask(0, 0.0, 3.0), ScheduledTask(1, 1.0, 3.0)]], 3.0)
    assert "overlap" in {v.kind for v in validate(inst, sol).violations}


def test_validator_accepts_env_solution_and_round_trips():
    inst = JspInstance([[(0, 3), (1, 2)], [(1, 4), (0, 1)]], 2)
    sol = env.solution(env.rollout(inst, lambda s, a: a[0]))
    rep = validate(inst, Solution.from_dict(sol.to_dict()))
    assert rep.ok and rep.makespan == sol.makespan
