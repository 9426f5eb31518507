import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tgasched import env
from tgasched.env import Action, JspInstance, MtspInstance
from tgasched.graph import (
    JspNodeType, MtspNodeType, batch_graphs, build_graph, schema_for, sparsify,
)


def test_mtsp_graph_is_complete():
    g = build_graph(env.reset(MtspInstance((0, 0), [(1, 0), (2, 0), (3, 0)], 2)))
    assert g.num_nodes == 6 and g.num_edges == 30
    assert g.x.shape == (6, schema_for("mtsp").node_dim)
    assert np.all(g.src != g.dst)
    assert len({(s, d) for s, d in zip(g.src, g.dst)}) == 30


def test_mtsp_edge_feature_is_distance():
    g = build_graph(env.reset(MtspInstance((0, 0), [(3, 4)], 1)))
    # agent 0 at the depot, city node 1
    e = np.flatnonzero((g.src == 1) & (g.dst == 0))[0]
    assert g.edge_x[e, 0] == pytest.approx(5.0)


def test_mtsp_node_types_and_candidates():
    s = env.reset(MtspInstance((0, 0), [(1, 0), (2, 0), (3, 0)], 2))
    s = env.step(s, Action(0, 2))
    g = build_graph(s)
    assert g.target == 1
    assert g.node_type[0] == MtspNodeType.ASSIGNED_AGENT
    assert g.node_type[1] == MtspNodeType.UNASSIGNED_AGENT
    assert list(g.node_type[2:5]) == [MtspNodeType.UNASSIGNED_TASK, MtspNodeType.UNASSIGNED_TASK,
                                      MtspNodeType.ASSIGNED_TASK]
    assert g.node_type[5] == MtspNodeType.DEPOT
    assert [a.task for a in g.actions] == [0, 1]
    # candidate edges point from the task to the target agent
    assert np.all(g.src[g.cand_edge] == g.cand_node) and np.all(g.dst[g.cand_edge] == g.target)


def test_visited_cities_leave_the_graph():
    s = env.reset(MtspInstance((0, 0), [(1, 0), (5, 0)], 1))
    s = env.step(s, Action(0, 0))
    g = build_graph(s)
    assert g.num_nodes == 3  # agent, city 1, depot
    assert list(g.node_entity) == [0, 1, -1]


def test_jsp_connectivity():
    inst = JspInstance([[(0, 3), (1, 2)], [(1, 4), (0, 1)]], 2)
    g = build_graph(env.reset(inst))
    pairs = {(int(s), int(d)) for s, d in zip(g.src, g.dst)}
    # machines 0,1; ops at nodes 2..5; ops (2,3) form job 0, (4,5) job 1
    assert {(0, 1), (1, 0)} <= pairs
    assert {(0, 2), (2, 0), (1, 3), (3, 1), (1, 4), (4, 1), (0, 5), (5, 0)} <= pairs
    assert {(2, 3), (3, 2), (4, 5), (5, 4)} <= pairs
    assert (2, 4) not in pairs and (0, 3) not in pairs
    assert g.num_edges == 2 + 8 + 4


def test_jsp_node_types_and_features():
    inst = JspInstance([[(0, 3), (1, 2)], [(1, 4), (0, 1)]], 2)
    g = build_graph(env.reset(inst))
    assert g.node_type[0] == JspNodeType.UNASSIGNED_AGENT
    assert g.node_type[2] == JspNodeType.PROCESSABLE_TASK      # op 0 on machine 0
    assert g.node_type[3] == JspNodeType.UNPROCESSABLE_TASK    # machine 1
    assert g.node_type[5] == JspNodeType.PROCESSABLE_TASK      # op 3 on machine 0, not yet accessible
    names = schema_for("jsp").node_features
    acc = names.index("accessible")
    assert g.x[2, acc] == 1.0 and g.x[5, acc] == 0.0
    assert np.all(g.x[:, names.index("bias")] == 1.0)


def test_jsp_job_completion_ratio():
    # job 0 has four ops; after the first one finishes the ratio is 1/4
    inst = JspInstance([[(0, 1), (1, 1), (0, 1), (1, 1)], [(1, 9)]], 2)
    s = env.step(env.reset(inst), Action(0, 0))
    while not s.op_completed()[0]:
        s = env.step(s, env.feasible_actions(s)[0])
    g = build_graph(s)
    ratio = schema_for("jsp").node_features.index("job_completion_ratio")
    node = g.num_agents + int(np.flatnonzero(g.node_entity[g.num_agents:] == 1)[0])
    assert g.x[node, ratio] == pytest.approx(0.25)


def test_jsp_wait_candidate_has_no_edge():
    inst = JspInstance([[(0, 3)], [(1, 4)]], 2)
    g = build_graph(env.reset(inst))
    assert list(g.cand_node) == [2, -1]
    assert g.cand_edge[1] == -1


def test_terminal_state_has_no_graph():
    s = env.step(env.reset(MtspInstance((0, 0), [(1, 0)], 1)), Action(0, 0))
    with pytest.raises(env.TerminalStateError):
        build_graph(s)


def _big_graph(n=12, m=3, seed=0):
    rng = np.random.default_rng(seed)
    return build_graph(env.reset(MtspInstance(rng.random(2), rng.random((n, 2)), m)))


def test_sparsify_saturated_is_identity():
    g = _big_graph()
    sp = sparsify(g, 3, 12)
    assert np.array_equal(sp.src, g.src) and np.array_equal(sp.dst, g.dst)
    assert sp.message.all()


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 3), st.integers(0, 5), st.integers(0, 1000))
def test_sparsify_in_degree_bounds(na, nt, seed):
    g = _big_graph(seed=seed)
    sp = sparsify(g, na, nt)
    for v in range(sp.num_nodes):
        e = sp.in_edges(v)
        src = sp.src[e]
        agents = np.sum(src < g.num_agents)
        depot = np.sum(sp.node_type[src] == MtspNodeType.DEPOT)
        tasks = len(e) - agents - depot
        assert agents <= na and tasks <= nt and depot == (v != sp.num_nodes - 1)
    # every candidate still has its edge to the target
    assert np.all(sp.src[sp.cand_edge] == sp.cand_node) and np.all(sp.dst[sp.cand_edge] == sp.target)


def test_sparsify_keeps_nearest():
    # cities on a line; node for city 0 should hear only from city 1 with one task neighbour
    g = build_graph(env.reset(MtspInstance((10, 10), [(0, 0), (1, 0), (5, 0), (9, 0)], 1)))
    sp = sparsify(g, 0, 1)
    e = sp.in_edges(1)
    assert sorted(sp.src[e].tolist()) == [2, 5]  # city 1 and the depot


def test_sparsify_rejects_negative():
    with pytest.raises(ValueError):
        sparsify(_big_graph(), -1, 2)


def test_batch_offsets():
    g1 = _big_graph(5, 2, 1)
    g2 = _big_graph(7, 3, 2)
    b = batch_graphs([g1, g2])
    assert b.num_nodes == g1.num_nodes + g2.num_nodes
    assert b.target[1] == g2.target + g1.num_nodes
    assert list(b.cand_offset) == [0, len(g1.cand_node), len(g1.cand_node) + len(g2.cand_node)]
    assert np.all(b.src[b.cand_edge] == b.cand_node)
