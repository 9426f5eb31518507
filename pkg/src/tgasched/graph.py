"""Typed agent-task graphs built from environment states.

Edges are stored as ``src -> dst`` arrays: edge ``e`` carries the message from
node ``src[e]`` to node ``dst[e]``.  Besides the message edges, a graph can
carry *query* edges (``message == False``) that are embedded like every other
edge but never aggregated; they exist so that the actor always has an edge
embedding from each candidate task to the target agent, even in sparsified
graphs.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import IntEnum

import numpy as np

from .env import WAIT, JspState, MtspState, TerminalStateError, feasible_actions


class MtspNodeType(IntEnum):
    ASSIGNED_AGENT = 0
    UNASSIGNED_AGENT = 1
    ASSIGNED_TASK = 2
    UNASSIGNED_TASK = 3
    DEPOT = 4


class JspNodeType(IntEnum):
    ASSIGNED_AGENT = 0
    UNASSIGNED_AGENT = 1
    ASSIGNED_TASK = 2
    PROCESSABLE_TASK = 3
    UNPROCESSABLE_TASK = 4


NUM_NODE_TYPES = 5


@dataclass(frozen=True)
class FeatureSchema:
    node_features: tuple
    edge_features: tuple
    num_types: int = NUM_NODE_TYPES

    @property
    def node_dim(self) -> int:
        return len(self.node_features)

    @property
    def edge_dim(self) -> int:
        return len(self.edge_features)


MTSP_SCHEMA = FeatureSchema(("x", "y", "active", "assigned"), ("distance",))
JSP_SCHEMA = FeatureSchema(
    ("agent", "target_agent", "assigned", "waiting", "processable", "accessible", "task_wait_time",
     "processing_time", "time_to_complete", "remaining_ops", "job_completion_ratio", "bias"),
    ("processable",),
)


def schema_for(problem: str) -> FeatureSchema:
    return {"mtsp": MTSP_SCHEMA, "jsp": JSP_SCHEMA}[problem]


@dataclass
class AgentTaskGraph:
    x: np.ndarray            # (n, node_dim)
    node_type: np.ndarray    # (n,)
    src: np.ndarray          # (E,)
    dst: np.ndarray          # (E,)
    edge_x: np.ndarray       # (E, edge_dim)
    message: np.ndarray      # (E,) bool
    target: int              # node index of the idle agent to decide for
    cand_node: np.ndarray    # (C,) candidate task node, -1 for WAIT
    cand_edge: np.ndarray    # (C,) edge cand_node -> target, -1 for WAIT
    actions: list            # (C,) env actions aligned with the candidates
    node_entity: np.ndarray  # (n,) agent/task id, -1 for the depot
    num_agents: int = 0

    @property
    def num_nodes(self) -> int:
        return len(self.x)

    @property
    def num_edges(self) -> int:
        return len(self.src)

    def in_edges(self, node: int, message_only: bool = True) -> np.ndarray:
        mask = self.dst == node
        if message_only:
            mask &= self.message
        return np.flatnonzero(mask)


def _complete_edges(n: int):
    dst, src = np.divmod(np.arange(n * n), n)
    keep = src != dst
    return src[keep], dst[keep]


def _edge_lookup(src, dst, n):
    table = np.full((n, n), -1)
    table[src, dst] = np.arange(len(src))
    return table


def build_mtsp_graph(state: MtspState) -> AgentTaskGraph:
    """Complete digraph over agents, unvisited cities and the depot."""
    if state.done:
        raise TerminalStateError("cannot build a graph for a terminal state")
    inst = state.instance
    m = inst.num_agents
    tasks = np.flatnonzero(~state.visited)
    agent_pos = state.agent_positions()
    pos = np.vstack([agent_pos, inst.cities[tasks], inst.depot[None, :]])
    n = len(pos)
    busy = state.dest != -1
    t_assigned = state.assigned[tasks]
    x = np.zeros((n, 4))
    x[:, :2] = pos
    x[:m, 2] = ~state.home
    x[:m, 3] = busy
    x[m:m + len(tasks), 2] = 1.0
    x[m:m + len(tasks), 3] = t_assigned
    node_type = np.concatenate([
        np.where(busy, MtspNodeType.ASSIGNED_AGENT, MtspNodeType.UNASSIGNED_AGENT),
        np.where(t_assigned, MtspNodeType.ASSIGNED_TASK, MtspNodeType.UNASSIGNED_TASK),
        [MtspNodeType.DEPOT],
    ]).astype(int)
    src, dst = _complete_edges(n)
    edge_x = np.sqrt(((pos[src] - pos[dst]) ** 2).sum(-1))[:, None]
    actions = feasible_actions(state)
    node_of_task = np.full(inst.num_cities, -1)
    node_of_task[tasks] = m + np.arange(len(tasks))
    cand_node = np.array([node_of_task[a.task] for a in actions], dtype=int)
    lookup = _edge_lookup(src, dst, n)
    return AgentTaskGraph(
        x=x, node_type=node_type, src=src, dst=dst, edge_x=edge_x,
        message=np.ones(len(src), dtype=bool), target=state.target,
        cand_node=cand_node, cand_edge=lookup[cand_node, state.target], actions=actions,
        node_entity=np.concatenate([np.arange(m), tasks, [-1]]).astype(int), num_agents=m,
    )


def build_jsp_graph(state: JspState) -> AgentTaskGraph:
    """Machines plus unfinished operations with the job-shop connectivity.

    Machines are fully connected to each other and to the operations they
    process (both ways); operations are fully connected within their job.
    Time-valued features are divided by the instance's largest processing
    time and ``remaining_ops`` by the longest job length.
    """
    if state.done:
        raise TerminalStateError("cannot build a graph for a terminal state")
    inst = state.instance
    m = inst.num_machines
    clock = state.clock
    scale = float(inst.op_duration.max())
    len_scale = float(inst.job_len.max())
    done = state.op_completed()
    ops = np.flatnonzero(~done)
    n = m + len(ops)
    started = ~np.isnan(state.op_start[ops])
    op_mc = inst.op_machine[ops]
    op_job = inst.op_job[ops]
    avail = np.zeros(inst.num_ops, dtype=bool)
    avail[state.available_ops()] = True
    processable = (op_mc == state.target) & ~started
    accessible = processable & avail[ops]

    job_done = np.bincount(inst.op_job[done], minlength=inst.num_jobs)
    remaining = inst.job_len - job_done
    # time until each job's current op finishes, then cumulative work along the chain
    job_busy_left = np.maximum(state.job_ready - clock, 0.0)
    durations = inst.op_duration[ops]
    ttc = np.empty(len(ops))
    for k, o in enumerate(ops):
        if started[k]:
            ttc[k] = state.op_end[o] - clock
        else:
            j = inst.op_job[o]
            first = inst.job_offset[j] + state.job_next[j]
            ttc[k] = job_busy_left[j] + inst.op_duration[first:o + 1].sum()

    x = np.zeros((n, 12))
    busy = state.machine_op >= 0
    x[:m, 0] = 1.0
    x[state.target, 1] = 1.0
    x[:m, 2] = busy
    x[:m, 3] = state.waiting
    cur = np.where(busy, state.machine_op, 0)
    x[:m, 7] = np.where(busy, inst.op_duration[cur], 0.0) / scale
    x[:m, 8] = np.where(busy, state.machine_free - clock, 0.0) / scale
    t = slice(m, n)
    x[t, 2] = started
    x[t, 4] = processable
    x[t, 5] = accessible
    x[t, 6] = np.where(avail[ops], clock - state.job_ready[op_job], 0.0) / scale
    x[t, 7] = durations / scale
    x[t, 8] = ttc / scale
    x[t, 9] = remaining[op_job] / len_scale
    x[t, 10] = job_done[op_job] / inst.job_len[op_job]
    x[:, 11] = 1.0

    node_type = np.concatenate([
        np.where(busy | state.waiting, JspNodeType.ASSIGNED_AGENT, JspNodeType.UNASSIGNED_AGENT),
        np.where(started, JspNodeType.ASSIGNED_TASK,
                 np.where(processable, JspNodeType.PROCESSABLE_TASK, JspNodeType.UNPROCESSABLE_TASK)),
    ]).astype(int)
    node_type[state.target] = JspNodeType.UNASSIGNED_AGENT

    a_src, a_dst = _complete_edges(m)
    op_nodes = m + np.arange(len(ops))
    mo_src, mo_dst = op_mc, op_nodes                      # machine -> its ops
    same = (op_job[:, None] == op_job[None, :]) & ~np.eye(len(ops), dtype=bool)
    oo_dst, oo_src = np.nonzero(same)
    src = np.concatenate([a_src, mo_src, mo_dst, m + oo_src]).astype(int)
    dst = np.concatenate([a_dst, mo_dst, mo_src, m + oo_dst]).astype(int)
    edge_x = np.zeros((len(src), 1))
    edge_x[len(a_src):len(a_src) + len(ops), 0] = 1.0

    actions = feasible_actions(state)
    node_of_op = np.full(inst.num_ops, -1)
    node_of_op[ops] = op_nodes
    cand_node = np.array([node_of_op[a.task] if a.task != WAIT else -1 for a in actions], dtype=int)
    lookup = _edge_lookup(src, dst, n)
    cand_edge = np.where(cand_node >= 0, lookup[np.maximum(cand_node, 0), state.target], -1)
    return AgentTaskGraph(
        x=x, node_type=node_type, src=src, dst=dst, edge_x=edge_x,
        message=np.ones(len(src), dtype=bool), target=state.target,
        cand_node=cand_node, cand_edge=cand_edge, actions=actions,
        node_entity=np.concatenate([np.arange(m), ops]).astype(int), num_agents=m,
    )


def build_graph(state) -> AgentTaskGraph:
    if isinstance(state, MtspState):
        return build_mtsp_graph(state)
    if isinstance(state, JspState):
        return build_jsp_graph(state)
    raise TypeError(f"unsupported state type {type(state).__name__}")


def sparsify(graph: AgentTaskGraph, n_agents: int, n_tasks: int) -> AgentTaskGraph:
    """Keep, for each node, in-edges from its ``n_agents`` nearest agents and ``n_tasks`` nearest tasks.

    Edges leaving the depot are always kept.  Distances are read from the first
    edge feature, so this is meant for mTSP graphs.  Candidate-to-target edges
    dropped by the neighbour rule are kept as non-message query edges.
    """
    if n_agents < 0 or n_tasks < 0:
        raise ValueError("neighbour counts must be non-negative")
    src, dst = graph.src, graph.dst
    dist = graph.edge_x[:, 0]
    src_type = graph.node_type[src]
    is_depot = src_type == MtspNodeType.DEPOT
    is_agent = src < graph.num_agents
    keep = np.zeros(len(src), dtype=bool)
    keep[is_depot] = True
    # rank by (dst, group, distance, src) so ties resolve deterministically
    for group_mask, k in ((is_agent & ~is_depot, n_agents), (~is_agent & ~is_depot, n_tasks)):
        idx = np.flatnonzero(group_mask & graph.message)
        order = idx[np.lexsort((src[idx], dist[idx], dst[idx]))]
        d_sorted = dst[order]
        starts = np.searchsorted(d_sorted, d_sorted, side="left")
        rank = np.arange(len(order)) - starts
        keep[order[rank < k]] = True
    keep &= graph.message
    query = np.zeros(len(src), dtype=bool)
    valid = graph.cand_edge[graph.cand_edge >= 0]
    query[valid] = True
    retained = keep | query
    new_index = np.cumsum(retained) - 1
    return replace(
        graph,
        src=src[retained], dst=dst[retained], edge_x=graph.edge_x[retained],
        message=keep[retained],
        cand_edge=np.where(graph.cand_edge >= 0, new_index[np.maximum(graph.cand_edge, 0)], -1),
    )


@dataclass
class GraphBatch:
    """Disjoint union of several graphs with candidate bookkeeping."""

    x: np.ndarray
    node_type: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    edge_x: np.ndarray
    message: np.ndarray
    target: np.ndarray       # (B,) global node ids
    cand_node: np.ndarray    # (C,) global node ids, -1 for WAIT
    cand_edge: np.ndarray    # (C,) global edge ids, -1 for WAIT
    cand_graph: np.ndarray   # (C,) graph index of each candidate
    cand_offset: np.ndarray  # (B + 1,) candidate slice bounds per graph
    num_graphs: int

    @property
    def num_nodes(self) -> int:
        return len(self.x)


def batch_graphs(graphs) -> GraphBatch:
    n_off = np.concatenate([[0], np.cumsum([g.num_nodes for g in graphs])])
    e_off = np.concatenate([[0], np.cumsum([g.num_edges for g in graphs])])
    c_cnt = [len(g.cand_node) for g in graphs]
    shift = lambda arr, off: np.where(arr >= 0, arr + off, -1)
    return GraphBatch(
        x=np.concatenate([g.x for g in graphs]),
        node_type=np.concatenate([g.node_type for g in graphs]),
        src=np.concatenate([g.src + o for g, o in zip(graphs, n_off)]),
        dst=np.concatenate([g.dst + o for g, o in zip(graphs, n_off)]),
        edge_x=np.concatenate([g.edge_x for g in graphs]),
        message=np.concatenate([g.message for g in graphs]),
        target=np.array([g.target + o for g, o in zip(graphs, n_off)], dtype=int),
        cand_node=np.concatenate([shift(g.cand_node, o) for g, o in zip(graphs, n_off)]).astype(int),
        cand_edge=np.concatenate([shift(g.cand_edge, o) for g, o in zip(graphs, e_off)]).astype(int),
        cand_graph=np.repeat(np.arange(len(graphs)), c_cnt),
        cand_offset=np.concatenate([[0], np.cumsum(c_cnt)]).astype(int),
        num_graphs=len(graphs),
    )


