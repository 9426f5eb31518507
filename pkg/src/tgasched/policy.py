"""Assignment policy on top of the graph embedding.

For the target agent ``i`` and each candidate task ``j`` the actor scores
``[h_i, h_j, h_ji]`` (``h_ji`` is the embedding of the edge ``j -> i``).  The
JSP waiting action is scored as ``[h_i, h_i, 0]``.  Probabilities are a
softmax over the candidates of each graph only.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from . import diff as D
from . import env
from .diff import MlpSpec, ParamStore
from .graph import AgentTaskGraph, batch_graphs, build_graph, schema_for, sparsify
from .tga import TgaConfig, embed, init_embedder


@dataclass(frozen=True)
class PolicyConfig:
    problem: str = "mtsp"
    hidden: int = 32
    rounds: int = 2
    embedder: str = "tga"
    actor_hidden: tuple = (256, 128)

    def tga(self) -> TgaConfig:
        schema = schema_for(self.problem)
        return TgaConfig(schema.node_dim, schema.edge_dim, schema.num_types, self.hidden, self.rounds, self.embedder)

    def actor_spec(self) -> MlpSpec:
        return MlpSpec(3 * self.hidden, tuple(self.actor_hidden), 1)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PolicyConfig":
        d = dict(d)
        if "actor_hidden" in d:
            d["actor_hidden"] = tuple(d["actor_hidden"])
        return cls(**d)


def init_params(config: PolicyConfig, seed: int) -> ParamStore:
    rng = np.random.default_rng(seed)
    store = ParamStore()
    init_embedder(store, config.tga(), rng)
    D.init_mlp(store, "actor", config.actor_spec(), rng)
    return store


def assignment_logits(P, config: PolicyConfig, h, he, batch) -> D.Tensor:
    """One logit per candidate in ``batch`` (a :class:`GraphBatch`)."""
    if len(batch.cand_node) == 0:
        raise ValueError("no feasible actions to score")
    target = batch.target[batch.cand_graph]
    is_wait = batch.cand_node < 0
    other = np.where(is_wait, target, batch.cand_node)
    edge_rows = D.take(he, np.maximum(batch.cand_edge, 0))
    if np.any(is_wait):
        edge_rows = D.mul(edge_rows, (~is_wait).astype(float)[:, None])
    feats = D.concat([D.take(h, target), D.take(h, other), edge_rows])
    return D.reshape(D.mlp(P, "actor", feats, config.actor_spec()), (-1,))


def batch_logits(P, config: PolicyConfig, batch) -> D.Tensor:
    h, he = embed(P, config.tga(), batch)
    return assignment_logits(P, config, h, he, batch)


def batch_log_probs(P, config: PolicyConfig, batch) -> D.Tensor:
    z = batch_logits(P, config, batch)
    return D.segment_log_softmax(z, batch.cand_graph, batch.num_graphs)


def action_distribution(logits) -> np.ndarray:
    return D.softmax(logits)


def select_action(probs, mode: str = "greedy", rng: np.random.Generator | None = None) -> tuple:
    """Return ``(index, probability)``; greedy ties go to the lowest index."""
    probs = np.asarray(probs, dtype=float)
    if mode == "greedy":
        k = int(np.argmax(probs))
    elif mode == "sample":
        if rng is None:
            raise ValueError("sampling needs an rng")
        cdf = np.cumsum(probs)
        k = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
        k = min(k, len(probs) - 1)
    else:
        raise ValueError(f"unknown selection mode {mode!r}")
    return k, float(probs[k])


@dataclass
class Episode:
    instance: object
    graphs: list = field(default_factory=list)
    choices: list = field(default_factory=list)
    probs: list = field(default_factory=list)
    final_state: object = None

    @property
    def length(self) -> int:
        return len(self.choices)

    @property
    def makespan(self) -> float:
        return env.makespan(self.final_state)


class Policy:
    """Parameters plus configuration; stateless across decisions."""

    def __init__(self, config: PolicyConfig, params: ParamStore):
        self.config = config
        self.params = params

    @classmethod
    def create(cls, config: PolicyConfig, seed: int = 0) -> "Policy":
        return cls(config, init_params(config, seed))

    def graph(self, state, sparsity: tuple | None = None) -> AgentTaskGraph:
        g = build_graph(state)
        if sparsity is not None:
            g = sparsify(g, *sparsity)
        return g

    def probabilities(self, graphs) -> list:
        batch = batch_graphs(graphs)
        z = batch_logits(self.params.values, self.config, batch).value
        off = batch.cand_offset
        return [action_distribution(z[off[b]:off[b + 1]]) for b in range(batch.num_graphs)]

    def logits(self, graph: AgentTaskGraph) -> np.ndarray:
        return batch_logits(self.params.values, self.config, batch_graphs([graph])).value

    def __call__(self, state, actions=None, mode: str = "greedy", rng=None):
        g = self.graph(state)
        k, _ = select_action(self.probabilities([g])[0], mode, rng)
        return g.actions[k]

    def run(self, instances, mode: str = "greedy", rng=None, record: bool = False,
            sparsity: tuple | None = None) -> list:
        """Roll out every instance in lockstep, batching one decision per live episode."""
        episodes = [Episode(inst) for inst in instances]
        states = [env.reset(inst) for inst in instances]
        live = [i for i, s in enumerate(states) if not s.done]
        while live:
            graphs = [self.graph(states[i], sparsity) for i in live]
            dists = self.probabilities(graphs)
            for i, g, p in zip(live, graphs, dists):
                k, pk = select_action(p, mode, rng)
                if record:
                    episodes[i].graphs.append(g)
                    episodes[i].choices.append(k)
                    episodes[i].probs.append(pk)
                states[i] = env.step(states[i], g.actions[k])
            live = [i for i in live if not states[i].done]
        for ep, s in zip(episodes, states):
            ep.final_state = s
        return episodes

    def save(self, path, meta: dict | None = None):
        self.params.save(path, {"policy": self.config.to_dict(), **(meta or {})})

    @classmethod
    def load(cls, path) -> "Policy":
        store, meta = ParamStore.load(path)
        return cls(PolicyConfig.from_dict(meta["policy"]), store)
