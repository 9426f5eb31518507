"""Type-aware graph attention (TGA) embedding and the attention-GN ablation block.

One TGA layer maps node embeddings ``h`` and edge embeddings ``he`` to new
ones in three phases:

* edge update: the source-node type is encoded into a context vector, which
  gates an MI layer over ``[h_dst, h_src, he]``; two MLP heads then give the new
  edge embedding and a scalar attention logit;
* aggregation: logits are soft-maxed separately within each source-type
  neighbourhood of the destination, the weighted messages are summed per type,
  and the per-type sums are concatenated in a fixed type order (empty types
  contribute zeros);
* node update: the node's own type gates an MI layer over the aggregated
  message, and an MLP over ``[h, u]`` gives the new node embedding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import diff as D
from .diff import MlpSpec, ParamStore


@dataclass(frozen=True)
class TgaConfig:
    node_in: int
    edge_in: int
    num_types: int = 5
    hidden: int = 32
    rounds: int = 2
    embedder: str = "tga"             # "tga" or "gn"
    etype_hidden: tuple = (32,)
    edge_hidden: tuple = (32, 32)
    attn_hidden: tuple = (32, 32)
    ntype_hidden: tuple = (32,)
    node_hidden: tuple = (32, 32)


def _layer_specs(cfg: TgaConfig, node_in: int, edge_in: int) -> dict:
    H, K = cfg.hidden, cfg.num_types
    if cfg.embedder == "gn":
        e_in = 2 * node_in + edge_in
        return {
            "edge": MlpSpec(e_in, cfg.edge_hidden, H),
            "attn": MlpSpec(e_in, cfg.attn_hidden, 1),
            "node": MlpSpec(node_in + H, cfg.node_hidden, H),
        }
    return {
        "etype": MlpSpec(K, cfg.etype_hidden, H),
        "edge": MlpSpec(H, cfg.edge_hidden, H),
        "attn": MlpSpec(H, cfg.attn_hidden, 1),
        "ntype": MlpSpec(K, cfg.ntype_hidden, H),
        "node": MlpSpec(node_in + H, cfg.node_hidden, H),
    }


def layer_dims(cfg: TgaConfig, layer: int) -> tuple:
    return (cfg.node_in, cfg.edge_in) if layer == 0 else (cfg.hidden, cfg.hidden)


def init_embedder(store: ParamStore, cfg: TgaConfig, rng: np.random.Generator, prefix: str = "emb"):
    """Add the raw-to-hidden (``{prefix}0``) and hidden-to-hidden (``{prefix}1``) layers."""
    for layer in (0, 1):
        node_in, edge_in = layer_dims(cfg, layer)
        p = f"{prefix}{layer}"
        for name, spec in _layer_specs(cfg, node_in, edge_in).items():
            D.init_mlp(store, f"{p}.{name}", spec, rng)
        if cfg.embedder == "tga":
            H, K = cfg.hidden, cfg.num_types
            D.init_mi(store, f"{p}.mi_edge", 2 * node_in + edge_in, H, H, rng)
            D.init_mi(store, f"{p}.mi_node", K * H, H, H, rng)


def _mi(P, prefix, x, ctx, index):
    return D.mi(x, ctx, index, P[f"{prefix}.w"], P[f"{prefix}.a"], P[f"{prefix}.bc"], P[f"{prefix}.b"])


def edge_update(P, prefix: str, specs: dict, h, he, src, dst, node_type, num_types: int):
    """Type-aware edge update for all edges; returns ``(new edge embeddings, logits)``."""
    if np.any((node_type < 0) | (node_type >= num_types)):
        raise ValueError("node type outside the configured type set")
    onehot = np.eye(num_types)
    ctx = D.mlp(P, f"{prefix}.etype", onehot, specs["etype"])
    x = D.concat([D.take(h, dst), D.take(h, src), he])
    u = _mi(P, f"{prefix}.mi_edge", x, ctx, node_type[src])
    he_new = D.mlp(P, f"{prefix}.edge", u, specs["edge"])
    z = D.reshape(D.mlp(P, f"{prefix}.attn", u, specs["attn"]), (-1,))
    return he_new, z


def type_attention(z, src, dst, node_type, num_nodes: int, num_types: int):
    """Per-type attention weights and the (dst, type) segment of each edge."""
    seg = dst * num_types + node_type[src]
    return D.segment_softmax(z, seg, num_nodes * num_types), seg


def aggregate(he_new, z, src, dst, message, node_type, num_nodes: int, num_types: int):
    """Concatenated per-type attention messages, shape ``(num_nodes, num_types * dim)``."""
    msg = np.flatnonzero(message)
    alpha, seg = type_attention(D.take(z, msg), src[msg], dst[msg], node_type, num_nodes, num_types)
    weighted = D.mul(D.take(he_new, msg), D.reshape(alpha, (-1, 1)))
    summed = D.segment_sum(weighted, seg, num_nodes * num_types)
    return D.reshape(summed, (num_nodes, -1))


def node_update(P, prefix: str, specs: dict, h, m, node_type, num_types: int):
    if np.any((node_type < 0) | (node_type >= num_types)):
        raise ValueError("node type outside the configured type set")
    ctx = D.mlp(P, f"{prefix}.ntype", np.eye(num_types), specs["ntype"])
    u = _mi(P, f"{prefix}.mi_node", m, ctx, node_type)
    return D.mlp(P, f"{prefix}.node", D.concat([h, u]), specs["node"])


def tga_layer(P, prefix: str, specs: dict, h, he, graph, num_types: int):
    he_new, z = edge_update(P, prefix, specs, h, he, graph.src, graph.dst, graph.node_type, num_types)
    m = aggregate(he_new, z, graph.src, graph.dst, graph.message, graph.node_type, graph.num_nodes, num_types)
    return node_update(P, prefix, specs, h, m, graph.node_type, num_types), he_new


def gn_attention(z, dst, num_nodes: int):
    """Type-agnostic attention: one softmax over each node's whole in-neighbourhood."""
    return D.segment_softmax(z, dst, num_nodes)


def attention_gn_block(P, prefix: str, specs: dict, h, he, graph):
    """Attention GN block: edge/attention/node functions, mean of attention-weighted messages."""
    x = D.concat([he, D.take(h, graph.dst), D.take(h, graph.src)])
    he_new = D.mlp(P, f"{prefix}.edge", x, specs["edge"])
    z = D.reshape(D.mlp(P, f"{prefix}.attn", x, specs["attn"]), (-1,))
    msg = np.flatnonzero(graph.message)
    dst = graph.dst[msg]
    w = gn_attention(D.take(z, msg), dst, graph.num_nodes)
    weighted = D.mul(D.take(he_new, msg), D.reshape(w, (-1, 1)))
    count = np.maximum(np.bincount(dst, minlength=graph.num_nodes), 1).astype(float)
    m = D.mul(D.segment_sum(weighted, dst, graph.num_nodes), (1.0 / count)[:, None])
    return D.mlp(P, f"{prefix}.node", D.concat([h, m]), specs["node"]), he_new


def embed(P, cfg: TgaConfig, graph, prefix: str = "emb"):
    """Raw-to-hidden layer once, then the shared hidden-to-hidden layer ``cfg.rounds`` times."""
    if graph.x.shape[1] != cfg.node_in or graph.edge_x.shape[1] != cfg.edge_in:
        raise ValueError(
            f"graph features ({graph.x.shape[1]}, {graph.edge_x.shape[1]}) do not match "
            f"configured input dims ({cfg.node_in}, {cfg.edge_in})")
    h, he = D.Tensor(graph.x), D.Tensor(graph.edge_x)
    for layer, repeats in ((0, 1), (1, cfg.rounds)):
        specs = _layer_specs(cfg, *layer_dims(cfg, layer))
        for _ in range(repeats):
            if cfg.embedder == "gn":
                h, he = attention_gn_block(P, f"{prefix}{layer}", specs, h, he, graph)
            else:
                h, he = tga_layer(P, f"{prefix}{layer}", specs, h, he, graph, cfg.num_types)
    return h, he
