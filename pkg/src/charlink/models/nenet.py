"""Edge-learnable message passing: node and edge states updated together.

Per layer l, for every directed edge i -> j:

    e_ij^l = f_l([x_i^{l-1}, x_j^{l-1}, e_ij^{l-1}])
    x_i^l  = mean over out-neighbours j of g_l([x_i^{l-1}, x_j^{l-1}, e_ij^{l-1}])

The final edge state has two components and is read as class logits. With
``static_edges`` every layer sees the initial edge features instead of the
previous layer's edge state (the ablation without edge propagation).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..nn import DEFAULT_HIDDEN, MLPParams, cross_entropy_grad, mlp_backward, mlp_forward, softmax2
from .base import EdgePrediction, LinkModel


@dataclass
class NENETCache:
    layers: list  # per layer: (f cache, g cache)
    nodes: list  # node states x^0 .. x^L
    edges: list  # edge states e^0 .. e^L


class NENETModel(LinkModel):
    def __init__(self, node_dims=(16, 32, 32), edge_dims=(6, 16, 2), hidden=DEFAULT_HIDDEN,
                 static_edges: bool = False, rng=None, zero: bool = False):
        node_dims, edge_dims = list(node_dims), list(edge_dims)
        if len(node_dims) != len(edge_dims) or len(node_dims) < 2:
            raise ValueError("node and edge dims need the same length L + 1 >= 2")
        if edge_dims[-1] != 2:
            raise ValueError("final edge dimension must be 2 (class logits)")
        self.node_dims, self.edge_dims = node_dims, edge_dims
        self.hidden = hidden
        self.static_edges = static_edges
        rng = rng if rng is not None else np.random.default_rng(0)
        self.f, self.g = [], []
        for l in range(1, len(node_dims)):
            d_in = 2 * node_dims[l - 1] + (edge_dims[0] if static_edges else edge_dims[l - 1])
            make = MLPParams.zeros if zero else (lambda a, b, c: MLPParams.init(a, b, c, rng))
            self.f.append(make(d_in, hidden, edge_dims[l]))
            self.g.append(make(d_in, hidden, node_dims[l]))

    @property
    def model_type(self) -> str:
        return "nenet_static_edge" if self.static_edges else "nenet"

    @property
    def n_layers(self) -> int:
        return len(self.f)

    def _param_groups(self) -> dict:
        groups = {}
        for l, (f, g) in enumerate(zip(self.f, self.g)):
            groups[f"f{l}"] = f
            groups[f"g{l}"] = g
        return groups

    def config(self) -> dict:
        return {"node_dims": self.node_dims, "edge_dims": self.edge_dims, "hidden": self.hidden}

    @classmethod
    def from_config(cls, config: dict, static_edges: bool = False) -> "NENETModel":
        return cls(config["node_dims"], config["edge_dims"], config["hidden"],
                   static_edges=static_edges, zero=True)

    def forward(self, graph):
        x = np.asarray(graph.node_feats, dtype=float)
        e0 = np.asarray(graph.edge_feats, dtype=float)
        if x.shape[1] != self.node_dims[0] or e0.shape[1] != self.edge_dims[0]:
            raise ValueError(f"graph feature dims ({x.shape[1]}, {e0.shape[1]}) do not match "
                             f"model input dims ({self.node_dims[0]}, {self.edge_dims[0]})")
        src, dst = graph.src, graph.dst
        cache = NENETCache([], [x], [e0])
        e = e0
        for f, g in zip(self.f, self.g):
            z = np.hstack([x[src], x[dst], e0 if self.static_edges else e])
            e_new, fc = mlp_forward(f, z)
            msg, gc = mlp_forward(g, z)
            x = graph.mean_operator @ msg
            e = e_new
            cache.layers.append((fc, gc))
            cache.nodes.append(x)
            cache.edges.append(e)
        return e, cache

    def backward(self, graph, cache: NENETCache, dlogits) -> dict:
        grads = {}
        d_edge = np.asarray(dlogits, dtype=float)
        d_node = None  # final node states do not reach the loss
        for l in reversed(range(self.n_layers)):
            f, g = self.f[l], self.g[l]
            fc, gc = cache.layers[l]
            dz = None
            if d_edge is not None:
                dz, grads[f"f{l}"] = mlp_backward(f, fc, d_edge)
            else:
                grads[f"f{l}"] = f.zeros_like()
            if d_node is not None:
                dzg, grads[f"g{l}"] = mlp_backward(g, gc, graph.mean_operator.T @ d_node)
                dz = dzg if dz is None else dz + dzg
            else:
                grads[f"g{l}"] = g.zeros_like()
            if dz is None:
                d_node = d_edge = None
                continue
            dn = self.node_dims[l]
            d_node = graph.src_incidence @ dz[:, :dn] + graph.dst_incidence @ dz[:, dn:2 * dn]
            d_edge = None if self.static_edges else dz[:, 2 * dn:]
        return self.grads_dict({k: grads[k] for k in self._param_groups()})


def nenet_forward(model: NENETModel, graph) -> tuple[EdgePrediction, NENETCache]:
    logits, cache = model.forward(graph)
    probs = softmax2(logits)[:, 1] if len(logits) else np.zeros(0)
    return EdgePrediction(probs, graph.edges), cache


def nenet_static_edge_forward(model: NENETModel, graph) -> EdgePrediction:
    if not model.static_edges:
        raise ValueError("model was not built with static edges")
    return nenet_forward(model, graph)[0]


def nenet_backward(model: NENETModel, graph, cache: NENETCache, labels, edge_weights) -> dict:
    """Gradient of the weighted edge cross-entropy for a cached forward pass."""
    labels = np.asarray(getattr(labels, "labels", labels), dtype=np.int64)
    logits = cache.edges[-1]
    dlogits = cross_entropy_grad(softmax2(logits), labels, edge_weights) if len(labels) \
        else np.zeros((0, 2))
    return model.backward(graph, cache, dlogits)
