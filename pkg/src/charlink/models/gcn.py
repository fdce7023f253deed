"""Baseline link predictors built on node-only graph networks.

``VanillaGCNModel`` propagates node features with the renormalized adjacency
``D^-1/2 (I + A) D^-1/2`` and classifies each candidate edge from the pair of
final node vectors. ``DynamicGCNModel`` uses summed edge-function messages and
rebuilds a k-NN graph in feature space after every layer but the last.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..graph import knn_edges
from ..nn import DEFAULT_HIDDEN, MLPParams, mlp_backward, mlp_forward, relu, xavier_init
from .base import LinkModel


def propagation_matrix(n: int, edges) -> sp.csr_matrix:
    """Symmetrized, self-looped, degree-normalized adjacency of a directed edge list."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    a = sp.csr_matrix((np.ones(len(edges)), (edges[:, 0], edges[:, 1])), shape=(n, n))
    a = ((a + a.T) > 0).astype(float)
    a = (a + sp.identity(n, format="csr")).tocsr()
    a.data[:] = 1.0
    d = np.asarray(a.sum(axis=1)).ravel()
    inv_sqrt = sp.diags(1.0 / np.sqrt(d))
    return (inv_sqrt @ a @ inv_sqrt).tocsr()


@dataclass
class VanillaCache:
    prop: sp.csr_matrix
    layers: list  # (propagated input P @ X, pre-activation S)
    pair: object


class VanillaGCNModel(LinkModel):
    model_type = "vanilla_gcn"

    def __init__(self, node_dims=(16, 32, 32), hidden=DEFAULT_HIDDEN, rng=None, zero=False):
        self.node_dims = list(node_dims)
        self.hidden = hidden
        rng = rng if rng is not None else np.random.default_rng(0)
        self.H = []
        for a, b in zip(self.node_dims[:-1], self.node_dims[1:]):
            # Stored (d_in, d_out) so that X_next = relu(P X H).
            self.H.append(np.zeros((a, b)) if zero else xavier_init(b, a, rng))
        d = 2 * self.node_dims[-1]
        self.pair = MLPParams.zeros(d, hidden, 2) if zero else MLPParams.init(d, hidden, 2, rng)

    def _param_groups(self) -> dict:
        groups = {f"H{l}": h for l, h in enumerate(self.H)}
        groups["pair"] = self.pair
        return groups

    def _set_array(self, name, value):
        self.H[int(name[1:])] = value

    def config(self) -> dict:
        return {"node_dims": self.node_dims, "hidden": self.hidden}

    @classmethod
    def from_config(cls, config: dict) -> "VanillaGCNModel":
        return cls(config["node_dims"], config["hidden"], zero=True)

    def propagate(self, graph):
        prop = propagation_matrix(graph.n, graph.edges)
        x = np.asarray(graph.node_feats, dtype=float)
        if x.shape[1] != self.node_dims[0]:
            raise ValueError(f"graph node dim {x.shape[1]} != model input dim {self.node_dims[0]}")
        layers = []
        for h in self.H:
            px = prop @ x
            s = px @ h
            layers.append((px, s))
            x = relu(s)
        return x, prop, layers

    def forward(self, graph):
        x, prop, layers = self.propagate(graph)
        z = np.hstack([x[graph.src], x[graph.dst]])
        logits, pc = mlp_forward(self.pair, z)
        return logits, VanillaCache(prop, layers, pc)

    def backward(self, graph, cache: VanillaCache, dlogits) -> dict:
        dz, gpair = mlp_backward(self.pair, cache.pair, dlogits)
        d = self.node_dims[-1]
        dx = graph.src_incidence @ dz[:, :d] + graph.dst_incidence @ dz[:, d:]
        grads = {"pair": gpair}
        for l in reversed(range(len(self.H))):
            px, s = cache.layers[l]
            ds = dx * (s > 0)
            grads[f"H{l}"] = px.T @ ds
            dx = cache.prop.T @ (ds @ self.H[l].T)
        return self.grads_dict({k: grads[k] for k in self._param_groups()})


@dataclass
class DynamicCache:
    layers: list  # (edges, incidence matrices, h cache)
    pair: object


def _incidence(n, idx):
    m = len(idx)
    return sp.csr_matrix((np.ones(m), (idx, np.arange(m))), shape=(n, m))


def feature_knn(x: np.ndarray, blocks: np.ndarray, k: int) -> np.ndarray:
    """k-NN edges by Euclidean distance between node features, within each block."""
    parts = [knn_edges(x[a:b], k) + a for a, b in zip(blocks[:-1], blocks[1:])]
    return np.concatenate(parts) if parts else np.zeros((0, 2), np.int64)


class DynamicGCNModel(LinkModel):
    model_type = "dynamic_gcn"

    def __init__(self, node_dims=(16, 32, 32, 32, 32), hidden=DEFAULT_HIDDEN, k=4, rng=None,
                 zero=False):
        self.node_dims = list(node_dims)
        self.hidden = hidden
        self.k = k
        rng = rng if rng is not None else np.random.default_rng(0)
        make = MLPParams.zeros if zero else (lambda a, b, c: MLPParams.init(a, b, c, rng))
        self.h = [make(2 * a, hidden, b) for a, b in zip(self.node_dims[:-1], self.node_dims[1:])]
        self.pair = make(2 * self.node_dims[-1], hidden, 2)

    def _param_groups(self) -> dict:
        groups = {f"h{l}": h for l, h in enumerate(self.h)}
        groups["pair"] = self.pair
        return groups

    def config(self) -> dict:
        return {"node_dims": self.node_dims, "hidden": self.hidden, "k": self.k}

    @classmethod
    def from_config(cls, config: dict) -> "DynamicGCNModel":
        return cls(config["node_dims"], config["hidden"], config["k"], zero=True)

    def node_states(self, graph):
        """Node features after every layer and the edge sets each layer used."""
        x = np.asarray(graph.node_feats, dtype=float)
        if x.shape[1] != self.node_dims[0]:
            raise ValueError(f"graph node dim {x.shape[1]} != model input dim {self.node_dims[0]}")
        edges = graph.edges
        layers, states = [], [x]
        for l, h in enumerate(self.h):
            src_inc = _incidence(graph.n, edges[:, 0])
            dst_inc = _incidence(graph.n, edges[:, 1])
            out, hc = mlp_forward(h, np.hstack([x[edges[:, 0]], x[edges[:, 1]]]))
            x = src_inc @ out
            layers.append((edges, src_inc, dst_inc, hc))
            states.append(x)
            if l < len(self.h) - 1:
                edges = feature_knn(x, graph.blocks, self.k)
        return states, layers

    def forward(self, graph):
        states, layers = self.node_states(graph)
        x = states[-1]
        logits, pc = mlp_forward(self.pair, np.hstack([x[graph.src], x[graph.dst]]))
        return logits, DynamicCache(layers, pc)

    def backward(self, graph, cache: DynamicCache, dlogits) -> dict:
        dz, gpair = mlp_backward(self.pair, cache.pair, dlogits)
        d = self.node_dims[-1]
        dx = graph.src_incidence @ dz[:, :d] + graph.dst_incidence @ dz[:, d:]
        grads = {"pair": gpair}
        for l in reversed(range(len(self.h))):
            _, src_inc, dst_inc, hc = cache.layers[l]
            dzl, grads[f"h{l}"] = mlp_backward(self.h[l], hc, src_inc.T @ dx)
            dn = self.node_dims[l]
            dx = src_inc @ dzl[:, :dn] + dst_inc @ dzl[:, dn:]
        return self.grads_dict({k: grads[k] for k in self._param_groups()})
