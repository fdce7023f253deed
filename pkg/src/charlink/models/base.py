from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..nn import MLPParams, cross_entropy, cross_entropy_grad, softmax2


@dataclass
class EdgePrediction:
    """Per-edge probability of the positive (same-word successor) class."""

    probs: np.ndarray  # (m,)
    edges: np.ndarray | None = None  # (m, 2) edges the probabilities refer to

    def positive(self, threshold: float = 0.5) -> np.ndarray:
        return self.probs >= threshold

    def __len__(self):
        return len(self.probs)


class LinkModel:
    """Shared plumbing: flat parameter dicts, prediction, and the edge loss.

    Subclasses implement ``forward(graph) -> (logits, cache)`` and
    ``backward(graph, cache, dlogits) -> grads`` and keep their parameters as
    ``MLPParams`` or plain arrays reachable through ``_param_groups``.
    """

    model_type = ""

    def _param_groups(self) -> dict:
        raise NotImplementedError

    def params(self) -> dict[str, np.ndarray]:
        out = {}
        for prefix, p in self._param_groups().items():
            if isinstance(p, MLPParams):
                for name, arr in p.arrays().items():
                    out[f"{prefix}.{name}"] = arr
            else:
                out[prefix] = p
        return out

    def set_params(self, values: dict) -> None:
        current = self.params()
        if values.keys() != current.keys():
            raise ValueError("parameter names differ from the model's")
        for name, arr in values.items():
            arr = np.asarray(arr, dtype=float)
            if arr.shape != current[name].shape:
                raise ValueError(f"shape mismatch for {name}: {arr.shape} vs {current[name].shape}")
        for prefix, p in self._param_groups().items():
            if isinstance(p, MLPParams):
                for name in ("W1", "b1", "W2", "b2"):
                    setattr(p, name, np.array(values[f"{prefix}.{name}"], dtype=float))
            else:
                self._set_array(prefix, np.array(values[prefix], dtype=float))

    def _set_array(self, name: str, value: np.ndarray) -> None:
        raise NotImplementedError

    def grads_dict(self, groups: dict) -> dict[str, np.ndarray]:
        out = {}
        for prefix, p in groups.items():
            if isinstance(p, MLPParams):
                for name, arr in p.arrays().items():
                    out[f"{prefix}.{name}"] = arr
            else:
                out[prefix] = p
        return out

    def config(self) -> dict:
        raise NotImplementedError

    def predict(self, graph) -> EdgePrediction:
        logits, _ = self.forward(graph)
        return EdgePrediction(softmax2(logits)[:, 1] if len(logits) else np.zeros(0), graph.edges)

    def edge_losses(self, graph, labels) -> tuple[np.ndarray, np.ndarray, object]:
        """Per-edge cross-entropy, the softmax probabilities, and the forward cache."""
        logits, cache = self.forward(graph)
        probs = softmax2(logits) if len(logits) else np.zeros((0, 2))
        losses = cross_entropy(probs, labels) if len(logits) else np.zeros(0)
        return np.atleast_1d(losses), probs, cache

    def loss_and_grads(self, graph, labels, weights=None) -> tuple[float, dict]:
        """Weighted summed cross-entropy over edges and its parameter gradients."""
        labels = np.asarray(labels, dtype=np.int64)
        weights = np.ones(len(labels)) if weights is None else np.asarray(weights, dtype=float)
        losses, probs, cache = self.edge_losses(graph, labels)
        dlogits = cross_entropy_grad(probs, labels, weights) if len(labels) else np.zeros((0, 2))
        return float((losses * weights).sum()), self.backward(graph, cache, dlogits)
