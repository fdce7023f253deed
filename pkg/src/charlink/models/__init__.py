"""Link predictors over character graphs, plus the JSON checkpoint format."""

from __future__ import annotations

import json

import numpy as np

from .base import EdgePrediction, LinkModel
from .gcn import DynamicGCNModel, VanillaGCNModel, propagation_matrix
from .nenet import NENETModel, nenet_backward, nenet_forward, nenet_static_edge_forward

MODEL_TYPES = ("nenet", "nenet_static_edge", "vanilla_gcn", "dynamic_gcn")

__all__ = [
    "MODEL_TYPES", "DynamicGCNModel", "EdgePrediction", "LinkModel", "NENETModel",
    "VanillaGCNModel", "create_model", "load_checkpoint", "model_from_config", "nenet_backward",
    "nenet_forward", "nenet_static_edge_forward", "propagation_matrix", "save_checkpoint",
]


class CheckpointError(ValueError):
    pass


def create_model(model_type: str, seed: int = 0, k: int = 4, hidden: int = 32,
                 node_dims=None, edge_dims=None) -> LinkModel:
    rng = np.random.default_rng(seed)
    if model_type in ("nenet", "nenet_static_edge"):
        return NENETModel(node_dims or (16, 32, 32), edge_dims or (6, 16, 2), hidden,
                          static_edges=model_type == "nenet_static_edge", rng=rng)
    if model_type == "vanilla_gcn":
        return VanillaGCNModel(node_dims or (16, 32, 32), hidden, rng=rng)
    if model_type == "dynamic_gcn":
        return DynamicGCNModel(node_dims or (16, 32, 32, 32, 32), hidden, k, rng=rng)
    raise ValueError(f"unknown model type {model_type!r}; expected one of {MODEL_TYPES}")


def model_from_config(model_type: str, config: dict) -> LinkModel:
    """Zero-initialized model of the given architecture."""
    if model_type in ("nenet", "nenet_static_edge"):
        return NENETModel.from_config(config, static_edges=model_type == "nenet_static_edge")
    if model_type == "vanilla_gcn":
        return VanillaGCNModel.from_config(config)
    if model_type == "dynamic_gcn":
        return DynamicGCNModel.from_config(config)
    raise CheckpointError(f"unknown model type {model_type!r}")


def checkpoint_dict(model: LinkModel, seed: int, k: int = 4) -> dict:
    config = dict(model.config())
    config.setdefault("k", k)
    weights = {}
    for name, arr in model.params().items():
        a2 = arr.reshape(arr.shape[0], -1) if arr.ndim == 2 else arr.reshape(-1, 1)
        weights[name] = {"rows": int(a2.shape[0]), "cols": int(a2.shape[1]),
                         "data": [float(v) for v in a2.ravel()]}
    return {"model_type": model.model_type, "config": config, "seed": int(seed), "weights": weights}


def save_checkpoint(path, model: LinkModel, seed: int, k: int = 4) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(checkpoint_dict(model, seed, k), fh, separators=(",", ":"))
        fh.write("\n")


def model_from_checkpoint(doc: dict) -> tuple[LinkModel, dict]:
    try:
        model_type, config, weights = doc["model_type"], doc["config"], doc["weights"]
    except (KeyError, TypeError) as exc:
        raise CheckpointError(f"checkpoint is missing field {exc}") from exc
    try:
        model = model_from_config(model_type, config)
    except (KeyError, TypeError) as exc:
        raise CheckpointError(f"checkpoint config is missing {exc}") from exc
    expected = model.params()
    if set(weights) != set(expected):
        missing = sorted(set(expected) - set(weights))
        extra = sorted(set(weights) - set(expected))
        raise CheckpointError(f"weights do not match config (missing {missing}, unexpected {extra})")
    values = {}
    for name, ref in expected.items():
        w = weights[name]
        rows, cols = ref.shape[0], (ref.shape[1] if ref.ndim == 2 else 1)
        if (w.get("rows"), w.get("cols")) != (rows, cols) or len(w.get("data", [])) != rows * cols:
            raise CheckpointError(f"weight {name!r} has shape ({w.get('rows')}, {w.get('cols')}), "
                                  f"config implies ({rows}, {cols})")
        values[name] = np.array(w["data"], dtype=float).reshape(ref.shape)
    model.set_params(values)
    return model, doc


def load_checkpoint(path) -> tuple[LinkModel, dict]:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CheckpointError(f"{path}: invalid JSON ({exc.msg})") from exc
    return model_from_checkpoint(doc)
