"""Batch training of link predictors with online hard negative mining."""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .assembly import EvalReport, scene_scores, summarize
from .graph import GraphConfig, build_knn_graph, merge_graphs
from .models import EdgePrediction, LinkModel, create_model, save_checkpoint
from .nn import AdamState, adam_step, cross_entropy_grad
from .scenes import load_detections, load_scenes, train_test_split
from .supervision import LinkLabels, label_edges, match_boxes

ZERO_POSITIVE_NEGATIVES = 8
EVAL_CHUNK = 64


@dataclass
class TrainConfig:
    model: str = "nenet"
    epochs: int = 30
    batch_size: int = 12
    lr: float = 1e-3
    lr_decay: float = 0.8
    lr_period: int = 10
    ohnm_ratio: int = 3
    seed: int = 0
    k: int = 4
    hidden: int = 32
    scenes: str | None = None
    detections: str | None = None
    checkpoint: str | None = None
    report: str | None = None

    def validate(self) -> None:
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.ohnm_ratio < 0:
            raise ValueError("ohnm_ratio must be >= 0")
        if self.lr_period < 1 or not 0 < self.lr_decay <= 1:
            raise ValueError("lr_period must be >= 1 and lr_decay in (0, 1]")


@dataclass
class TrainReport:
    config: dict
    epochs: list = field(default_factory=list)  # per-epoch loss, lr and held-out metrics
    final: dict = field(default_factory=dict)  # full held-out EvalReport of the last epoch
    seconds: list = field(default_factory=list)  # wall clock per epoch; kept out of to_dict

    def to_dict(self) -> dict:
        return {"config": self.config, "epochs": self.epochs, "final": self.final}


def lr_at(epoch: int, base: float = 1e-3, decay: float = 0.8, period: int = 10) -> float:
    """Step decay: ``base * decay ** floor(epoch / period)``."""
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    return base * decay ** (epoch // period)


def ohnm_select(losses, labels, ratio: int = 3) -> np.ndarray:
    """0/1 weights keeping every positive and the hardest ``ratio`` negatives per positive.

    Without positives the ``min(8, #negatives)`` hardest negatives are kept.
    Ties in loss go to the lower edge index.
    """
    losses = np.asarray(losses, dtype=float)
    labels = np.asarray(getattr(labels, "labels", labels), dtype=np.int64)
    weights = np.zeros(len(labels))
    pos = labels == 1
    weights[pos] = 1.0
    neg = np.flatnonzero(~pos)
    n_pos = int(pos.sum())
    quota = ratio * n_pos if n_pos else ZERO_POSITIVE_NEGATIVES
    quota = min(quota, len(neg))
    if quota:
        order = np.argsort(-losses[neg], kind="stable")
        weights[neg[order[:quota]]] = 1.0
    return weights


@dataclass
class Sample:
    scene: object
    det: object
    graph: object
    labels: LinkLabels


def prepare_samples(scenes, detections, k: int = 4) -> list[Sample]:
    if len(scenes) != len(detections):
        raise ValueError(f"{len(scenes)} scenes but {len(detections)} detection sets")
    cfg = GraphConfig(k=k)
    out = []
    for scene, det in zip(scenes, detections):
        if scene.scene_id != det.scene_id:
            raise ValueError(f"scene id mismatch: {scene.scene_id!r} vs {det.scene_id!r}")
        graph = build_knn_graph(det, cfg, (scene.image_width, scene.image_height))
        out.append(Sample(scene, det, graph, label_edges(graph, match_boxes(det, scene), scene)))
    return out


def predict_samples(model: LinkModel, samples) -> list[EdgePrediction]:
    """Predictions per sample, computed in fixed-size merged chunks."""
    preds = []
    for start in range(0, len(samples), EVAL_CHUNK):
        chunk = samples[start:start + EVAL_CHUNK]
        merged = merge_graphs([s.graph for s in chunk])
        probs = model.predict(merged).probs
        offsets = np.concatenate([[0], np.cumsum([len(s.graph.edges) for s in chunk])])
        for s, a, b in zip(chunk, offsets[:-1], offsets[1:]):
            preds.append(EdgePrediction(probs[a:b], s.graph.edges))
    return preds


def evaluate_samples(model: LinkModel, samples, threshold: float = 0.5) -> EvalReport:
    preds = predict_samples(model, samples)
    rows = [scene_scores(s.scene, s.det, p, s.labels, threshold) for s, p in zip(samples, preds)]
    rows.sort(key=lambda r: r["scene_id"])
    return summarize(rows)


def batch_step(model: LinkModel, batch, ratio: int):
    """Forward, per-scene OHNM, backward for one batch merged into a single graph.

    Returns summed selected loss, number of selected edges, gradients and the
    per-scene (labels, weights) selections.
    """
    merged = merge_graphs([s.graph for s in batch])
    labels = np.concatenate([s.labels.labels for s in batch])
    losses, probs, cache = model.edge_losses(merged, labels)
    weights = np.zeros(len(labels))
    selections = []
    start = 0
    for s in batch:
        m = len(s.labels.labels)
        w = ohnm_select(losses[start:start + m], s.labels.labels, ratio)
        pos = s.labels.labels == 1
        assert np.all(w[pos] == 1.0), "OHNM dropped a positive edge"
        if pos.any():
            assert w[~pos].sum() <= ratio * pos.sum(), "OHNM kept too many negatives"
        weights[start:start + m] = w
        selections.append((s.labels.labels, w))
        start += m
    dlogits = cross_entropy_grad(probs, labels, weights) if len(labels) else np.zeros((0, 2))
    grads = model.backward(merged, cache, dlogits)
    return float((losses * weights).sum()), int(weights.sum()), grads, selections


def train(cfg: TrainConfig, scenes=None, detections=None, log=None, on_step=None,
          ) -> tuple[LinkModel, TrainReport]:
    """Train ``cfg.model``; data comes from the arguments or from ``cfg`` paths."""
    cfg.validate()
    if scenes is None:
        scenes = load_scenes(cfg.scenes)
    if detections is None:
        detections = load_detections(cfg.detections)
    if not scenes:
        raise ValueError("empty dataset")
    samples = prepare_samples(scenes, detections, cfg.k)
    train_idx, test_idx = train_test_split(len(samples))
    model, report = fit(cfg, [samples[i] for i in train_idx], [samples[i] for i in test_idx],
                        log, on_step)
    if cfg.checkpoint:
        save_checkpoint(cfg.checkpoint, model, cfg.seed, cfg.k)
    if cfg.report:
        write_report(cfg.report, report)
    return model, report


def fit(cfg: TrainConfig, train_set, test_set, log=None, on_step=None,
        ) -> tuple[LinkModel, TrainReport]:
    """Optimize a fresh model on prepared samples, scoring ``test_set`` after each epoch."""
    cfg.validate()
    if not train_set:
        raise ValueError("empty training set")
    model = create_model(cfg.model, seed=cfg.seed, k=cfg.k, hidden=cfg.hidden)
    state = AdamState(lr=cfg.lr)
    shuffler = np.random.default_rng([cfg.seed, 1])
    report = TrainReport(config=asdict(cfg))
    step = 0
    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        state.lr = lr_at(epoch, cfg.lr, cfg.lr_decay, cfg.lr_period)
        order = shuffler.permutation(len(train_set))
        total_loss, total_edges = 0.0, 0
        for b in range(0, len(order), cfg.batch_size):
            batch = [train_set[i] for i in sorted(order[b:b + cfg.batch_size])]
            loss, n_sel, grads, selections = batch_step(model, batch, cfg.ohnm_ratio)
            model.set_params(adam_step(state, model.params(), grads))
            total_loss += loss
            total_edges += n_sel
            if on_step is not None:
                on_step(epoch, step, selections)
            step += 1
        held_out = evaluate_samples(model, test_set) if test_set else EvalReport()
        mean_loss = total_loss / total_edges if total_edges else 0.0
        report.epochs.append({
            "epoch": epoch, "lr": state.lr, "loss": mean_loss,
            "edge_precision": held_out.edge_precision, "edge_recall": held_out.edge_recall,
            "edge_f": held_out.edge_f, "word_f": held_out.word_f,
        })
        report.final = held_out.to_dict()
        report.seconds.append(time.perf_counter() - t0)
        if log is not None:
            log(f"epoch {epoch} lr {state.lr:.6g} loss {mean_loss:.6f} edgeF {held_out.edge_f:.4f}")
    return model, report


def write_report(path, report: TrainReport) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=1, sort_keys=True)
        fh.write("\n")
    with open(str(path) + ".timing.json", "w", encoding="utf-8") as fh:
        json.dump({"seconds_per_epoch": report.seconds}, fh)
        fh.write("\n")


def mean_training_loss(model: LinkModel, samples, ratio: int = 3) -> float:
    """Mean OHNM-selected loss of ``model`` over ``samples`` without updating it."""
    total, count = 0.0, 0
    for s in samples:
        losses, _, _ = model.edge_losses(s.graph, s.labels.labels)
        w = ohnm_select(losses, s.labels.labels, ratio)
        total += float((losses * w).sum())
        count += int(w.sum())
    return total / count if count else math.nan
