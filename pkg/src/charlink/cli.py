"""Command line entry point: ``charlink <subcommand> [flags]``.

Exit status is 0 on success, 1 on a usage error and 2 on a data error
(missing or malformed input files, checkpoint mismatches).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .assembly import assemble_words
from .heatmap import render_scene_heatmap, write_pgm
from .models import MODEL_TYPES, load_checkpoint
from .scenes import (
    DetectorNoise,
    GeneratorConfig,
    generate_scenes,
    load_detections,
    load_scenes,
    save_detections,
    save_scenes,
    simulate_all,
    train_test_split,
)
from .svg import render_svg
from .trainer import TrainConfig, evaluate_samples, fit, predict_samples, prepare_samples, train, write_report

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2

# F-scores reported for the full-scale synthetic benchmark; shown for context only.
REPORTED_F = {"nenet": 0.655, "nenet_static_edge": 0.604, "dynamic_gcn": 0.542, "vanilla_gcn": 0.080}


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _validated(cfg):
    try:
        cfg.validate()
    except ValueError as exc:
        raise UsageError(f"charlink: error: {exc}") from exc
    return cfg


def echo_config(command: str, config: dict) -> None:
    print(json.dumps({"command": command, "config": config}, sort_keys=True, default=str),
          file=sys.stderr)


def _write_json(path, doc) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _load_data(args):
    scenes = load_scenes(args.scenes)
    dets = load_detections(args.detections)
    if len(scenes) != len(dets):
        raise DataError(f"{args.scenes} has {len(scenes)} scenes but {args.detections} "
                        f"has {len(dets)} detection sets")
    return scenes, dets


def _split(samples, which: str):
    train_idx, test_idx = train_test_split(len(samples))
    idx = {"train": train_idx, "test": test_idx, "all": range(len(samples))}[which]
    return [samples[i] for i in idx]


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen(args) -> int:
    cfg = GeneratorConfig(n_scenes=args.scenes, image_width=args.width, image_height=args.height,
                          curved_prob=args.curved_prob, seed=args.seed)
    _validated(cfg)
    echo_config("gen", {**asdict(cfg), "out": args.out})
    save_scenes(args.out, generate_scenes(cfg))
    return EXIT_OK


def cmd_simulate(args) -> int:
    noise = _validated(DetectorNoise(jitter=args.jitter, drop=args.drop, spurious=args.spurious,
                                     seed=args.seed))
    echo_config("simulate", {**asdict(noise), "scenes": args.scenes, "out": args.out})
    save_detections(args.out, simulate_all(load_scenes(args.scenes), noise))
    return EXIT_OK


def _train_config(args, model: str | None = None) -> TrainConfig:
    cfg = TrainConfig(model=model or args.model, epochs=args.epochs, batch_size=args.batch_size,
                      lr=args.lr, lr_decay=args.lr_decay, lr_period=args.lr_period,
                      ohnm_ratio=args.ohnm_ratio, seed=args.seed, k=args.k, hidden=args.hidden,
                      scenes=args.scenes, detections=args.detections,
                      checkpoint=getattr(args, "checkpoint", None), report=getattr(args, "report", None))
    return _validated(cfg)


def cmd_train(args) -> int:
    cfg = _train_config(args)
    echo_config("train", asdict(cfg))
    scenes, dets = _load_data(args)
    _, report = train(cfg, scenes, dets, log=None if args.quiet else print)
    if args.curves:
        from .plotting import plot_training_curves

        plot_training_curves({cfg.model: report.epochs}, args.curves)
    return EXIT_OK


def cmd_eval(args) -> int:
    echo_config("eval", vars_config(args))
    model, doc = _checkpoint(args.checkpoint)
    scenes, dets = _load_data(args)
    samples = _split(prepare_samples(scenes, dets, doc["config"].get("k", 4)), args.split)
    report = evaluate_samples(model, samples, args.threshold)
    doc = report.to_dict()
    if args.out:
        _write_json(args.out, doc)
    if args.csv:
        with open(args.csv, "w", newline="", encoding="utf-8") as fh:
            fields = ["scene_id", "edge_tp", "edge_pred", "edge_true", "edge_f",
                      "word_tp", "word_pred", "word_true", "word_f", "coverage"]
            writer = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore")
            writer.writeheader()
            writer.writerows(report.per_scene)
    summary = {k: doc[k] for k in ("edge_precision", "edge_recall", "edge_f",
                                   "word_precision", "word_recall", "word_f", "coverage")}
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def _words_doc(det, words) -> dict:
    return {
        "scene_id": det.scene_id,
        "words": [{
            "members": w.members,
            "hull": w.hull.tolist(),
            "rect": {"center": list(w.rect.center), "width": w.rect.width, "height": w.rect.height,
                     "angle": w.rect.angle, "corners": w.rect.corners().tolist()},
        } for w in words],
    }


def cmd_predict(args) -> int:
    echo_config("predict", vars_config(args))
    model, doc = _checkpoint(args.checkpoint)
    scenes, dets = _load_data(args)
    samples = prepare_samples(scenes, dets, doc["config"].get("k", 4))
    preds = predict_samples(model, samples)
    out = {"threshold": args.threshold,
           "scenes": [_words_doc(s.det, assemble_words(s.det, p, args.threshold))
                      for s, p in zip(samples, preds)]}
    _write_json(args.out, out)
    return EXIT_OK


def _pick(scenes, dets, args):
    if args.scene_id is not None:
        for i, s in enumerate(scenes):
            if s.scene_id == args.scene_id:
                return i
        raise DataError(f"scene id {args.scene_id!r} not found in {args.scenes}")
    if not 0 <= args.index < len(scenes):
        raise DataError(f"scene index {args.index} out of range (0..{len(scenes) - 1})")
    return args.index


def cmd_render(args) -> int:
    echo_config("render", vars_config(args))
    scenes, dets = _load_data(args)
    i = _pick(scenes, dets, args)
    pred = words = None
    if args.checkpoint:
        model, doc = _checkpoint(args.checkpoint)
        (sample,) = prepare_samples([scenes[i]], [dets[i]], doc["config"].get("k", 4))
        pred = model.predict(sample.graph)
        words = assemble_words(dets[i], pred, args.threshold)
    Path(args.out).write_text(render_svg(dets[i], scenes[i], pred, words, args.threshold),
                              encoding="utf-8")
    return EXIT_OK


def cmd_heatmap(args) -> int:
    echo_config("heatmap", vars_config(args))
    scenes = load_scenes(args.scenes)
    if not 0 <= args.index < len(scenes):
        raise DataError(f"scene index {args.index} out of range (0..{len(scenes) - 1})")
    write_pgm(render_scene_heatmap(scenes[args.index], args.window, args.sigma), args.out)
    return EXIT_OK


def cmd_compare(args) -> int:
    """Train every requested model on one dataset and write CSV, JSON and figures."""
    from .plotting import plot_comparison, plot_training_curves

    models = args.models or list(MODEL_TYPES)
    unknown = [m for m in models if m not in MODEL_TYPES]
    if unknown:
        raise UsageError(f"unknown model type(s) {unknown}; expected {list(MODEL_TYPES)}")
    base = _train_config(args, models[0])
    echo_config("compare", {**asdict(base), "models": models, "out_dir": args.out_dir})
    scenes, dets = _load_data(args)
    samples = prepare_samples(scenes, dets, base.k)
    train_idx, test_idx = train_test_split(len(samples))
    train_set = [samples[i] for i in train_idx]
    test_set = [samples[i] for i in test_idx]
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows, histories = [], {}
    for name in models:
        cfg = _train_config(args, name)
        log = None if args.quiet else (lambda s, n=name: print(f"{n} {s}"))
        _, report = fit(cfg, train_set, test_set, log)
        write_report(out / f"{name}.report.json", report)
        histories[name] = report.epochs
        f = report.final
        rows.append({"model": name, "edge_precision": f["edge_precision"], "edge_recall": f["edge_recall"],
                     "edge_f": f["edge_f"], "word_precision": f["word_precision"],
                     "word_recall": f["word_recall"], "word_f": f["word_f"],
                     "reported_f": REPORTED_F[name]})
    with open(out / "comparison.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    plot_comparison(rows, out / "comparison.png", REPORTED_F)
    plot_training_curves(histories, out / "curves.png")
    for r in rows:
        print(f"{r['model']:<18} edgeF {r['edge_f']:.4f} wordF {r['word_f']:.4f}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def vars_config(args) -> dict:
    return {k: v for k, v in vars(args).items() if k not in ("func", "command")}


def _checkpoint(path):
    try:
        return load_checkpoint(path)
    except FileNotFoundError as exc:
        raise DataError(f"{path}: file not found") from exc


def _add_data(p, detections=True):
    p.add_argument("--scenes", required=True, help="scenes.jsonl")
    if detections:
        p.add_argument("--detections", required=True, help="detections.jsonl")


def _add_training(p):
    p.add_argument("--epochs", type=int, default=TrainConfig.epochs)
    p.add_argument("--batch-size", type=int, default=TrainConfig.batch_size)
    p.add_argument("--lr", type=float, default=TrainConfig.lr)
    p.add_argument("--lr-decay", type=float, default=TrainConfig.lr_decay)
    p.add_argument("--lr-period", type=int, default=TrainConfig.lr_period)
    p.add_argument("--ohnm-ratio", type=int, default=TrainConfig.ohnm_ratio)
    p.add_argument("--k", type=int, default=TrainConfig.k, help="neighbours per node")
    p.add_argument("--hidden", type=int, default=TrainConfig.hidden, help="MLP hidden width")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--quiet", action="store_true", help="suppress per-epoch lines")


def build_parser() -> Parser:
    parser = Parser(prog="charlink", description="Link detected character boxes into words.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=Parser)

    p = sub.add_parser("gen", help="generate annotated scenes")
    p.add_argument("--scenes", type=int, default=100, help="number of scenes")
    p.add_argument("--width", type=int, default=512)
    p.add_argument("--height", type=int, default=512)
    p.add_argument("--curved-prob", type=float, default=GeneratorConfig.curved_prob)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("simulate", help="simulate detector output for scenes")
    _add_data(p, detections=False)
    p.add_argument("--jitter", type=float, default=DetectorNoise.jitter, help="corner sigma, px")
    p.add_argument("--drop", type=float, default=DetectorNoise.drop)
    p.add_argument("--spurious", type=float, default=DetectorNoise.spurious,
                   help="expected spurious boxes per ground-truth character")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="train a link predictor")
    _add_data(p)
    p.add_argument("--model", choices=MODEL_TYPES, default="nenet")
    _add_training(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--report", help="training report JSON")
    p.add_argument("--curves", help="training curve PNG")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a checkpoint")
    _add_data(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", choices=("test", "train", "all"), default="test")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--out", help="EvalReport JSON")
    p.add_argument("--csv", help="per-scene CSV")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="assemble words with a checkpoint")
    _add_data(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("render", help="SVG overlay of one scene")
    _add_data(p)
    p.add_argument("--checkpoint")
    which = p.add_mutually_exclusive_group()
    which.add_argument("--index", type=int, default=0)
    which.add_argument("--scene-id")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("heatmap", help="ground-truth Gaussian map of one scene as PGM")
    _add_data(p, detections=False)
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--window", type=int, default=50)
    p.add_argument("--sigma", type=float, default=18.5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_heatmap)

    p = sub.add_parser("compare", help="train all models on one dataset; CSV and figures")
    _add_data(p)
    p.add_argument("--models", nargs="+", metavar="MODEL")
    _add_training(p)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_compare)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError, ValueError) as exc:
        # SceneFormatError and CheckpointError are ValueErrors naming file, line and field.
        print(f"charlink: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
