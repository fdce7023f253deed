"""Synthetic desk-scale scenes, a detector simulator, and the JSONL file formats.

Scenes are generated word by word: each word is a run of rotated character
rectangles laid along a straight or circular-arc baseline. The detector
simulator perturbs those ground-truth quads (corner jitter, drops, spurious
boxes) to stand in for a trained character detector.
"""

from __future__ import annotations

import json
import math
import string
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .geometry import OrientedRect, make_quad, min_area_rect, polygon_intersection_area, signed_area

ALPHABET = string.ascii_lowercase + string.digits
PLACEMENT_ATTEMPTS = 20


@dataclass(eq=False)
class WordAnnotation:
    text: str
    chars: np.ndarray  # (n, 4, 2), reading order

    def __eq__(self, other):
        return (isinstance(other, WordAnnotation) and self.text == other.text
                and np.array_equal(self.chars, other.chars))


@dataclass(eq=False)
class SceneAnnotation:
    scene_id: str
    image_width: int
    image_height: int
    words: list[WordAnnotation] = field(default_factory=list)

    def __eq__(self, other):
        return (isinstance(other, SceneAnnotation) and self.scene_id == other.scene_id
                and self.image_width == other.image_width
                and self.image_height == other.image_height and self.words == other.words)

    def char_quads(self) -> np.ndarray:
        if not self.words:
            return np.zeros((0, 4, 2))
        return np.concatenate([w.chars for w in self.words])

    def char_index(self) -> list[tuple[int, int]]:
        return [(wi, ci) for wi, w in enumerate(self.words) for ci in range(len(w.chars))]

    @property
    def n_chars(self) -> int:
        return sum(len(w.chars) for w in self.words)


@dataclass(eq=False)
class DetectionSet:
    scene_id: str
    boxes: np.ndarray  # (n, 4, 2)
    # (word, char) of the source character, or None for spurious boxes.
    # Diagnostics only; no model reads this.
    provenance: list = field(default_factory=list)
    image_width: int = 0
    image_height: int = 0

    def __eq__(self, other):
        return (isinstance(other, DetectionSet) and self.scene_id == other.scene_id
                and np.array_equal(self.boxes, other.boxes) and self.provenance == other.provenance
                and (self.image_width, self.image_height) == (other.image_width, other.image_height))

    def __len__(self):
        return len(self.boxes)


@dataclass
class GeneratorConfig:
    n_scenes: int = 100
    image_width: int = 512
    image_height: int = 512
    words_min: int = 3
    words_max: int = 7
    chars_min: int = 2
    chars_max: int = 8
    char_height_mean: float = 23.0
    char_height_std: float = 3.5
    char_aspect_min: float = 0.61
    char_aspect_max: float = 0.90
    gap_min: float = 1.0
    gap_max: float = 6.0
    rotation_max: float = 0.5
    curved_prob: float = 0.3
    curvature_min: float = 0.002
    curvature_max: float = 0.008
    max_turn: float = 1.0
    word_margin: float = 14.0
    seed: int = 0

    def validate(self) -> None:
        pairs = [("words", self.words_min, self.words_max), ("chars", self.chars_min, self.chars_max),
                 ("char_aspect", self.char_aspect_min, self.char_aspect_max),
                 ("gap", self.gap_min, self.gap_max),
                 ("curvature", self.curvature_min, self.curvature_max)]
        for name, lo, hi in pairs:
            if lo > hi:
                raise ValueError(f"empty {name} range [{lo}, {hi}]")
        if self.words_min < 0 or self.chars_min < 1:
            raise ValueError("word and character counts must be positive")
        if self.image_width <= 0 or self.image_height <= 0:
            raise ValueError("image size must be positive")
        if not 0.0 <= self.curved_prob <= 1.0:
            raise ValueError("curved_prob must lie in [0, 1]")
        if self.char_height_mean <= 0 or self.char_height_std < 0:
            raise ValueError("character height must be positive")


@dataclass
class DetectorNoise:
    jitter: float = 1.0
    drop: float = 0.02
    spurious: float = 0.02  # expected spurious boxes per ground-truth character
    spurious_rotation_max: float = 0.5
    seed: int = 0

    def validate(self) -> None:
        if self.jitter < 0:
            raise ValueError("jitter sigma must be >= 0")
        for name in ("drop", "spurious"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")


def scene_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(seed ^ index)


def char_quad(center, heading: float, width: float, height: float) -> np.ndarray:
    """Rectangle centred on the baseline point, top edge along ``heading``."""
    t = np.array([math.cos(heading), math.sin(heading)])
    up = np.array([t[1], -t[0]])  # y points down in image space
    c = np.asarray(center, dtype=float)
    hw, hh = 0.5 * width, 0.5 * height
    return np.array([c - hw * t + hh * up, c + hw * t + hh * up,
                     c + hw * t - hh * up, c - hw * t - hh * up])


def _layout_word(rng: np.random.Generator, cfg: GeneratorConfig) -> tuple[str, np.ndarray]:
    n = int(rng.integers(cfg.chars_min, cfg.chars_max + 1))
    text = "".join(rng.choice(list(ALPHABET), size=n))
    lo, hi = 0.5 * cfg.char_height_mean, 2.0 * cfg.char_height_mean
    height = float(np.clip(rng.normal(cfg.char_height_mean, cfg.char_height_std), lo, hi))
    widths = height * rng.uniform(cfg.char_aspect_min, cfg.char_aspect_max, size=n)
    gaps = rng.uniform(cfg.gap_min, cfg.gap_max, size=max(n - 1, 0))
    centers_s = np.cumsum(np.concatenate([[0.0], widths[:-1] * 0.5 + widths[1:] * 0.5 + gaps]))
    length = float(centers_s[-1]) if n > 1 else 0.0

    theta0 = rng.uniform(-cfg.rotation_max, cfg.rotation_max)
    kappa = 0.0
    if rng.random() < cfg.curved_prob:
        kappa = rng.uniform(cfg.curvature_min, cfg.curvature_max) * rng.choice([-1.0, 1.0])
        if length > 0 and abs(kappa) * length > cfg.max_turn:
            kappa = math.copysign(cfg.max_turn / length, kappa)

    # Heading at arc length s is theta0 + kappa * (s - length/2).
    start = theta0 - 0.5 * kappa * length
    heading = start + kappa * centers_s
    if kappa == 0.0:
        pos = np.outer(centers_s, [math.cos(start), math.sin(start)])
    else:
        pos = np.stack([(np.sin(heading) - math.sin(start)) / kappa,
                        (math.cos(start) - np.cos(heading)) / kappa], axis=1)
    quads = np.stack([char_quad(p, a, w, height) for p, a, w in zip(pos, heading, widths)])
    return text, quads


def _padded(rect: OrientedRect, margin: float) -> np.ndarray:
    return OrientedRect(rect.center, rect.width + 2 * margin, rect.height + 2 * margin,
                        rect.angle).corners()


def generate_scene(cfg: GeneratorConfig, index: int) -> SceneAnnotation:
    rng = scene_rng(cfg.seed, index)
    W, H = cfg.image_width, cfg.image_height
    n_words = int(rng.integers(cfg.words_min, cfg.words_max + 1))
    words: list[WordAnnotation] = []
    placed: list[np.ndarray] = []
    for _ in range(n_words):
        text, quads = _layout_word(rng, cfg)
        pts = quads.reshape(-1, 2)
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        span = hi - lo
        if span[0] > W or span[1] > H:
            continue
        for _ in range(PLACEMENT_ATTEMPTS):
            shift = np.array([rng.uniform(0, W - span[0]), rng.uniform(0, H - span[1])]) - lo
            moved = quads + shift
            pad = _padded(min_area_rect(moved.reshape(-1, 2)), 0.5 * cfg.word_margin)
            if all(polygon_intersection_area(pad, other) <= 0.0 for other in placed):
                moved = np.clip(moved, 0.0, [W, H])
                words.append(WordAnnotation(text, moved))
                placed.append(pad)
                break
    return SceneAnnotation(f"scene_{index:06d}", W, H, words)


def generate_scenes(cfg: GeneratorConfig) -> list[SceneAnnotation]:
    cfg.validate()
    return [generate_scene(cfg, i) for i in range(cfg.n_scenes)]


def simulate_detections(scene: SceneAnnotation, noise: DetectorNoise, index: int = 0) -> DetectionSet:
    noise.validate()
    rng = scene_rng(noise.seed, index)
    W, H = scene.image_width, scene.image_height
    boxes, prov = [], []
    quads = scene.char_quads()
    for (wi, ci), q in zip(scene.char_index(), quads):
        if rng.random() < noise.drop:
            continue
        if noise.jitter > 0:
            q = q + rng.normal(0.0, noise.jitter, size=(4, 2))
        boxes.append(q)
        prov.append((wi, ci))

    n_spurious = int(rng.binomial(len(quads), noise.spurious)) if len(quads) else 0
    for _ in range(n_spurious):
        src = quads[rng.integers(len(quads))]
        w = float(np.linalg.norm(src[1] - src[0]))
        h = float(np.linalg.norm(src[3] - src[0]))
        center = (rng.uniform(0.5 * w, max(W - 0.5 * w, 0.5 * w)),
                  rng.uniform(0.5 * h, max(H - 0.5 * h, 0.5 * h)))
        angle = rng.uniform(-noise.spurious_rotation_max, noise.spurious_rotation_max)
        boxes.append(char_quad(center, angle, w, h))
        prov.append(None)

    arr = np.clip(np.array(boxes), 0.0, [W, H]) if boxes else np.zeros((0, 4, 2))
    return DetectionSet(scene.scene_id, arr, prov, W, H)


def simulate_all(scenes, noise: DetectorNoise) -> list[DetectionSet]:
    return [simulate_detections(s, noise, i) for i, s in enumerate(scenes)]


def train_test_split(n: int) -> tuple[range, range]:
    """Deterministic 9:1 split by index; the held-out part is the tail."""
    n_train = int(round(0.9 * n))
    if n >= 2:
        n_train = min(max(n_train, 1), n - 1)
    return range(0, n_train), range(n_train, n)


# ---------------------------------------------------------------------------
# JSONL files
# ---------------------------------------------------------------------------


class SceneFormatError(ValueError):
    def __init__(self, path, line: int, fieldname: str, message: str):
        self.path, self.line, self.field = str(path), line, fieldname
        super().__init__(f"{path}:{line}: field '{fieldname}': {message}")


def _num(x: float) -> str:
    return format(float(x), ".17g")


def _quad_json(q) -> str:
    return "[" + ",".join(f"[{_num(x)},{_num(y)}]" for x, y in q) + "]"


def _quads_json(quads) -> str:
    return "[" + ",".join(_quad_json(q) for q in quads) + "]"


def scene_to_json(scene: SceneAnnotation) -> str:
    words = ",".join(f'{{"text":{json.dumps(w.text)},"chars":{_quads_json(w.chars)}}}'
                     for w in scene.words)
    return (f'{{"scene_id":{json.dumps(scene.scene_id)},"image_width":{int(scene.image_width)},'
            f'"image_height":{int(scene.image_height)},"words":[{words}]}}')


def detections_to_json(det: DetectionSet) -> str:
    prov = json.dumps([list(p) if p is not None else None for p in det.provenance],
                      separators=(",", ":"))
    size = ""
    if det.image_width and det.image_height:
        size = f'"image_width":{int(det.image_width)},"image_height":{int(det.image_height)},'
    return (f'{{"scene_id":{json.dumps(det.scene_id)},{size}"boxes":{_quads_json(det.boxes)},'
            f'"provenance":{prov}}}')


def save_scenes(path, scenes) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in scenes:
            fh.write(scene_to_json(s) + "\n")


def save_detections(path, detections) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for d in detections:
            fh.write(detections_to_json(d) + "\n")


def _records(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SceneFormatError(path, lineno, "<record>", f"invalid JSON ({exc.msg})") from exc
            if not isinstance(rec, dict):
                raise SceneFormatError(path, lineno, "<record>", "record must be an object")
            yield lineno, rec


def _require(rec, key, kind, path, lineno):
    if key not in rec:
        raise SceneFormatError(path, lineno, key, "missing")
    val = rec[key]
    if kind is int and (isinstance(val, bool) or not isinstance(val, int)):
        raise SceneFormatError(path, lineno, key, "must be an integer")
    if kind is not int and not isinstance(val, kind):
        raise SceneFormatError(path, lineno, key, f"must be {kind.__name__}")
    return val


def _parse_quads(raw, path, lineno, fieldname) -> np.ndarray:
    if not isinstance(raw, list):
        raise SceneFormatError(path, lineno, fieldname, "must be a list of quads")
    quads = []
    for qi, q in enumerate(raw):
        name = f"{fieldname}[{qi}]"
        if not isinstance(q, list) or len(q) != 4:
            raise SceneFormatError(path, lineno, name, "quad must have 4 corners")
        corners = []
        for c in q:
            if (not isinstance(c, list) or len(c) != 2
                    or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in c)):
                raise SceneFormatError(path, lineno, name, "corner must be [x, y]")
            corners.append([float(c[0]), float(c[1])])
        arr = np.array(corners)
        if not np.all(np.isfinite(arr)):
            raise SceneFormatError(path, lineno, name, "coordinates must be finite")
        if signed_area(arr) < 0:
            arr = make_quad(arr)
        quads.append(arr)
    return np.array(quads) if quads else np.zeros((0, 4, 2))


def load_scenes(path) -> list[SceneAnnotation]:
    path = Path(path)
    scenes = []
    for lineno, rec in _records(path):
        sid = _require(rec, "scene_id", str, path, lineno)
        w = _require(rec, "image_width", int, path, lineno)
        h = _require(rec, "image_height", int, path, lineno)
        if w <= 0 or h <= 0:
            raise SceneFormatError(path, lineno, "image_width" if w <= 0 else "image_height",
                                   "must be positive")
        words = []
        for wi, rw in enumerate(_require(rec, "words", list, path, lineno)):
            if not isinstance(rw, dict):
                raise SceneFormatError(path, lineno, f"words[{wi}]", "must be an object")
            text = _require(rw, "text", str, path, lineno)
            chars = _parse_quads(_require(rw, "chars", list, path, lineno), path, lineno,
                                 f"words[{wi}].chars")
            if len(chars) == 0:
                raise SceneFormatError(path, lineno, f"words[{wi}].chars", "word has no characters")
            if len(chars) != len(text):
                raise SceneFormatError(path, lineno, f"words[{wi}].chars",
                                       "character count differs from text length")
            if chars.min() < 0 or np.any(chars.max(axis=(0, 1)) > [w, h]):
                raise SceneFormatError(path, lineno, f"words[{wi}].chars", "outside image bounds")
            words.append(WordAnnotation(text, chars))
        scenes.append(SceneAnnotation(sid, w, h, words))
    return scenes


def load_detections(path) -> list[DetectionSet]:
    path = Path(path)
    out = []
    for lineno, rec in _records(path):
        sid = _require(rec, "scene_id", str, path, lineno)
        boxes = _parse_quads(_require(rec, "boxes", list, path, lineno), path, lineno, "boxes")
        prov = rec.get("provenance")
        if prov is None:
            prov = [None] * len(boxes)
        elif not isinstance(prov, list) or len(prov) != len(boxes):
            raise SceneFormatError(path, lineno, "provenance", "must align with boxes")
        prov = [tuple(p) if p is not None else None for p in prov]
        size = [0, 0]
        for i, key in enumerate(("image_width", "image_height")):
            if key in rec:
                size[i] = _require(rec, key, int, path, lineno)
        out.append(DetectionSet(sid, boxes, prov, *size))
    return out


def config_dict(cfg) -> dict:
    return asdict(cfg)
