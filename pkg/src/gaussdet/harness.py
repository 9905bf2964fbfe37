"""Synthetic-scene experiment surface.

Generates seeded scenes with controlled bounding-box overlap, runs the
divergence-versus-IoU pair analysis, calibrates suppression thresholds,
synthesizes oracle prediction grids, and scores instance maps with mask AP.
Every operation is a pure function of its inputs and the seed; repeated runs
produce byte-identical artifacts.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from gaussdet.core import (
    VOID_CLASS,
    Detection,
    Gaussian2D,
    PixelSet,
    Scene,
    SceneObject,
    scene_from_json,
    scene_to_json,
)
from gaussdet.divergence import iou as box_iou
from gaussdet.divergence import sym_kl
from gaussdet.encoding import PredictionGrid, encode
from gaussdet.errors import (
    FormatError,
    InsufficientData,
    NoOverlappingPairs,
    ShapeMismatch,
    UnsatisfiableOverlap,
)
from gaussdet.fit import bbox_of, fit_gaussian
from gaussdet.losses import CellTargets
from gaussdet.postproc import (
    InstanceMap,
    NmsConfig,
    cluster_pixels,
    detections_from_grid,
    divergence_nms,
)

SHAPES = ("axis_rect", "rotated_rect", "ellipse", "ring")
OVERLAP_KINDS = ("concentric", "translated", "rotated_cross")


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for a deterministic batch of synthetic scenes."""

    seed: int
    num_scenes: int
    width: int = 128
    height: int = 128
    num_objects: tuple[int, int] = (2, 4)  # background objects per scene
    shapes: tuple[str, ...] = SHAPES
    classes: tuple[int, ...] = (1, 2, 3)
    overlap_pairs: tuple[int, int] = (1, 1)  # designated pairs per scene
    overlap_iou: tuple[float, float] = (0.56, 0.85)
    overlap_kinds: tuple[str, ...] = OVERLAP_KINDS

    def __post_init__(self):
        if self.num_scenes < 1 or self.width < 16 or self.height < 16:
            raise FormatError("spec needs at least one scene and a 16x16 canvas")
        for name in self.shapes:
            if name not in SHAPES:
                raise FormatError(f"unknown shape {name!r}")
        for name in self.overlap_kinds:
            if name not in OVERLAP_KINDS:
                raise FormatError(f"unknown overlap kind {name!r}")
        if not self.classes or any(c < 1 for c in self.classes):
            raise FormatError("classes must be non-empty and >= 1")

    def to_json(self) -> str:
        doc = {
            "seed": self.seed,
            "num_scenes": self.num_scenes,
            "width": self.width,
            "height": self.height,
            "num_objects": list(self.num_objects),
            "shapes": list(self.shapes),
            "classes": list(self.classes),
            "overlap_pairs": list(self.overlap_pairs),
            "overlap_iou": list(self.overlap_iou),
            "overlap_kinds": list(self.overlap_kinds),
        }
        return json.dumps(doc, separators=(",", ":"))

    @staticmethod
    def from_json(doc: str | dict) -> "SynthSpec":
        data = json.loads(doc) if isinstance(doc, str) else doc
        try:
            return SynthSpec(
                seed=int(data["seed"]),
                num_scenes=int(data["num_scenes"]),
                width=int(data.get("width", 128)),
                height=int(data.get("height", 128)),
                num_objects=tuple(data.get("num_objects", (2, 4))),
                shapes=tuple(data.get("shapes", SHAPES)),
                classes=tuple(data.get("classes", (1, 2, 3))),
                overlap_pairs=tuple(data.get("overlap_pairs", (1, 1))),
                overlap_iou=tuple(data.get("overlap_iou", (0.56, 0.85))),
                overlap_kinds=tuple(data.get("overlap_kinds", OVERLAP_KINDS)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"bad synth spec document: {exc}") from exc


@dataclass(frozen=True)
class DesignedPair:
    """Bookkeeping for a generated overlap pair."""

    scene_id: int
    obj_a: int
    obj_b: int
    kind: str
    target_iou: float
    realized_iou: float


@dataclass(frozen=True)
class PairRecord:
    """One unordered within-scene object pair with both similarity measures."""

    scene_id: int
    obj_a: int
    obj_b: int
    iou: float
    sym_kl: float
    same_class: bool
    class_a: int | None = None
    class_b: int | None = None


# ---------------------------------------------------------------------------
# Shape rasterizers: (N, 2) integer pixel coordinates, centers on the lattice.
# ---------------------------------------------------------------------------


def _axis_rect(x0: int, y0: int, w: int, h: int) -> np.ndarray:
    xs, ys = np.meshgrid(np.arange(x0, x0 + w), np.arange(y0, y0 + h))
    return np.stack([xs.ravel(), ys.ravel()], axis=1)


def _ellipse(cx: int, cy: int, a: float, b: float) -> np.ndarray:
    ra, rb = int(math.floor(a)), int(math.floor(b))
    xs, ys = np.meshgrid(np.arange(-ra, ra + 1), np.arange(-rb, rb + 1))
    inside = (xs / a) ** 2 + (ys / b) ** 2 <= 1.0
    return np.stack([xs[inside] + cx, ys[inside] + cy], axis=1)


def _ring(cx: int, cy: int, r_in: float, r_out: float) -> np.ndarray:
    r = int(math.floor(r_out))
    xs, ys = np.meshgrid(np.arange(-r, r + 1), np.arange(-r, r + 1))
    d2 = xs**2 + ys**2
    inside = (d2 > r_in**2) & (d2 <= r_out**2)
    return np.stack([xs[inside] + cx, ys[inside] + cy], axis=1)


def _rotated_rect(cx: int, cy: int, length: float, width: float, theta: float) -> np.ndarray:
    ext_x = (length * abs(math.cos(theta)) + width * abs(math.sin(theta))) / 2.0
    ext_y = (length * abs(math.sin(theta)) + width * abs(math.cos(theta))) / 2.0
    rx, ry = int(math.ceil(ext_x)), int(math.ceil(ext_y))
    xs, ys = np.meshgrid(np.arange(-rx, rx + 1), np.arange(-ry, ry + 1))
    u = xs * math.cos(theta) + ys * math.sin(theta)
    v = -xs * math.sin(theta) + ys * math.cos(theta)
    inside = (np.abs(u) <= length / 2.0) & (np.abs(v) <= width / 2.0)
    return np.stack([xs[inside] + cx, ys[inside] + cy], axis=1)


def _coords_bbox(coords: np.ndarray):
    return bbox_of(coords)


def _steal(earlier: np.ndarray, later: np.ndarray) -> np.ndarray:
    """Pixels of ``earlier`` not claimed by ``later`` (later object wins)."""
    taken = {(int(x), int(y)) for x, y in later}
    keep = [i for i, (x, y) in enumerate(earlier) if (int(x), int(y)) not in taken]
    return earlier[keep]


def _pair_realized_iou(a: np.ndarray, b: np.ndarray) -> tuple[float, np.ndarray]:
    a_kept = _steal(a, b)
    if len(a_kept) < 8:
        return -1.0, a_kept
    return box_iou(_coords_bbox(a_kept), _coords_bbox(b)), a_kept


# ---------------------------------------------------------------------------
# Overlap pair construction
# ---------------------------------------------------------------------------

_IOU_TOL = 0.05


def _build_concentric(rng, target, canvas):
    """Thin ring with an ellipse filling its hole; boxes nest, masks disjoint."""
    w, h = canvas
    root = math.sqrt(target)
    r_max = (min(w, h) - 10) / 2
    valid = []
    for r_out in range(8, int(r_max) + 1):
        a = (root * (2 * r_out + 1) - 1) / 2.0
        if a >= 3.0 and r_out - a >= 1.8:
            valid.append((r_out, a))
    if not valid:
        return None
    r_out, a = valid[int(rng.integers(len(valid)))]
    q = float(rng.uniform(0.92, 1.0))  # slight anisotropy of the inner ellipse
    best = None
    for da in (0.0, 0.5, -0.5, 1.0):
        aa = a + da
        if aa < 3.0 or r_out - aa < 1.4:
            continue
        ring = _ring(0, 0, aa + 0.55, r_out)
        ell = _ellipse(0, 0, aa, max(3.0, aa * q))
        if len(ring) < 8 or len(ell) < 8:
            continue
        realized = box_iou(_coords_bbox(ring), _coords_bbox(ell))
        err = abs(realized - target)
        if best is None or err < best[0]:
            best = (err, ring, ell, realized)
    if best is None or best[0] > _IOU_TOL:
        return None
    _, ring, ell, realized = best
    return ring, ell, realized


def _build_translated(rng, target, canvas):
    """Two equal rectangles offset diagonally; the later one wins the corner."""
    ws = int(rng.integers(14, 27))
    hs = int(rng.integers(14, 27))
    area = ws * hs
    f = 2.0 * area * target / (1.0 + target)
    disc = (ws + hs) ** 2 - 4.0 * (area - f)
    if disc <= 0:
        return None
    d_real = ((ws + hs) - math.sqrt(disc)) / 2.0
    best = None
    for d in {max(1, math.floor(d_real)), max(1, math.ceil(d_real))}:
        if d >= min(ws, hs) - 2:
            continue
        inter = (ws - d) * (hs - d)
        realized = inter / (2.0 * area - inter)
        err = abs(realized - target)
        if best is None or err < best[0]:
            best = (err, d)
    if best is None or best[0] > _IOU_TOL:
        return None
    d = best[1]
    first = _axis_rect(0, 0, ws, hs)
    second = _axis_rect(d, d, ws, hs)
    realized, _ = _pair_realized_iou(first, second)
    if realized < 0 or abs(realized - target) > _IOU_TOL:
        return None
    return first, second, realized


def _cross_box_iou(length, width, theta):
    x1 = length * math.cos(theta) + width * math.sin(theta)
    y1 = length * math.sin(theta) + width * math.cos(theta)
    m = min(x1, y1)
    return m * m / (2.0 * x1 * y1 - m * m)


def _build_rotated_cross(rng, target, canvas):
    """Two perpendicular elongated rectangles sharing a center."""
    length = float(rng.uniform(26, 40))
    width = float(rng.uniform(6, 10))
    lo, hi = 0.06, math.pi / 4 - 0.02
    if not (_cross_box_iou(length, width, lo) <= target <= _cross_box_iou(length, width, hi)):
        return None
    for _ in range(60):
        mid = (lo + hi) / 2.0
        if _cross_box_iou(length, width, mid) < target:
            lo = mid
        else:
            hi = mid
    theta = (lo + hi) / 2.0
    best = None
    for jitter in (0.0, 0.02, -0.02, 0.045, -0.045):
        t = theta + jitter
        if not (0.03 < t < math.pi / 4):
            continue
        first = _rotated_rect(0, 0, length, width, t)
        second = _rotated_rect(0, 0, length, width, t + math.pi / 2)
        realized, kept = _pair_realized_iou(first, second)
        if realized < 0:
            continue
        err = abs(realized - target)
        if best is None or err < best[0]:
            best = (err, first, second, realized)
    if best is None or best[0] > _IOU_TOL:
        return None
    _, first, second, realized = best
    return first, second, realized


_PAIR_BUILDERS = {
    "concentric": _build_concentric,
    "translated": _build_translated,
    "rotated_cross": _build_rotated_cross,
}


def _boxes_clear(box, occupied, margin):
    x0, y0, x1, y1 = box
    for ox0, oy0, ox1, oy1 in occupied:
        if not (x1 + margin <= ox0 or ox1 + margin <= x0 or y1 + margin <= oy0 or oy1 + margin <= y0):
            return False
    return True


def _place(rng, coords_list, canvas, occupied, margin, tries=40):
    """Shift a group of local-frame shapes to a free spot; None if crowded."""
    w, h = canvas
    allc = np.concatenate(coords_list)
    x_lo, y_lo = allc.min(axis=0)
    x_hi, y_hi = allc.max(axis=0)
    bw, bh = int(x_hi - x_lo + 1), int(y_hi - y_lo + 1)
    if bw + 2 >= w or bh + 2 >= h:
        return None
    for _ in range(tries):
        x0 = int(rng.integers(1, w - bw - 1))
        y0 = int(rng.integers(1, h - bh - 1))
        box = (x0, y0, x0 + bw, y0 + bh)
        if _boxes_clear(box, occupied, margin):
            occupied.append(box)
            shift = np.array([x0 - x_lo, y0 - y_lo], dtype=np.int64)
            return [c + shift for c in coords_list]
    return None


def _background_shape(rng, name, canvas):
    size = int(rng.integers(8, 19))
    if name == "axis_rect":
        return _axis_rect(0, 0, size, max(6, int(rng.integers(8, 19))))
    if name == "ellipse":
        return _ellipse(0, 0, size / 2.0, max(3.0, float(rng.uniform(3, size / 2.0 + 1))))
    if name == "ring":
        r_out = max(5.0, size / 2.0)
        return _ring(0, 0, r_out * float(rng.uniform(0.45, 0.7)), r_out)
    if name == "rotated_rect":
        return _rotated_rect(0, 0, size + 6, max(4.0, size / 2.5), float(rng.uniform(0, math.pi)))
    raise FormatError(f"unknown shape {name!r}")


def _gen_scene(spec: SynthSpec, rng, scene_id: int):
    canvas = (spec.width, spec.height)
    for _ in range(25):  # scene-level retries
        occupied: list[tuple] = []
        painted: list[tuple[np.ndarray, int]] = []  # (coords, class_id) in paint order
        pair_meta = []
        ok = True
        n_pairs = int(rng.integers(spec.overlap_pairs[0], spec.overlap_pairs[1] + 1))
        for _ in range(n_pairs):
            kind = spec.overlap_kinds[int(rng.integers(len(spec.overlap_kinds)))]
            target = float(rng.uniform(*spec.overlap_iou))
            built = None
            for _ in range(12):
                built = _PAIR_BUILDERS[kind](rng, target, canvas)
                if built is not None:
                    break
            if built is None:
                ok = False
                break
            first, second, realized = built
            placed = _place(rng, [first, second], canvas, occupied, margin=4)
            if placed is None:
                ok = False
                break
            cls = int(spec.classes[int(rng.integers(len(spec.classes)))])
            idx_a, idx_b = len(painted), len(painted) + 1
            painted.append((placed[0], cls))
            painted.append((placed[1], cls))
            pair_meta.append((idx_a, idx_b, kind, target, realized))
        if not ok:
            continue
        n_bg = int(rng.integers(spec.num_objects[0], spec.num_objects[1] + 1))
        for _ in range(n_bg):
            name = spec.shapes[int(rng.integers(len(spec.shapes)))]
            coords = _background_shape(rng, name, canvas)
            placed = _place(rng, [coords], canvas, occupied, margin=3)
            if placed is None:
                ok = False
                break
            cls = int(spec.classes[int(rng.integers(len(spec.classes)))])
            painted.append((placed[0], cls))
        if not ok:
            continue

        owner = np.full((spec.height, spec.width), -1, dtype=np.int32)
        for i, (coords, _) in enumerate(painted):
            owner[coords[:, 1], coords[:, 0]] = i
        objects = []
        semantic = np.full((spec.height, spec.width), VOID_CLASS, dtype=np.int64)
        empty = False
        for i, (_, cls) in enumerate(painted):
            ys, xs = np.nonzero(owner == i)
            if xs.size < 8:
                empty = True
                break
            objects.append(SceneObject(i + 1, cls, PixelSet(np.stack([xs, ys], axis=1))))
            semantic[ys, xs] = cls
        if empty:
            continue
        scene = Scene(spec.width, spec.height, objects, semantic)
        pairs = [
            DesignedPair(scene_id, a + 1, b + 1, kind, target, realized)
            for a, b, kind, target, realized in pair_meta
        ]
        return scene, pairs
    raise UnsatisfiableOverlap(
        f"scene {scene_id}: could not realize the requested geometry "
        f"(target IoU range {spec.overlap_iou})"
    )


def synth_scenes_with_pairs(spec: SynthSpec) -> tuple[list[Scene], list[DesignedPair]]:
    rng = np.random.default_rng(spec.seed)
    scenes, pairs = [], []
    for scene_id in range(spec.num_scenes):
        scene, meta = _gen_scene(spec, rng, scene_id)
        scenes.append(scene)
        pairs.extend(meta)
    return scenes, pairs


def synth_scenes(spec: SynthSpec) -> list[Scene]:
    """Deterministic rasterized scenes; same seed gives byte-identical JSON."""
    return synth_scenes_with_pairs(spec)[0]


# ---------------------------------------------------------------------------
# Pair analysis and thresholds
# ---------------------------------------------------------------------------


def pair_analysis(scenes: Sequence[Scene]) -> list[PairRecord]:
    """Fit every object and record (box IoU, symmetrized KL) per object pair."""
    records = []
    for scene_id, scene in enumerate(scenes):
        fits = [fit_gaussian(o.pixels) for o in scene.objects]
        boxes = [bbox_of(o.pixels) for o in scene.objects]
        for i in range(len(scene.objects)):
            for j in range(i + 1, len(scene.objects)):
                oi, oj = scene.objects[i], scene.objects[j]
                records.append(
                    PairRecord(
                        scene_id=scene_id,
                        obj_a=oi.object_id,
                        obj_b=oj.object_id,
                        iou=box_iou(boxes[i], boxes[j]),
                        sym_kl=sym_kl(fits[i], fits[j]),
                        same_class=oi.class_id == oj.class_id,
                        class_a=oi.class_id,
                        class_b=oj.class_id,
                    )
                )
    return records


PAIR_CSV_COLUMNS = ("scene_id", "obj_a", "obj_b", "iou", "sym_kl", "same_class")


def write_pair_csv(records: Sequence[PairRecord], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(PAIR_CSV_COLUMNS)
        for r in records:
            writer.writerow(
                [r.scene_id, r.obj_a, r.obj_b, repr(r.iou), repr(r.sym_kl), int(r.same_class)]
            )


def read_pair_csv(path: str | Path) -> list[PairRecord]:
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != PAIR_CSV_COLUMNS:
            raise FormatError(f"unexpected pair CSV header {reader.fieldnames}")
        for row in reader:
            records.append(
                PairRecord(
                    scene_id=int(row["scene_id"]),
                    obj_a=int(row["obj_a"]),
                    obj_b=int(row["obj_b"]),
                    iou=float(row["iou"]),
                    sym_kl=float(row["sym_kl"]),
                    same_class=bool(int(row["same_class"])),
                )
            )
    return records


@dataclass(frozen=True)
class DecouplingReport:
    """How many high-overlap same-class pairs each measure can still separate."""

    tau: float
    overlapping_pairs: int
    iou_failures: int
    kl_failures: int
    reduction: float

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "overlapping_pairs": self.overlapping_pairs,
            "iou_failures": self.iou_failures,
            "kl_failures": self.kl_failures,
            "reduction": self.reduction,
        }


def decoupling_report(records: Sequence[PairRecord], tau: float) -> DecouplingReport:
    """Count same-class pairs with box IoU above 0.5 that divergence separates.

    Every such pair is a failure for the IoU criterion by definition; a pair
    also fails under divergence when its symmetrized KL is below tau.
    """
    overlapping = [r for r in records if r.same_class and r.iou > 0.5]
    if not overlapping:
        raise NoOverlappingPairs("no same-class pairs with IoU above 0.5")
    kl_failures = sum(1 for r in overlapping if r.sym_kl < tau)
    return DecouplingReport(
        tau=tau,
        overlapping_pairs=len(overlapping),
        iou_failures=len(overlapping),
        kl_failures=kl_failures,
        reduction=1.0 - kl_failures / len(overlapping),
    )


def _envelope(values: list[float], max_false_merge: float) -> float:
    ordered = sorted(values)
    allowed = min(int(math.floor(max_false_merge * len(ordered))), len(ordered) - 1)
    return ordered[allowed]


def calibrate_tau(
    records: Sequence[PairRecord],
    max_false_merge: float,
    min_class_count: int = 10,
) -> NmsConfig:
    """Largest threshold leaving at most the requested fraction of distinct
    same-class pairs below it; per-class values where data suffices."""
    if not records:
        raise InsufficientData("no pair records to calibrate from")
    if not (0.0 <= max_false_merge < 1.0):
        raise ValueError("max_false_merge must be in [0, 1)")
    same = [r for r in records if r.same_class]
    pool = same if same else list(records)
    default = _envelope([r.sym_kl for r in pool], max_false_merge)
    if default <= 0:
        raise InsufficientData("records contain identical-representation pairs")
    per_class: dict[int, float] = {}
    by_class: dict[int, list[float]] = {}
    for r in same:
        if r.class_a is not None:
            by_class.setdefault(r.class_a, []).append(r.sym_kl)
    for cls, values in sorted(by_class.items()):
        if len(values) >= min_class_count:
            tau = _envelope(values, max_false_merge)
            if tau > 0:
                per_class[cls] = tau
    return NmsConfig(default_tau=default, thresholds=per_class)


# ---------------------------------------------------------------------------
# Oracle grids and ground-truth cell targets
# ---------------------------------------------------------------------------


def _cell_owner_counts(scene: Scene, scale: int) -> np.ndarray:
    """(Hg, Wg, K+1) pixel counts per cell for background and each object."""
    if scene.width % scale or scene.height % scale:
        raise ShapeMismatch(
            f"scene {scene.width}x{scene.height} not divisible by scale {scale}"
        )
    inst = scene.instance_index_map()
    hg, wg = scene.height // scale, scene.width // scale
    blocks = inst.reshape(hg, scale, wg, scale).transpose(0, 2, 1, 3).reshape(hg, wg, -1)
    k = len(scene.objects)
    counts = np.zeros((hg, wg, k + 1), dtype=np.int64)
    for v in range(k + 1):
        counts[..., v] = (blocks == v).sum(axis=2)
    return counts


def _grid_anchor(ix, iy, scale):
    return ((ix + 0.5) * scale - 0.5, (iy + 0.5) * scale - 0.5)


def oracle_grid(
    scene: Scene, scale: int = 1, n: int = 1, noise: float = 0.0, seed: int = 0
) -> PredictionGrid:
    """Prediction grid encoding exactly what a perfect model would emit.

    Cells dominated by object pixels carry that object's fitted Gaussian in
    candidate 0 (optionally perturbed in encoded space) with the top logit;
    remaining candidates are far-away decoys. Semantic scores follow the
    ground truth everywhere.
    """
    if n < 1:
        raise FormatError("need at least one candidate")
    counts = _cell_owner_counts(scene, scale)
    hg, wg = counts.shape[:2]
    fits = [fit_gaussian(o.pixels) for o in scene.objects]
    num_classes = max([c for c in (o.class_id for o in scene.objects)], default=0) + 1

    rng = np.random.default_rng(seed)
    params = np.zeros((hg, wg, n, 5), dtype=np.float64)
    logits = np.zeros((hg, wg, n), dtype=np.float64)
    class_scores = np.zeros((hg, wg, num_classes), dtype=np.float64)
    for k in range(n):  # decoys everywhere first
        params[..., k, 0] = 37.0 + 3.0 * k
        params[..., k, 1] = -29.0 - 3.0 * k

    owner = np.argmax(counts, axis=2)  # ties resolve to background first
    fg_owner = np.argmax(counts[..., 1:], axis=2) + 1
    any_fg = counts[..., 1:].sum(axis=2) > 0

    for iy in range(hg):
        for ix in range(wg):
            cls = VOID_CLASS
            o = owner[iy, ix]
            if o > 0:
                cls = scene.objects[o - 1].class_id
            class_scores[iy, ix, cls] = 4.0
            if not any_fg[iy, ix]:
                continue
            obj = fg_owner[iy, ix] - 1
            enc = encode(_grid_anchor(ix, iy, scale), fits[obj]).as_array()
            if noise > 0:
                enc = enc + rng.normal(0.0, noise, size=5)
            params[iy, ix, 0] = enc
            logits[iy, ix, 0] = 4.0
    return PredictionGrid(wg, hg, scale, params, logits, class_scores)


def cell_targets_from_scene(scene: Scene, scale: int = 1) -> CellTargets:
    """Ground-truth Gaussians and classes at grid resolution (majority rule)."""
    counts = _cell_owner_counts(scene, scale)
    owner = np.argmax(counts, axis=2)
    hg, wg = owner.shape
    fits = [fit_gaussian(o.pixels).as_array() for o in scene.objects]
    params = np.zeros((hg, wg, 5), dtype=np.float64)
    params[..., 2:4] = 1.0  # benign placeholder on background cells
    class_ids = np.full((hg, wg), VOID_CLASS, dtype=np.int64)
    for i, obj in enumerate(scene.objects):
        mask = owner == i + 1
        params[mask] = fits[i]
        class_ids[mask] = obj.class_id
    return CellTargets(params=params, foreground=owner > 0, class_ids=class_ids)


def run_pipeline(grid: PredictionGrid, cfg: NmsConfig) -> tuple[list[Detection], InstanceMap]:
    """Dense grid to final instances: extract, suppress, cluster."""
    kept = divergence_nms(detections_from_grid(grid), cfg)
    return kept, cluster_pixels(grid, kept)


# ---------------------------------------------------------------------------
# Mask AP evaluation
# ---------------------------------------------------------------------------

AP_THRESHOLDS = tuple(0.5 + 0.05 * i for i in range(10))


@dataclass(frozen=True)
class ApResult:
    """Per-class average precision across mask-IoU thresholds."""

    per_class: dict[int, dict[float, float]] = field(default_factory=dict)

    def class_ap(self, class_id: int) -> float:
        values = self.per_class[class_id]
        return sum(values.values()) / len(values)

    @property
    def ap(self) -> float:
        if not self.per_class:
            return 0.0
        return sum(self.class_ap(c) for c in self.per_class) / len(self.per_class)

    def at_threshold(self, threshold: float) -> float:
        if not self.per_class:
            return 0.0
        return sum(v[threshold] for v in self.per_class.values()) / len(self.per_class)

    @property
    def ap50(self) -> float:
        return self.at_threshold(0.5)

    def to_dict(self) -> dict:
        return {
            "ap": self.ap,
            "ap50": self.ap50,
            "per_class": {
                str(c): {f"{t:.2f}": v for t, v in sorted(vals.items())}
                for c, vals in sorted(self.per_class.items())
            },
        }


def _mask_iou(a: frozenset, b: frozenset) -> float:
    inter = len(a & b)
    if inter == 0:
        return 0.0
    return inter / (len(a) + len(b) - inter)


def evaluate_ap(
    pred: InstanceMap, gt: Scene, iou_thresholds: Sequence[float] = AP_THRESHOLDS
) -> ApResult:
    """Greedy mask matching per class; predictions ranked by instance id."""
    if (pred.width, pred.height) != (gt.width, gt.height):
        raise ShapeMismatch(
            f"prediction {pred.width}x{pred.height} vs scene {gt.width}x{gt.height}"
        )
    gt_by_class: dict[int, list[frozenset]] = {}
    for obj in gt.objects:
        flat = frozenset((obj.pixels.ys * gt.width + obj.pixels.xs).tolist())
        gt_by_class.setdefault(obj.class_id, []).append(flat)
    pred_by_class: dict[int, list[frozenset]] = {}
    for inst_id in sorted(pred.classes):
        ys, xs = np.nonzero(pred.ids == inst_id)
        if xs.size == 0:
            continue
        flat = frozenset((ys * pred.width + xs).tolist())
        pred_by_class.setdefault(pred.classes[inst_id], []).append(flat)

    per_class: dict[int, dict[float, float]] = {}
    for cls, gt_masks in gt_by_class.items():
        preds = pred_by_class.get(cls, [])
        per_class[cls] = {
            float(t): _average_precision(preds, gt_masks, float(t))
            for t in iou_thresholds
        }
    return ApResult(per_class=per_class)


def _average_precision(preds, gt_masks, threshold):
    matched: set[int] = set()
    tp = 0
    precision_sum = 0.0
    for k, mask in enumerate(preds, start=1):
        best_iou, best_j = 0.0, -1
        for j, gt_mask in enumerate(gt_masks):
            if j in matched:
                continue
            value = _mask_iou(mask, gt_mask)
            if value > best_iou:
                best_iou, best_j = value, j
        if best_j >= 0 and best_iou >= threshold:
            matched.add(best_j)
            tp += 1
            precision_sum += tp / k
    return precision_sum / len(gt_masks)


# ---------------------------------------------------------------------------
# Preset suites and scene persistence
# ---------------------------------------------------------------------------


def separated_suite(seed: int = 20240, num_scenes: int = 20) -> list[Scene]:
    """Scenes whose objects are mutually far apart in divergence (>= 10)."""
    spec = SynthSpec(
        seed=seed,
        num_scenes=num_scenes,
        width=96,
        height=96,
        num_objects=(3, 4),
        overlap_pairs=(0, 0),
        classes=(1, 2, 3),
    )
    scenes = synth_scenes(spec)
    for scene in scenes:
        fits = [fit_gaussian(o.pixels) for o in scene.objects]
        for i in range(len(fits)):
            for j in range(i + 1, len(fits)):
                if sym_kl(fits[i], fits[j]) < 10.0:
                    raise UnsatisfiableOverlap(
                        "separated suite produced a close pair; adjust the seed"
                    )
    return scenes


def overlap_suite(seed: int = 7151, num_scenes: int = 90) -> tuple[list[Scene], list[DesignedPair]]:
    """High-overlap same-class pairs of all kinds, for the decoupling study."""
    spec = SynthSpec(
        seed=seed,
        num_scenes=num_scenes,
        width=144,
        height=144,
        num_objects=(1, 3),
        overlap_pairs=(2, 3),
        overlap_iou=(0.56, 0.85),
        classes=(1, 2, 3),
    )
    return synth_scenes_with_pairs(spec)


def save_scenes(scenes: Sequence[Scene], out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, scene in enumerate(scenes):
        path = out / f"scene_{i:04d}.json"
        path.write_text(scene_to_json(scene))
        paths.append(path)
    return paths


def load_scenes(path: str | Path) -> list[Scene]:
    p = Path(path)
    if p.is_dir():
        return [scene_from_json(f.read_text()) for f in sorted(p.glob("*.json"))]
    return [scene_from_json(p.read_text())]
