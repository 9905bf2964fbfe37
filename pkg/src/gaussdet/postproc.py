"""Detection post-processing: divergence NMS and pixel-to-instance clustering.

Suppression uses the symmetrized divergence in place of box IoU and is
class-isolated; clustering assigns each foreground pixel to its
nearest-in-divergence surviving detection.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from gaussdet import kernels
from gaussdet.core import Detection, Gaussian2D, validate_gaussian
from gaussdet.divergence import sym_kl
from gaussdet.encoding import PredictionGrid, decode_grid
from gaussdet.errors import FormatError, NoDetections


@dataclass(frozen=True)
class NmsConfig:
    """Per-class suppression thresholds with a fallback default."""

    default_tau: float
    thresholds: dict[int, float] = field(default_factory=dict)

    def __post_init__(self):
        taus = [self.default_tau, *self.thresholds.values()]
        if any(not np.isfinite(t) or t <= 0 for t in taus):
            raise ValueError("every threshold must be finite and positive")

    def tau_for(self, class_id: int) -> float:
        return self.thresholds.get(class_id, self.default_tau)


def _score_order(dets: Sequence[Detection]) -> list[int]:
    # Descending score; equal scores keep input order.
    return sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))


def divergence_nms(dets: Sequence[Detection], cfg: NmsConfig) -> list[Detection]:
    """Greedy suppression: drop a detection when some already-kept detection
    of the same class is closer than the class threshold."""
    for d in dets:
        validate_gaussian(d.gaussian)
    kept: list[Detection] = []
    kept_params: dict[int, list[np.ndarray]] = {}
    for i in _score_order(dets):
        det = dets[i]
        tau = cfg.tau_for(det.class_id)
        rows = kept_params.get(det.class_id)
        if rows:
            div = kernels.sym_kl_cross(
                det.gaussian.as_array()[None, :], np.stack(rows)
            )
            if float(div.min()) < tau:
                continue
        kept.append(det)
        kept_params.setdefault(det.class_id, []).append(det.gaussian.as_array())
    return kept


def brute_force_nms(dets: Sequence[Detection], cfg: NmsConfig) -> list[Detection]:
    """Literal O(n^2) restatement of divergence_nms, kept as a test oracle."""
    for d in dets:
        validate_gaussian(d.gaussian)
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
    kept: list[Detection] = []
    for i in order:
        cand = dets[i]
        suppressed = False
        for prev in kept:
            if prev.class_id != cand.class_id:
                continue
            if sym_kl(cand.gaussian, prev.gaussian) < cfg.tau_for(cand.class_id):
                suppressed = True
                break
        if not suppressed:
            kept.append(cand)
    return kept


def detections_from_grid(grid: PredictionGrid) -> list[Detection]:
    """One detection per foreground cell, scored by semantic confidence.

    Cells are visited in raster order, which fixes the NMS tie order.
    """
    decoded = decode_grid(grid)
    scores = grid.class_scores
    shifted = scores - scores.max(axis=2, keepdims=True)
    probs = np.exp(shifted)
    probs /= probs.sum(axis=2, keepdims=True)
    out: list[Detection] = []
    for iy in range(grid.height):
        for ix in range(grid.width):
            cls = int(decoded.class_ids[iy, ix])
            if cls == 0:
                continue
            out.append(
                Detection(
                    gaussian=decoded.gaussian_at(ix, iy),
                    class_id=cls,
                    score=float(probs[iy, ix, cls]),
                )
            )
    return out


@dataclass
class InstanceMap:
    """Dense instance labeling: 0 is background, id i maps to one detection."""

    width: int
    height: int
    ids: np.ndarray  # (H, W) int32
    classes: dict[int, int]  # instance id -> class id

    def class_map(self) -> np.ndarray:
        out = np.zeros((self.height, self.width), dtype=np.int64)
        for inst_id, cls in self.classes.items():
            out[self.ids == inst_id] = cls
        return out

    def masks(self) -> dict[int, np.ndarray]:
        return {i: self.ids == i for i in self.classes}

    def to_json(self) -> str:
        from gaussdet.core import PixelSet, pixels_to_rle

        instances = []
        for inst_id in sorted(self.classes):
            ys, xs = np.nonzero(self.ids == inst_id)
            if xs.size == 0:
                continue
            pset = PixelSet(np.stack([xs, ys], axis=1))
            instances.append(
                {
                    "id": int(inst_id),
                    "class": int(self.classes[inst_id]),
                    "rle": {
                        "counts": pixels_to_rle(pset, self.width, self.height),
                        "order": "row-major",
                    },
                }
            )
        doc = {"width": self.width, "height": self.height, "instances": instances}
        return json.dumps(doc, separators=(",", ":"))

    @staticmethod
    def from_json(doc: str | dict) -> "InstanceMap":
        from gaussdet.core import rle_to_pixels

        data = json.loads(doc) if isinstance(doc, str) else doc
        try:
            width, height = int(data["width"]), int(data["height"])
            instances = data["instances"]
        except (KeyError, TypeError) as exc:
            raise FormatError(f"bad instance map document: {exc}") from exc
        ids = np.zeros((height, width), dtype=np.int32)
        classes: dict[int, int] = {}
        for entry in instances:
            coords = rle_to_pixels(entry["rle"]["counts"], width, height)
            ids[coords[:, 1], coords[:, 0]] = int(entry["id"])
            classes[int(entry["id"])] = int(entry["class"])
        return InstanceMap(width, height, ids, classes)


def cluster_pixels(grid: PredictionGrid, kept: Sequence[Detection]) -> InstanceMap:
    """Assign every foreground pixel to the nearest kept detection.

    Nearness is symmetrized divergence between the pixel's decoded Gaussian
    and the detection. Assignment is restricted to detections of the pixel's
    class when any exist, otherwise it falls back to all kept detections.
    Instance id i corresponds to kept[i - 1]; ties go to the earlier kept
    detection.
    """
    decoded = decode_grid(grid)
    fg_cells = decoded.class_ids != 0
    width = grid.width * grid.scale
    height = grid.height * grid.scale
    if not np.any(fg_cells):
        return InstanceMap(width, height, np.zeros((height, width), np.int32), {})
    if not kept:
        raise NoDetections("foreground pixels present but no detections given")
    for d in kept:
        validate_gaussian(d.gaussian)

    cell_params = decoded.params[fg_cells]
    cell_classes = decoded.class_ids[fg_cells]
    det_params = np.stack([d.gaussian.as_array() for d in kept])
    det_classes = np.array([d.class_id for d in kept])

    div = kernels.sym_kl_cross(cell_params, det_params)  # (F, M)
    class_match = cell_classes[:, None] == det_classes[None, :]
    has_match = class_match.any(axis=1)
    restricted = np.where(class_match, div, np.inf)
    # Cells whose class has no detection fall back to the unrestricted row.
    effective = np.where(has_match[:, None], restricted, div)
    assignment = np.argmin(effective, axis=1)

    cell_ids = np.zeros((grid.height, grid.width), dtype=np.int32)
    cell_ids[fg_cells] = assignment.astype(np.int32) + 1
    ids = np.repeat(np.repeat(cell_ids, grid.scale, axis=0), grid.scale, axis=1)
    used = np.unique(ids)
    classes = {int(i): kept[int(i) - 1].class_id for i in used if i != 0}
    return InstanceMap(width, height, ids, classes)


# -- Detection JSON interchange ------------------------------------------


def detections_to_json(dets: Sequence[Detection]) -> str:
    doc = [
        {
            "gaussian": {
                "mu_x": d.gaussian.mu_x,
                "mu_y": d.gaussian.mu_y,
                "sigma_x": d.gaussian.sigma_x,
                "sigma_y": d.gaussian.sigma_y,
                "rho": d.gaussian.rho,
            },
            "class": d.class_id,
            "score": d.score,
        }
        for d in dets
    ]
    return json.dumps(doc, separators=(",", ":"))


def detections_from_json(doc: str | list) -> list[Detection]:
    data = json.loads(doc) if isinstance(doc, str) else doc
    out = []
    for entry in data:
        try:
            g = entry["gaussian"]
            out.append(
                Detection(
                    gaussian=Gaussian2D(
                        float(g["mu_x"]),
                        float(g["mu_y"]),
                        float(g["sigma_x"]),
                        float(g["sigma_y"]),
                        float(g["rho"]),
                    ),
                    class_id=int(entry["class"]),
                    score=float(entry["score"]),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"bad detection entry: {exc}") from exc
    return out
