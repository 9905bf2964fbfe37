"""Location-invariant per-pixel parameterization and mixture candidate selection.

A prediction at pixel (m, n) carries, per candidate, the offset of the pixel
from the object mean, log standard deviations, atanh correlation, and a
likelihood logit. Selection is a hard argmax over logits, which is what keeps
down-scaled grids free of blended boundary distributions: an unseen candidate
can never be emitted.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from gaussdet.core import RHO_MAX, Gaussian2D, validate_gaussian
from gaussdet.errors import EmptyCandidateSet, FormatError


@dataclass(frozen=True)
class EncodedParams:
    """Unconstrained five-parameter encoding relative to an anchor pixel."""

    dx: float
    dy: float
    log_sigma_x: float
    log_sigma_y: float
    atanh_rho: float

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.dx, self.dy, self.log_sigma_x, self.log_sigma_y, self.atanh_rho],
            dtype=np.float64,
        )

    @staticmethod
    def from_array(values: Sequence[float]) -> "EncodedParams":
        a, b, c, d, e = (float(v) for v in values)
        return EncodedParams(a, b, c, d, e)


@dataclass(frozen=True)
class Candidate:
    params: EncodedParams
    logit: float


@dataclass(frozen=True)
class CandidateSet:
    """The n mixture hypotheses produced at one cell."""

    candidates: tuple[Candidate, ...]


def encode(pixel: tuple[float, float], g: Gaussian2D) -> EncodedParams:
    """Encode a Gaussian relative to an anchor pixel."""
    validate_gaussian(g)
    x, y = float(pixel[0]), float(pixel[1])
    return EncodedParams(
        dx=x - g.mu_x,
        dy=y - g.mu_y,
        log_sigma_x=math.log(g.sigma_x),
        log_sigma_y=math.log(g.sigma_y),
        atanh_rho=math.atanh(g.rho),
    )


def decode(pixel: tuple[float, float], e: EncodedParams) -> Gaussian2D:
    """Inverse of ``encode``. Correlation is clamped to stay valid."""
    values = e.as_array()
    if not np.all(np.isfinite(values)):
        raise FormatError(f"encoded parameters must be finite, got {values}")
    x, y = float(pixel[0]), float(pixel[1])
    rho = max(-RHO_MAX, min(RHO_MAX, math.tanh(e.atanh_rho)))
    return Gaussian2D(
        mu_x=x - e.dx,
        mu_y=y - e.dy,
        sigma_x=math.exp(e.log_sigma_x),
        sigma_y=math.exp(e.log_sigma_y),
        rho=rho,
    )


def select_candidate(c: CandidateSet) -> int:
    """Index of the most likely candidate; ties go to the lowest index."""
    if not c.candidates:
        raise EmptyCandidateSet("candidate set has no entries")
    best = 0
    for i, cand in enumerate(c.candidates):
        if cand.logit > c.candidates[best].logit:
            best = i
    return best


class PredictionGrid:
    """Dense per-cell mixture predictions at a down-scaled resolution.

    Arrays:
      params        (H, W, n, 5) encoded candidate parameters
      logits        (H, W, n)    candidate likelihood logits
      class_scores  (H, W, C)    semantic scores, channel 0 is background/void
    """

    def __init__(
        self,
        width: int,
        height: int,
        scale: int,
        params: np.ndarray,
        logits: np.ndarray,
        class_scores: np.ndarray,
    ):
        if width <= 0 or height <= 0 or scale <= 0:
            raise FormatError("grid dimensions and scale must be positive")
        params = np.asarray(params, dtype=np.float64)
        logits = np.asarray(logits, dtype=np.float64)
        class_scores = np.asarray(class_scores, dtype=np.float64)
        if params.shape[:2] != (height, width) or params.shape[3:] != (5,):
            raise FormatError(f"params shape {params.shape} != (H, W, n, 5)")
        n = params.shape[2]
        if logits.shape != (height, width, n):
            raise FormatError(f"logits shape {logits.shape} != (H, W, {n})")
        if class_scores.shape[:2] != (height, width) or class_scores.ndim != 3:
            raise FormatError(f"class_scores shape {class_scores.shape} != (H, W, C)")
        if n < 1 or class_scores.shape[2] < 1:
            raise FormatError("need at least one candidate and one class channel")
        if not (
            np.all(np.isfinite(params))
            and np.all(np.isfinite(logits))
            and np.all(np.isfinite(class_scores))
        ):
            raise FormatError("grid arrays must be finite")
        self.width = int(width)
        self.height = int(height)
        self.scale = int(scale)
        self.params = params
        self.logits = logits
        self.class_scores = class_scores
        for arr in (self.params, self.logits, self.class_scores):
            arr.setflags(write=False)

    @property
    def n(self) -> int:
        return self.params.shape[2]

    @property
    def num_classes(self) -> int:
        return self.class_scores.shape[2]

    def candidate_set_at(self, ix: int, iy: int) -> CandidateSet:
        cands = tuple(
            Candidate(EncodedParams.from_array(self.params[iy, ix, k]), float(self.logits[iy, ix, k]))
            for k in range(self.n)
        )
        return CandidateSet(cands)

    def anchors(self) -> tuple[np.ndarray, np.ndarray]:
        """Original-resolution (x, y) anchor coordinates of every cell.

        Cell (ix, iy) is anchored at the center of the pixel block it covers:
        (ix + 0.5) * scale - 0.5 and likewise for y.
        """
        ax = (np.arange(self.width) + 0.5) * self.scale - 0.5
        ay = (np.arange(self.height) + 0.5) * self.scale - 0.5
        return np.broadcast_to(ax[None, :], (self.height, self.width)), np.broadcast_to(
            ay[:, None], (self.height, self.width)
        )

    # -- interchange ----------------------------------------------------

    def to_json(self) -> str:
        per_cell = np.concatenate(
            [
                np.concatenate([self.params, self.logits[..., None]], axis=3).reshape(
                    self.height, self.width, 6 * self.n
                ),
                self.class_scores,
            ],
            axis=2,
        )
        doc = {
            "width": self.width,
            "height": self.height,
            "scale": self.scale,
            "n": self.n,
            "classes": self.num_classes,
            "data": per_cell.ravel().tolist(),
        }
        return json.dumps(doc, separators=(",", ":"))

    @staticmethod
    def from_json(doc: str | dict) -> "PredictionGrid":
        data = json.loads(doc) if isinstance(doc, str) else doc
        try:
            width = int(data["width"])
            height = int(data["height"])
            scale = int(data["scale"])
            n = int(data["n"])
            classes = int(data["classes"])
            flat = np.asarray(data["data"], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"bad prediction grid document: {exc}") from exc
        stride = 6 * n + classes
        expected = width * height * stride
        if flat.size != expected:
            raise FormatError(
                f"grid data has {flat.size} values, expected {expected}"
            )
        per_cell = flat.reshape(height, width, stride)
        cand = per_cell[..., : 6 * n].reshape(height, width, n, 6)
        return PredictionGrid(
            width,
            height,
            scale,
            params=cand[..., :5].copy(),
            logits=cand[..., 5].copy(),
            class_scores=per_cell[..., 6 * n :].copy(),
        )


@dataclass(frozen=True)
class DecodedGrid:
    """Per-cell selected Gaussian and class at grid resolution."""

    params: np.ndarray  # (H, W, 5) natural parameters
    class_ids: np.ndarray  # (H, W)
    scale: int

    def gaussian_at(self, ix: int, iy: int) -> Gaussian2D:
        return Gaussian2D.from_array(self.params[iy, ix])


def decode_candidates(grid: PredictionGrid) -> np.ndarray:
    """(H, W, n, 5) natural parameters of every candidate at its cell anchor."""
    ax, ay = grid.anchors()
    enc = grid.params
    out = np.empty_like(enc)
    out[..., 0] = ax[..., None] - enc[..., 0]
    out[..., 1] = ay[..., None] - enc[..., 1]
    out[..., 2] = np.exp(enc[..., 2])
    out[..., 3] = np.exp(enc[..., 3])
    out[..., 4] = np.clip(np.tanh(enc[..., 4]), -RHO_MAX, RHO_MAX)
    return out


def decode_grid(grid: PredictionGrid) -> DecodedGrid:
    """Select the top candidate per cell and decode it at the cell anchor.

    argmax takes the first maximum, matching ``select_candidate``.
    """
    selected = np.argmax(grid.logits, axis=2)
    natural = decode_candidates(grid)
    iy, ix = np.indices((grid.height, grid.width))
    params = natural[iy, ix, selected]
    class_ids = np.argmax(grid.class_scores, axis=2)
    return DecodedGrid(params=params, class_ids=class_ids, scale=grid.scale)
