"""Domain types: pixel sets, the five-parameter Gaussian, scenes, detections.

All types are immutable after construction and safe to share across threads.
Scene annotations arrive as explicit pixel lists or row-major RLE; there is
no image decoding here.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from gaussdet.errors import (
    DegenerateCovariance,
    EmptyPixelSet,
    FormatError,
    NonPositiveSigma,
    RhoOutOfRange,
)

# Correlation is kept strictly inside (-1, 1) so the covariance stays
# positive definite and atanh(rho) stays finite.
RHO_MAX = 1.0 - 1e-6

# Class id 0 is reserved: background for clustering, ignored by the
# segmentation loss. Real object classes are >= 1.
VOID_CLASS = 0

# PixelCoord is an (x, y) pair of integer pixel indices (column, row).
PixelCoord = tuple[int, int]


class PixelSet:
    """Ordered, duplicate-free set of pixel coordinates of one object."""

    __slots__ = ("_array",)

    def __init__(self, pixels: Iterable[PixelCoord] | np.ndarray):
        arr = np.asarray(pixels, dtype=np.int64)
        if arr.size == 0:
            raise EmptyPixelSet("pixel set must contain at least one pixel")
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise FormatError(f"pixel list must be shaped (N, 2), got {arr.shape}")
        if len({(int(x), int(y)) for x, y in arr}) != len(arr):
            raise FormatError("pixel set contains duplicate coordinates")
        arr = arr.copy()
        arr.setflags(write=False)
        self._array = arr

    @property
    def array(self) -> np.ndarray:
        """Read-only (N, 2) array of (x, y) coordinates in input order."""
        return self._array

    @property
    def xs(self) -> np.ndarray:
        return self._array[:, 0]

    @property
    def ys(self) -> np.ndarray:
        return self._array[:, 1]

    def __len__(self) -> int:
        return len(self._array)

    def __iter__(self):
        return ((int(x), int(y)) for x, y in self._array)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PixelSet):
            return NotImplemented
        return self._array.shape == other._array.shape and bool(
            np.all(self._array == other._array)
        )

    def __repr__(self) -> str:
        return f"PixelSet(n={len(self)})"


@dataclass(frozen=True)
class Gaussian2D:
    """Five-parameter bivariate normal: means, standard deviations, correlation.

    Units are pixels for the means and deviations; rho is dimensionless.
    """

    mu_x: float
    mu_y: float
    sigma_x: float
    sigma_y: float
    rho: float

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.mu_x, self.mu_y, self.sigma_x, self.sigma_y, self.rho],
            dtype=np.float64,
        )

    @staticmethod
    def from_array(params: Sequence[float]) -> "Gaussian2D":
        mx, my, sx, sy, r = (float(v) for v in params)
        return Gaussian2D(mx, my, sx, sy, r)


def validate_gaussian(g: Gaussian2D) -> None:
    """Raise if ``g`` violates the representation invariants."""
    if not (g.sigma_x > 0.0) or not math.isfinite(g.sigma_x):
        raise NonPositiveSigma(f"sigma_x must be positive and finite, got {g.sigma_x}")
    if not (g.sigma_y > 0.0) or not math.isfinite(g.sigma_y):
        raise NonPositiveSigma(f"sigma_y must be positive and finite, got {g.sigma_y}")
    if not (abs(g.rho) <= RHO_MAX):
        raise RhoOutOfRange(f"rho must satisfy |rho| <= {RHO_MAX}, got {g.rho}")
    if not (math.isfinite(g.mu_x) and math.isfinite(g.mu_y)):
        raise FormatError(f"means must be finite, got ({g.mu_x}, {g.mu_y})")


def covariance_of(g: Gaussian2D) -> np.ndarray:
    """2x2 covariance matrix of a validated Gaussian2D."""
    validate_gaussian(g)
    off = g.rho * g.sigma_x * g.sigma_y
    return np.array(
        [[g.sigma_x**2, off], [off, g.sigma_y**2]], dtype=np.float64
    )


def require_invertible(g: Gaussian2D, floor: float = 1e-12) -> float:
    """Validate ``g`` and return det(covariance), rejecting near-singular input."""
    validate_gaussian(g)
    det = (g.sigma_x * g.sigma_y) ** 2 * (1.0 - g.rho**2)
    if det < floor:
        raise DegenerateCovariance(
            f"covariance determinant {det:.3e} below {floor:.0e}"
        )
    return det


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box, pixel units, min corner inclusive of extents."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise FormatError(f"inverted bounding box {self}")

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    def as_list(self) -> list[float]:
        return [self.x_min, self.y_min, self.x_max, self.y_max]


@dataclass(frozen=True)
class Detection:
    """A detected object: distribution, semantic class, confidence score."""

    gaussian: Gaussian2D
    class_id: int
    score: float

    def __post_init__(self):
        if not math.isfinite(self.score) or not (0.0 <= self.score <= 1.0):
            raise FormatError(f"score must be finite in [0, 1], got {self.score}")


@dataclass(frozen=True)
class SceneObject:
    """One annotated object instance."""

    object_id: int
    class_id: int
    pixels: PixelSet


class Scene:
    """Image-space container: dimensions, annotated objects, optional semantic map."""

    def __init__(
        self,
        width: int,
        height: int,
        objects: Sequence[SceneObject],
        semantic: np.ndarray | None = None,
        allow_overlap: bool = False,
    ):
        if width <= 0 or height <= 0:
            raise FormatError(f"scene dimensions must be positive, got {width}x{height}")
        self.width = int(width)
        self.height = int(height)
        self.objects = list(objects)
        if semantic is not None:
            semantic = np.asarray(semantic, dtype=np.int64)
            if semantic.shape != (self.height, self.width):
                raise FormatError(
                    f"semantic map shape {semantic.shape} != (height, width)"
                )
            semantic = semantic.copy()
            semantic.setflags(write=False)
        self.semantic = semantic
        self._validate(allow_overlap)

    def _validate(self, allow_overlap: bool):
        ids = [o.object_id for o in self.objects]
        if len(set(ids)) != len(ids):
            raise FormatError("object ids must be unique within a scene")
        seen: set[tuple[int, int]] = set()
        for obj in self.objects:
            xs, ys = obj.pixels.xs, obj.pixels.ys
            if xs.min() < 0 or ys.min() < 0 or xs.max() >= self.width or ys.max() >= self.height:
                raise FormatError(f"object {obj.object_id} has pixels outside the scene")
            if not allow_overlap:
                px = set(map(tuple, obj.pixels.array.tolist()))
                if seen & px:
                    raise FormatError(
                        f"object {obj.object_id} overlaps an earlier object "
                        "(pass allow_overlap=True to permit shared pixels)"
                    )
                seen |= px

    def instance_index_map(self) -> np.ndarray:
        """(H, W) array: 0 background, i+1 where objects[i] owns the pixel.

        Later objects win shared pixels, matching the overlap convention.
        """
        grid = np.zeros((self.height, self.width), dtype=np.int32)
        for i, obj in enumerate(self.objects):
            grid[obj.pixels.ys, obj.pixels.xs] = i + 1
        return grid

    def class_map(self) -> np.ndarray:
        """(H, W) class ids: the semantic map if present, else rasterized objects."""
        if self.semantic is not None:
            return self.semantic
        grid = np.full((self.height, self.width), VOID_CLASS, dtype=np.int64)
        for obj in self.objects:
            grid[obj.pixels.ys, obj.pixels.xs] = obj.class_id
        return grid


# ---------------------------------------------------------------------------
# Scene JSON interchange
#
# Canonical form:
#   {"width":W,"height":H,
#    "objects":[{"id":1,"class":2,"pixels":[[x,y],...]}, ...],
#    "semantic":null | [[row-major class ids]]}
# An object may carry "rle":{"counts":[...],"order":"row-major"} instead of
# "pixels"; runs alternate background/foreground starting with background and
# scan the full W*H grid row by row.
# ---------------------------------------------------------------------------


def rle_to_pixels(counts: Sequence[int], width: int, height: int) -> np.ndarray:
    """Expand row-major RLE counts into an (N, 2) array of (x, y) coordinates."""
    total = sum(counts)
    if total != width * height:
        raise FormatError(f"RLE covers {total} pixels, grid has {width * height}")
    if any(c < 0 for c in counts):
        raise FormatError("RLE counts must be non-negative")
    flat = []
    pos = 0
    foreground = False
    for run in counts:
        if foreground and run:
            flat.append(np.arange(pos, pos + run))
        pos += run
        foreground = not foreground
    if not flat:
        raise EmptyPixelSet("RLE encodes an empty mask")
    idx = np.concatenate(flat)
    return np.stack([idx % width, idx // width], axis=1)


def pixels_to_rle(pixels: PixelSet, width: int, height: int) -> list[int]:
    """Row-major RLE counts (background first) for an object mask."""
    mask = np.zeros(width * height, dtype=bool)
    mask[pixels.ys * width + pixels.xs] = True
    changes = np.flatnonzero(np.diff(mask.astype(np.int8)))
    edges = np.concatenate([[0], changes + 1, [mask.size]])
    counts = np.diff(edges).tolist()
    if mask[0]:
        counts = [0] + counts
    return [int(c) for c in counts]


def scene_from_json(doc: str | dict, allow_overlap: bool = False) -> Scene:
    """Parse the canonical Scene JSON document (pixel lists or RLE)."""
    data = json.loads(doc) if isinstance(doc, str) else doc
    try:
        width, height = int(data["width"]), int(data["height"])
        raw_objects = data["objects"]
    except (KeyError, TypeError) as exc:
        raise FormatError(f"scene document missing required field: {exc}") from exc
    objects = []
    for entry in raw_objects:
        if "pixels" in entry:
            coords = np.asarray(entry["pixels"], dtype=np.int64)
        elif "rle" in entry:
            rle = entry["rle"]
            if rle.get("order", "row-major") != "row-major":
                raise FormatError(f"unsupported RLE order {rle.get('order')!r}")
            coords = rle_to_pixels(rle["counts"], width, height)
        else:
            raise FormatError(f"object {entry.get('id')} has neither pixels nor rle")
        objects.append(
            SceneObject(int(entry["id"]), int(entry["class"]), PixelSet(coords))
        )
    semantic = data.get("semantic")
    if semantic is not None:
        semantic = np.asarray(semantic, dtype=np.int64)
    return Scene(width, height, objects, semantic, allow_overlap=allow_overlap)


def scene_to_json(scene: Scene) -> str:
    """Serialize to the canonical JSON form (explicit pixel lists, compact)."""
    doc = {
        "width": scene.width,
        "height": scene.height,
        "objects": [
            {
                "id": obj.object_id,
                "class": obj.class_id,
                "pixels": obj.pixels.array.tolist(),
            }
            for obj in scene.objects
        ],
        "semantic": None if scene.semantic is None else scene.semantic.tolist(),
    }
    return json.dumps(doc, separators=(",", ":"))
