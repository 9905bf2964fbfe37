"""Bivariate-normal object representations for detection.

Fits five-parameter Gaussians to pixel-annotated objects, measures object
difference with the symmetrized KL divergence, and post-processes dense
predictions with divergence NMS and pixel clustering. A synthetic-scene
harness provides the discrimination analysis and mask AP evaluation.
"""

from gaussdet.core import (
    BoundingBox,
    Detection,
    Gaussian2D,
    PixelSet,
    Scene,
    SceneObject,
    covariance_of,
    scene_from_json,
    scene_to_json,
    validate_gaussian,
)
from gaussdet.divergence import iou, kl, kl_quadrature, sym_kl
from gaussdet.encoding import (
    Candidate,
    CandidateSet,
    EncodedParams,
    PredictionGrid,
    decode,
    decode_grid,
    encode,
    select_candidate,
)
from gaussdet.fit import Correction, bbox_of, fit_gaussian
from gaussdet.graddesc import Space, fit_by_descent, gradient_check, sym_kl_grad
from gaussdet.losses import CellTargets, LossWeights, mix_loss, rep_loss, seg_loss, total_loss
from gaussdet.postproc import (
    InstanceMap,
    NmsConfig,
    brute_force_nms,
    cluster_pixels,
    detections_from_grid,
    divergence_nms,
)

__version__ = "0.1.0"

__all__ = [
    "BoundingBox",
    "Candidate",
    "CandidateSet",
    "CellTargets",
    "Correction",
    "Detection",
    "EncodedParams",
    "Gaussian2D",
    "InstanceMap",
    "LossWeights",
    "NmsConfig",
    "PixelSet",
    "PredictionGrid",
    "Scene",
    "SceneObject",
    "Space",
    "bbox_of",
    "brute_force_nms",
    "cluster_pixels",
    "covariance_of",
    "decode",
    "decode_grid",
    "detections_from_grid",
    "divergence_nms",
    "encode",
    "fit_by_descent",
    "fit_gaussian",
    "gradient_check",
    "iou",
    "kl",
    "kl_quadrature",
    "mix_loss",
    "rep_loss",
    "scene_from_json",
    "scene_to_json",
    "seg_loss",
    "select_candidate",
    "sym_kl",
    "sym_kl_grad",
    "total_loss",
    "validate_gaussian",
]
