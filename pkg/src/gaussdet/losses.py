"""Training objective as pure functions: segmentation, representation, and
mixture cross-entropy terms plus their weighted total.

No optimizer loop lives here; the functions exist so the objective can be
evaluated and gradient-checked deterministically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from gaussdet import kernels
from gaussdet.core import VOID_CLASS
from gaussdet.encoding import PredictionGrid, decode_candidates
from gaussdet.errors import AllBackground, AllVoid, ShapeMismatch


@dataclass(frozen=True)
class LossWeights:
    """Scene-dependent weights for the representation and mixture terms."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (np.isfinite(self.alpha) and np.isfinite(self.beta)):
            raise ValueError("loss weights must be finite")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("loss weights must be non-negative")


@dataclass(frozen=True)
class CellTargets:
    """Per-cell ground truth: Gaussian parameters where foreground.

    ``params`` is (H, W, 5) natural parameters (arbitrary on background
    cells), ``foreground`` is a boolean (H, W) mask, ``class_ids`` the
    per-cell semantic target with VOID_CLASS on background.
    """

    params: np.ndarray
    foreground: np.ndarray
    class_ids: np.ndarray


def _log_softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=-1, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))


def seg_loss(pred_class_scores: np.ndarray, gt_classes: np.ndarray) -> float:
    """Mean cross-entropy over pixels whose label is not void."""
    scores = np.asarray(pred_class_scores, dtype=np.float64)
    gt = np.asarray(gt_classes)
    if scores.shape[:-1] != gt.shape:
        raise ShapeMismatch(f"scores {scores.shape} vs labels {gt.shape}")
    valid = gt != VOID_CLASS
    if not np.any(valid):
        raise AllVoid("every pixel is void; segmentation loss undefined")
    log_probs = _log_softmax(scores[valid])
    picked = log_probs[np.arange(log_probs.shape[0]), gt[valid]]
    return float(-picked.mean())


def _candidate_divergences(grid: PredictionGrid, targets: CellTargets):
    """Symmetrized divergence of every candidate to its cell's target.

    Returns (fg_index, div) where div is (F, n) for the F foreground cells.
    """
    if targets.foreground.shape != (grid.height, grid.width):
        raise ShapeMismatch(
            f"target mask {targets.foreground.shape} vs grid "
            f"{(grid.height, grid.width)}"
        )
    fg = targets.foreground
    n = grid.n
    cand = decode_candidates(grid)[fg]  # (F, n, 5)
    gt = np.asarray(targets.params, dtype=np.float64)[fg]  # (F, 5)
    gt_rep = np.repeat(gt, n, axis=0)
    div = kernels.sym_kl_pairs(gt_rep, cand.reshape(-1, 5)).reshape(-1, n)
    return fg, div


def rep_loss(grid: PredictionGrid, targets: CellTargets) -> float:
    """Representation loss summed over foreground cells.

    Per cell the mask selects the lowest-divergence candidate and the
    highest-likelihood candidate; when both point at the same candidate its
    divergence counts once.
    """
    fg, div = _candidate_divergences(grid, targets)
    if div.shape[0] == 0:
        return 0.0
    best_div = np.argmin(div, axis=1)
    best_lik = np.argmax(grid.logits[fg], axis=1)
    rows = np.arange(div.shape[0])
    total = div[rows, best_div].sum()
    extra = best_lik != best_div
    total += div[rows[extra], best_lik[extra]].sum()
    return float(total)


def mix_loss(grid: PredictionGrid, targets: CellTargets) -> float:
    """Cross-entropy pushing likelihood onto the lowest-divergence candidate."""
    fg, div = _candidate_divergences(grid, targets)
    if div.shape[0] == 0:
        raise AllBackground("no foreground cells; mixture loss undefined")
    best_div = np.argmin(div, axis=1)
    log_probs = _log_softmax(grid.logits[fg])
    picked = log_probs[np.arange(log_probs.shape[0]), best_div]
    return float(-picked.mean())


def total_loss(l_seg: float, l_rep: float, l_mix: float, w: LossWeights) -> float:
    return float(l_seg + w.alpha * l_rep + w.beta * l_mix)
