"""Reference values of the fused three-channel training objective.

Losses are sums over pixels; pass ``mean=True`` for a per-pixel average.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .maps import RasterMap

PROB_CLAMP = 1e-7
_FSUM_PIXELS = 1_000_000


def _array(x) -> np.ndarray:
    return np.asarray(x.data if isinstance(x, RasterMap) else x, dtype=np.float64)


def _total(x: np.ndarray) -> float:
    # compensated summation keeps large maps order-independent
    return math.fsum(x.ravel().tolist()) if x.size >= _FSUM_PIXELS else float(x.sum())


def _check(pred: np.ndarray, gt: np.ndarray) -> None:
    if pred.shape != gt.shape:
        raise ValueError(f"prediction shape {pred.shape} differs from ground truth {gt.shape}")


def balanced_cross_entropy(pred, gt, mean: bool = False) -> tuple[float, float]:
    """Class-balanced cross entropy; returns ``(loss, beta)``.

    ``beta`` is the fraction of background pixels in ``gt``.
    """
    p, r = _array(pred), _array(gt)
    _check(p, r)
    p = np.clip(p, PROB_CLAMP, 1 - PROB_CLAMP)
    beta = float(np.count_nonzero(r == 0)) / r.size
    terms = -beta * r * np.log(p) - (1 - beta) * (1 - r) * np.log1p(-p)
    loss = _total(terms)
    return (loss / r.size if mean else loss), beta


def region_loss(pred, gt, mean: bool = False) -> tuple[float, float]:
    return balanced_cross_entropy(pred, gt, mean)


def character_loss(pred, gt, mean: bool = False) -> tuple[float, float]:
    return balanced_cross_entropy(pred, gt, mean)


def balanced_cross_entropy_grad(pred, gt) -> np.ndarray:
    """Derivative of the summed loss with respect to each prediction value."""
    p, r = _array(pred), _array(gt)
    _check(p, r)
    p = np.clip(p, PROB_CLAMP, 1 - PROB_CLAMP)
    beta = float(np.count_nonzero(r == 0)) / r.size
    return -beta * r / p + (1 - beta) * (1 - r) / (1 - p)


def orientation_loss(pred, gt, region_gt, mean: bool = False) -> float:
    """sin(pi * |pred - gt|) summed over text-region pixels only."""
    p, t, r = _array(pred), _array(gt), _array(region_gt)
    _check(p, t)
    _check(p, r)
    terms = r * np.sin(math.pi * np.abs(p - t))
    loss = _total(terms)
    return loss / r.size if mean else loss


@dataclass(frozen=True)
class LossWeights:
    lambda1: float = 1 / 3
    lambda2: float = 1 / 3
    lambda3: float = 1 / 3

    def __post_init__(self):
        ws = (self.lambda1, self.lambda2, self.lambda3)
        if any(w < 0 for w in ws):
            raise ValueError("loss weights must be non-negative")
        if abs(sum(ws) - 1.0) > 1e-9:
            raise ValueError(f"loss weights must sum to 1, got {sum(ws)!r}")


@dataclass(frozen=True)
class LossReport:
    region_loss: float
    character_loss: float
    orientation_loss: float
    fused: float
    beta_region: float
    beta_character: float

    def to_dict(self) -> dict:
        return asdict(self)


def fused_loss(components, weights: LossWeights = LossWeights()) -> float:
    """Weighted sum of the (region, character, orientation) losses."""
    if isinstance(components, LossReport):
        components = (components.region_loss, components.character_loss, components.orientation_loss)
    dr, dc, do = components
    return weights.lambda1 * dr + weights.lambda2 * dc + weights.lambda3 * do


def compute_losses(pred, gt, weights: LossWeights = LossWeights(), mean: bool = False) -> LossReport:
    """Losses for prediction and ground-truth (region, character, orientation) triples."""
    pr, pc, po = pred
    gr, gc, go = gt
    dr, br = region_loss(pr, gr, mean)
    dc, bc = character_loss(pc, gc, mean)
    do = orientation_loss(po, go, gr, mean)
    return LossReport(dr, dc, do, fused_loss((dr, dc, do), weights), br, bc)
