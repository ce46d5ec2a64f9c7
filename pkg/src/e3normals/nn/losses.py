"""Unoriented normal losses: regression, sine, their blend, and weighted variants.

The ``*_terms`` helpers operate on :class:`Tensor` values with a trailing axis of 3
and are what training differentiates through; the plain functions take array-likes
and return floats or :class:`LossBreakdown` records.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import LengthMismatch, NonPositiveSigma
from . import autodiff as ad


@dataclass(frozen=True)
class LossBreakdown:
    total: float
    per_point: np.ndarray
    weights: np.ndarray


def reg_terms(pred, gt) -> ad.Tensor:
    """``min(|p - g|^2, |p + g|^2)`` per vector; exact ties take the minus branch."""
    pred, gt = ad.lift(pred), ad.lift(gt)
    dm = pred - gt
    dp = pred + gt
    return ad.minimum((dm * dm).sum(axis=-1), (dp * dp).sum(axis=-1))


def sin_terms(pred, gt) -> ad.Tensor:
    c = ad.cross(pred, gt)
    return ad.sqrt((c * c).sum(axis=-1))


def val_terms(pred, gt) -> ad.Tensor:
    return reg_terms(pred, gt) + sin_terms(pred, gt)


def _pair(preds, gts):
    p = np.asarray(preds, dtype=np.float64).reshape(-1, 3)
    g = np.asarray(gts, dtype=np.float64).reshape(-1, 3)
    if p.shape != g.shape:
        raise LengthMismatch(f"{len(p)} predictions vs {len(g)} ground-truth normals")
    if len(p) == 0:
        raise LengthMismatch("empty input")
    return p, g


def loss_reg(pred, gt) -> float:
    return float(reg_terms(np.asarray(pred, float), np.asarray(gt, float)).value)


def loss_sin(pred, gt) -> float:
    return float(sin_terms(np.asarray(pred, float), np.asarray(gt, float)).value)


def _breakdown(per_point: np.ndarray, weights: np.ndarray, count: float) -> LossBreakdown:
    return LossBreakdown(float(np.sum(weights * per_point) / count), per_point, weights)


def loss_val(preds, gts) -> LossBreakdown:
    p, g = _pair(preds, gts)
    per = val_terms(p, g).value
    return _breakdown(per, np.ones(len(per)), len(per))


def gaussian_weights(center_distances, sigma: float) -> np.ndarray:
    if not sigma > 0:
        raise NonPositiveSigma(f"sigma must be positive, got {sigma}")
    d = np.asarray(center_distances, dtype=np.float64)
    return np.exp(-(d * d) / (2.0 * sigma * sigma))


def loss_gau(preds, gts, center_distances, sigma: float, normalize: bool = False) -> LossBreakdown:
    """Gaussian-weighted blend; divides by N unless ``normalize`` asks for sum of weights."""
    p, g = _pair(preds, gts)
    d = np.asarray(center_distances, dtype=np.float64).reshape(-1)
    if len(d) != len(p):
        raise LengthMismatch(f"{len(d)} distances for {len(p)} points")
    w = gaussian_weights(d, sigma)
    per = val_terms(p, g).value
    return _breakdown(per, w, w.sum() if normalize else len(per))


def half_mask(center_distances) -> np.ndarray:
    """Weights selecting the ceil(N/2) points nearest the center (ties by index)."""
    d = np.asarray(center_distances, dtype=np.float64).reshape(-1)
    keep = np.argsort(d, kind="stable")[: (len(d) + 1) // 2]
    w = np.zeros(len(d))
    w[keep] = 1.0
    return w


def loss_half(preds, gts, center_distances) -> LossBreakdown:
    p, g = _pair(preds, gts)
    d = np.asarray(center_distances, dtype=np.float64).reshape(-1)
    if len(d) != len(p):
        raise LengthMismatch(f"{len(d)} distances for {len(p)} points")
    w = half_mask(d)
    per = val_terms(p, g).value
    return _breakdown(per, w, w.sum())


LOSS_VARIANTS = ("val", "gau", "half")


def patch_loss(pred: ad.Tensor, gt, weights: np.ndarray, counts: np.ndarray) -> ad.Tensor:
    """Batch-mean of per-patch ``sum(w * (reg + sin)) / count``.

    ``pred``/``gt`` are ``(B, N, 3)``; ``weights`` is ``(B, N)``; ``counts`` is ``(B,)``.
    """
    per = val_terms(pred, gt)
    scaled = per * (weights / counts[:, None])
    return ad.tsum(scaled) * (1.0 / len(counts))


def patch_weights(variant: str, dists: np.ndarray, sigmas: np.ndarray, normalize: bool = False):
    """Per-point weights ``(B, N)`` and per-patch normalisers ``(B,)`` for a loss variant."""
    b, n = dists.shape
    if variant == "val":
        w = np.ones((b, n))
        return w, np.full(b, float(n))
    if variant == "gau":
        if np.any(sigmas <= 0):
            raise NonPositiveSigma("sigma must be positive")
        w = np.exp(-(dists * dists) / (2.0 * sigmas[:, None] ** 2))
        return w, (w.sum(axis=1) if normalize else np.full(b, float(n)))
    if variant == "half":
        w = np.stack([half_mask(row) for row in dists])
        return w, w.sum(axis=1)
    raise ValueError(f"unknown loss variant {variant!r}")
