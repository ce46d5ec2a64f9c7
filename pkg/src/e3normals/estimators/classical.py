"""Closed-form estimators: a single plane fit (PCA) and n-jet height fields."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, TooFewPoints
from ..geom import as_points, covariance, eig_sym3
from .base import Estimator

log = logging.getLogger(__name__)

RCOND = 1e-10
MAX_COND = 1e12


def orient(n: np.ndarray) -> np.ndarray:
    """Flip ``n`` so its z component is positive; ties fall back to y, then x."""
    for c in (2, 1, 0):
        if n[c] != 0.0:
            return n if n[c] > 0.0 else -n
    return n


def pca_normal(points) -> np.ndarray:
    pts = as_points(points)
    if len(pts) < 3:
        raise TooFewPoints(f"PCA needs at least 3 points, got {len(pts)}")
    return orient(eig_sym3(covariance(pts)).v1.copy())


def pca_estimate(points) -> np.ndarray:
    pts = as_points(points)
    return np.tile(pca_normal(pts), (len(pts), 1))


def monomials(order: int) -> list[tuple[int, int]]:
    """Exponent pairs ``(i, j)`` of ``x^i y^j`` in graded lexicographic order."""
    return [(i, d - i) for d in range(order + 1) for i in range(d, -1, -1)]


@dataclass(frozen=True)
class JetCoefficients:
    order: int
    coefficients: np.ndarray

    def __post_init__(self):
        if not 1 <= self.order <= 3:
            raise ConfigError(f"jet order must be in [1, 3], got {self.order}")
        if len(self.coefficients) != (self.order + 1) * (self.order + 2) // 2:
            raise ConfigError("coefficient count does not match jet order")

    def __call__(self, x, y):
        return sum(c * x**i * y**j for c, (i, j) in zip(self.coefficients, monomials(self.order)))

    def gradient(self, x, y):
        fx = np.zeros_like(np.asarray(x, dtype=float))
        fy = np.zeros_like(fx)
        for c, (i, j) in zip(self.coefficients, monomials(self.order)):
            if i:
                fx = fx + c * i * x ** (i - 1) * y**j
            if j:
                fy = fy + c * j * x**i * y ** (j - 1)
        return fx, fy


@dataclass(frozen=True)
class JetFit:
    jet: JetCoefficients
    origin: np.ndarray
    # columns: first in-plane axis, second in-plane axis, height axis
    basis: np.ndarray
    cond: float

    @property
    def ill_conditioned(self) -> bool:
        return not self.cond <= MAX_COND

    def local(self, points) -> np.ndarray:
        return (np.asarray(points, dtype=float) - self.origin) @ self.basis

    def normals(self, points) -> np.ndarray:
        loc = self.local(points)
        fx, fy = self.jet.gradient(loc[:, 0], loc[:, 1])
        n = -fx[:, None] * self.basis[:, 0] - fy[:, None] * self.basis[:, 1] + self.basis[:, 2]
        return n / np.linalg.norm(n, axis=1, keepdims=True)


def fit_jet(points, order: int = 2) -> JetFit:
    """Least-squares height field over the PCA tangent plane of ``points``.

    Coordinates are scaled by the in-plane radius before solving so the condition
    number measures geometry rather than units.
    """
    if not 1 <= order <= 3:
        raise ConfigError(f"jet order must be in [1, 3], got {order}")
    pts = as_points(points)
    n_coef = (order + 1) * (order + 2) // 2
    if len(pts) < max(n_coef, 3):
        raise TooFewPoints(f"order-{order} jet needs {n_coef} points, got {len(pts)}")
    origin = pts.mean(axis=0)
    eig = eig_sym3(covariance(pts))
    h = orient(eig.v1.copy())
    basis = np.column_stack([eig.v2, eig.v3, h])
    loc = (pts - origin) @ basis
    scale = float(np.max(np.hypot(loc[:, 0], loc[:, 1])))
    scale = scale if scale > 0 else 1.0
    u, w, z = loc[:, 0] / scale, loc[:, 1] / scale, loc[:, 2] / scale
    exps = monomials(order)
    design = np.column_stack([u**i * w**j for i, j in exps])
    coef, _, _, sv = np.linalg.lstsq(design, z, rcond=RCOND)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else np.inf
    unscaled = np.array([c * scale ** (1 - i - j) for c, (i, j) in zip(coef, exps)])
    return JetFit(JetCoefficients(order, unscaled), origin, basis, cond)


def jet_estimate(points, order: int = 2, return_fallback: bool = False):
    """Per-point normals of an order-``order`` jet; ill-conditioned fits fall back to PCA."""
    pts = as_points(points)
    fit = fit_jet(pts, order)
    if fit.ill_conditioned:
        log.warning("jet fit condition number %.3g exceeds %.0e; using PCA", fit.cond, MAX_COND)
        out = pca_estimate(pts)
        return (out, True) if return_fallback else out
    out = fit.normals(pts)
    return (out, False) if return_fallback else out


class PCAEstimator(Estimator):
    name = "pca"

    def estimate(self, points) -> np.ndarray:
        return pca_estimate(points)


class JetEstimator(Estimator):
    def __init__(self, order: int = 2):
        if not 1 <= order <= 3:
            raise ConfigError(f"jet order must be in [1, 3], got {order}")
        self.order = order
        self.name = f"jet{order}"

    def estimate(self, points) -> np.ndarray:
        return jet_estimate(points, self.order)
