"""Small-vector geometry: centroids, covariances and a symmetric 3x3 eigensolver.

Points are ``(m, 3)`` float64 arrays, vectors are ``(3,)`` arrays and matrices are
``(3, 3)`` arrays in row-major (C) order, so ``m[i, j]`` is row ``i``, column ``j``.
Eigenvectors are stored as matrix *columns*.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyInput, NonSymmetric

SYM_TOL = 1e-9
MAX_SWEEPS = 64
_PAIRS = ((0, 1), (0, 2), (1, 2))


def as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1 and pts.size == 3:
        pts = pts.reshape(1, 3)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise EmptyInput(f"expected an (m, 3) array of points, got shape {pts.shape}")
    if len(pts) == 0:
        raise EmptyInput("no points")
    return pts


def centroid(points) -> np.ndarray:
    pts = as_points(points)
    return pts.mean(axis=0)


def covariance(points) -> np.ndarray:
    """Biased (1/m) covariance about the centroid, exactly symmetric."""
    pts = as_points(points)
    d = pts - pts.mean(axis=0)
    c = d.T @ d / len(pts)
    return 0.5 * (c + c.T)


def normalize(v, eps: float = 0.0) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    return v / np.maximum(n, eps) if eps else v / n


@dataclass(frozen=True)
class SymEig3:
    """Eigenpairs of a symmetric 3x3 matrix, eigenvalues ascending.

    ``vectors[:, i]`` is the unit eigenvector for ``values[i]``.
    """

    values: np.ndarray
    vectors: np.ndarray

    @property
    def v1(self) -> np.ndarray:
        return self.vectors[:, 0]

    @property
    def v2(self) -> np.ndarray:
        return self.vectors[:, 1]

    @property
    def v3(self) -> np.ndarray:
        return self.vectors[:, 2]

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.values) @ self.vectors.T


def _jacobi_angles(app, aqq, apq):
    # rotation that zeroes a[p, q]; t = tan of the rotation angle, smaller root
    active = apq != 0.0
    safe = np.where(active, apq, 1.0)
    with np.errstate(over="ignore"):
        theta = (aqq - app) / (2.0 * safe)
    big = np.abs(theta) > 1e150
    th = np.where(big, 1.0, theta)
    t = np.where(theta >= 0.0, 1.0, -1.0) / (np.abs(th) + np.sqrt(th * th + 1.0))
    t = np.where(big, 0.5 / np.where(big, theta, 1.0), t)
    t = np.where(active, t, 0.0)
    c = 1.0 / np.sqrt(t * t + 1.0)
    return c, t * c


def eig_sym3_batch(mats) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi on a stack of symmetric 3x3 matrices.

    Returns ``(values, vectors)`` with shapes ``(B, 3)`` and ``(B, 3, 3)``; values
    ascend along the last axis and ``vectors[b, :, i]`` pairs with ``values[b, i]``.
    """
    a = np.array(mats, dtype=np.float64, copy=True)
    if a.ndim == 2:
        a = a[None]
    if a.shape[-2:] != (3, 3):
        raise NonSymmetric(f"expected 3x3 matrices, got {a.shape}")
    scale = np.maximum(1.0, np.abs(a).max(axis=(1, 2)))
    asym = np.abs(a - np.swapaxes(a, 1, 2)).max(axis=(1, 2))
    if np.any(asym > SYM_TOL * scale):
        raise NonSymmetric(f"asymmetry {asym.max():.3g} exceeds tolerance")
    a = 0.5 * (a + np.swapaxes(a, 1, 2))
    # work at unit scale so squares neither underflow nor overflow
    # (power-of-two factor, so the rescaling itself is exact)
    amax = np.ldexp(1.0, np.frexp(np.abs(a).max(axis=(1, 2)))[1])
    a = a / amax[:, None, None]
    n = len(a)
    v = np.broadcast_to(np.eye(3), (n, 3, 3)).copy()
    # Frobenius/sqrt(3) never exceeds the spectral norm, so this is at least as strict
    thresh = 1e-12 * np.sqrt((a * a).sum(axis=(1, 2)) / 3.0)

    for _ in range(MAX_SWEEPS):
        off = np.sqrt(2.0 * (a[:, 0, 1] ** 2 + a[:, 0, 2] ** 2 + a[:, 1, 2] ** 2))
        todo = off > thresh
        if not todo.any():
            break
        for p, q in _PAIRS:
            c, s = _jacobi_angles(a[:, p, p], a[:, q, q], a[:, p, q])
            c = np.where(todo, c, 1.0)
            s = np.where(todo, s, 0.0)
            cc, ss = c[:, None], s[:, None]
            # A <- A P, then A <- P^T A, then V <- V P
            colp, colq = a[:, :, p].copy(), a[:, :, q].copy()
            a[:, :, p] = cc * colp - ss * colq
            a[:, :, q] = ss * colp + cc * colq
            rowp, rowq = a[:, p, :].copy(), a[:, q, :].copy()
            a[:, p, :] = cc * rowp - ss * rowq
            a[:, q, :] = ss * rowp + cc * rowq
            a[:, p, q] = np.where(todo, 0.0, a[:, p, q])
            a[:, q, p] = a[:, p, q]
            vp, vq = v[:, :, p].copy(), v[:, :, q].copy()
            v[:, :, p] = cc * vp - ss * vq
            v[:, :, q] = ss * vp + cc * vq

    vals = np.diagonal(a, axis1=1, axis2=2) * amax[:, None]
    order = np.argsort(vals, axis=1, kind="stable")
    vals = np.take_along_axis(vals, order, axis=1)
    vecs = np.take_along_axis(v, order[:, None, :], axis=2)
    return vals, vecs


def eig_sym3(m) -> SymEig3:
    """Eigendecomposition of one symmetric 3x3 matrix (ascending eigenvalues)."""
    m = np.asarray(m, dtype=np.float64)
    if m.shape != (3, 3):
        raise NonSymmetric(f"expected a 3x3 matrix, got {m.shape}")
    vals, vecs = eig_sym3_batch(m[None])
    return SymEig3(vals[0], vecs[0])


def rotation_about(axis, angle: float) -> np.ndarray:
    """Rodrigues rotation matrix."""
    k = normalize(axis)
    kx = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + np.sin(angle) * kx + (1.0 - np.cos(angle)) * (kx @ kx)


def random_orthogonal(rng: np.random.Generator, proper: bool = False) -> np.ndarray:
    """Haar-random element of O(3) (or SO(3) when ``proper``)."""
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if proper and np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def unoriented_angle(a, b) -> np.ndarray:
    """Angle in radians between lines spanned by rows of ``a`` and ``b``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    cross = np.linalg.norm(np.cross(a, b), axis=-1)
    dot = np.abs(np.sum(a * b, axis=-1))
    return np.arctan2(cross, dot)
