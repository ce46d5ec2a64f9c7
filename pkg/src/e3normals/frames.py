"""E(3) frame sets of point patches and frame-averaged normal estimation.

A frame ``(R, t)`` maps canonical coordinates to world coordinates as ``x = R c + t``.
The frame set of a patch holds the eight sign combinations of the covariance
eigenvectors, all sharing the centroid as translation.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegenerateAverage
from .geom import SymEig3, as_points, covariance, eig_sym3, eig_sym3_batch

GAP_EPS = 1e-300
VALID_N_FRAMES = (1, 2, 4, 8)

# row k holds the column signs of frame k; bit i of k flips eigenvector i
SIGN_PATTERNS = np.array(
    [[-1.0 if (k >> i) & 1 else 1.0 for i in range(3)] for k in range(8)]
)


@dataclass(frozen=True)
class Frame:
    rotation: np.ndarray
    translation: np.ndarray

    @classmethod
    def identity(cls) -> "Frame":
        return cls(np.eye(3), np.zeros(3))

    def inverse_apply(self, points) -> np.ndarray:
        return to_canonical(self, points)


@dataclass(frozen=True)
class FrameSet:
    frames: tuple
    eigen_gap: float
    eig: SymEig3

    @property
    def translation(self) -> np.ndarray:
        return self.frames[0].translation

    @property
    def rotations(self) -> np.ndarray:
        return np.stack([f.rotation for f in self.frames])

    def __len__(self) -> int:
        return len(self.frames)

    def __getitem__(self, k: int) -> Frame:
        return self.frames[k]


def build_frame_set(points) -> FrameSet:
    pts = as_points(points)
    t = pts.mean(axis=0)
    eig = eig_sym3(covariance(pts))
    lam = eig.values
    gap = float(min(lam[1] - lam[0], lam[2] - lam[1]) / (lam[2] + GAP_EPS))
    frames = tuple(Frame(eig.vectors * s, t) for s in SIGN_PATTERNS)
    return FrameSet(frames, gap, eig)


def to_canonical(f: Frame, points) -> np.ndarray:
    """``R^T (p - t)`` for every row ``p``."""
    pts = np.asarray(points, dtype=np.float64)
    return (pts - f.translation) @ f.rotation


def from_canonical(f: Frame, points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    return pts @ f.rotation.T + f.translation


def direction_to_world(f: Frame, n) -> np.ndarray:
    """Rotate direction(s) into the world; translation does not act on directions."""
    return np.asarray(n, dtype=np.float64) @ f.rotation.T


def direction_to_canonical(f: Frame, n) -> np.ndarray:
    return np.asarray(n, dtype=np.float64) @ f.rotation


def sample_random_frame(fs: FrameSet, rng: np.random.Generator) -> Frame:
    return fs.frames[int(rng.integers(len(fs.frames)))]


def choose_frames(n_frames: int, rng: np.random.Generator | None) -> np.ndarray:
    """Frame indices to average over, ascending; all eight need no randomness."""
    if n_frames not in VALID_N_FRAMES:
        raise ConfigError(f"n_frames must be one of {VALID_N_FRAMES}, got {n_frames}")
    if n_frames == 8:
        return np.arange(8)
    if rng is None:
        raise ConfigError("a random generator is required when n_frames < 8")
    return np.sort(rng.choice(8, size=n_frames, replace=False))


def combine_candidates(cands: np.ndarray) -> np.ndarray:
    """Average unoriented candidate normals of shape ``(F, n, 3)`` into ``(n, 3)``.

    Each point's candidates are flipped into the hemisphere of the dominant axis of
    their scatter matrix (a sign-blind statistic, oriented toward candidate 0) and
    then summed in frame-index order.
    """
    cands = np.asarray(cands, dtype=np.float64)
    if len(cands) == 1:
        acc = cands[0].copy()
    else:
        scatter = np.einsum("fni,fnj->nij", cands, cands)
        _, vecs = eig_sym3_batch(scatter)
        ref = vecs[:, :, 2]
        ref = np.where((np.sum(ref * cands[0], axis=1) >= 0.0)[:, None], ref, -ref)
        signs = np.where(np.einsum("fni,ni->fn", cands, ref) >= 0.0, 1.0, -1.0)
        acc = np.zeros(cands.shape[1:])
        for f in range(len(cands)):
            acc += signs[f][:, None] * cands[f]
    norm = np.linalg.norm(acc, axis=1)
    if np.any(norm < 1e-8):
        raise DegenerateAverage(f"{int(np.sum(norm < 1e-8))} averaged normals vanished")
    return acc / norm[:, None]


def frame_average(
    phi,
    patch_points,
    n_frames: int = 8,
    rng: np.random.Generator | None = None,
    frame_set: FrameSet | None = None,
) -> np.ndarray:
    """Frame-averaged per-point normals of a patch: mean of ``g phi(g^-1 x)``."""
    pts = as_points(patch_points)
    fs = frame_set if frame_set is not None else build_frame_set(pts)
    idx = choose_frames(n_frames, rng)
    rots = fs.rotations[idx]
    canon = np.einsum("nj,fjk->fnk", pts - fs.translation, rots)
    raw = np.asarray(phi.estimate_batch(canon), dtype=np.float64)
    if raw.shape != canon.shape:
        raise ConfigError(f"estimator returned shape {raw.shape}, expected {canon.shape}")
    cands = np.einsum("fij,fnj->fni", rots, raw)
    return combine_candidates(cands)
