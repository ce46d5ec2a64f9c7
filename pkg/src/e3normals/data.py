"""Point-cloud file I/O (PCPNet-style ASCII) and synthetic benchmark shapes."""
from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, InvalidSpec, LengthMismatch, ParseError, ZeroNormal

NOISE_PRESETS = (0.0, 0.0012, 0.006, 0.012)
SHAPES = ("plane", "sphere", "cylinder", "torus", "cube")
DENSITIES = ("uniform", "stripes", "gradient")


@dataclass
class PointCloud:
    positions: np.ndarray
    gt_normals: np.ndarray | None = None
    name: str = ""
    bbox_diagonal: float = field(init=False)

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64).reshape(-1, 3)
        if self.gt_normals is not None:
            self.gt_normals = np.asarray(self.gt_normals, dtype=np.float64).reshape(-1, 3)
            if len(self.gt_normals) != len(self.positions):
                raise LengthMismatch(
                    f"{len(self.gt_normals)} normals for {len(self.positions)} points"
                )
        if len(self.positions):
            with np.errstate(over="ignore"):
                ext = self.positions.max(axis=0) - self.positions.min(axis=0)
                self.bbox_diagonal = float(np.linalg.norm(ext))
        else:
            self.bbox_diagonal = 0.0

    def __len__(self) -> int:
        return len(self.positions)


def atomic_write_bytes(path, data: bytes) -> None:
    """Write via a sibling temp file and rename, so readers never see partial output."""
    path = Path(path)
    try:
        fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc}") from exc
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except OSError as exc:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise DataError(f"cannot write {path}: {exc}") from exc


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def format_rows(rows: np.ndarray) -> str:
    # repr gives the shortest string that round-trips exactly
    return "".join(" ".join(repr(float(v)) for v in row) + "\n" for row in rows)


def _read_rows(path) -> tuple[np.ndarray, list[int]]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    rows, lines = [], []
    for lineno, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        parts = s.split()
        if len(parts) != 3:
            raise ParseError(path, lineno, f"expected 3 values, got {len(parts)}")
        try:
            rows.append([float(v) for v in parts])
        except ValueError:
            raise ParseError(path, lineno, "non-numeric value") from None
        lines.append(lineno)
    arr = np.array(rows, dtype=np.float64).reshape(-1, 3)
    if not np.all(np.isfinite(arr)):
        bad = int(np.argmax(~np.isfinite(arr).all(axis=1)))
        raise ParseError(path, lines[bad], "non-finite value")
    return arr, lines


def read_xyz(path) -> PointCloud:
    pts, _ = _read_rows(path)
    return PointCloud(pts, name=Path(path).stem)


def write_xyz(cloud: PointCloud | np.ndarray, path) -> None:
    pts = cloud.positions if isinstance(cloud, PointCloud) else np.asarray(cloud, float)
    atomic_write_text(path, format_rows(pts.reshape(-1, 3)))


def read_normals(path) -> np.ndarray:
    """Read ``nx ny nz`` rows, renormalising each; near-zero rows are rejected."""
    n, lines = _read_rows(path)
    norm = np.linalg.norm(n, axis=1)
    small = np.nonzero(norm < 1e-8)[0]
    if len(small):
        raise ZeroNormal(path, lines[small[0]])
    return n / norm[:, None]


def write_normals(normals, path) -> None:
    atomic_write_text(path, format_rows(np.asarray(normals, float).reshape(-1, 3)))


def read_shape_list(path) -> list[str]:
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    names = [s.strip() for s in lines]
    return list(dict.fromkeys(s for s in names if s and not s.startswith("#")))


def load_shape(directory, name: str, normals: bool = True) -> PointCloud:
    """``<name>.xyz`` plus, when asked, ``<name>.normals`` from ``directory``."""
    d = Path(directory)
    cloud = read_xyz(d / f"{name}.xyz")
    if normals:
        cloud = PointCloud(cloud.positions, read_normals(d / f"{name}.normals"), name)
    cloud.name = name
    return cloud


@dataclass(frozen=True)
class SynthSpec:
    shape: str = "sphere"
    n_points: int = 5000
    noise_sigma: float = 0.0
    density: str = "uniform"
    seed: int = 0
    stripe_bands: int = 8
    gradient_floor: float = 0.1

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise InvalidSpec(f"shape must be one of {SHAPES}, got {self.shape!r}")
        if self.density not in DENSITIES:
            raise InvalidSpec(f"density must be one of {DENSITIES}, got {self.density!r}")
        if self.n_points < 16:
            raise InvalidSpec("n_points must be >= 16")
        if not self.noise_sigma >= 0:
            raise InvalidSpec("noise_sigma must be >= 0")
        if self.stripe_bands < 1 or not 0 < self.gradient_floor <= 1:
            raise InvalidSpec("bad stripe/gradient parameters")

    @property
    def default_name(self) -> str:
        parts = [self.shape, str(self.n_points)]
        if self.noise_sigma:
            parts.append(f"noise_{self.noise_sigma:g}")
        if self.density != "uniform":
            parts.append(self.density)
        return "_".join(parts)


TORUS_R, TORUS_r = 1.0, 0.35


def _surface(shape: str, n: int, rng: np.random.Generator):
    """Area-uniform samples, analytic unit normals, and a first surface parameter in [0, 1)."""
    if shape == "plane":
        xy = rng.uniform(-1.0, 1.0, size=(n, 2))
        p = np.column_stack([xy, np.zeros(n)])
        nrm = np.tile([0.0, 0.0, 1.0], (n, 1))
        u = (xy[:, 0] + 1.0) / 2.0
    elif shape == "sphere":
        v = rng.normal(size=(n, 3))
        p = v / np.linalg.norm(v, axis=1, keepdims=True)
        nrm = p.copy()
        u = (p[:, 2] + 1.0) / 2.0
    elif shape == "cylinder":
        th = rng.uniform(0.0, 2 * np.pi, n)
        z = rng.uniform(-1.0, 1.0, n)
        nrm = np.column_stack([np.cos(th), np.sin(th), np.zeros(n)])
        p = nrm + np.column_stack([np.zeros((n, 2)), z])
        u = th / (2 * np.pi)
    elif shape == "torus":
        th = np.empty(0)
        ph = np.empty(0)
        # rejection on the area element (R + r cos(phi))
        while len(th) < n:
            m = 2 * (n - len(th)) + 16
            t = rng.uniform(0.0, 2 * np.pi, m)
            f = rng.uniform(0.0, 2 * np.pi, m)
            acc = rng.uniform(0.0, TORUS_R + TORUS_r, m) < TORUS_R + TORUS_r * np.cos(f)
            th = np.concatenate([th, t[acc]])
            ph = np.concatenate([ph, f[acc]])
        th, ph = th[:n], ph[:n]
        nrm = np.column_stack([np.cos(ph) * np.cos(th), np.cos(ph) * np.sin(th), np.sin(ph)])
        ring = np.column_stack([np.cos(th), np.sin(th), np.zeros(n)]) * TORUS_R
        p = ring + TORUS_r * nrm
        u = th / (2 * np.pi)
    elif shape == "cube":
        face = rng.integers(0, 6, n)
        ab = rng.uniform(-1.0, 1.0, size=(n, 2))
        axis = face // 2
        sign = np.where(face % 2 == 0, 1.0, -1.0)
        p = np.empty((n, 3))
        nrm = np.zeros((n, 3))
        for k in range(3):
            sel = axis == k
            others = [c for c in range(3) if c != k]
            p[sel, k] = sign[sel]
            p[np.ix_(sel, others)] = ab[sel]
            nrm[sel, k] = sign[sel]
        u = (p[:, 0] + 1.0) / 2.0
    else:
        raise InvalidSpec(f"unknown shape {shape!r}")
    return p, nrm, np.clip(u, 0.0, np.nextafter(1.0, 0.0))


def synthesize(spec: SynthSpec) -> PointCloud:
    """Sample ``spec.shape`` with analytic normals, then add noise and density edits.

    Surface samples, noise and retention draws use independent streams, so the
    stripes/gradient variants are exact subsets of the uniform cloud with the same seed.
    """
    s_surf, s_noise, s_keep = np.random.SeedSequence(spec.seed).spawn(3)
    p, nrm, u = _surface(spec.shape, spec.n_points, np.random.default_rng(s_surf))
    diag = float(np.linalg.norm(p.max(axis=0) - p.min(axis=0)))
    noise = np.random.default_rng(s_noise).normal(size=p.shape)
    if spec.noise_sigma > 0:
        p = p + noise * (spec.noise_sigma * diag)
    if spec.density == "stripes":
        keep = (np.floor(u * spec.stripe_bands).astype(int) % 2) == 0
    elif spec.density == "gradient":
        prob = 1.0 - (1.0 - spec.gradient_floor) * u
        keep = np.random.default_rng(s_keep).uniform(size=len(u)) < prob
    else:
        keep = np.ones(len(u), dtype=bool)
    return PointCloud(p[keep], nrm[keep], spec.default_name)
