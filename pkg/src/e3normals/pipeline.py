"""Whole-cloud inference over overlapping patches, and random-frame training.

Inference covers the cloud with patches (geodesic when the seed's component is big
enough), frame-averages the estimator on each patch, keeps the predictions in each
patch's nearest half, and blends overlapping predictions with Gaussian weights of
their distance to the patch center.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .data import PointCloud
from .errors import ConfigError, DegenerateAggregation, EmptyInput, MissingGroundTruth
from .estimators.neural import NetworkParams, NeuralEstimator, forward
from .frames import VALID_N_FRAMES, build_frame_set, frame_average, sample_random_frame
from .geom import as_points
from .nn import autodiff as ad
from .nn.losses import LOSS_VARIANTS, gaussian_weights, patch_loss, patch_weights
from .nn.optim import OptimizerState, adamw_step, cosine_lr
from .patches import KnnIndex, Patch, build_graph, cover, make_patch

log = logging.getLogger(__name__)


@dataclass
class InferenceConfig:
    patch_size: int = 1400
    n_frames: int = 8
    graph_k: int = 50
    use_geodesic: bool = True
    use_half_patch: bool = True
    use_gaussian_agg: bool = True
    # None selects the half-radius rule: sigma = (distance of farthest half-patch member) / 2
    gauss_sigma: float | None = None
    per_point_mode: bool = False
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.patch_size < 3:
            raise ConfigError("patch size must be >= 3")
        if self.n_frames not in VALID_N_FRAMES:
            raise ConfigError(f"n_frames must be one of {VALID_N_FRAMES}")
        if self.graph_k < 1:
            raise ConfigError("graph k must be >= 1")
        if self.gauss_sigma is not None and not self.gauss_sigma > 0:
            raise ConfigError("gauss sigma must be positive")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if self.per_point_mode:
            self.use_half_patch = False

    @property
    def gauss_sigma_rule(self) -> str:
        return "half-radius-over-2" if self.gauss_sigma is None else f"fixed({self.gauss_sigma:g})"


@dataclass(frozen=True)
class Prediction:
    point: int
    normal: np.ndarray
    weight: float
    patch: int


def patch_sigma(patch: Patch, fixed: float | None) -> float:
    return fixed if fixed is not None else patch.half_radius / 2.0


def _patch_predictions(pid: int, patch: Patch, points, estimator, cfg: InferenceConfig):
    rng = np.random.default_rng([cfg.seed, pid])
    normals = frame_average(estimator, points[patch.members], cfg.n_frames, rng)
    if cfg.per_point_mode:
        keep = 1
    elif cfg.use_half_patch:
        keep = patch.half_size
    else:
        keep = len(patch)
    ids = patch.members[:keep]
    n = normals[:keep]
    sigma = patch_sigma(patch, cfg.gauss_sigma)
    if cfg.use_gaussian_agg and sigma > 0:
        w = gaussian_weights(patch.center_distances[:keep], sigma)
    else:
        w = np.ones(keep)
    return ids, n, w


def aggregate_arrays(n_points: int, point_ids, normals, weights) -> np.ndarray:
    """Blend candidate normals per point; inputs must be in (patch, point) order.

    Each candidate is flipped into the hemisphere of the first candidate its point
    received, weighted, summed and normalised.
    """
    ids = np.asarray(point_ids, dtype=np.int64)
    nrm = np.asarray(normals, dtype=np.float64).reshape(-1, 3)
    w = np.asarray(weights, dtype=np.float64)
    if len(ids) != len(nrm) or len(ids) != len(w):
        raise ConfigError("point ids, normals and weights differ in length")
    seen, first = np.unique(ids, return_index=True)
    if len(seen) != n_points or (n_points and (seen[0] != 0 or seen[-1] != n_points - 1)):
        raise DegenerateAggregation(f"{n_points - len(seen)} points received no prediction")
    ref = nrm[first][ids]
    sign = np.where(np.sum(nrm * ref, axis=1) >= 0.0, 1.0, -1.0)
    acc = np.zeros((n_points, 3))
    np.add.at(acc, ids, (w * sign)[:, None] * nrm)
    norm = np.linalg.norm(acc, axis=1)
    bad = np.nonzero(norm < 1e-8)[0]
    for i in bad:
        cand = np.nonzero(ids == i)[0]
        best = cand[np.argmax(w[cand])]
        log.warning("point %d: weighted sum vanished; using its highest-weight candidate", i)
        acc[i] = nrm[best]
        norm[i] = np.linalg.norm(nrm[best])
    return acc / norm[:, None]


def aggregate(predictions, n_points: int | None = None) -> np.ndarray:
    preds = sorted(predictions, key=lambda p: (p.patch, p.point))
    if not preds:
        raise DegenerateAggregation("no predictions")
    n = n_points if n_points is not None else max(p.point for p in preds) + 1
    return aggregate_arrays(
        n,
        [p.point for p in preds],
        np.array([p.normal for p in preds]),
        [p.weight for p in preds],
    )


@dataclass
class InferenceResult:
    normals: np.ndarray
    patches: list
    predictions: tuple = field(repr=False, default=())


def infer(cloud, estimator, cfg: InferenceConfig | None = None, details: bool = False, query=None):
    """Per-point unit normals for ``cloud`` (a :class:`PointCloud` or ``(n, 3)`` array).

    In per-point mode ``query`` may restrict the output to the given point indices
    (rows follow ``query`` order); the neighbourhoods still use the whole cloud.
    """
    cfg = cfg or InferenceConfig()
    if query is not None and not cfg.per_point_mode:
        raise ConfigError("query indices need per-point mode")
    pts = cloud.positions if isinstance(cloud, PointCloud) else cloud
    try:
        pts = as_points(pts)
    except EmptyInput:
        raise EmptyInput("empty cloud") from None
    n = len(pts)
    size = min(cfg.patch_size, n)
    index = KnnIndex(pts, cfg.graph_k)
    graph = build_graph(pts, cfg.graph_k, index) if cfg.use_geodesic else None

    def make(seed):
        return make_patch(graph, index, seed, size, cfg.use_geodesic)

    if cfg.per_point_mode:
        targets = range(n) if query is None else np.asarray(query, dtype=np.int64)
        if query is not None and (len(targets) == 0 or targets.min() < 0 or targets.max() >= n):
            raise ConfigError("query indices out of range")
        patches = [make(int(i)) for i in targets]
    else:
        patches = cover(n, make)

    def work(pid):
        return _patch_predictions(pid, patches[pid], pts, estimator, cfg)

    threads = cfg.threads if getattr(estimator, "concurrency_safe", False) else 1
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, range(len(patches))))
    else:
        results = [work(pid) for pid in range(len(patches))]

    ids = np.concatenate([r[0] for r in results])
    nrm = np.concatenate([r[1] for r in results])
    w = np.concatenate([r[2] for r in results])
    if query is not None:
        # one kept prediction per patch, in query order
        normals = nrm / np.linalg.norm(nrm, axis=1, keepdims=True)
    else:
        normals = aggregate_arrays(n, ids, nrm, w)
    if details:
        return InferenceResult(normals, patches, (ids, nrm, w))
    return normals


@dataclass
class TrainConfig:
    epochs: int = 150
    batch_size: int = 128
    lr_max: float = 2e-3
    lr_min: float = 2e-5
    loss: str = "gau"
    seed: int = 0
    patch_size: int = 1400
    # None: enough patches for their half patches to cover the training points once
    patches_per_epoch: int | None = None
    gauss_sigma: float | None = None
    gauss_normalize: bool = False
    geodesic_patches: bool = False
    graph_k: int = 50
    weight_decay: float = 0.01

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1 or self.patch_size < 3:
            raise ConfigError("epochs >= 0, batch size >= 1 and patch size >= 3 required")
        if not self.lr_max >= self.lr_min > 0:
            raise ConfigError("need lr_max >= lr_min > 0")
        if self.loss not in LOSS_VARIANTS:
            raise ConfigError(f"loss must be one of {LOSS_VARIANTS}")
        if self.patches_per_epoch is not None and self.patches_per_epoch < 1:
            raise ConfigError("patches per epoch must be >= 1")


@dataclass
class TrainResult:
    params: NetworkParams
    history: list
    initial_loss: float
    steps: int


class _PatchSampler:
    """Draws training patches canonicalised into one random frame each."""

    def __init__(self, shapes, cfg: TrainConfig):
        self.shapes = list(shapes)
        if not self.shapes:
            raise EmptyInput("no training shapes")
        for s in self.shapes:
            if s.gt_normals is None:
                raise MissingGroundTruth(f"shape {s.name!r} has no ground-truth normals")
        self.cfg = cfg
        self.sizes = np.array([len(s) for s in self.shapes])
        self.offsets = np.concatenate([[0], np.cumsum(self.sizes)])
        self.n = int(min(cfg.patch_size, self.sizes.min()))
        self.indexes = [KnnIndex(s.positions, cfg.graph_k) for s in self.shapes]
        self.graphs = (
            [build_graph(s.positions, cfg.graph_k, ix) for s, ix in zip(self.shapes, self.indexes)]
            if cfg.geodesic_patches
            else [None] * len(self.shapes)
        )

    @property
    def total_points(self) -> int:
        return int(self.offsets[-1])

    def sample(self, rng: np.random.Generator, count: int):
        xs, gs, ds, sig = [], [], [], []
        for _ in range(count):
            k = int(rng.integers(self.total_points))
            s = int(np.searchsorted(self.offsets, k, side="right") - 1)
            seed = k - int(self.offsets[s])
            shape = self.shapes[s]
            p = make_patch(self.graphs[s], self.indexes[s], seed, self.n, self.cfg.geodesic_patches)
            pts = shape.positions[p.members]
            frame = sample_random_frame(build_frame_set(pts), rng)
            xs.append((pts - frame.translation) @ frame.rotation)
            gs.append(shape.gt_normals[p.members] @ frame.rotation)
            ds.append(p.center_distances)
            sig.append(patch_sigma(p, self.cfg.gauss_sigma))
        return np.stack(xs), np.stack(gs), np.stack(ds), np.array(sig)


def train(shapes, model, cfg: TrainConfig | None = None) -> TrainResult:
    """Random-frame training of the point network with AdamW and cosine annealing.

    ``model`` is a :class:`NetworkParams` or :class:`NeuralEstimator`; it is not
    modified. Each step draws ``batch_size`` patches, transforms each (points and
    ground truth) into one frame drawn from its frame set, and minimises the
    configured loss in that frame.
    """
    cfg = cfg or TrainConfig()
    params = model.params if isinstance(model, NeuralEstimator) else model
    params = params.copy()
    sampler = _PatchSampler(shapes, cfg)
    half = (sampler.n + 1) // 2
    per_epoch = cfg.patches_per_epoch or math.ceil(sampler.total_points / half)
    steps_per_epoch = math.ceil(per_epoch / cfg.batch_size)
    total = cfg.epochs * steps_per_epoch
    rng = np.random.default_rng(cfg.seed)
    tensors = [ad.param(a) for a in params.arrays]
    state = OptimizerState.for_params(params.arrays, weight_decay=cfg.weight_decay)
    history, initial, step = [], float("nan"), 0

    for _ in range(cfg.epochs):
        seen, acc = 0, 0.0
        while seen < per_epoch:
            b = min(cfg.batch_size, per_epoch - seen)
            x, g, d, sig = sampler.sample(rng, b)
            w, counts = patch_weights(cfg.loss, d, sig, cfg.gauss_normalize)
            for t in tensors:
                t.zero_grad()
            loss = patch_loss(forward(params.config, tensors, x), g, w, counts)
            ad.backward(loss)
            value = float(loss.value)
            if step == 0:
                initial = value
            lr = cosine_lr(step, total, cfg.lr_max, cfg.lr_min)
            adamw_step(state, [t.value for t in tensors], [t.grad for t in tensors], lr)
            acc += value * b
            seen += b
            step += 1
        history.append(acc / seen)
        log.info("epoch %d: loss %.6f", len(history), history[-1])

    params = NetworkParams(params.config, [t.value.copy() for t in tensors])
    return TrainResult(params, history, initial, step)


def evaluate_loss(shapes, params: NetworkParams, cfg: TrainConfig, n_patches: int = 64, seed: int = 1234) -> float:
    """Mean configured loss of ``params`` on a fixed random draw of framed patches."""
    sampler = _PatchSampler(shapes, cfg)
    x, g, d, sig = sampler.sample(np.random.default_rng(seed), n_patches)
    w, counts = patch_weights(cfg.loss, d, sig, cfg.gauss_normalize)
    tensors = [ad.Tensor(a) for a in params.arrays]
    return float(patch_loss(forward(params.config, tensors, x), g, w, counts).value)
