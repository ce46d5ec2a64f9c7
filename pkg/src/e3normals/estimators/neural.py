"""A toy trainable point network and its binary parameter format.

Architecture: a shared per-point MLP (encoder), max-pooling to a global feature,
the global feature concatenated back onto every point's encoder output, then a
per-point MLP (decoder) producing a 3-vector that is normalised to unit length.
"""
from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import DataError, ShapeMismatch
from ..nn import autodiff as ad
from .base import Estimator

MAGIC = b"E3NP"
VERSION = 1
NORM_EPS = 1e-12
_GUARD = np.array([0.0, 0.0, NORM_EPS])


@dataclass(frozen=True)
class NetConfig:
    in_dim: int = 3
    encoder: tuple = (64, 128)
    decoder: tuple = (128, 64)
    out_dim: int = 3

    @classmethod
    def with_fused_dim(cls, fused_dim: int) -> "NetConfig":
        return cls(encoder=(64, fused_dim))

    @property
    def fused_dim(self) -> int:
        return self.encoder[-1]

    def layer_shapes(self) -> list[tuple[int, int]]:
        dims = [self.in_dim, *self.encoder]
        shapes = list(zip(dims[:-1], dims[1:]))
        dec = [2 * self.fused_dim, *self.decoder, self.out_dim]
        return shapes + list(zip(dec[:-1], dec[1:]))

    @property
    def n_encoder_layers(self) -> int:
        return len(self.encoder)


@dataclass
class NetworkParams:
    """Weights ``(fan_in, fan_out)`` and biases, interleaved in layer order."""

    config: NetConfig
    arrays: list

    def __post_init__(self):
        want = []
        for fi, fo in self.config.layer_shapes():
            want += [(fi, fo), (fo,)]
        got = [a.shape for a in self.arrays]
        if got != want:
            raise ShapeMismatch(f"parameter shapes {got} do not match architecture {want}")

    @property
    def layers(self):
        return list(zip(self.arrays[0::2], self.arrays[1::2]))

    def copy(self) -> "NetworkParams":
        return NetworkParams(self.config, [a.copy() for a in self.arrays])

    def n_values(self) -> int:
        return sum(a.size for a in self.arrays)

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays])


def init_params(config: NetConfig | None = None, seed: int = 0) -> NetworkParams:
    config = config or NetConfig()
    rng = np.random.default_rng(seed)
    arrays = []
    shapes = config.layer_shapes()
    for k, (fi, fo) in enumerate(shapes):
        gain = 2.0 if k < len(shapes) - 1 else 1.0
        arrays.append(rng.normal(0.0, np.sqrt(gain / fi), size=(fi, fo)))
        arrays.append(np.zeros(fo))
    return NetworkParams(config, arrays)


def forward(config: NetConfig, tensors, x) -> ad.Tensor:
    """Unit normals ``(B, n, 3)`` for canonical points ``x`` of shape ``(B, n, 3)``."""
    x = ad.lift(x)
    ne = config.n_encoder_layers
    layers = list(zip(tensors[0::2], tensors[1::2]))
    h = x
    for w, b in layers[:ne]:
        h = ad.relu(h @ w + b)
    g = ad.max(h, axis=-2, keepdims=True)
    z = ad.concat([h, ad.broadcast_to(g, h.shape)], axis=-1)
    dec = layers[ne:]
    for w, b in dec[:-1]:
        z = ad.relu(z @ w + b)
    w, b = dec[-1]
    out = z @ w + b + _GUARD
    return out / ad.sqrt((out * out).sum(axis=-1, keepdims=True))


def neural_estimate(points, params: NetworkParams) -> np.ndarray:
    x = np.asarray(points, dtype=np.float64)
    single = x.ndim == 2
    if single:
        x = x[None]
    if x.ndim != 3 or x.shape[-1] != params.config.in_dim:
        raise ShapeMismatch(f"expected (..., n, {params.config.in_dim}) input, got {x.shape}")
    out = forward(params.config, [ad.Tensor(a) for a in params.arrays], x).value
    return out[0] if single else out


class NeuralEstimator(Estimator):
    name = "neural"

    def __init__(self, params: NetworkParams):
        self.params = params

    def estimate(self, points) -> np.ndarray:
        return neural_estimate(points, self.params)

    def estimate_batch(self, stack) -> np.ndarray:
        return neural_estimate(np.asarray(stack, dtype=np.float64), self.params)


def params_to_bytes(params: NetworkParams) -> bytes:
    c = params.config
    head = [MAGIC, struct.pack("<I", VERSION), struct.pack("<I", c.in_dim)]
    head.append(struct.pack(f"<I{len(c.encoder)}I", len(c.encoder), *c.encoder))
    head.append(struct.pack(f"<I{len(c.decoder)}I", len(c.decoder), *c.decoder))
    head.append(struct.pack("<I", c.out_dim))
    body = params.flat().astype("<f8").tobytes()
    return b"".join(head) + body


def params_from_bytes(data: bytes) -> NetworkParams:
    if data[:4] != MAGIC:
        raise DataError("not a network parameter file (bad magic)")
    pos = 4

    def u32():
        nonlocal pos
        if pos + 4 > len(data):
            raise DataError("truncated parameter header")
        (v,) = struct.unpack_from("<I", data, pos)
        pos += 4
        return v

    version = u32()
    if version != VERSION:
        raise DataError(f"unsupported parameter file version {version}")
    in_dim = u32()
    encoder = tuple(u32() for _ in range(u32()))
    decoder = tuple(u32() for _ in range(u32()))
    out_dim = u32()
    try:
        config = NetConfig(in_dim, encoder, decoder, out_dim)
        shapes = config.layer_shapes()
    except (ValueError, IndexError) as exc:
        raise DataError(f"bad architecture block: {exc}") from exc
    n_vals = sum(fi * fo + fo for fi, fo in shapes)
    if len(data) - pos != 8 * n_vals:
        raise DataError(f"expected {n_vals} parameters, file holds {(len(data) - pos) / 8:g}")
    flat = np.frombuffer(data, dtype="<f8", offset=pos).astype(np.float64)
    arrays, k = [], 0
    for fi, fo in shapes:
        arrays.append(flat[k : k + fi * fo].reshape(fi, fo).copy())
        k += fi * fo
        arrays.append(flat[k : k + fo].copy())
        k += fo
    return NetworkParams(config, arrays)


def save_params(params: NetworkParams, path) -> None:
    from ..data import atomic_write_bytes

    atomic_write_bytes(path, params_to_bytes(params))


def load_params(path) -> NetworkParams:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    return params_from_bytes(data)


def estimator_from_file(path: str | os.PathLike) -> NeuralEstimator:
    return NeuralEstimator(load_params(path))

