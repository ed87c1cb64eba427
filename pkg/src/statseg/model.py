"""Toy convolutional encoder-decoder with segmentation and reconstruction heads.

Fixed architecture (C = base_channels):
  encoder: conv3x3(1->C)+ReLU -> conv3x3 stride2 (C->2C)+ReLU
           -> conv3x3 stride2 (2C->4C)+ReLU
  decoder: up2 + conv3x3(4C->2C)+ReLU -> up2 + conv3x3(2C->C)+ReLU
  heads:   conv1x1(C->1)+sigmoid (segmentation), conv1x1(C->1)+sigmoid (reconstruction)

Forward/backward are hand-written numpy; gradients are exact (checked
against finite differences in the test suite). ReLU'(0) := 0.
"""
from __future__ import annotations

import functools
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidConfigError, MalformedFileError, ShapeMismatchError
from .grid import GridShape, Image, SoftMask

_CKPT_MAGIC = b"SSEGCKPT"
_CKPT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    input_size: GridShape
    base_channels: int = 8
    seed: int = 0

    def __post_init__(self):
        if self.input_size.height % 4 != 0 or self.input_size.width % 4 != 0:
            raise InvalidConfigError("input height and width must be divisible by 4")
        if self.base_channels < 1:
            raise InvalidConfigError("base_channels must be positive")
        if self.seed < 0:
            raise InvalidConfigError("seed must be non-negative")


@functools.lru_cache(maxsize=None)
def param_shapes(base_channels: int) -> tuple:
    c = base_channels
    return (
        ("enc1.w", (c, 1, 3, 3)), ("enc1.b", (c,)),
        ("enc2.w", (2 * c, c, 3, 3)), ("enc2.b", (2 * c,)),
        ("enc3.w", (4 * c, 2 * c, 3, 3)), ("enc3.b", (4 * c,)),
        ("dec1.w", (2 * c, 4 * c, 3, 3)), ("dec1.b", (2 * c,)),
        ("dec2.w", (c, 2 * c, 3, 3)), ("dec2.b", (c,)),
        ("seg.w", (1, c, 1, 1)), ("seg.b", (1,)),
        ("rec.w", (1, c, 1, 1)), ("rec.b", (1,)),
    )


@functools.lru_cache(maxsize=None)
def _param_layout(base_channels: int) -> tuple:
    out = []
    off = 0
    for name, shape in param_shapes(base_channels):
        size = 1
        for s in shape:
            size *= s
        out.append((name, shape, off, size))
        off += size
    return tuple(out), off


class ModelParams:
    """Ordered named tensors; flattenable to one vector and back, exactly."""

    __slots__ = ("config", "tensors")

    def __init__(self, config: ModelConfig, tensors: dict):
        expected = param_shapes(config.base_channels)
        if tuple(tensors.keys()) != tuple(n for n, _ in expected):
            raise ValueError("parameter names do not match the architecture")
        for name, shape in expected:
            t = np.asarray(tensors[name], dtype=np.float64)
            if t.shape != shape:
                raise ValueError(f"{name}: expected shape {shape}, got {t.shape}")
            # finite sum <=> all entries finite (NaN/inf propagate through sum)
            if not np.isfinite(t.sum()):
                raise ValueError(f"{name}: non-finite values")
            tensors[name] = t
        self.config = config
        self.tensors = tensors

    def flatten(self) -> np.ndarray:
        return np.concatenate([t.ravel() for t in self.tensors.values()])

    @classmethod
    def from_flat(cls, config: ModelConfig, vec: np.ndarray) -> "ModelParams":
        vec = np.asarray(vec, dtype=np.float64)
        layout, total = _param_layout(config.base_channels)
        if vec.size != total:
            raise ValueError(f"flat vector has {vec.size} entries, expected {total}")
        tensors = {name: vec[off:off + size].reshape(shape).copy()
                   for name, shape, off, size in layout}
        return cls(config, tensors)

    @property
    def n_params(self) -> int:
        return _param_layout(self.config.base_channels)[1]


def init_params(config: ModelConfig) -> ModelParams:
    """He-style init: kernels ~ N(0, 2/fan_in), biases zero, seeded."""
    rng = np.random.default_rng(config.seed)
    tensors = {}
    for name, shape in param_shapes(config.base_channels):
        if name.endswith(".w"):
            fan_in = int(np.prod(shape[1:]))
            tensors[name] = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)
        else:
            tensors[name] = np.zeros(shape)
    return ModelParams(config, tensors)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _pad2(x, pad):
    if pad == 0:
        return x
    bsz, c, h, w = x.shape
    out = np.zeros((bsz, c, h + 2 * pad, w + 2 * pad))
    out[:, :, pad:pad + h, pad:pad + w] = x
    return out


def _conv2d(x, w, b, stride=1, pad=1):
    bsz, cin, h, wd = x.shape
    cout, _, kh, kw = w.shape
    xp = _pad2(x, pad)
    ho = (h + 2 * pad - kh) // stride + 1
    wo = (wd + 2 * pad - kw) // stride + 1
    # windows: (B, Cin, ho, wo, kh, kw), a strided view of the padded input
    win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))
    win = win[:, :, ::stride, ::stride][:, :, :ho, :wo]
    y = np.tensordot(w, win, axes=([1, 2, 3], [1, 4, 5])).transpose(1, 0, 2, 3)
    return y + b[None, :, None, None]


def _conv2d_backward(dy, x, w, stride=1, pad=1):
    bsz, cin, h, wd = x.shape
    cout, _, kh, kw = w.shape
    xp = _pad2(x, pad)
    ho, wo = dy.shape[2], dy.shape[3]
    dxp = np.zeros_like(xp)
    dw = np.zeros_like(w)
    for di in range(kh):
        for dj in range(kw):
            sl_r = slice(di, di + stride * ho, stride)
            sl_c = slice(dj, dj + stride * wo, stride)
            xs = xp[:, :, sl_r, sl_c]
            dw[:, :, di, dj] = np.tensordot(dy, xs, axes=([0, 2, 3], [0, 2, 3]))
            dxp[:, :, sl_r, sl_c] += np.tensordot(
                w[:, :, di, dj], dy, axes=([0], [1])).transpose(1, 0, 2, 3)
    db = dy.sum(axis=(0, 2, 3))
    dx = dxp[:, :, pad:pad + h, pad:pad + wd] if pad else dxp
    return dx, dw, db


def _upsample2(x):
    return x.repeat(2, axis=2).repeat(2, axis=3)


def _upsample2_backward(dy):
    bsz, c, h, w = dy.shape
    return dy.reshape(bsz, c, h // 2, 2, w // 2, 2).sum(axis=(3, 5))


@dataclass
class ForwardTrace:
    """Outputs plus the activations needed by the backward pass."""

    pred: SoftMask
    recon: Image
    params: "ModelParams" = field(repr=False, default=None)
    cache: dict = field(repr=False, default_factory=dict)


def _forward_batch(params: ModelParams, x: np.ndarray):
    """x: (B, 1, H, W) -> (pred, recon, cache), each output (B, 1, H, W)."""
    t = params.tensors
    a1 = np.maximum(_conv2d(x, t["enc1.w"], t["enc1.b"]), 0.0)
    a2 = np.maximum(_conv2d(a1, t["enc2.w"], t["enc2.b"], stride=2), 0.0)
    a3 = np.maximum(_conv2d(a2, t["enc3.w"], t["enc3.b"], stride=2), 0.0)
    u1 = _upsample2(a3)
    a4 = np.maximum(_conv2d(u1, t["dec1.w"], t["dec1.b"]), 0.0)
    u2 = _upsample2(a4)
    a5 = np.maximum(_conv2d(u2, t["dec2.w"], t["dec2.b"]), 0.0)
    pred = _sigmoid(_conv2d(a5, t["seg.w"], t["seg.b"], stride=1, pad=0))
    recon = _sigmoid(_conv2d(a5, t["rec.w"], t["rec.b"], stride=1, pad=0))
    cache = {"x": x, "a1": a1, "a2": a2, "a3": a3, "u1": u1, "a4": a4,
             "u2": u2, "a5": a5, "pred": pred, "recon": recon}
    return pred, recon, cache


def _backward_batch(params: ModelParams, cache: dict,
                    d_pred: np.ndarray, d_recon: np.ndarray) -> ModelParams:
    t = params.tensors
    g = {}
    dz_seg = d_pred * cache["pred"] * (1.0 - cache["pred"])
    dz_rec = d_recon * cache["recon"] * (1.0 - cache["recon"])
    da5_s, g["seg.w"], g["seg.b"] = _conv2d_backward(dz_seg, cache["a5"], t["seg.w"], pad=0)
    da5_r, g["rec.w"], g["rec.b"] = _conv2d_backward(dz_rec, cache["a5"], t["rec.w"], pad=0)
    dz5 = (da5_s + da5_r) * (cache["a5"] > 0.0)
    du2, g["dec2.w"], g["dec2.b"] = _conv2d_backward(dz5, cache["u2"], t["dec2.w"])
    dz4 = _upsample2_backward(du2) * (cache["a4"] > 0.0)
    du1, g["dec1.w"], g["dec1.b"] = _conv2d_backward(dz4, cache["u1"], t["dec1.w"])
    dz3 = _upsample2_backward(du1) * (cache["a3"] > 0.0)
    da2, g["enc3.w"], g["enc3.b"] = _conv2d_backward(dz3, cache["a2"], t["enc3.w"], stride=2)
    dz2 = da2 * (cache["a2"] > 0.0)
    da1, g["enc2.w"], g["enc2.b"] = _conv2d_backward(dz2, cache["a1"], t["enc2.w"], stride=2)
    dz1 = da1 * (cache["a1"] > 0.0)
    _, g["enc1.w"], g["enc1.b"] = _conv2d_backward(dz1, cache["x"], t["enc1.w"])
    ordered = {name: g[name] for name, _ in param_shapes(params.config.base_channels)}
    return ModelParams(params.config, ordered)


def forward(params: ModelParams, image: Image) -> ForwardTrace:
    size = params.config.input_size
    if image.shape != size:
        raise ShapeMismatchError(
            f"image shape {image.shape} does not match model input {size}")
    x = image.values[None, None, :, :]
    pred, recon, cache = _forward_batch(params, x)
    return ForwardTrace(pred=SoftMask(pred[0, 0]), recon=Image(recon[0, 0]),
                        params=params, cache=cache)


def backward(trace: ForwardTrace, d_pred: np.ndarray, d_recon: np.ndarray) -> ModelParams:
    shape = trace.cache["pred"].shape[2:]
    if d_pred.shape != shape or d_recon.shape != shape:
        raise ShapeMismatchError("gradient grids must match the output shape")
    return _backward_batch(trace.params, trace.cache,
                           d_pred[None, None, :, :], d_recon[None, None, :, :])


def save_checkpoint(params: ModelParams, path):
    cfg = params.config
    flat = params.flatten()
    header = struct.pack("<8sIIIIIQ", _CKPT_MAGIC, _CKPT_VERSION,
                         cfg.input_size.height, cfg.input_size.width,
                         cfg.base_channels, cfg.seed, flat.size)
    with open(path, "wb") as f:
        f.write(header)
        f.write(flat.astype("<f8").tobytes())


def load_checkpoint(path) -> ModelParams:
    with open(path, "rb") as f:
        raw = f.read()
    hsize = struct.calcsize("<8sIIIIIQ")
    if len(raw) < hsize:
        raise MalformedFileError(f"{path}: truncated checkpoint")
    magic, version, h, w, c, seed, n = struct.unpack("<8sIIIIIQ", raw[:hsize])
    if magic != _CKPT_MAGIC:
        raise MalformedFileError(f"{path}: bad magic {magic!r}")
    if version != _CKPT_VERSION:
        raise MalformedFileError(f"{path}: unsupported checkpoint version {version}")
    flat = np.frombuffer(raw[hsize:], dtype="<f8")
    if flat.size != n:
        raise MalformedFileError(f"{path}: expected {n} parameters, found {flat.size}")
    config = ModelConfig(GridShape(h, w), base_channels=c, seed=seed)
    return ModelParams.from_flat(config, flat)
