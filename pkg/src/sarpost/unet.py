"""Inference engine for the learned denoiser.

A U-shaped stack of residual conv blocks; every block applies two
GroupNorm -> SiLU -> 3x3 conv layers, the second one conditioned on the
timestep through adaptive group normalization:

    gamma, beta, alpha = MLP(Embed(t))
    X'  = gamma * GN(X) + beta
    X'' = X + alpha * Conv(SiLU(X'))

Encoders downsample with stride-2 convs, decoders upsample with
nearest-neighbor + conv, and skip connections concatenate encoder
features.  Runs in float32 with channel-last internals for speed; pure
numpy so it stays an independent cross-check of the training-side pass.
"""
from __future__ import annotations

import numpy as np

from .errors import InvalidDimensionError
from .priors import _check_alpha_bar
from .weights import layer_plan, normalize_arch, read_sgsw, stage_widths

_GN_EPS = 1e-5


def silu(x):
    return x / (1.0 + np.exp(-x))


def group_norm_nhwc(x, groups):
    """Normalize (B, H, W, C) per channel group; no affine."""
    B, H, W, C = x.shape
    g = x.reshape(B, H, W, groups, C // groups)
    mu = g.mean(axis=(1, 2, 4), keepdims=True)
    m2 = np.square(g).mean(axis=(1, 2, 4), keepdims=True)
    var = m2 - mu * mu
    out = (g - mu) / np.sqrt(var + _GN_EPS)
    return out.reshape(B, H, W, C)


class ConvKernel:
    """3x3 kernel prepared for both conv strategies.

    Small spatial maps use an im2col GEMM; large stride-1 maps use nine
    full-image GEMMs whose outputs are shift-accumulated (avoids the
    patch-matrix copy, which otherwise dominates runtime).
    """

    def __init__(self, w, b):
        w = np.asarray(w, dtype=np.float32)
        self.out_ch = w.shape[0]
        self.flat = np.ascontiguousarray(w.transpose(2, 3, 1, 0).reshape(-1, w.shape[0]))
        self.taps = [
            np.ascontiguousarray(w[:, :, di, dj].T)
            for di in range(3) for dj in range(3)
        ]
        self.bias = np.asarray(b, dtype=np.float32)

    def _im2col_apply(self, x, stride):
        B, H, W, C = x.shape
        xp = np.zeros((B, H + 2, W + 2, C), dtype=x.dtype)
        xp[:, 1:H + 1, 1:W + 1, :] = x
        Ho, Wo = H // stride, W // stride
        cols = np.empty((B, Ho, Wo, 9 * C), dtype=x.dtype)
        k = 0
        for di in range(3):
            for dj in range(3):
                cols[..., k * C:(k + 1) * C] = \
                    xp[:, di:di + H:stride, dj:dj + W:stride, :]
                k += 1
        out = cols.reshape(B * Ho * Wo, 9 * C) @ self.flat
        return out.reshape(B, Ho, Wo, -1)

    def _shiftout_apply(self, x):
        B, H, W, C = x.shape
        out = np.zeros((B, H, W, self.out_ch), dtype=x.dtype)
        xm = x.reshape(-1, C)
        k = 0
        for di in range(3):
            for dj in range(3):
                t = (xm @ self.taps[k]).reshape(B, H, W, self.out_ch)
                k += 1
                oh0, ow0 = max(0, 1 - di), max(0, 1 - dj)
                ih0, iw0 = oh0 + di - 1, ow0 + dj - 1
                nh, nw = H - abs(di - 1), W - abs(dj - 1)
                out[:, oh0:oh0 + nh, ow0:ow0 + nw] += t[:, ih0:ih0 + nh, iw0:iw0 + nw]
        return out

    def __call__(self, x, stride=1):
        B, H, W, C = x.shape
        if stride == 1 and B * H * W >= 4096 and H * W >= 256 and C <= 64:
            out = self._shiftout_apply(x)
        else:
            out = self._im2col_apply(x, stride)
        return out + self.bias


def upsample_nearest2_nhwc(x):
    return x.repeat(2, axis=1).repeat(2, axis=2)


def sinusoidal_embedding(t, dim):
    """Embedding of an integer timestep; dim must be even.

    Angles are evaluated in float64 before the float32 cast so both
    engines agree to f32 rounding even at large timesteps.
    """
    half = dim // 2
    freqs = np.exp(-np.log(10000.0) * np.arange(half, dtype=np.float64) / half)
    ang = float(t) * freqs
    return np.concatenate([np.sin(ang), np.cos(ang)]).astype(np.float32)


class NeuralDenoiser:
    """Loaded denoiser: immutable parameters + training alpha-bar schedule."""

    def __init__(self, arch: dict, alpha_bar: np.ndarray, params: dict):
        self.arch = normalize_arch(arch)
        self.alpha_bar = np.asarray(alpha_bar, dtype=np.float64)
        plan = dict(layer_plan(self.arch))
        missing = set(plan) - set(params)
        if missing:
            raise InvalidDimensionError(f"missing tensors: {sorted(missing)[:4]}")
        self.params = {}
        for name, shape in plan.items():
            arr = np.asarray(params[name], dtype=np.float32)
            if tuple(arr.shape) != shape:
                raise InvalidDimensionError(
                    f"{name}: shape {arr.shape} != declared {shape}"
                )
            self.params[name] = arr
        # prepared conv kernels, keyed by layer name
        self._convs = {
            name[:-7]: ConvKernel(arr, self.params[name[:-7] + ".bias"])
            for name, arr in self.params.items()
            if name.endswith(".weight") and arr.ndim == 4
        }
        self.n_stages = len(self.arch["encoder_depths"])

    # -- timestep handling -------------------------------------------------
    def timestep_for(self, alpha_bar: float) -> int:
        """Nearest trained timestep (1-based) for a queried alpha-bar."""
        a = _check_alpha_bar(alpha_bar)
        return int(np.argmin(np.abs(self.alpha_bar - a))) + 1

    # -- forward pass ------------------------------------------------------
    def _conv(self, name, x, stride=1):
        return self._convs[name](x, stride)

    def _block(self, prefix, h, temb):
        p = self.params
        g = self.arch["groups"]
        t = group_norm_nhwc(h, g) * p[f"{prefix}.norm1.weight"]
        t = t + p[f"{prefix}.norm1.bias"]
        h = h + self._conv(f"{prefix}.conv1", silu(t))
        cond = p[f"{prefix}.cond2.weight"] @ temb + p[f"{prefix}.cond2.bias"]
        C = h.shape[-1]
        gamma, beta, alpha = cond[:C], cond[C:2 * C], cond[2 * C:]
        t = gamma * group_norm_nhwc(h, g) + beta
        return h + alpha * self._conv(f"{prefix}.conv2", silu(t))

    def forward_t(self, x: np.ndarray, t: int) -> np.ndarray:
        """Noise prediction at an explicit integer timestep; x is (..., 2, P, Q)."""
        x = np.asarray(x, dtype=np.float32)
        squeeze = x.ndim == 3
        if squeeze:
            x = x[None]
        if x.ndim != 4 or x.shape[1] != self.arch["in_channels"]:
            raise InvalidDimensionError(f"expected (B, 2, P, Q) input, got {x.shape}")
        div = 2**self.n_stages
        if x.shape[2] % div or x.shape[3] % div:
            raise InvalidDimensionError(
                f"spatial dims {x.shape[2:]} not divisible by {div}"
            )
        p = self.params
        emb = sinusoidal_embedding(t, self.arch["time_embed_dim"])
        temb = silu(p["time.fc1.weight"] @ emb + p["time.fc1.bias"])
        temb = p["time.fc2.weight"] @ temb + p["time.fc2.bias"]

        h = np.ascontiguousarray(x.transpose(0, 2, 3, 1))
        h = self._conv("stem", h)
        skips = []
        for s, depth in enumerate(self.arch["encoder_depths"]):
            for b in range(depth):
                h = self._block(f"enc{s}.block{b}", h, temb)
            skips.append(h)
            h = self._conv(f"enc{s}.down", h, stride=2)
        for b in range(self.arch["middle_depth"]):
            h = self._block(f"mid.block{b}", h, temb)
        for s, depth in enumerate(self.arch["decoder_depths"]):
            h = upsample_nearest2_nhwc(h)
            h = self._conv(f"dec{s}.up", h)
            h = np.concatenate([h, skips.pop()], axis=-1)
            h = self._conv(f"dec{s}.fuse", h)
            for b in range(depth):
                h = self._block(f"dec{s}.block{b}", h, temb)
        t_ = group_norm_nhwc(h, self.arch["groups"])
        t_ = t_ * p["head.norm.weight"] + p["head.norm.bias"]
        out = self._conv("head.conv", silu(t_))
        out = out.transpose(0, 3, 1, 2)
        return out[0] if squeeze else out

    def predict_noise(self, x: np.ndarray, alpha_bar: float) -> np.ndarray:
        return self.forward_t(x, self.timestep_for(alpha_bar))


def load_weights(path) -> NeuralDenoiser:
    """Load and validate an SGSW container into an inference-ready model."""
    arch, alpha_bar, tensors = read_sgsw(path)
    return NeuralDenoiser(arch, alpha_bar, tensors)


def random_params(arch: dict, rng: np.random.Generator, scale: float = 0.05) -> dict:
    """Random parameter set matching the plan (smoke tests and fixtures)."""
    return {
        name: (scale * rng.standard_normal(shape)).astype(np.float32)
        for name, shape in layer_plan(arch)
    }
