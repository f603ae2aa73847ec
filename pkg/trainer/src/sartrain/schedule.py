"""Diffusion noise schedules: cumulative signal-retention factors."""
from __future__ import annotations

import math

import numpy as np


def linear_alpha_bar(T: int, beta1: float = 1e-4, betaT: float = 0.02) -> np.ndarray:
    if T < 1:
        raise ValueError("T must be >= 1")
    if not (0.0 < beta1 < 1.0 and 0.0 < betaT < 1.0):
        raise ValueError("beta values must lie in (0, 1)")
    betas = np.linspace(beta1, betaT, T)
    return np.cumprod(1.0 - betas)


def cosine_alpha_bar(T: int, s: float = 0.008) -> np.ndarray:
    if T < 1:
        raise ValueError("T must be >= 1")
    f = lambda u: math.cos((u / T + s) / (1.0 + s) * math.pi / 2.0) ** 2
    f0 = f(0)
    abar = np.array([f(t) / f0 for t in range(1, T + 1)])
    # keep per-step betas away from 1 so the product stays decreasing
    prev = np.concatenate([[1.0], abar[:-1]])
    betas = np.clip(1.0 - abar / prev, 1e-8, 0.999)
    return np.cumprod(1.0 - betas)


def make_alpha_bar(kind: str, T: int, **kw) -> np.ndarray:
    if kind == "linear":
        return linear_alpha_bar(T, **kw)
    if kind == "cosine":
        return cosine_alpha_bar(T, **kw)
    raise ValueError(f"unknown schedule kind {kind!r}")
