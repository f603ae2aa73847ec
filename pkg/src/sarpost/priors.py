"""Noise-predictor priors.

Every prior exposes predict_noise(x, alpha_bar) on the two-channel real
representation, where x_t = sqrt(abar) x0 + sqrt(1-abar) eps.  The
prediction relates to the score of the diffused marginal by

    eps_hat = -sqrt(1 - abar) * grad log p_abar(x).

GaussianPrior and GmmPrior are exact analytic predictors used as
verification oracles; the learned denoiser lives in :mod:`sarpost.unet`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol, runtime_checkable

import numpy as np

from .errors import InvalidParameterError


@runtime_checkable
class ScoreModel(Protocol):
    def predict_noise(self, x: np.ndarray, alpha_bar: float) -> np.ndarray: ...


def _check_alpha_bar(alpha_bar: float) -> float:
    alpha_bar = float(alpha_bar)
    if not (0.0 < alpha_bar <= 1.0):
        raise InvalidParameterError(f"alpha_bar must lie in (0, 1], got {alpha_bar}")
    return alpha_bar


def score_from_noise(eps_hat: np.ndarray, alpha_bar: float) -> np.ndarray:
    """Convert a noise prediction to the score of the diffused marginal."""
    alpha_bar = _check_alpha_bar(alpha_bar)
    if alpha_bar == 1.0:
        raise InvalidParameterError("score undefined at alpha_bar = 1")
    return -eps_hat / np.sqrt(1.0 - alpha_bar)


@dataclass(frozen=True)
class GaussianPrior:
    """Zero-mean isotropic Gaussian prior, std sigma_p per real component."""

    sigma_p: float = 1.0

    def __post_init__(self):
        if self.sigma_p <= 0:
            raise InvalidParameterError("sigma_p must be > 0")

    def predict_noise(self, x: np.ndarray, alpha_bar: float) -> np.ndarray:
        a = _check_alpha_bar(alpha_bar)
        x = np.asarray(x, dtype=np.float64)
        return np.sqrt(1.0 - a) * x / (a * self.sigma_p**2 + 1.0 - a)


@dataclass(frozen=True)
class GmmPrior:
    """Isotropic Gaussian mixture prior over full two-channel tensors.

    means has shape (J, 2, P, Q); weights and variances have shape (J,)
    with variances per real component.
    """

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        m = np.asarray(self.means, dtype=np.float64)
        v = np.asarray(self.variances, dtype=np.float64)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "variances", v)
        if w.ndim != 1 or w.size == 0 or np.any(w <= 0):
            raise InvalidParameterError("weights must be positive")
        if abs(float(w.sum()) - 1.0) > 1e-12:
            raise InvalidParameterError("weights must sum to 1 within 1e-12")
        if np.any(v <= 0):
            raise InvalidParameterError("variances must be > 0")
        if m.ndim != 4 or m.shape[0] != w.size or v.size != w.size:
            raise InvalidParameterError("means must be (J, 2, P, Q) matching weights")

    def predict_noise(self, x: np.ndarray, alpha_bar: float) -> np.ndarray:
        a = _check_alpha_bar(alpha_bar)
        x = np.asarray(x, dtype=np.float64)
        batched = x.ndim == 4
        xb = x if batched else x[None]
        B = xb.shape[0]
        ndim = xb[0].size
        s2 = a * self.variances + 1.0 - a          # (J,) marginal variances
        mu = np.sqrt(a) * self.means               # (J, 2, P, Q)
        diff = xb[:, None] - mu[None]              # (B, J, 2, P, Q)
        sq = np.sum(diff**2, axis=(-3, -2, -1))    # (B, J)
        loglik = -0.5 * sq / s2 - 0.5 * ndim * np.log(2.0 * np.pi * s2)
        logw = np.log(self.weights)[None] + loglik
        logw = logw - logw.max(axis=1, keepdims=True)   # log-sum-exp stabilization
        gamma = np.exp(logw)
        gamma /= gamma.sum(axis=1, keepdims=True)
        score = -np.einsum("bj,bjcpq->bcpq", gamma / s2[None], diff)
        out = -np.sqrt(1.0 - a) * score
        return out if batched else out[0]

    def log_density(self, x: np.ndarray, alpha_bar: float = 1.0) -> float:
        """Log density of the diffused mixture marginal (finite-difference oracle hook)."""
        a = _check_alpha_bar(alpha_bar)
        x = np.asarray(x, dtype=np.float64)
        ndim = x.size
        s2 = a * self.variances + 1.0 - a
        mu = np.sqrt(a) * self.means
        sq = np.sum((x[None] - mu) ** 2, axis=(-3, -2, -1))
        logp = np.log(self.weights) - 0.5 * sq / s2 - 0.5 * ndim * np.log(2.0 * np.pi * s2)
        peak = logp.max()
        return float(peak + np.log(np.sum(np.exp(logp - peak))))


def single_gaussian_gmm(sigma_p: float, shape) -> GmmPrior:
    """One-component mixture equivalent to a (zero-mean) GaussianPrior.

    shape is the spatial (P, Q) of the two-channel tensors.
    """
    return GmmPrior(
        weights=np.array([1.0]),
        means=np.zeros((1, 2) + tuple(shape)),
        variances=np.array([sigma_p**2]),
    )
