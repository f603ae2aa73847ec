"""Reconstruction metrics: NMSE, PSNR, SSIM on magnitude images, and
support-based sidelobe ratios for distributed targets.

Sidelobe ratios are reported as side-over-main (20 log10 A_side/A_main
and 10 log10 E_side/E_main) so that stronger suppression gives more
negative values; infinities are clamped to +-300 dB sentinels.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .errors import InvalidDimensionError, InvalidParameterError, UndefinedMetricError

DB_SENTINEL = 300.0


def _check_pair(x_true, x_hat):
    x_true = np.asarray(x_true)
    x_hat = np.asarray(x_hat)
    if x_true.shape != x_hat.shape:
        raise InvalidDimensionError(
            f"shape mismatch: {x_true.shape} vs {x_hat.shape}"
        )
    return x_true, x_hat


def _clamp_db(v: float) -> float:
    if not np.isfinite(v):
        return DB_SENTINEL if v > 0 else -DB_SENTINEL
    return float(np.clip(v, -DB_SENTINEL, DB_SENTINEL))


def nmse_db(x_true, x_hat) -> float:
    """10 log10( ||X - Xhat||_F^2 / ||X||_F^2 ) on complex images."""
    x_true, x_hat = _check_pair(x_true, x_hat)
    denom = float(np.sum(np.abs(x_true) ** 2))
    if denom == 0.0:
        raise UndefinedMetricError("NMSE undefined for zero-energy reference")
    num = float(np.sum(np.abs(x_true - x_hat) ** 2))
    with np.errstate(divide="ignore"):
        return _clamp_db(10.0 * np.log10(num / denom))


def psnr_db(x_true, x_hat) -> float:
    """20 log10( max|X| / RMSE ) over magnitude images."""
    x_true, x_hat = _check_pair(x_true, x_hat)
    it, ih = np.abs(x_true), np.abs(x_hat)
    rmse = float(np.sqrt(np.mean((it - ih) ** 2)))
    peak = float(it.max())
    with np.errstate(divide="ignore"):
        return _clamp_db(20.0 * np.log10(peak / rmse) if rmse > 0 else np.inf)


def _gaussian_window(size=11, sigma=1.5):
    half = (size - 1) / 2.0
    g = np.exp(-((np.arange(size) - half) ** 2) / (2.0 * sigma**2))
    k = np.outer(g, g)
    return k / k.sum()


def ssim(x_true, x_hat, window_size=11, sigma=1.5, k1=0.01, k2=0.03) -> float:
    """Mean local SSIM over magnitude images; dynamic range from the truth."""
    x_true, x_hat = _check_pair(x_true, x_hat)
    a = np.abs(x_true).astype(np.float64)
    b = np.abs(x_hat).astype(np.float64)
    L = float(a.max())
    c1, c2 = (k1 * L) ** 2, (k2 * L) ** 2
    win = _gaussian_window(window_size, sigma)

    def f(img):
        return fftconvolve(img, win, mode="valid")

    mu_a, mu_b = f(a), f(b)
    saa = f(a * a) - mu_a * mu_a
    sbb = f(b * b) - mu_b * mu_b
    sab = f(a * b) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * sab + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (saa + sbb + c2)
    return float(np.mean(num / den))


@dataclass(frozen=True)
class SupportSet:
    """Boolean target-region mask; True marks the main-lobe region."""

    mask: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mask, dtype=bool)
        object.__setattr__(self, "mask", m)

    @property
    def is_degenerate(self) -> bool:
        return bool(self.mask.all() or not self.mask.any())


def support_from_truth(x_true, threshold: float = 0.0) -> SupportSet:
    """Support mask { |X| > threshold }; warns when one region is empty."""
    if threshold < 0:
        raise InvalidParameterError("threshold must be >= 0")
    mask = np.abs(np.asarray(x_true)) > threshold
    s = SupportSet(mask)
    if s.is_degenerate:
        warnings.warn("degenerate support: one of the regions is empty",
                      RuntimeWarning, stacklevel=2)
    return s


def mpslr_db(x_hat, support: SupportSet) -> float:
    """Peak sidelobe ratio 20 log10(A_side / A_main) over the support split."""
    mag = np.abs(np.asarray(x_hat))
    if mag.shape != support.mask.shape:
        raise InvalidDimensionError("support mask shape mismatch")
    if support.is_degenerate:
        raise UndefinedMetricError("support must have non-empty main and side regions")
    a_main = float(mag[support.mask].max())
    a_side = float(mag[~support.mask].max())
    if a_main == 0.0:
        raise UndefinedMetricError("main-lobe peak is zero")
    with np.errstate(divide="ignore"):
        return _clamp_db(20.0 * np.log10(a_side / a_main) if a_side > 0 else -np.inf)


def mislr_db(x_hat, support: SupportSet) -> float:
    """Integrated sidelobe ratio 10 log10(E_side / E_main)."""
    mag2 = np.abs(np.asarray(x_hat)) ** 2
    if mag2.shape != support.mask.shape:
        raise InvalidDimensionError("support mask shape mismatch")
    if support.is_degenerate:
        raise UndefinedMetricError("support must have non-empty main and side regions")
    e_main = float(mag2[support.mask].sum())
    e_side = float(mag2[~support.mask].sum())
    if e_main == 0.0:
        raise UndefinedMetricError("main-lobe energy is zero")
    with np.errstate(divide="ignore"):
        return _clamp_db(10.0 * np.log10(e_side / e_main) if e_side > 0 else -np.inf)


CSV_HEADER = ["method", "seed", "snr_db", "points",
              "nmse_db", "psnr_db", "ssim", "mpslr_db", "mislr_db"]


@dataclass
class MetricsReport:
    nmse_db: float
    psnr_db: float
    ssim: float
    mpslr_db: float = float("nan")
    mislr_db: float = float("nan")
    seed: int = 0
    config_hash: str = ""
    degenerate_support: bool = False

    @property
    def has_sentinel(self) -> bool:
        vals = (self.nmse_db, self.psnr_db, self.mpslr_db, self.mislr_db)
        return any(np.isfinite(v) and abs(v) >= DB_SENTINEL for v in vals)


def evaluate(x_true, x_hat, support: SupportSet | None = None,
             seed: int = 0, config_hash: str = "") -> MetricsReport:
    """All metrics against a reference scene; sidelobe ratios need a support."""
    rep = MetricsReport(
        nmse_db=nmse_db(x_true, x_hat),
        psnr_db=psnr_db(x_true, x_hat),
        ssim=ssim(x_true, x_hat),
        seed=seed,
        config_hash=config_hash,
    )
    if support is not None:
        if support.is_degenerate:
            rep.degenerate_support = True
        else:
            rep.mpslr_db = mpslr_db(x_hat, support)
            rep.mislr_db = mislr_db(x_hat, support)
    return rep
