"""Measurement-operator construction, scene synthesis, and echo simulation."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateSignalError,
    InvalidConfigurationError,
    InvalidInputError,
)
from .signal import DftFactor, apply_adjoint, apply_forward

SELECTION_MODES = ("uniform-random", "decimation")


@dataclass(frozen=True)
class SarOperator:
    """Row-subsampled 2-D Fourier measurement operator over a P x Q scene."""

    phi: DftFactor   # range factor, N selected of P rows
    psi: DftFactor   # azimuth factor, M selected of Q rows

    @property
    def P(self) -> int:
        return self.phi.n_cols

    @property
    def Q(self) -> int:
        return self.psi.n_cols

    @property
    def shape(self):
        """(N, M, P, Q): echo dims followed by scene dims."""
        return (self.phi.n_rows, self.psi.n_rows, self.P, self.Q)

    @property
    def is_full(self) -> bool:
        return self.phi.is_full and self.psi.is_full

    def forward(self, x: np.ndarray) -> np.ndarray:
        return apply_forward(self.phi, self.psi, x)

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        return apply_adjoint(self.phi, self.psi, y)


def _select_rows(n_full: int, n_sel: int, mode: str, rng: np.random.Generator):
    if mode == "uniform-random":
        rows = np.sort(rng.choice(n_full, size=n_sel, replace=False))
    elif mode == "decimation":
        step = max(1, n_full // n_sel)
        rows = np.arange(n_sel) * step
    else:
        raise InvalidConfigurationError(f"unknown selection mode {mode!r}")
    return tuple(int(r) for r in rows)


def build_operator(P: int, Q: int, n_range: int, n_azimuth: int,
                   selection: str = "uniform-random", seed: int = 0) -> SarOperator:
    """Build a seeded operator with n_range x n_azimuth selected DFT rows.

    uniform-random draws rows without replacement from the seeded stream;
    decimation takes the first n multiples of floor(P/n).
    """
    if not (1 <= n_range <= P) or not (1 <= n_azimuth <= Q):
        raise InvalidConfigurationError(
            f"row counts ({n_range}, {n_azimuth}) out of range for {P}x{Q}"
        )
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    rows_r = _select_rows(P, n_range, selection, rng)
    rows_a = _select_rows(Q, n_azimuth, selection, rng)
    return SarOperator(DftFactor(P, rows_r), DftFactor(Q, rows_a))


def full_operator(P: int, Q: int) -> SarOperator:
    """The unitary full-sampling operator."""
    return SarOperator(DftFactor(P, tuple(range(P))), DftFactor(Q, tuple(range(Q))))


def complex_gaussian(rng: np.random.Generator, shape, sigma: float = 1.0) -> np.ndarray:
    """i.i.d. CN(0, sigma^2): each real/imag part N(0, sigma^2 / 2)."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * (sigma / np.sqrt(2.0))


def synthesize_scene(intensity: np.ndarray, seed: int = 0) -> np.ndarray:
    """Complex scene I0 * exp(j phi) with i.i.d. phases uniform on [-pi, pi)."""
    intensity = np.asarray(intensity, dtype=np.float64)
    if intensity.size and (intensity.min() < 0.0 or intensity.max() > 1.0):
        raise InvalidInputError("intensity entries must lie in [0, 1]")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    phase = rng.uniform(-np.pi, np.pi, size=intensity.shape)
    return intensity * np.exp(1j * phase)


def simulate_echo(op: SarOperator, x: np.ndarray, snr_db: float, seed: int = 0):
    """Simulate Y = Phi X Psi^H + W at the requested per-sample SNR.

    sigma^2 = ||Phi X Psi^H||_F^2 / (N M 10^(snr/10)); W is i.i.d.
    CN(0, sigma^2).  snr_db = +inf gives the noiseless echo (sigma = 0).
    Returns (echo, sigma).
    """
    x = np.asarray(x)
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("scene contains non-finite entries")
    clean = op.forward(x)
    if math.isinf(snr_db) and snr_db > 0:
        return clean, 0.0
    if not math.isfinite(snr_db):
        raise InvalidConfigurationError(f"snr_db must be finite or +inf, got {snr_db}")
    energy = float(np.sum(np.abs(clean) ** 2))
    if energy == 0.0:
        raise DegenerateSignalError("zero-energy echo with finite SNR requested")
    n_samples = clean.shape[-2] * clean.shape[-1]
    sigma = math.sqrt(energy / (n_samples * 10.0 ** (snr_db / 10.0)))
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    w = complex_gaussian(rng, clean.shape, sigma)
    return clean + w, sigma


def save_operator_manifest(path, op: SarOperator, selection: str = "unspecified",
                           seed=None) -> None:
    """Write a reproducible text manifest of the operator (explicit rows)."""
    doc = {
        "P": op.P,
        "Q": op.Q,
        "n_range": op.phi.n_rows,
        "n_azimuth": op.psi.n_rows,
        "selection": selection,
        "seed": seed,
        "range_rows": list(op.phi.rows),
        "azimuth_rows": list(op.psi.rows),
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=1, sort_keys=True)
        f.write("\n")


def load_operator_manifest(path) -> SarOperator:
    """Rebuild an operator from its manifest (explicit row lists win)."""
    with open(path, "r", encoding="utf-8") as f:
        doc = json.load(f)
    return SarOperator(
        DftFactor(int(doc["P"]), tuple(doc["range_rows"])),
        DftFactor(int(doc["Q"]), tuple(doc["azimuth_rows"])),
    )
