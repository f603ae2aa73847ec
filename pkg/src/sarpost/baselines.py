"""Prior-free and sparsity-prior reconstructions: matched filter,
FISTA and ADMM on the complex l1-regularized least-squares objective

    minimize  ||y - A x||^2 + mu ||x||_1 .

Gradient conventions follow the real-pair view: the gradient of the
data term is 2 A^H (A x - y), and ||A||_2 <= 1 because A is a row
slice of a unitary matrix, so the Lipschitz constant is taken as 2.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError, InvalidConfigurationError
from .forward import SarOperator


@dataclass(frozen=True)
class SparseSolverConfig:
    mu: float = 0.01
    max_iters: int = 500
    tol: float = 1e-6
    rho: float = 1.0  # ADMM penalty

    def __post_init__(self):
        if self.mu < 0:
            raise InvalidConfigurationError("mu must be >= 0")
        if self.max_iters < 1:
            raise InvalidConfigurationError("max_iters must be >= 1")
        if self.tol <= 0:
            raise InvalidConfigurationError("tol must be > 0")
        if self.rho <= 0:
            raise InvalidConfigurationError("rho must be > 0")


def matched_filter(op: SarOperator, y: np.ndarray) -> np.ndarray:
    """Adjoint reconstruction Phi^H Y Psi; exact under full sampling."""
    return op.adjoint(y)


def soft_threshold(z, tau):
    """Complex soft threshold z * max(1 - tau/|z|, 0); prox of tau*||.||_1."""
    z = np.asarray(z)
    mag = np.abs(z)
    scale = np.where(mag > 0.0, np.maximum(1.0 - tau / np.where(mag > 0.0, mag, 1.0), 0.0), 0.0)
    return z * scale


def l1_objective(op: SarOperator, y: np.ndarray, x: np.ndarray, mu: float) -> float:
    r = op.forward(x) - y
    return float(np.sum(np.abs(r) ** 2) + mu * np.sum(np.abs(x)))


def fista_l1(op: SarOperator, y: np.ndarray, cfg: SparseSolverConfig) -> np.ndarray:
    """Proximal gradient with Nesterov momentum, matched-filter warm start."""
    L = 2.0
    x = matched_filter(op, y)
    v = x.copy()
    t = 1.0
    for it in range(cfg.max_iters):
        grad = 2.0 * op.adjoint(op.forward(v) - y)
        x_new = soft_threshold(v - grad / L, cfg.mu / L)
        if not np.all(np.isfinite(x_new)):
            raise DivergenceError(f"FISTA produced non-finite iterate at {it}")
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        v = x_new + ((t - 1.0) / t_new) * (x_new - x)
        delta = np.linalg.norm(x_new - x) / max(np.linalg.norm(x), 1e-30)
        x, t = x_new, t_new
        if delta < cfg.tol:
            break
    return x


def _masked_resolvent(op: SarOperator, rhs: np.ndarray, rho: float) -> np.ndarray:
    """Solve (2 A^H A + rho I) x = rhs exactly in the DFT eigenbasis.

    A^H A is diagonal there: 1 on sampled (range-row, azimuth-row)
    positions and 0 elsewhere.
    """
    P, Q = op.P, op.Q
    t = np.fft.fft(rhs, axis=-2) / np.sqrt(P)
    t = np.fft.ifft(t, axis=-1) * np.sqrt(Q)
    denom = np.full((P, Q), rho, dtype=np.float64)
    rr = np.asarray(op.phi.rows)[:, None]
    ra = np.asarray(op.psi.rows)[None, :]
    denom[rr, ra] += 2.0
    t = t / denom
    t = np.fft.ifft(t, axis=-2) * np.sqrt(P)
    return np.fft.fft(t, axis=-1) / np.sqrt(Q)


def admm_l1(op: SarOperator, y: np.ndarray, cfg: SparseSolverConfig) -> np.ndarray:
    """ADMM splitting with the exact Fourier-diagonal x-update."""
    if cfg.rho <= 0:
        raise InvalidConfigurationError("rho must be > 0")
    rho = cfg.rho
    x = matched_filter(op, y)
    z = x.copy()
    u = np.zeros_like(x)
    hy = 2.0 * op.adjoint(y)
    for it in range(cfg.max_iters):
        x = _masked_resolvent(op, hy + rho * (z - u), rho)
        z_new = soft_threshold(x + u, cfg.mu / rho)
        u = u + x - z_new
        if not np.all(np.isfinite(z_new)):
            raise DivergenceError(f"ADMM produced non-finite iterate at {it}")
        primal = np.linalg.norm(x - z_new)
        dual = rho * np.linalg.norm(z_new - z)
        z = z_new
        scale = max(np.linalg.norm(x), np.linalg.norm(z), 1e-30)
        if primal / scale < cfg.tol and dual / scale < cfg.tol:
            break
    return z
