"""Posterior samplers: split-Gibbs with a residual diffusion prior
sampler (deterministic and ancestral variants), plain Langevin, and the
guided-diffusion baseline.

The split formulation augments the posterior with an auxiliary variable
z coupled to x through a quadratic potential at strength lambda.  Each
outer iteration alternates an exponential-integrator Langevin pass on

    z  ~  exp( -||y - A z||^2 - coupling(x, z; lambda) )

with a prior-conditional draw of x realized by integrating the
probability flow of the residual zeta = x - z from its stationary
Gaussian back to time zero.  The contraction coordinate of that flow is

    r(abar) = ((lam^2 + 1) abar - 1) / (lam^2 + abar - 1),

with r = 0 at abar = 1/(1+lam^2) (pure noise) and r = 1 at abar = 1.

Conventions (see tests for the oracles that pin them down):
  * the Langevin noise is i.i.d. CN(0, 1) per complex entry, so the
    zero-gradient chain is stationary with variance lam^2 per complex
    entry (lam^2/2 per real part);
  * the likelihood gradient is the Wirtinger gradient A^H(Az - y);
  * the residual sampler works on the two-channel real representation
    with unit-variance real Gaussian initialization.
"""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import (
    DivergenceError,
    InvalidParameterError,
)
from .forward import SarOperator, complex_gaussian
from .priors import _check_alpha_bar
from .signal import from_two_channel, save_cimg, to_two_channel


# --------------------------------------------------------------------------
# annealing schedule
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class AnnealingSchedule:
    """Plateau at lambda0 for K0 iterations, then geometric decay to lambdaK."""

    lambda0: float = 0.35
    lambdaK: float = 0.05
    K0: int = 15
    K: int = 60

    def __post_init__(self):
        if self.lambda0 <= 0 or self.lambdaK <= 0:
            raise InvalidParameterError("lambda0 and lambdaK must be > 0")
        if not (0 <= self.K0 < self.K):
            raise InvalidParameterError("need 0 <= K0 < K")

    def lambda_at(self, k: int) -> float:
        if not (0 <= k <= self.K):
            raise InvalidParameterError(f"iteration {k} outside [0, {self.K}]")
        expo = max(0.0, (k - self.K0) / (self.K - self.K0))
        return self.lambda0 * (self.lambdaK / self.lambda0) ** expo


def lambda_at(schedule: AnnealingSchedule, k: int) -> float:
    return schedule.lambda_at(k)


@dataclass(frozen=True)
class SgsConfig:
    langevin_steps: int = 50     # T, inner Langevin steps per outer iteration
    ddim_steps: int = 50         # N, residual integration steps per prior draw
    kappa_cap: float = 0.15
    kappa_scale: float = 0.8
    alpha_spacing: str = "uniform"   # or "cosine" (in the r coordinate)

    def __post_init__(self):
        if self.langevin_steps < 1 or self.ddim_steps < 1:
            raise InvalidParameterError("step counts must be >= 1")
        if self.kappa_cap <= 0 or self.kappa_scale <= 0:
            raise InvalidParameterError("kappa parameters must be > 0")
        if self.alpha_spacing not in ("uniform", "cosine"):
            raise InvalidParameterError(f"unknown spacing {self.alpha_spacing!r}")

    def kappa_at(self, lam: float) -> float:
        return self.kappa_scale * min(lam * lam, self.kappa_cap)


# --------------------------------------------------------------------------
# likelihood side
# --------------------------------------------------------------------------
def likelihood_grad(op: SarOperator, z: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Wirtinger gradient of ||y - Az||^2: A^H (Az - y)."""
    return op.adjoint(op.forward(z) - y)


def langevin_step(z, x_k, lam, kappa, grad, noise):
    """One exponential-integrator update of the coupled Langevin chain.

    noise must be CN(0, 1) per complex entry (drawn by the caller).
    """
    if lam <= 0 or kappa <= 0:
        raise InvalidParameterError("lambda and kappa must be > 0")
    a = math.exp(-kappa / lam**2)
    return (
        a * z
        + (1.0 - a) * x_k
        - lam**2 * (1.0 - a) * grad
        + lam * math.sqrt(1.0 - a * a) * noise
    )


# --------------------------------------------------------------------------
# residual-coordinate algebra
# --------------------------------------------------------------------------
def alpha_from_r(r, lam: float):
    # (r lam^2 - r + 1)/(lam^2 + 1 - r), written cancellation-free
    r = np.asarray(r, dtype=np.float64)
    w = 1.0 - r
    return (w + r * lam**2) / (w + lam**2)


def r_from_alpha(alpha_bar, lam: float):
    # ((lam^2 + 1) abar - 1)/(lam^2 + abar - 1), written cancellation-free
    # (1 - abar is exact in floating point for abar >= 1/2)
    a = np.asarray(alpha_bar, dtype=np.float64)
    u = 1.0 - a
    return (a * lam**2 - u) / (lam**2 - u)


def _r_grid(N: int, spacing: str) -> np.ndarray:
    j = np.arange(N + 1, dtype=np.float64)
    if spacing == "uniform":
        r = j / N
    elif spacing == "cosine":
        r = 0.5 * (1.0 - np.cos(np.pi * j / N))
    else:
        raise InvalidParameterError(f"unknown spacing {spacing!r}")
    r[0], r[-1] = 0.0, 1.0
    return r


def alpha_bar_grid(lam: float, N: int, spacing: str = "uniform") -> np.ndarray:
    """alpha-bar values [abar_N ... abar_0] on an r grid with exact endpoints.

    r runs from 0 (index 0, pure residual noise) to 1 (index N); the
    returned alpha-bars increase from 1/(1+lam^2) to exactly 1.
    """
    if lam <= 0:
        raise InvalidParameterError("lambda must be > 0")
    if N < 1:
        raise InvalidParameterError("N must be >= 1")
    grid = np.clip(alpha_from_r(_r_grid(N, spacing), lam), 0.0, 1.0)
    grid[0] = 1.0 / (1.0 + lam * lam)   # r = 0 endpoint, exact
    grid[-1] = 1.0                      # r = 1 endpoint, exact
    return grid


def _arctan_coord(lam: float, r: float) -> float:
    # arctan(lam / sqrt(1/r - 1)); limits: 0 at r=0, pi/2 at r=1
    if r <= 0.0:
        return 0.0
    if r >= 1.0:
        return 0.5 * np.pi
    return math.atan(lam / math.sqrt(1.0 / r - 1.0))


def _residual_query(zeta, z_t, lam, alpha_i, r_i):
    D = (lam**2 - 1.0) * r_i + 1.0
    return np.sqrt(alpha_i) * z_t + (lam**2 * math.sqrt(r_i * alpha_i) / D) * zeta, D


def _step_coords(alpha_i, alpha_prev, lam):
    alpha_i = _check_alpha_bar(alpha_i)
    alpha_prev = _check_alpha_bar(alpha_prev)
    if alpha_prev < alpha_i:
        raise InvalidParameterError("alpha_prev must not be below alpha_i")
    r_i = float(r_from_alpha(alpha_i, lam))
    r_prev = float(r_from_alpha(alpha_prev, lam))
    if min(r_i, r_prev) < -1e-9 or max(r_i, r_prev) > 1.0 + 1e-9:
        raise InvalidParameterError("r outside [0, 1]; alpha grid inconsistent with lambda")
    return alpha_i, min(max(r_i, 0.0), 1.0), min(max(r_prev, 0.0), 1.0)


def _ddim_core(zeta, z_t, lam, alpha_i, r_i, r_prev, model):
    if r_prev == r_i:
        return zeta
    query, D = _residual_query(zeta, z_t, lam, alpha_i, r_i)
    eps = np.asarray(model.predict_noise(query, alpha_i), dtype=np.float64)
    Dp = (lam**2 - 1.0) * r_prev + 1.0
    contract = math.sqrt(Dp) / math.sqrt(D)
    drift = math.sqrt(Dp) * (_arctan_coord(lam, r_i) - _arctan_coord(lam, r_prev))
    return contract * zeta + drift * eps


def ddim_residual_step(zeta, z_t, lam, alpha_i, alpha_prev, model):
    """Deterministic residual update from noise level alpha_i to alpha_prev.

    zeta and z_t are two-channel real tensors (..., 2, P, Q); alpha_prev
    corresponds to the lower-noise (larger alpha-bar) endpoint.
    """
    alpha_i, r_i, r_prev = _step_coords(alpha_i, alpha_prev, lam)
    return _ddim_core(zeta, z_t, lam, alpha_i, r_i, r_prev, model)


def _ddpm_core(zeta, z_t, lam, alpha_i, r_i, r_prev, model, noise):
    if r_prev == r_i:
        return zeta
    query, D = _residual_query(zeta, z_t, lam, alpha_i, r_i)
    eps = np.asarray(model.predict_noise(query, alpha_i), dtype=np.float64)
    # sqrt(1 - alpha_i): guard the r -> 1 endpoint where alpha -> 1
    one_m_a = max(1.0 - alpha_i, 1e-300)
    # zeta + (1 - r_i) * score, with the 1/sqrt(r_i) factored out analytically
    term = (lam**2 * math.sqrt(r_i) / D) * zeta - (
        lam**2 * math.sqrt(alpha_i) * (1.0 - r_i) / (D * math.sqrt(one_m_a))
    ) * eps
    mean = (
        math.sqrt(r_i / r_prev) * (1.0 - r_prev) * zeta
        + ((r_prev - r_i) / math.sqrt(r_prev)) * term
    ) / (1.0 - r_i)
    var = (1.0 - r_i / r_prev) * (1.0 - r_prev) / (1.0 - r_i)
    return mean + math.sqrt(max(var, 0.0)) * noise


def ddpm_residual_step(zeta, z_t, lam, alpha_i, alpha_prev, model, noise):
    """Ancestral counterpart of :func:`ddim_residual_step`.

    The residual follows a unit-stationary OU process, i.e. a standard
    diffusion in the r coordinate; this is the usual ancestral update
    with the posterior variance (1 - r_i/r_prev)(1 - r_prev)/(1 - r_i),
    written so the r_i = 0 endpoint stays exact.
    """
    alpha_i, r_i, r_prev = _step_coords(alpha_i, alpha_prev, lam)
    return _ddpm_core(zeta, z_t, lam, alpha_i, r_i, r_prev, model, noise)


def _prior_transport(zeta, z, lam, model, N, spacing, rngs=None, stochastic=False):
    """Run the full residual sweep; zeta, z are (B, 2, P, Q).

    Carries the r grid directly (the r -> alpha inversion is
    ill-conditioned for small lambda).
    """
    r = _r_grid(N, spacing)
    alphas = alpha_bar_grid(lam, N, spacing)
    for j in range(N):
        a_i = float(alphas[j])
        if stochastic:
            noise = np.stack([g.standard_normal(zeta.shape[1:]) for g in rngs])
            zeta = _ddpm_core(zeta, z, lam, a_i, r[j], r[j + 1], model, noise)
        else:
            zeta = _ddim_core(zeta, z, lam, a_i, r[j], r[j + 1], model)
    return zeta


def prior_sample(z, lam, model, N, rng, spacing="uniform"):
    """Draw x from the prior conditional given z at coupling lambda.

    Starts from zeta ~ N(0, I) per real channel entry, integrates the
    deterministic residual flow, and returns z + zeta(0) as complex.
    """
    if N < 1:
        raise InvalidParameterError("N must be >= 1")
    rng = _as_rng(rng)
    z = np.asarray(z, dtype=np.complex128)
    z2 = to_two_channel(z[None])
    zeta = rng.standard_normal(z2.shape)
    zeta = _prior_transport(zeta, z2, lam, model, N, spacing)
    return from_two_channel(z2 + zeta)[0]


# --------------------------------------------------------------------------
# the outer split-Gibbs loop
# --------------------------------------------------------------------------
def _as_rng(rng):
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(np.random.SeedSequence(rng))


class _TraceWriter:
    """CSV trace of the outer loop plus periodic CIMG snapshots."""

    def __init__(self, trace_dir, snapshot_every=0):
        self.dir = trace_dir
        self.every = snapshot_every
        os.makedirs(trace_dir, exist_ok=True)
        self._f = open(os.path.join(trace_dir, "trace.csv"), "w", newline="")
        self._csv = csv.writer(self._f)
        self._csv.writerow(["k", "lambda", "kappa", "residual"])

    def log(self, k, lam, kappa, residual, x):
        self._csv.writerow([k, f"{lam:.9g}", f"{kappa:.9g}", f"{residual:.9g}"])
        if self.every and k % self.every == 0:
            save_cimg(os.path.join(self.dir, f"x_{k:04d}.cimg"), x)

    def close(self):
        self._f.close()


def _sgs_chains(op, y, model, schedule, cfg, rngs, stochastic_prior,
                trace=None):
    """Run B coupled chains in lockstep; y is (N, M) or (B, N, M)."""
    B = len(rngs)
    P, Q = op.P, op.Q
    lam0 = schedule.lambda0
    x = np.stack([
        complex_gaussian(r, (P, Q), math.sqrt(lam0 / 4.0)) for r in rngs
    ])
    y = np.asarray(y, dtype=np.complex128)
    if y.ndim == 2:
        y = y[None]
    for k in range(1, schedule.K + 1):
        lam = schedule.lambda_at(k)
        kappa = cfg.kappa_at(lam)
        z = x.copy()
        for t in range(1, cfg.langevin_steps + 1):
            grad = likelihood_grad(op, z, y)
            noise = np.stack([complex_gaussian(r, (P, Q)) for r in rngs])
            z = langevin_step(z, x, lam, kappa, grad, noise)
            if not np.all(np.isfinite(z)):
                raise DivergenceError(
                    f"non-finite Langevin state at outer {k}, inner {t}",
                    outer=k, inner=t,
                )
        z2 = to_two_channel(z)
        zeta = np.stack([g.standard_normal((2, P, Q)) for g in rngs])
        zeta = _prior_transport(zeta, z2, lam, model, cfg.ddim_steps,
                                cfg.alpha_spacing, rngs=rngs,
                                stochastic=stochastic_prior)
        x = from_two_channel(z2 + zeta)
        if not np.all(np.isfinite(x)):
            raise DivergenceError(f"non-finite state after prior step, outer {k}",
                                  outer=k)
        if trace is not None:
            res = float(np.linalg.norm(op.forward(x[0]) - y[0]))
            trace.log(k, lam, kappa, res, x[0])
    return x


def sgs_run(op, y, model, schedule=None, cfg=None, rng=0,
            trace_dir=None, snapshot_every=0):
    """Split-Gibbs sampler with the deterministic residual prior sweep."""
    schedule = schedule or AnnealingSchedule()
    cfg = cfg or SgsConfig()
    trace = _TraceWriter(trace_dir, snapshot_every) if trace_dir else None
    try:
        out = _sgs_chains(op, y, model, schedule, cfg, [_as_rng(rng)],
                          stochastic_prior=False, trace=trace)
    finally:
        if trace is not None:
            trace.close()
    return out[0]


def sgs_ddpm_run(op, y, model, schedule=None, cfg=None, rng=0,
                 trace_dir=None, snapshot_every=0):
    """Split-Gibbs sampler with stochastic (ancestral) prior sampling."""
    schedule = schedule or AnnealingSchedule()
    cfg = cfg or SgsConfig()
    trace = _TraceWriter(trace_dir, snapshot_every) if trace_dir else None
    try:
        out = _sgs_chains(op, y, model, schedule, cfg, [_as_rng(rng)],
                          stochastic_prior=True, trace=trace)
    finally:
        if trace is not None:
            trace.close()
    return out[0]


def sgs_run_chains(op, y, model, schedule=None, cfg=None, seeds=(0,),
                   stochastic_prior=False):
    """Run several independent chains in lockstep (shared or per-chain y).

    Seeds may be ints or Generators; chains are statistically identical
    to sequential single-chain runs with the same streams.
    """
    schedule = schedule or AnnealingSchedule()
    cfg = cfg or SgsConfig()
    rngs = [_as_rng(s) for s in seeds]
    return _sgs_chains(op, y, model, schedule, cfg, rngs,
                       stochastic_prior=stochastic_prior)


# --------------------------------------------------------------------------
# baseline samplers
# --------------------------------------------------------------------------
def make_alpha_bar_schedule(T: int, beta1: float = 1e-4, betaT: float = 0.02) -> np.ndarray:
    """Linear-beta cumulative product schedule of length T."""
    if T < 1:
        raise InvalidParameterError("T must be >= 1")
    betas = np.linspace(beta1, betaT, T)
    return np.cumprod(1.0 - betas)


def _respaced_schedule(model, steps):
    full = getattr(model, "alpha_bar", None)
    if full is None:
        return make_alpha_bar_schedule(steps)
    full = np.asarray(full, dtype=np.float64)
    if steps >= full.size:
        return full
    idx = np.unique(np.round(np.linspace(0, full.size - 1, steps)).astype(int))
    return full[idx]


def dps_run(op, y, model, steps=100, guidance_scale=1.0, rng=0):
    """Guided ancestral diffusion: Tweedie estimate plus norm-normalized
    measurement-gradient steps.

    The guidance gradient is exact through the analytic Gaussian prior
    and uses the identity-Jacobian approximation otherwise.
    """
    if steps < 1:
        raise InvalidParameterError("steps must be >= 1")
    rng = _as_rng(rng)
    sched = _respaced_schedule(model, steps)   # decreasing in t
    P, Q = op.P, op.Q
    xt = rng.standard_normal((2, P, Q))
    y = np.asarray(y, dtype=np.complex128)
    sigma_p = getattr(model, "sigma_p", None)
    for i in range(sched.size - 1, -1, -1):
        abar = float(sched[i])
        abar_prev = float(sched[i - 1]) if i > 0 else 1.0
        eps = np.asarray(model.predict_noise(xt, abar), dtype=np.float64)
        x0 = (xt - math.sqrt(1.0 - abar) * eps) / math.sqrt(abar)
        alpha_t = abar / abar_prev
        beta_t = 1.0 - alpha_t
        if i > 0:
            mean = (
                math.sqrt(abar_prev) * beta_t / (1.0 - abar) * x0
                + math.sqrt(alpha_t) * (1.0 - abar_prev) / (1.0 - abar) * xt
            )
            var = (1.0 - abar_prev) / (1.0 - abar) * beta_t
            x_next = mean + math.sqrt(max(var, 0.0)) * rng.standard_normal(xt.shape)
        else:
            x_next = x0
        if guidance_scale != 0.0:
            x0c = from_two_channel(x0)
            resid = op.forward(x0c) - y
            rnorm = float(np.linalg.norm(resid))
            if rnorm > 0.0:
                if sigma_p is not None:
                    jac = math.sqrt(abar) * sigma_p**2 / (abar * sigma_p**2 + 1.0 - abar)
                else:
                    jac = 1.0 / math.sqrt(abar)
                g = jac * op.adjoint(resid) / rnorm
                x_next = x_next - guidance_scale * to_two_channel(g)
        xt = x_next
        if not np.all(np.isfinite(xt)):
            raise DivergenceError(f"non-finite guided-diffusion state at step {i}")
    return from_two_channel(xt)


def langevin_posterior_run(op, y, model, steps=1000, step_size=1e-3, rng=0,
                           alpha_bar_eval=None):
    """Plain unadjusted Langevin on -||y - Ax||^2 + log p(x).

    Reference sampler: the prior score is evaluated at a fixed alpha-bar
    close to one (the model's largest trained value when it has a
    schedule).  model=None drops the prior term.
    """
    if step_size < 0:
        raise InvalidParameterError("step_size must be >= 0")
    rng = _as_rng(rng)
    x = op.adjoint(y)
    if alpha_bar_eval is None:
        sched = getattr(model, "alpha_bar", None)
        alpha_bar_eval = float(np.max(sched)) if sched is not None else 1.0 - 1e-9
    for t in range(steps):
        grad = likelihood_grad(op, x, y)
        if model is not None:
            eps = np.asarray(model.predict_noise(to_two_channel(x), alpha_bar_eval))
            s2 = -eps / math.sqrt(1.0 - alpha_bar_eval)
            score_c = 0.5 * (s2[0] + 1j * s2[1])
        else:
            score_c = 0.0
        w = complex_gaussian(rng, x.shape)
        x = x + step_size * (-grad + score_c) + math.sqrt(2.0 * step_size) * w
        if not np.all(np.isfinite(x)):
            raise DivergenceError(f"non-finite Langevin posterior state at step {t}")
    return x
