"""Noise-prediction training loop.

Each step draws a uniform timestep t, corrupts a clean two-channel
scene to x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps, and minimizes
the mean squared error between eps and the network prediction.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from .data import SceneDataset
from .model import NoisePredictor, init_for_training
from .schedule import make_alpha_bar

DEFAULT_ARCH = {
    "in_channels": 2,
    "out_channels": 2,
    "base_width": 32,
    "encoder_depths": [5, 4],
    "middle_depth": 4,
    "decoder_depths": [4, 4],
    "groups": 8,
    "time_embed_dim": 128,
}


@dataclass
class TrainConfig:
    dataset: str = ""
    timesteps: int = 1000
    beta_schedule: str = "linear"     # or "cosine"
    beta1: float = 1e-4
    betaT: float = 0.02
    batch_size: int = 50
    lr: float = 1e-4
    epochs: int = 200
    seed: int = 0
    draws_per_scene: int = 1   # independent (t, eps) draws per scene per batch
    scene_scale: float = 1.0   # amplitude applied to the stored magnitudes
    arch: dict = field(default_factory=lambda: dict(DEFAULT_ARCH))

    def validate(self):
        if self.timesteps < 1:
            raise ValueError("timesteps must be >= 1")
        if not (0 < self.beta1 < 1 and 0 < self.betaT < 1):
            raise ValueError("beta values must lie in (0, 1)")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch size and epochs must be >= 1")
        return self

    def alpha_bar(self) -> np.ndarray:
        if self.beta_schedule == "linear":
            return make_alpha_bar("linear", self.timesteps,
                                  beta1=self.beta1, betaT=self.betaT)
        return make_alpha_bar("cosine", self.timesteps)


@dataclass
class TrainResult:
    model: NoisePredictor
    alpha_bar: np.ndarray
    epoch_losses: list
    config: TrainConfig


def train(cfg: TrainConfig, log=print) -> TrainResult:
    cfg.validate()
    dataset = SceneDataset(cfg.dataset)
    abar = cfg.alpha_bar()
    if np.any(np.diff(abar) >= 0) and cfg.timesteps > 1:
        raise ValueError("alpha_bar schedule must be strictly decreasing")

    torch.manual_seed(cfg.seed)
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    model = NoisePredictor(cfg.arch)
    init_for_training(model)
    opt = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    abar_t = torch.from_numpy(abar.astype(np.float32))

    losses = []
    for epoch in range(cfg.epochs):
        scenes = cfg.scene_scale * dataset.epoch_tensors(rng)   # fresh phases
        order = rng.permutation(len(dataset))
        epoch_loss, nb = 0.0, 0
        for start in range(0, len(dataset), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            if cfg.draws_per_scene > 1:
                idx = np.repeat(idx, cfg.draws_per_scene)
            x0 = torch.from_numpy(scenes[idx])
            t = torch.from_numpy(
                rng.integers(1, cfg.timesteps + 1, size=len(idx))
            )
            eps = torch.from_numpy(
                rng.standard_normal(x0.shape).astype(np.float32)
            )
            a = abar_t[t - 1][:, None, None, None]
            xt = torch.sqrt(a) * x0 + torch.sqrt(1.0 - a) * eps
            pred = model(xt, t)
            loss = torch.mean((eps - pred) ** 2)
            if not torch.isfinite(loss):
                raise RuntimeError(
                    f"non-finite loss at epoch {epoch}, batch {nb}"
                )
            opt.zero_grad()
            loss.backward()
            opt.step()
            epoch_loss += float(loss.detach())
            nb += 1
        losses.append(epoch_loss / max(nb, 1))
        if log is not None and (epoch < 3 or (epoch + 1) % 10 == 0):
            log(f"epoch {epoch + 1}/{cfg.epochs}: loss {losses[-1]:.5f}")
    return TrainResult(model=model, alpha_bar=abar, epoch_losses=losses,
                       config=cfg)


@torch.no_grad()
def reference_forward(model: NoisePredictor, x: np.ndarray, t: int) -> np.ndarray:
    """Trainer-side forward pass on a (2, P, Q) or (B, 2, P, Q) array."""
    x = np.asarray(x, dtype=np.float32)
    squeeze = x.ndim == 3
    xt = torch.from_numpy(x[None] if squeeze else x)
    tt = torch.full((xt.shape[0],), int(t), dtype=torch.long)
    out = model(xt, tt).numpy()
    return out[0] if squeeze else out
