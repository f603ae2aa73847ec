"""Torch noise-prediction network.

Mirror of the inference engine's layer plan: module attribute paths are
chosen so state_dict keys equal the container tensor names verbatim.
Residual blocks apply GroupNorm -> SiLU -> 3x3 conv twice; the second
layer is conditioned through adaptive group normalization
(gamma, beta, alpha from an MLP of the timestep embedding).
"""
from __future__ import annotations

import math

import torch
from torch import nn


def stage_widths(arch: dict):
    base = arch["base_width"]
    S = len(arch["encoder_depths"])
    enc = [base * 2**s for s in range(S)]
    mid = base * 2**S
    dec = [base * 2 ** (S - 1 - s) for s in range(S)]
    return enc, mid, dec


def sinusoidal_embedding(t: torch.Tensor, dim: int) -> torch.Tensor:
    """t is a (B,) tensor of integer timesteps; matches the numpy engine.

    Angles are evaluated in float64 before the float32 cast so both
    engines agree to f32 rounding even at large timesteps.
    """
    half = dim // 2
    freqs = torch.exp(
        -math.log(10000.0)
        * torch.arange(half, dtype=torch.float64, device=t.device) / half
    )
    ang = t.double()[:, None] * freqs[None, :]
    return torch.cat([torch.sin(ang), torch.cos(ang)], dim=1).float()


class DicBlock(nn.Module):
    def __init__(self, width: int, groups: int, temb_dim: int):
        super().__init__()
        self.norm1 = nn.GroupNorm(groups, width, affine=True)
        self.conv1 = nn.Conv2d(width, width, 3, padding=1)
        self.cond2 = nn.Linear(temb_dim, 3 * width)
        self.conv2 = nn.Conv2d(width, width, 3, padding=1)
        self._gn = nn.GroupNorm(groups, width, affine=False)

    def forward(self, h, temb):
        h = h + self.conv1(torch.nn.functional.silu(self.norm1(h)))
        cond = self.cond2(temb)
        C = h.shape[1]
        gamma, beta, alpha = cond[:, :C], cond[:, C:2 * C], cond[:, 2 * C:]
        t = gamma[:, :, None, None] * self._gn(h) + beta[:, :, None, None]
        t = self.conv2(torch.nn.functional.silu(t))
        return h + alpha[:, :, None, None] * t


class NoisePredictor(nn.Module):
    def __init__(self, arch: dict):
        super().__init__()
        self.arch = dict(arch)
        enc_w, mid_w, dec_w = stage_widths(arch)
        D = arch["time_embed_dim"]
        g = arch["groups"]
        self.time = nn.ModuleDict({
            "fc1": nn.Linear(D, D),
            "fc2": nn.Linear(D, D),
        })
        self.stem = nn.Conv2d(arch["in_channels"], enc_w[0], 3, padding=1)
        enc = {}
        for s, depth in enumerate(arch["encoder_depths"]):
            stage = {f"block{b}": DicBlock(enc_w[s], g, D) for b in range(depth)}
            down_out = enc_w[s + 1] if s + 1 < len(enc_w) else mid_w
            stage["down"] = nn.Conv2d(enc_w[s], down_out, 3, stride=2, padding=1)
            enc[f"enc{s}"] = nn.ModuleDict(stage)
        self.encs = nn.ModuleDict(enc)
        self.mid = nn.ModuleDict({
            f"block{b}": DicBlock(mid_w, g, D)
            for b in range(arch["middle_depth"])
        })
        dec = {}
        prev = mid_w
        for s, depth in enumerate(arch["decoder_depths"]):
            w = dec_w[s]
            stage = {
                "up": nn.Conv2d(prev, w, 3, padding=1),
                "fuse": nn.Conv2d(2 * w, w, 3, padding=1),
            }
            stage.update({f"block{b}": DicBlock(w, g, D) for b in range(depth)})
            dec[f"dec{s}"] = nn.ModuleDict(stage)
            prev = w
        self.decs = nn.ModuleDict(dec)
        self.head = nn.ModuleDict({
            "norm": nn.GroupNorm(g, enc_w[0], affine=True),
            "conv": nn.Conv2d(enc_w[0], arch["out_channels"], 3, padding=1),
        })

    def forward(self, x, t):
        F = torch.nn.functional
        emb = sinusoidal_embedding(t, self.arch["time_embed_dim"])
        temb = self.time["fc2"](F.silu(self.time["fc1"](emb)))
        h = self.stem(x)
        skips = []
        for s in range(len(self.arch["encoder_depths"])):
            stage = self.encs[f"enc{s}"]
            for b in range(self.arch["encoder_depths"][s]):
                h = stage[f"block{b}"](h, temb)
            skips.append(h)
            h = stage["down"](h)
        for b in range(self.arch["middle_depth"]):
            h = self.mid[f"block{b}"](h, temb)
        for s in range(len(self.arch["decoder_depths"])):
            stage = self.decs[f"dec{s}"]
            h = F.interpolate(h, scale_factor=2, mode="nearest")
            h = stage["up"](h)
            h = torch.cat([h, skips.pop()], dim=1)
            h = stage["fuse"](h)
            for b in range(self.arch["decoder_depths"][s]):
                h = stage[f"block{b}"](h, temb)
        h = F.silu(self.head["norm"](h))
        return self.head["conv"](h)

    def named_tensors(self) -> dict:
        """state_dict with container-plan key names, as float32 numpy."""
        out = {}
        for key, val in self.state_dict().items():
            name = key
            for prefix in ("encs.", "decs."):
                if name.startswith(prefix):
                    name = name[len(prefix):]
            if name.startswith("mid."):
                pass
            out[name] = val.detach().cpu().numpy().astype("<f4")
        return out


def init_for_training(model: NoisePredictor) -> None:
    """Start AdaGN near identity: gamma bias 1, alpha bias 0."""
    with torch.no_grad():
        for mod in model.modules():
            if isinstance(mod, DicBlock):
                C = mod.conv1.out_channels
                mod.cond2.weight.mul_(0.1)
                mod.cond2.bias.zero_()
                mod.cond2.bias[:C].fill_(1.0)
