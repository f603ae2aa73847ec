"""Scene datasets for prior training.

Scenes enter as CIMG files (the cross-package container).  Training
uses their magnitudes; phases are re-randomized every epoch so the
prior models magnitude structure with uniform phase.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

_CIMG_MAGIC = b"CIMG"


def load_cimg(path) -> np.ndarray:
    with open(path, "rb") as f:
        head = f.read(16)
        if len(head) < 16 or head[:4] != _CIMG_MAGIC:
            raise ValueError(f"{path}: not a CIMG file")
        version, P, Q = struct.unpack("<III", head[4:])
        if version != 1:
            raise ValueError(f"{path}: unknown CIMG version {version}")
        raw = f.read(P * Q * 8)
        if len(raw) < P * Q * 8:
            raise ValueError(f"{path}: truncated payload")
    pairs = np.frombuffer(raw, dtype="<f4").reshape(P * Q, 2)
    flat = pairs[:, 0].astype(np.float64) + 1j * pairs[:, 1].astype(np.float64)
    return flat.reshape(P, Q, order="F")


def save_cimg(path, x: np.ndarray) -> None:
    x = np.asarray(x)
    P, Q = x.shape
    flat = x.astype(np.complex128).reshape(-1, order="F")
    payload = np.empty((P * Q, 2), dtype="<f4")
    payload[:, 0] = flat.real
    payload[:, 1] = flat.imag
    with open(path, "wb") as f:
        f.write(_CIMG_MAGIC)
        f.write(struct.pack("<III", 1, P, Q))
        f.write(payload.tobytes())


class SceneDataset:
    """Magnitudes of a directory of CIMG scenes, phase-randomized per epoch."""

    def __init__(self, root):
        files = sorted(Path(root).glob("*.cimg"))
        if not files:
            raise ValueError(f"no .cimg scenes under {root}")
        self.magnitudes = np.stack([np.abs(load_cimg(p)) for p in files])

    def __len__(self):
        return self.magnitudes.shape[0]

    @property
    def shape(self):
        return self.magnitudes.shape[1:]

    def epoch_tensors(self, rng: np.random.Generator) -> np.ndarray:
        """(N, 2, P, Q) float32 two-channel scenes with fresh uniform phases."""
        phases = rng.uniform(-np.pi, np.pi, size=self.magnitudes.shape)
        scenes = self.magnitudes * np.exp(1j * phases)
        return np.stack([scenes.real, scenes.imag], axis=1).astype(np.float32)


def digits_magnitudes(n_scenes: int = 500, size: int = 32, seed: int = 0,
                      index_offset: int = 0) -> np.ndarray:
    """Handwritten-digit intensity images upsampled to size x size in [0, 1].

    Uses the bundled scikit-learn 8x8 digits corpus (offline).  Bilinear
    upsampling smears the strokes, so the skirt below 0.5 is cut and the
    remainder rescaled; the scenes then have sparse supports comparable
    to thresholded MNIST digits.  index_offset skips the first entries
    of the shuffled corpus (disjoint train/eval splits).
    """
    from sklearn.datasets import load_digits

    raw = load_digits().images / 16.0          # (1797, 8, 8) in [0, 1]
    rng = np.random.default_rng(seed)
    idx = rng.permutation(raw.shape[0])[index_offset:index_offset + n_scenes]
    out = np.empty((len(idx), size, size))
    grid = (np.arange(size) + 0.5) * 8.0 / size - 0.5
    g0 = np.clip(np.floor(grid).astype(int), 0, 7)
    g1 = np.clip(g0 + 1, 0, 7)
    w = np.clip(grid - g0, 0.0, 1.0)
    for k, i in enumerate(idx):
        img = raw[i]
        rows = img[g0, :] * (1 - w)[:, None] + img[g1, :] * w[:, None]
        up = rows[:, g0] * (1 - w)[None, :] + rows[:, g1] * w[None, :]
        out[k] = np.clip((up - 0.5) / 0.5, 0.0, 1.0)
    return out


def write_digit_scene_files(outdir, n_scenes: int = 500, size: int = 32,
                            seed: int = 0, index_offset: int = 0) -> int:
    """Materialize the digit corpus as CIMG scenes (unit-phase; phases are
    re-randomized during training anyway)."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    mags = digits_magnitudes(n_scenes, size, seed, index_offset)
    for k, mag in enumerate(mags):
        save_cimg(outdir / f"digit_{k:04d}.cimg", mag.astype(complex))
    return len(mags)
