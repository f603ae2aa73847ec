#!/usr/bin/env python3
"""Full comparison on a digit scene with the learned prior: matched
filter, best-l1 FISTA, guided diffusion, and both split-Gibbs variants.

Needs the trained weight container (see README); falls back to a plain
message when it is absent."""
import sys
from pathlib import Path

import numpy as np

from sarpost import (
    AnnealingSchedule,
    SgsConfig,
    SparseSolverConfig,
    build_operator,
    dps_run,
    fista_l1,
    matched_filter,
    psnr_db,
    sgs_ddpm_run,
    sgs_run,
    simulate_echo,
    synthesize_scene,
)
from sarpost.harness import render_magnitude, _write_png
from sarpost.signal import load_cimg
from sarpost.unet import load_weights

WEIGHTS = Path(__file__).parent.parent / "tests" / "fixtures" / "digit_prior.sgsw"
SCENES = sorted((Path(__file__).parent.parent / "tests" / "fixtures" / "scenes").glob("*.cimg"))

if not WEIGHTS.exists() or not SCENES:
    sys.exit("weight/scene fixtures missing; train and export them first (see README)")

model = load_weights(WEIGHTS)
mag = np.abs(load_cimg(SCENES[0]))
scene = synthesize_scene(mag, seed=1)
op = build_operator(32, 32, 24, 24, seed=2)
echo, _ = simulate_echo(op, scene, snr_db=2.0, seed=3)

sched = AnnealingSchedule(lambda0=0.35, lambdaK=0.05, K0=15, K=60)
cfg = SgsConfig(langevin_steps=20, ddim_steps=15)

recs = {"truth": scene, "mf": matched_filter(op, echo)}
mu = 0.05 * 2.0 * np.abs(recs["mf"]).max()
recs["fista"] = fista_l1(op, echo, SparseSolverConfig(mu=mu, max_iters=400, tol=1e-8))
print("sampling (a few minutes on CPU) ...")
recs["dps"] = dps_run(op, echo, model, steps=200, guidance_scale=0.6, rng=4)
recs["sgs-ddim"] = sgs_run(op, echo, model, sched, cfg, rng=5)
recs["sgs-ddpm"] = sgs_ddpm_run(op, echo, model, sched, cfg, rng=6)

for name, rec in recs.items():
    if name != "truth":
        print(f"  {name:9s}: PSNR {psnr_db(scene, rec):6.2f} dB")
    _write_png(f"demo_neural_{name}.png", render_magnitude(rec, -40.0))
print("wrote demo_neural_*.png")
