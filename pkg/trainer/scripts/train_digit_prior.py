#!/usr/bin/env python3
"""Train the digit prior and export the SGSW container."""
import argparse
import json
import time

from sartrain.export import export_model
from sartrain.train import DEFAULT_ARCH, TrainConfig, train


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--dataset", default="data/digits500")
    ap.add_argument("--out", default="digit_prior.sgsw")
    ap.add_argument("--epochs", type=int, default=100)
    ap.add_argument("--batch-size", type=int, default=50)
    ap.add_argument("--lr", type=float, default=2e-4)
    ap.add_argument("--timesteps", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--scene-scale", type=float, default=1.0)
    ap.add_argument("--loss-log", default=None)
    args = ap.parse_args()

    cfg = TrainConfig(
        dataset=args.dataset,
        timesteps=args.timesteps,
        batch_size=args.batch_size,
        lr=args.lr,
        epochs=args.epochs,
        seed=args.seed,
        scene_scale=args.scene_scale,
        arch=dict(DEFAULT_ARCH),
    )
    t0 = time.time()
    res = train(cfg)
    wall = time.time() - t0
    meta = {
        "optimizer": "adam",
        "scene_scale": args.scene_scale,
        "lr": args.lr,
        "epochs": args.epochs,
        "batch_size": args.batch_size,
        "seed": args.seed,
        "wall_seconds": round(wall, 1),
        "final_loss": res.epoch_losses[-1],
    }
    export_model(args.out, res.model, res.alpha_bar, train_meta=meta)
    print(f"exported {args.out} after {wall:.0f}s; "
          f"loss {res.epoch_losses[0]:.4f} -> {res.epoch_losses[-1]:.4f}")
    if args.loss_log:
        with open(args.loss_log, "w") as f:
            json.dump(res.epoch_losses, f)


if __name__ == "__main__":
    main()
