"""Command-line front end.

Subcommands: simulate, reconstruct, sweep, render, metrics.  Every flag
mirrors a config key of the same name and overrides the JSON config.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import baselines, harness, metrics, samplers
from .forward import (
    build_operator,
    load_operator_manifest,
    save_operator_manifest,
    simulate_echo,
)
from .signal import load_cimg, save_cimg


def _add_config_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path, help="JSON experiment config")
    p.add_argument("--dataset", choices=("synthetic-phase", "scene-files"))
    p.add_argument("--scene-files", type=str, help="comma-separated CIMG paths")
    p.add_argument("--P", type=int)
    p.add_argument("--Q", type=int)
    p.add_argument("--snr-db", type=str, help="comma-separated dB values")
    p.add_argument("--points", type=str, help="comma-separated point counts")
    p.add_argument("--methods", type=str, help="comma-separated method names")
    p.add_argument("--repeats", type=int)
    p.add_argument("--master-seed", type=int)
    p.add_argument("--selection", choices=("uniform-random", "decimation"))
    p.add_argument("--prior", type=str, help="JSON prior spec")
    p.add_argument("--schedule", type=str, help="JSON schedule params")
    p.add_argument("--sgs", type=str, help="JSON sampler params")
    p.add_argument("--solver", type=str, help="JSON solver params")
    p.add_argument("--dps", type=str, help="JSON guided-diffusion params")
    p.add_argument("--support-threshold", type=float)
    p.add_argument("--render-db-floor", type=float)
    p.add_argument("--workers", type=int)


_LIST_FLOAT = ("snr_db",)
_LIST_INT = ("points",)
_LIST_STR = ("methods", "scene_files")
_JSON_KEYS = ("prior", "schedule", "sgs", "solver", "dps")


def _config_from_args(args) -> harness.ExperimentConfig:
    doc = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as f:
            doc = json.load(f)
    for key in harness.ExperimentConfig.__dataclass_fields__:
        val = getattr(args, key, None)
        if val is None:
            continue
        if key in _LIST_FLOAT:
            val = [float(v) for v in str(val).split(",")]
        elif key in _LIST_INT:
            val = [int(v) for v in str(val).split(",")]
        elif key in _LIST_STR:
            val = [s for s in str(val).split(",") if s]
        elif key in _JSON_KEYS:
            val = json.loads(val)
        doc[key] = val
    return harness.ExperimentConfig.from_dict(doc)


def cmd_simulate(args):
    cfg = _config_from_args(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    snr = cfg.snr_db[0]
    pts = cfg.points[0]
    ss = np.random.SeedSequence([cfg.master_seed, 0, 0, 0, 0])
    op_seq, scene_seq, echo_seq, _ = ss.spawn(4)
    op = build_operator(cfg.P, cfg.Q, pts, pts, cfg.selection,
                        seed=int(op_seq.generate_state(1)[0]))
    x_true = harness._scene_for_run(cfg, scene_seq, 0)
    y, sigma = simulate_echo(op, x_true, snr,
                             seed=int(echo_seq.generate_state(1)[0]))
    save_cimg(out / "scene.cimg", x_true)
    save_cimg(out / "echo.cimg", y)
    save_operator_manifest(out / "operator.json", op, cfg.selection,
                           seed=cfg.master_seed)
    with open(out / "meta.json", "w", encoding="utf-8") as f:
        json.dump({"snr_db": snr, "sigma": sigma, "points": pts}, f, indent=1)
    print(f"wrote scene/echo/operator to {out} (sigma={sigma:.6g})")
    return 0


def cmd_reconstruct(args):
    cfg = _config_from_args(args)
    op = load_operator_manifest(args.operator)
    y = load_cimg(args.echo)
    method = args.method
    prior = None
    if method in ("dps", "sgs-ddim", "sgs-ddpm"):
        prior = harness.resolve_prior(cfg.prior)
    rng = np.random.default_rng(np.random.SeedSequence(cfg.master_seed))
    if method == "mf":
        x = baselines.matched_filter(op, y)
    elif method in ("fista", "admm"):
        scfg = harness._solver_cfgs(cfg, op, y)[-1] if cfg.solver.get("mu") is None \
            else harness._solver_cfgs(cfg, op, y)[0]
        solve = baselines.fista_l1 if method == "fista" else baselines.admm_l1
        x = solve(op, y, scfg)
    else:
        x = harness._reconstruct(method, cfg, op, y, prior, rng)
    save_cimg(args.out, x)
    print(f"wrote {args.out}")
    return 0


def cmd_sweep(args):
    cfg = _config_from_args(args)
    outdir = harness.run_experiment(cfg, args.out)
    print(f"sweep complete: {outdir}/runs.csv, {outdir}/summary.csv")
    return 0


def cmd_render(args):
    x = load_cimg(args.infile)
    u8 = harness.render_magnitude(x, args.db_floor)
    harness._write_png(args.out, u8)
    print(f"wrote {args.out}")
    return 0


def cmd_metrics(args):
    x_true = load_cimg(args.truth)
    x_hat = load_cimg(args.recon)
    support = metrics.support_from_truth(x_true, args.support_threshold)
    rep = metrics.evaluate(x_true, x_hat, support)
    print(f"nmse_db={rep.nmse_db:.4f} psnr_db={rep.psnr_db:.4f} "
          f"ssim={rep.ssim:.4f} mpslr_db={rep.mpslr_db:.4f} "
          f"mislr_db={rep.mislr_db:.4f}")
    if args.csv:
        path = Path(args.csv)
        new = not path.exists()
        with open(path, "a", encoding="utf-8") as f:
            if new:
                f.write(",".join(metrics.CSV_HEADER) + "\n")
            f.write(",".join([
                "pair", "0", "", "",
                f"{rep.nmse_db:.6f}", f"{rep.psnr_db:.6f}", f"{rep.ssim:.6f}",
                f"{rep.mpslr_db:.6f}", f"{rep.mislr_db:.6f}",
            ]) + "\n")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="sarpost")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate scene, echo and operator files")
    _add_config_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reconstruct", help="run one method on one input")
    _add_config_flags(p)
    p.add_argument("--echo", required=True)
    p.add_argument("--operator", required=True)
    p.add_argument("--method", required=True, choices=harness.METHODS)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("sweep", help="run the full experiment grid")
    _add_config_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("render", help="render a CIMG file to 8-bit PNG")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--db-floor", type=float, default=-40.0)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("metrics", help="score a reconstruction against a truth")
    p.add_argument("--truth", required=True)
    p.add_argument("--recon", required=True)
    p.add_argument("--support-threshold", type=float, default=0.0)
    p.add_argument("--csv", help="append a row to this CSV")
    p.set_defaults(func=cmd_metrics)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
