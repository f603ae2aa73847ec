"""Reproducible experiment driver: scene generation, echo simulation,
method dispatch, SNR / sampling-point sweeps, repeat averaging, CSV
tables and rendered magnitude images.

Per-run randomness derives from SeedSequence(master, snr index, points
index, method index, repeat index), so any cell can be re-run in
isolation and a sweep re-run with the same master seed is byte-identical.
"""
from __future__ import annotations

import json
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from . import baselines, metrics, samplers
from .errors import (
    DivergenceError,
    InvalidConfigurationError,
    InvalidInputError,
    SarpostError,
)
from .forward import build_operator, simulate_echo, synthesize_scene
from .priors import GaussianPrior, GmmPrior
from .signal import load_cimg, save_cimg
from .unet import load_weights

METHODS = ("mf", "fista", "admm", "dps", "sgs-ddim", "sgs-ddpm")

DEFAULT_MU_FACTORS = tuple(float(f) for f in np.logspace(-4, -0.5, 8))


@dataclass
class ExperimentConfig:
    dataset: str = "synthetic-phase"       # or "scene-files"
    scene_files: list = field(default_factory=list)
    P: int = 32
    Q: int = 32
    snr_db: list = field(default_factory=lambda: [2.0])
    points: list = field(default_factory=lambda: [24])
    methods: list = field(default_factory=lambda: ["mf", "fista"])
    repeats: int = 1
    master_seed: int = 0
    selection: str = "uniform-random"
    prior: dict = field(default_factory=lambda: {"kind": "gaussian", "sigma_p": 1.0})
    schedule: dict = field(default_factory=dict)
    sgs: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)
    dps: dict = field(default_factory=dict)
    support_threshold: float = 0.0
    render_db_floor: float = -40.0
    workers: int = 1

    def validate(self):
        # "inf" (noiseless) is accepted as a string for JSON friendliness
        self.snr_db = [float(v) for v in self.snr_db]
        if self.repeats < 1:
            raise InvalidConfigurationError("repeats must be >= 1")
        if self.dataset not in ("synthetic-phase", "scene-files"):
            raise InvalidConfigurationError(f"unknown dataset {self.dataset!r}")
        if self.dataset == "scene-files" and not self.scene_files:
            raise InvalidConfigurationError("scene-files dataset needs scene_files")
        for m in self.methods:
            if m not in METHODS:
                raise InvalidConfigurationError(f"unknown method {m!r}")
        for n in self.points:
            if not (1 <= n <= min(self.P, self.Q)):
                raise InvalidConfigurationError(f"points value {n} out of range")
        return self

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - known
        if unknown:
            raise InvalidConfigurationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc).validate()

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_dict(json.load(f))

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def resolve_prior(spec: dict):
    """Build the prior model named by the config; fails before any compute."""
    kind = spec.get("kind", "gaussian")
    if kind == "gaussian":
        return GaussianPrior(float(spec.get("sigma_p", 1.0)))
    if kind == "gmm":
        path = spec.get("file")
        if not path or not Path(path).exists():
            raise InvalidConfigurationError(f"gmm prior file not found: {path}")
        with np.load(path) as d:
            return GmmPrior(d["weights"], d["means"], d["variances"])
    if kind == "neural":
        path = spec.get("weights")
        if not path or not Path(path).exists():
            raise InvalidConfigurationError(f"weight file not found: {path}")
        return load_weights(path)
    raise InvalidConfigurationError(f"unknown prior kind {kind!r}")


def random_phantom(P: int, Q: int, rng: np.random.Generator) -> np.ndarray:
    """Gaussian blobs plus point scatterers, intensity in [0, 1]."""
    yy, xx = np.meshgrid(np.linspace(-1, 1, P), np.linspace(-1, 1, Q), indexing="ij")
    img = np.zeros((P, Q))
    for _ in range(3):
        cx, cy = rng.uniform(-0.6, 0.6, 2)
        s = rng.uniform(0.1, 0.3)
        img += rng.uniform(0.3, 0.9) * np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * s**2))
    for _ in range(4):
        i, j = rng.integers(0, P), rng.integers(0, Q)
        img[i, j] += rng.uniform(0.5, 1.0)
    return np.clip(img, 0.0, 1.0)


def render_magnitude(x: np.ndarray, db_floor: float = -40.0) -> np.ndarray:
    """dB-scaled 8-bit grayscale of |x|; floor rounding, peak maps to 255."""
    if db_floor >= 0:
        raise InvalidInputError("db_floor must be negative")
    mag = np.abs(np.asarray(x))
    peak = mag.max()
    if peak == 0.0:
        warnings.warn("all-zero image renders uniformly black", RuntimeWarning)
        return np.zeros(mag.shape, dtype=np.uint8)
    with np.errstate(divide="ignore"):
        db = 20.0 * np.log10(mag / peak)
    db = np.clip(db, db_floor, 0.0)
    scaled = np.floor((db - db_floor) / (-db_floor) * 255.0)
    return np.clip(scaled, 0, 255).astype(np.uint8)


def _write_png(path, u8: np.ndarray) -> None:
    Image.fromarray(u8, mode="L").save(path)


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and not np.isfinite(v)):
        return ""
    return f"{v:.6f}"


def _scene_for_run(cfg: ExperimentConfig, run_seed_seq, repeat_idx: int):
    scene_rng = np.random.default_rng(run_seed_seq.spawn(1)[0])
    if cfg.dataset == "scene-files":
        path = cfg.scene_files[repeat_idx % len(cfg.scene_files)]
        return load_cimg(path)
    intensity = random_phantom(cfg.P, cfg.Q, scene_rng)
    phase_seed = int(scene_rng.integers(0, 2**31 - 1))
    return synthesize_scene(intensity, seed=phase_seed)


def _solver_cfgs(cfg: ExperimentConfig, op, y):
    """Sparse-solver configs for the mu sweep (or the single fixed mu)."""
    sol = cfg.solver
    iters = int(sol.get("max_iters", 500))
    tol = float(sol.get("tol", 1e-6))
    rho = float(sol.get("rho", 1.0))
    if sol.get("mu") is not None:
        mus = [float(sol["mu"])]
    else:
        scale = 2.0 * float(np.abs(baselines.matched_filter(op, y)).max())
        factors = sol.get("mu_grid_factors", DEFAULT_MU_FACTORS)
        mus = [scale * float(f) for f in factors]
    return [baselines.SparseSolverConfig(mu=m, max_iters=iters, tol=tol, rho=rho)
            for m in mus]


_BETTER_HIGH = {"psnr_db": True, "ssim": True, "nmse_db": False,
                "mpslr_db": False, "mislr_db": False}


def _best_per_metric(reports):
    """Oracle-best value of each metric across a regularization sweep."""
    out = {}
    for key, high in _BETTER_HIGH.items():
        vals = [getattr(r, key) for r in reports]
        vals = [v for v in vals if np.isfinite(v) or v in (np.inf, -np.inf)]
        if not vals:
            out[key] = float("nan")
        else:
            out[key] = max(vals) if high else min(vals)
    return out


def _reconstruct(method, cfg, op, y, prior, rng):
    """Dispatch one reconstruction; returns (image, extra reports) where
    extra reports replace per-metric values for swept solvers."""
    if method == "mf":
        return baselines.matched_filter(op, y)
    if method in ("fista", "admm"):
        raise RuntimeError("handled by caller")   # sweep handled in _run_one
    sched = samplers.AnnealingSchedule(
        lambda0=float(cfg.schedule.get("lambda0", 0.35)),
        lambdaK=float(cfg.schedule.get("lambdaK", 0.05)),
        K0=int(cfg.schedule.get("K0", 15)),
        K=int(cfg.schedule.get("K", 60)),
    )
    scfg = samplers.SgsConfig(
        langevin_steps=int(cfg.sgs.get("langevin_steps", 50)),
        ddim_steps=int(cfg.sgs.get("ddim_steps", 50)),
    )
    if method == "sgs-ddim":
        return samplers.sgs_run(op, y, prior, sched, scfg, rng=rng)
    if method == "sgs-ddpm":
        return samplers.sgs_ddpm_run(op, y, prior, sched, scfg, rng=rng)
    if method == "dps":
        return samplers.dps_run(
            op, y, prior,
            steps=int(cfg.dps.get("steps", 200)),
            guidance_scale=float(cfg.dps.get("guidance_scale", 1.0)),
            rng=rng,
        )
    raise InvalidConfigurationError(f"unknown method {method!r}")


def _run_one(cfg, prior, i_snr, i_pts, method, i_method, repeat, outdir):
    """One (snr, points, method, repeat) run; returns a CSV row dict."""
    snr = float(cfg.snr_db[i_snr])
    pts = int(cfg.points[i_pts])
    ss = np.random.SeedSequence(
        [cfg.master_seed, i_snr, i_pts, i_method, repeat]
    )
    seed_id = int(ss.generate_state(1)[0])
    op_seq, scene_seq, echo_seq, method_seq = ss.spawn(4)
    op = build_operator(cfg.P, cfg.Q, pts, pts, cfg.selection,
                        seed=int(op_seq.generate_state(1)[0]))
    x_true = _scene_for_run(cfg, scene_seq, repeat)
    y, _sigma = simulate_echo(op, x_true, snr,
                              seed=int(echo_seq.generate_state(1)[0]))
    support = None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        support = metrics.support_from_truth(x_true, cfg.support_threshold)
    row = {"method": method, "seed": seed_id, "snr_db": snr, "points": pts}
    try:
        if method in ("fista", "admm"):
            solve = baselines.fista_l1 if method == "fista" else baselines.admm_l1
            reports, recons = [], []
            for scfg in _solver_cfgs(cfg, op, y):
                xh = solve(op, y, scfg)
                recons.append(xh)
                reports.append(metrics.evaluate(x_true, xh, support, seed=seed_id))
            best = _best_per_metric(reports)
            row.update(best)
            psnrs = [r.psnr_db for r in reports]
            x_hat = recons[int(np.argmax(psnrs))]
        else:
            rng = np.random.default_rng(method_seq)
            x_hat = _reconstruct(method, cfg, op, y, prior, rng)
            rep = metrics.evaluate(x_true, x_hat, support, seed=seed_id)
            row.update({k: getattr(rep, k) for k in _BETTER_HIGH})
        row["failed"] = False
    except (DivergenceError, SarpostError) as e:
        row.update({k: None for k in _BETTER_HIGH})
        row["failed"] = True
        row["error"] = str(e)
        x_hat = None
    if repeat == 0 and outdir is not None:
        cell = f"snr{snr:+.0f}_pts{pts}"
        _write_png(outdir / f"truth_{cell}.png",
                   render_magnitude(x_true, cfg.render_db_floor))
        if x_hat is not None:
            _write_png(outdir / f"{method}_{cell}.png",
                       render_magnitude(x_hat, cfg.render_db_floor))
            save_cimg(outdir / f"{method}_{cell}.cimg", x_hat)
    return row


def run_experiment(cfg: ExperimentConfig, outdir) -> Path:
    """Run the full sweep grid; writes runs.csv, summary.csv and renderings."""
    cfg.validate()
    prior = None
    if any(m in ("dps", "sgs-ddim", "sgs-ddpm") for m in cfg.methods):
        prior = resolve_prior(cfg.prior)
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    renders = outdir / "renders"
    renders.mkdir(exist_ok=True)

    tasks = [
        (i_snr, i_pts, method, i_m, rep)
        for i_snr in range(len(cfg.snr_db))
        for i_pts in range(len(cfg.points))
        for i_m, method in enumerate(cfg.methods)
        for rep in range(cfg.repeats)
    ]

    def work(t):
        i_snr, i_pts, method, i_m, rep = t
        return t, _run_one(cfg, prior, i_snr, i_pts, method, i_m, rep, renders)

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = dict(pool.map(work, tasks))
    else:
        results = dict(map(work, tasks))

    metric_keys = ["nmse_db", "psnr_db", "ssim", "mpslr_db", "mislr_db"]
    with open(outdir / "runs.csv", "w", encoding="utf-8", newline="") as f:
        f.write(",".join(metrics.CSV_HEADER) + "\n")
        for t in tasks:
            row = results[t]
            cells = [row["method"], str(row["seed"]),
                     f"{row['snr_db']:g}", str(row["points"])]
            cells += [_fmt(row[k]) for k in metric_keys]
            f.write(",".join(cells) + "\n")

    with open(outdir / "summary.csv", "w", encoding="utf-8", newline="") as f:
        f.write("snr_db,points,method,n_ok,failures,"
                + ",".join(metric_keys) + "\n")
        for i_snr in range(len(cfg.snr_db)):
            for i_pts in range(len(cfg.points)):
                for i_m, method in enumerate(cfg.methods):
                    rows = [results[(i_snr, i_pts, method, i_m, r)]
                            for r in range(cfg.repeats)]
                    ok = [r for r in rows if not r["failed"]]
                    cells = [f"{cfg.snr_db[i_snr]:g}", str(cfg.points[i_pts]),
                             method, str(len(ok)), str(len(rows) - len(ok))]
                    for k in metric_keys:
                        vals = [r[k] for r in ok
                                if r[k] is not None and np.isfinite(r[k])]
                        cells.append(_fmt(float(np.mean(vals))) if vals else "")
                    f.write(",".join(cells) + "\n")

    with open(outdir / "config.json", "w", encoding="utf-8") as f:
        json.dump(cfg.to_dict(), f, indent=1, sort_keys=True)
        f.write("\n")
    return outdir
