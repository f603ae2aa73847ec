"""Posterior-sampling reconstruction of complex scenes from incomplete
row-subsampled 2-D Fourier measurements, with matched-filter and
sparsity baselines, analytic and learned diffusion-style priors, and an
experiment harness."""

from .baselines import SparseSolverConfig, admm_l1, fista_l1, matched_filter, soft_threshold
from .forward import (
    SarOperator,
    build_operator,
    complex_gaussian,
    full_operator,
    load_operator_manifest,
    save_operator_manifest,
    simulate_echo,
    synthesize_scene,
)
from .metrics import (
    MetricsReport,
    SupportSet,
    evaluate,
    mislr_db,
    mpslr_db,
    nmse_db,
    psnr_db,
    ssim,
    support_from_truth,
)
from .priors import GaussianPrior, GmmPrior, ScoreModel, score_from_noise
from .samplers import (
    AnnealingSchedule,
    SgsConfig,
    alpha_bar_grid,
    ddim_residual_step,
    ddpm_residual_step,
    dps_run,
    langevin_posterior_run,
    langevin_step,
    likelihood_grad,
    make_alpha_bar_schedule,
    prior_sample,
    sgs_ddpm_run,
    sgs_run,
    sgs_run_chains,
)
from .signal import (
    DftFactor,
    apply_adjoint,
    apply_forward,
    dense_operator_matrix,
    from_two_channel,
    load_cimg,
    save_cimg,
    to_two_channel,
    unitary_dft,
    unvec,
    vec,
)
from .unet import NeuralDenoiser, load_weights
from .weights import layer_plan, read_sgsw, write_sgsw

__version__ = "0.1.0"
