"""Training side of the two-channel denoising prior: torch model,
schedules, CIMG scene datasets, the Algorithm-style training loop, and
the SGSW weight exporter."""

from .data import SceneDataset, digits_magnitudes, load_cimg, save_cimg, write_digit_scene_files
from .export import export_model, export_weights
from .model import NoisePredictor, init_for_training, sinusoidal_embedding
from .schedule import cosine_alpha_bar, linear_alpha_bar, make_alpha_bar
from .train import DEFAULT_ARCH, TrainConfig, TrainResult, reference_forward, train

__version__ = "0.1.0"
