import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_complex(rng, shape, scale=1.0):
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


# --- acceptance reporting: one pass/fail line per criterion -----------------
ACCEPTANCE_CRITERIA = {
    "test_operator_correctness": "Operator correctness (adjoint, unitarity, dense oracle)",
    "test_matched_filter_exactness": "Matched-filter exactness (full sampling, noiseless)",
    "test_gradient_correctness": "Wirtinger likelihood gradient vs finite differences",
    "test_convex_solver_agreement": "FISTA/ADMM agreement and l1 KKT residual",
    "test_langevin_stationarity": "Coupled Langevin stationary variance",
    "test_grid_algebra": "Noise-level grid endpoints and round trip",
    "test_exact_posterior_oracle_gaussian": "Exact-posterior oracle: Gaussian prior mean",
    "test_exact_posterior_oracle_gmm": "Exact-posterior oracle: GMM occupancy",
    "test_method_ordering_micro": "Method ordering at micro scale (neural prior)",
    "test_metric_identities": "Metric identities and sidelobe sign convention",
    "test_determinism_sweep": "Sweep determinism (byte-identical reruns)",
}


def pytest_terminal_summary(terminalreporter):
    lines = []
    for status in ("passed", "failed", "error", "skipped"):
        for rep in terminalreporter.stats.get(status, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py::" not in nodeid:
                continue
            name = nodeid.split("::")[-1]
            label = ACCEPTANCE_CRITERIA.get(name)
            if label and getattr(rep, "when", "call") == "call" or status == "skipped":
                if label:
                    lines.append((label, status.upper()))
    if lines:
        tw = terminalreporter
        tw.section("acceptance criteria")
        for label, status in lines:
            tw.write_line(f"[{status:>7}] {label}")
