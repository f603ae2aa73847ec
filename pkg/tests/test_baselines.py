import numpy as np
import pytest

from sarpost.baselines import (
    SparseSolverConfig,
    admm_l1,
    fista_l1,
    l1_objective,
    matched_filter,
    soft_threshold,
)
from sarpost.errors import InvalidConfigurationError
from sarpost.forward import build_operator, full_operator, simulate_echo, synthesize_scene

from conftest import random_complex


class TestMatchedFilter:
    def test_exact_under_full_sampling(self, rng):
        op = full_operator(16, 16)
        x = random_complex(rng, (16, 16))
        y, _ = simulate_echo(op, x, np.inf)
        xhat = matched_filter(op, y)
        assert np.linalg.norm(xhat - x) / np.linalg.norm(x) < 1e-10

    def test_zero_echo(self):
        op = build_operator(8, 8, 4, 4, seed=0)
        assert np.all(matched_filter(op, np.zeros((4, 4))) == 0)

    def test_point_scene_dirichlet_kernel(self, rng):
        # closed-form oracle: independent double-sum over selected rows
        P = Q = 16
        op = build_operator(P, Q, 7, 9, seed=3)
        p0, q0 = 5, 11
        x = np.zeros((P, Q), complex)
        x[p0, q0] = 1.0
        y, _ = simulate_echo(op, x, np.inf)
        img = matched_filter(op, y)

        kr = np.array([
            sum(np.exp(2j * np.pi * k * (p - p0) / P) for k in op.phi.rows) / P
            for p in range(P)
        ])
        ka = np.array([
            sum(np.exp(-2j * np.pi * k * (q - q0) / Q) for k in op.psi.rows) / Q
            for q in range(Q)
        ])
        oracle = np.outer(kr, ka)
        assert np.allclose(img, oracle, atol=1e-10)
        peak = np.unravel_index(np.argmax(np.abs(img)), img.shape)
        assert peak == (p0, q0)


class TestSoftThreshold:
    def test_frozen_value(self):
        # |z| = 5, shrink factor 4/5
        assert soft_threshold(3 + 4j, 1.0) == pytest.approx(2.4 + 3.2j)

    def test_zero_tau_identity(self, rng):
        z = random_complex(rng, (10,))
        assert np.allclose(soft_threshold(z, 0.0), z)

    def test_below_threshold_is_zero(self):
        assert soft_threshold(0.3 - 0.2j, 1.0) == 0
        assert soft_threshold(0.0, 1.0) == 0

    def test_nonexpansive(self, rng):
        for _ in range(50):
            a, b = random_complex(rng, (2,), scale=3.0)
            tau = float(rng.uniform(0, 2))
            assert abs(soft_threshold(a, tau) - soft_threshold(b, tau)) <= abs(a - b) + 1e-12


def kkt_residual(op, y, x, mu, support_tol=1e-9):
    """Max violation of the l1 first-order conditions at x."""
    g = 2.0 * op.adjoint(op.forward(x) - y)
    on = np.abs(x) > support_tol
    viol_on = np.abs(g[on] + mu * x[on] / np.abs(x[on])).max() if on.any() else 0.0
    viol_off = max(0.0, (np.abs(g[~on]) - mu).max()) if (~on).any() else 0.0
    return max(viol_on, viol_off)


class TestFista:
    def test_mu_zero_full_sampling_matches_mf(self, rng):
        op = full_operator(8, 8)
        x = random_complex(rng, (8, 8))
        y, _ = simulate_echo(op, x, np.inf)
        cfg = SparseSolverConfig(mu=0.0, max_iters=100, tol=1e-12)
        assert np.linalg.norm(fista_l1(op, y, cfg) - matched_filter(op, y)) < 1e-10

    def test_huge_mu_gives_zero(self, rng):
        op = build_operator(8, 8, 6, 6, seed=1)
        x = random_complex(rng, (8, 8))
        y, _ = simulate_echo(op, x, 10.0, seed=2)
        mu = 2.0 * np.abs(matched_filter(op, y)).max() * 1.01
        cfg = SparseSolverConfig(mu=mu, max_iters=300, tol=1e-14)
        assert np.all(fista_l1(op, y, cfg) == 0)

    def test_kkt_residual_small_instance(self, rng):
        op = build_operator(8, 8, 6, 6, seed=5)
        x = synthesize_scene((np.abs(random_complex(rng, (8, 8))) > 1.2).astype(float), seed=1)
        y, _ = simulate_echo(op, x, 10.0, seed=3)
        mu = 0.1 * 2.0 * np.abs(matched_filter(op, y)).max()
        cfg = SparseSolverConfig(mu=mu, max_iters=20000, tol=1e-14)
        xhat = fista_l1(op, y, cfg)
        assert kkt_residual(op, y, xhat, mu) < 1e-4

    def test_objective_not_worse_than_mf_init(self, rng):
        op = build_operator(16, 16, 10, 10, seed=2)
        x = random_complex(rng, (16, 16))
        y, _ = simulate_echo(op, x, 5.0, seed=4)
        mu = 0.05 * 2.0 * np.abs(matched_filter(op, y)).max()
        cfg = SparseSolverConfig(mu=mu, max_iters=400, tol=1e-10)
        xhat = fista_l1(op, y, cfg)
        assert l1_objective(op, y, xhat, mu) <= l1_objective(op, y, matched_filter(op, y), mu) + 1e-9


class TestAdmm:
    def test_agrees_with_fista(self, rng):
        op = build_operator(8, 8, 6, 6, seed=7)
        x = random_complex(rng, (8, 8))
        y, _ = simulate_echo(op, x, 10.0, seed=8)
        mu = 0.1 * 2.0 * np.abs(matched_filter(op, y)).max()
        xf = fista_l1(op, y, SparseSolverConfig(mu=mu, max_iters=20000, tol=1e-14))
        xa = admm_l1(op, y, SparseSolverConfig(mu=mu, max_iters=20000, tol=1e-12))
        assert np.linalg.norm(xf - xa) / np.linalg.norm(xf) < 1e-3

    def test_mu_zero_least_norm(self, rng):
        op = build_operator(8, 8, 5, 5, seed=9)
        x = random_complex(rng, (8, 8))
        y, _ = simulate_echo(op, x, np.inf)
        cfg = SparseSolverConfig(mu=0.0, max_iters=200, tol=1e-12)
        xa = admm_l1(op, y, cfg)
        assert np.linalg.norm(xa - matched_filter(op, y)) < 1e-8

    def test_zero_echo(self):
        op = build_operator(8, 8, 4, 4, seed=0)
        cfg = SparseSolverConfig(mu=0.5, max_iters=50, tol=1e-9)
        assert np.allclose(admm_l1(op, np.zeros((4, 4)), cfg), 0.0)

    def test_bad_rho_rejected(self):
        with pytest.raises(InvalidConfigurationError):
            SparseSolverConfig(rho=0.0)


class TestConfigValidation:
    @pytest.mark.parametrize("kw", [
        {"mu": -1.0}, {"max_iters": 0}, {"tol": 0.0}, {"rho": -2.0},
    ])
    def test_invalid(self, kw):
        with pytest.raises(InvalidConfigurationError):
            SparseSolverConfig(**kw)
