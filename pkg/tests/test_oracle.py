import logging
import math

import numpy as np
import pytest

from config.lab_config import OracleSection
from core.dyson import dyson1_exact, dyson3_magnitude
from core.exceptions import ConfigError, LeakageError
from core.oracle import (
    OracleConfig,
    annihilators,
    discretize,
    discretized_correlation,
    evolve,
    fock_basis,
    fock_dimension,
    resolved_step,
)
from core.phases import PhaseKernels
from core.reservoir import ReservoirModel, gamma_closed_form


def test_discretized_correlation_at_zero(reservoir_m2):
    modes = discretize(reservoir_m2, OracleConfig(n_modes=64, omega_max=40.0))
    assert modes.n_modes == 64
    exact = gamma_closed_form(reservoir_m2, 0.0).real
    assert discretized_correlation(modes, 0.0).real == pytest.approx(exact, rel=0.02)
    assert discretized_correlation(modes, 0.0).imag == 0.0


def test_discretized_correlation_converges_with_modes(reservoir_m2):
    exact = gamma_closed_form(reservoir_m2, 1.0)
    errors = []
    for n in (32, 64):
        modes = discretize(reservoir_m2, OracleConfig(n_modes=n, omega_max=40.0))
        errors.append(abs(discretized_correlation(modes, 1.0) - exact))
    assert errors[1] <= 0.5 * errors[0]


def test_uncoupled_reservoir_has_zero_weights():
    modes = discretize(ReservoirModel(g0=0.0, exponent=2.0), OracleConfig(n_modes=8))
    assert np.all(modes.weights == 0.0)
    np.testing.assert_allclose(modes.omega, (np.arange(8) + 0.5) * 10.0 / 8)


def test_discretize_rejects_thermal_reservoir(thermal_reservoir):
    with pytest.raises(ConfigError):
        discretize(thermal_reservoir, OracleConfig())
    with pytest.raises(ConfigError):
        OracleConfig(beta=2.0)


@pytest.mark.parametrize("kwargs", [{"n_modes": 0}, {"n_excitations": -1}, {"omega_max": 0.0}, {"dt_phys": -0.1}])
def test_oracle_config_validation(kwargs):
    with pytest.raises(ConfigError):
        OracleConfig(**kwargs)


def test_oracle_config_from_section():
    section = OracleSection(n_modes=12, omega_max=5.0, n_excitations=1, dt=0.0)
    cfg = OracleConfig.from_config(section, leakage_tol=0.1)
    assert (cfg.n_modes, cfg.omega_max, cfg.n_excitations, cfg.dt_phys) == (12, 5.0, 1, 0.0)
    assert cfg.leakage_tol == 0.1
    assert math.isinf(cfg.beta)


def test_fock_basis_layout():
    basis = fock_basis(3, 2)
    assert basis.shape == (fock_dimension(3, 2), 3) == (10, 3)
    totals = basis.sum(axis=1)
    assert np.all(basis[0] == 0)
    assert np.all(np.diff(totals) >= 0)
    assert totals.max() == 2
    assert len({tuple(row) for row in basis}) == 10
    assert fock_basis(5, 0).shape == (1, 5)


def test_annihilators_satisfy_commutation_below_cutoff():
    basis = fock_basis(3, 3)
    ops = annihilators(basis)
    below = basis.sum(axis=1) < 3
    for j, a_j in enumerate(ops):
        for k, a_k in enumerate(ops):
            commutator = (a_j @ a_k.T - a_k.T @ a_j).toarray()[np.ix_(below, below)]
            expected = np.eye(int(below.sum())) if j == k else np.zeros_like(commutator)
            np.testing.assert_allclose(commutator, expected, atol=1e-14)


def test_annihilator_lowers_occupation():
    basis = fock_basis(2, 2)
    a0 = annihilators(basis)[0].toarray()
    index = {tuple(row): i for i, row in enumerate(basis)}
    assert a0[index[(1, 0)], index[(2, 0)]] == pytest.approx(math.sqrt(2.0))
    assert a0[index[(0, 0)], index[(1, 0)]] == 1.0
    assert np.all(a0[:, index[(0, 1)]] == 0.0)


def test_resolved_step_and_clamping(reference_system, caplog):
    bound = 2.0 * math.pi / (20 * 10.0)
    assert resolved_step(reference_system, OracleConfig()) == pytest.approx(bound)
    assert resolved_step(reference_system, OracleConfig(dt_phys=0.01)) == 0.01
    with caplog.at_level(logging.WARNING):
        assert resolved_step(reference_system, OracleConfig(dt_phys=1.0)) == pytest.approx(bound)
    assert "clamping" in caplog.text


def test_uncoupled_oracle_matches_free_dyson_term(reference_system, reference_transport, reservoir_m2):
    eps, t = 0.1, 0.5
    cfg = OracleConfig(n_modes=1, omega_max=1.0, n_excitations=0)
    result = evolve(reference_system, discretize(reservoir_m2, cfg), cfg, eps, 0.0, t)
    kernels = PhaseKernels.build(reference_system, reservoir_m2, eps, 0.0, t_max=t)
    expected = dyson1_exact(kernels, reference_transport, reference_system, t)
    omega3 = dyson3_magnitude(kernels, reference_transport, reference_system, t)
    assert abs(result.p12 - expected) <= omega3
    assert result.p12 == pytest.approx(expected, rel=0.15)
    assert result.leakage == 0.0
    assert result.norm_drift <= 1e-8
    assert sum(result.populations) == pytest.approx(1.0, abs=1e-8)


def test_static_angle_keeps_populations(static_system, reservoir_m2):
    cfg = OracleConfig(n_modes=4, n_excitations=2)
    result = evolve(static_system, discretize(reservoir_m2, cfg), cfg, 0.1, 0.3, 1.0)
    assert result.p12 == pytest.approx(0.0, abs=1e-20)
    assert result.populations[0] == pytest.approx(1.0, abs=1e-8)
    assert result.mean_occupation > 0.0


def test_oracle_at_initial_time(reference_system, reservoir_m2):
    cfg = OracleConfig(n_modes=4, n_excitations=1)
    result = evolve(reference_system, discretize(reservoir_m2, cfg), cfg, 0.1, 0.1, 0.0)
    assert result.n_steps == 0
    assert result.p12 == pytest.approx(0.0, abs=1e-30)
    assert result.to_dict()["dimension"] == 2 * fock_dimension(4, 1)


def test_leakage_beyond_tolerance_raises(reference_system, reservoir_m2):
    cfg = OracleConfig(n_modes=4, n_excitations=1, leakage_tol=1e-12)
    modes = discretize(reservoir_m2, cfg)
    with pytest.raises(LeakageError) as excinfo:
        evolve(reference_system, modes, cfg, 0.1, 0.5, 0.3)
    assert excinfo.value.leakage > 1e-12
    result = evolve(reference_system, modes, cfg, 0.1, 0.5, 0.3, certify=False)
    assert result.leakage == pytest.approx(excinfo.value.leakage)


def test_dimension_cap(reference_system, reservoir_m2):
    cfg = OracleConfig(n_modes=4, n_excitations=2, max_dimension=10)
    with pytest.raises(ConfigError):
        evolve(reference_system, discretize(reservoir_m2, cfg), cfg, 0.1, 0.1, 1.0)


@pytest.mark.parametrize("eps, lam, t", [(0.0, 0.1, 1.0), (0.1, -0.1, 1.0), (0.1, 0.1, 1.5)])
def test_evolve_rejects_invalid_arguments(reference_system, reservoir_m2, eps, lam, t):
    cfg = OracleConfig(n_modes=2, n_excitations=1)
    with pytest.raises(ValueError):
        evolve(reference_system, discretize(reservoir_m2, cfg), cfg, eps, lam, t)


@pytest.mark.slow
def test_oracle_cross_validates_first_dyson_term(reference_system, reference_transport, reservoir_m2):
    eps, lam, t = 0.1, 0.1, 0.5
    cfg = OracleConfig(n_modes=48, n_excitations=2)
    result = evolve(reference_system, discretize(reservoir_m2, cfg), cfg, eps, lam, t)
    kernels = PhaseKernels.build(reference_system, reservoir_m2, eps, lam, t_max=t)
    p1 = dyson1_exact(kernels, reference_transport, reference_system, t)
    omega3 = dyson3_magnitude(kernels, reference_transport, reference_system, t)
    assert result.norm_drift <= 1e-8
    assert abs(result.p12 - p1) <= max(0.05 * p1, omega3 + result.leakage)
