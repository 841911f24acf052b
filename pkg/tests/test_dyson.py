import math

import numpy as np
import pytest

from conftest import make_system
from core.dyson import (
    DysonTerm,
    RegimeThresholds,
    classify_regime,
    dyson1_by_parts,
    dyson1_exact,
    dyson3_magnitude,
    dyson3_phased,
    error_exponents,
    leading_order,
    oscillation_width,
    theorem_residual,
    transition_report,
)
from core.exceptions import NodeBudgetError, QuadratureError
from core.kato import q12_diagonal, transport
from core.phases import PhaseKernels


@pytest.fixture(scope="module")
def kernels(reference_system, reservoir_m2):
    return PhaseKernels.build(reference_system, reservoir_m2, 0.1, 0.1)


def test_static_angle_has_no_transition(static_system, static_transport, reservoir_m2):
    kernels = PhaseKernels.build(static_system, reservoir_m2, 0.1, 0.0)
    assert dyson1_exact(kernels, static_transport, static_system, 1.0) == 0.0
    assert leading_order(static_transport, reservoir_m2, static_system, 0.1, 0.1, 1.0) == (0.0, 0.0)


def test_dyson1_vanishes_at_initial_time(kernels, reference_transport, reference_system):
    assert dyson1_exact(kernels, reference_transport, reference_system, 0.0) == 0.0
    assert dyson3_magnitude(kernels, reference_transport, reference_system, 0.0) == 0.0


def test_free_adiabatic_correction_is_third_order(reference_system, reference_transport, reservoir_m2):
    t = 0.5
    eps_values = [0.1, 0.05, 0.025]
    errors = []
    for eps in eps_values:
        kernels = PhaseKernels.build(reference_system, reservoir_m2, eps, 0.0, t_max=t)
        exact = dyson1_exact(kernels, reference_transport, reference_system, t)
        errors.append(abs(exact - eps**2 * q12_diagonal(reference_transport, t)))
    slope = np.polyfit(np.log(eps_values), np.log(errors), 1)[0]
    assert slope == pytest.approx(3.0, abs=0.5)


RESIDUAL_EPS = (0.05, 0.025, 0.0125)


@pytest.mark.slow
def test_downward_residual_decreases_along_square_root_coupling(downward_system, downward_transport, reservoir_m2):
    scaled = []
    for eps in RESIDUAL_EPS:
        report = transition_report(downward_transport, reservoir_m2, downward_system, eps, math.sqrt(eps), 1.0)
        assert report.p_correction > 0
        scaled.append(abs(report.residual) / eps**2)
    assert scaled[0] >= 1.5 * scaled[1]
    assert scaled[1] >= 1.5 * scaled[2]


def test_dyson1_is_stable_under_panel_halving(downward_system, downward_transport, reservoir_m2):
    eps = 0.05
    kernels = PhaseKernels.build(downward_system, reservoir_m2, eps, math.sqrt(eps))
    coarse = dyson1_exact(kernels, downward_transport, downward_system, 1.0)
    fine = dyson1_exact(
        kernels, downward_transport, downward_system, 1.0, panel_eps_fraction=0.25, max_phase_per_panel=math.pi / 8
    )
    assert coarse > 0
    assert fine == pytest.approx(coarse, rel=1e-6)


def test_correction_grows_monotonically_in_time(downward_system, downward_transport, reservoir_m2):
    corrections = np.array([
        leading_order(downward_transport, reservoir_m2, downward_system, 0.1, 0.3, t)[1]
        for t in np.linspace(0.0, 1.0, 11)
    ])
    assert corrections[0] == 0.0
    assert np.all(np.diff(corrections) >= -1e-12 * corrections[-1])
    assert corrections[-1] > corrections[5] > 0


def test_residual_is_continuous_as_coupling_vanishes(downward_system, downward_transport, reservoir_m2):
    residual = lambda lam: transition_report(
        downward_transport, reservoir_m2, downward_system, 0.1, lam, 0.5
    ).residual
    at_zero = residual(0.0)
    gaps = [abs(residual(lam) - at_zero) for lam in (1e-2, 1e-3, 1e-4)]
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] <= 1e-6



def test_ground_state_start_has_no_zero_temperature_correction(reference_system, reference_transport, reservoir_m2):
    p_free, p_correction = leading_order(reference_transport, reservoir_m2, reference_system, 0.1, 0.1, 1.0)
    assert p_correction == 0.0
    assert p_free == pytest.approx(0.0, abs=1e-12)


def test_excited_state_start_has_positive_correction(downward_system, downward_transport, reservoir_m2):
    _, p_correction = leading_order(downward_transport, reservoir_m2, downward_system, 0.1, 0.1, 1.0)
    assert p_correction > 1e-12


def test_thermal_reservoir_drives_upward_transitions(reference_system, reference_transport, thermal_reservoir):
    _, p_correction = leading_order(reference_transport, thermal_reservoir, reference_system, 0.1, 0.1, 1.0)
    assert p_correction > 1e-12


def test_equal_coupling_weights_give_no_correction(reservoir_m2):
    sys = make_system(e21="-1", b1="0.7", b2="0.7")
    kt = transport(sys)
    p_free, p_correction = leading_order(kt, reservoir_m2, sys, 0.1, 0.5, 1.0)
    assert p_correction == 0.0
    assert p_free == pytest.approx(0.0, abs=1e-12)


def test_leading_order_scales_with_coupling(downward_system, downward_transport, reservoir_m2):
    _, weak = leading_order(downward_transport, reservoir_m2, downward_system, 0.1, 0.1, 1.0)
    _, strong = leading_order(downward_transport, reservoir_m2, downward_system, 0.1, 0.2, 1.0)
    assert strong == pytest.approx(4.0 * weak, rel=1e-12)
    with pytest.raises(ValueError):
        leading_order(downward_transport, reservoir_m2, downward_system, 0.0, 0.1, 1.0)


def test_integration_by_parts_agrees_with_direct_quadrature(kernels, reference_system, reference_transport):
    exact = dyson1_exact(kernels, reference_transport, reference_system, 0.5)
    by_parts = dyson1_by_parts(kernels, reference_transport, reference_system, 0.5)
    assert exact > 0
    assert by_parts == pytest.approx(exact, rel=1e-5)


def test_dyson1_is_independent_of_thread_count(kernels, reference_system, reference_transport):
    serial = dyson1_exact(kernels, reference_transport, reference_system, 1.0, threads=1)
    parallel = dyson1_exact(kernels, reference_transport, reference_system, 1.0, threads=3)
    assert serial == parallel


def test_dyson1_panel_cap(kernels, reference_system, reference_transport):
    with pytest.raises(QuadratureError):
        dyson1_exact(kernels, reference_transport, reference_system, 1.0, max_panels=4)


def test_oscillation_width_respects_both_limits(reference_system):
    assert oscillation_width(reference_system, 0.1) == pytest.approx(0.05)
    fast = make_system(e21="40")
    assert oscillation_width(fast, 0.1) == pytest.approx(8 * 2 * math.pi * 0.1 / (10 * 40))


def test_third_order_term_is_smaller_than_first(kernels, reference_system, reference_transport):
    p1 = dyson1_exact(kernels, reference_transport, reference_system, 0.5)
    omega3 = dyson3_magnitude(kernels, reference_transport, reference_system, 0.5)
    assert 0.0 < omega3 < math.sqrt(p1)


def test_third_order_node_budget(kernels, reference_system, reference_transport):
    with pytest.raises(NodeBudgetError):
        dyson3_magnitude(kernels, reference_transport, reference_system, 0.5, node_budget=64)


def test_third_order_bound_dominates_phased_estimate(kernels, reference_system, reference_transport):
    bound = dyson3_magnitude(kernels, reference_transport, reference_system, 0.5)
    phased = dyson3_phased(kernels, reference_transport, reference_system, 0.5)
    assert 0.0 < phased <= bound * (1.0 + 1e-9)


def test_third_order_bound_is_stable_under_half_budget(kernels, reference_system, reference_transport):
    full = dyson3_magnitude(kernels, reference_transport, reference_system, 0.5)
    half = dyson3_magnitude(kernels, reference_transport, reference_system, 0.5, node_budget=100_000)
    assert half == pytest.approx(full, rel=0.1)


def test_transition_report_free_route_skips_kernels(reference_system, reference_transport, reservoir_m2):
    report = transition_report(reference_transport, reservoir_m2, reference_system, 0.1, 0.1, 0.5, routes=("free",))
    assert report.p_free == pytest.approx(0.01 * q12_diagonal(reference_transport, 0.5))
    assert report.p_correction == 0.0
    assert report.p_dyson1 is None and report.residual is None and report.omega3_norm is None
    assert report.regime == "balanced"
    assert report.terms == []


def test_transition_report_dyson_routes(kernels, reference_system, reference_transport, reservoir_m2):
    report = transition_report(
        reference_transport, reservoir_m2, reference_system, 0.1, 0.1, 0.5,
        routes=("free", "leading", "dyson1", "dyson3"), kernels=kernels,
    )
    assert report.residual == pytest.approx(theorem_residual(report.p_dyson1, report.p_free, report.p_correction))
    assert [term.order for term in report.terms] == [1, 3]
    assert report.error_exponents == (1.0, pytest.approx(0.2))
    row = report.to_dict()
    assert row["p_dyson1"] == report.p_dyson1
    assert row["omega3"] == report.omega3_norm
    assert row["m"] == 2.0 and math.isinf(row["beta"])


def test_transition_report_forwards_node_budget(kernels, reference_system, reference_transport, reservoir_m2):
    with pytest.raises(NodeBudgetError):
        transition_report(
            reference_transport, reservoir_m2, reference_system, 0.1, 0.1, 0.5,
            routes=("dyson3",), kernels=kernels, dyson_options={"dyson3_node_budget": 64},
        )


@pytest.mark.parametrize(
    "eps, lam, m, expected",
    [
        (0.01, 0.01, 2.0, "negligible-coupling"),
        (0.01, 0.1, 2.0, "balanced"),
        (0.01, 0.31, 2.0, "reservoir-assisted"),
        (0.01, 0.5, 2.0, "outside-theorem"),
        (0.01, 0.31, 0.2, "outside-theorem"),
    ],
)
def test_classify_regime(eps, lam, m, expected):
    assert classify_regime(eps, lam, m) == expected


def test_classify_regime_uses_thresholds():
    strict = RegimeThresholds(negligible_ratio=0.01, balanced_ratio=0.5, window_ratio=2.0)
    assert classify_regime(0.01, 0.01, 2.0, strict) == "balanced"
    assert classify_regime(0.01, 0.5, 2.0, strict) == "reservoir-assisted"


@pytest.mark.parametrize("eps, lam", [(1.0, 0.1), (0.0, 0.1), (0.1, -0.1)])
def test_classify_regime_rejects_out_of_range(eps, lam):
    with pytest.raises(ValueError):
        classify_regime(eps, lam, 2.0)


def test_error_exponents():
    assert error_exponents(2.0) == (1.0, pytest.approx(0.2))
    assert error_exponents(0.5) == (0.5, pytest.approx(0.4))
    with pytest.raises(ValueError):
        error_exponents(0.0)


@pytest.mark.parametrize("order, value", [(2, 0.1), (0, 0.1), (1, -0.1)])
def test_dyson_term_validation(order, value):
    with pytest.raises(ValueError):
        DysonTerm(order, value)
