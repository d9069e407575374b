"""Bound-constrained simplex minimizer and the staged parameter-extraction
pipeline (cavity -> emitter -> saturation -> detector)."""

import dataclasses

import numpy as np
import pytest

from qdsps.fitting import (
    FitProblem,
    QD_STAGE_PARAMS,
    fit_cavity_stage,
    fit_detector_response,
    fit_qd_stage,
    fit_saturation,
    minimize,
)
from qdsps.observables import (
    DetectorResponse,
    SaturationModel,
    count_rate_model,
    empty_cavity_spectrum,
    g2_power_curve,
    transmission_spectrum,
)
from qdsps.qed import HilbertSpace, SystemParams


# ---------------------------------------------------------------------------
# core minimizer


def test_quadratic_bowl():
    target = np.array([1.5, -2.0, 0.3])
    problem = FitProblem(lambda x: x - target, x0=np.zeros(3))
    res = minimize(problem)
    assert res.converged
    assert np.allclose(res.x, target, atol=1e-6)
    assert res.residual_norm < 1e-6


def test_rosenbrock_valley():
    def residual(x):
        return np.array([10.0 * (x[1] - x[0] ** 2), 1.0 - x[0]])

    res = minimize(FitProblem(residual, x0=np.array([-1.2, 1.0])))
    assert res.converged
    assert np.allclose(res.x, [1.0, 1.0], atol=1e-4)


def test_restart_from_solution_is_fixed_point():
    target = np.array([0.7, 0.1])
    problem = FitProblem(lambda x: x - target, x0=np.array([5.0, -3.0]))
    first = minimize(problem)
    second = minimize(dataclasses.replace(problem, x0=first.x))
    assert np.allclose(second.x, first.x, atol=1e-10)


def test_bounds_are_respected():
    # unconstrained optimum at 2.0 lies outside the box
    problem = FitProblem(
        lambda x: np.array([x[0] - 2.0, 0.01 * x[1]]),
        x0=np.array([0.5, 0.0]),
        bounds=[(0.0, 1.0), (-1.0, 1.0)],
    )
    res = minimize(problem)
    assert 0.0 <= res.x[0] <= 1.0
    assert res.x[0] == pytest.approx(1.0, abs=1e-6)


def test_iteration_budget_exhaustion_flags_not_converged():
    def residual(x):
        return np.array([10.0 * (x[1] - x[0] ** 2), 1.0 - x[0]])

    res = minimize(
        FitProblem(residual, x0=np.array([-1.2, 1.0]), max_iter=5)
    )
    assert not res.converged
    assert np.isfinite(res.residual_norm)


def test_never_worse_than_start():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(8, 3))
    b = rng.normal(size=8)

    def residual(x):
        return a @ x - b

    x0 = rng.normal(size=3)
    res = minimize(FitProblem(residual, x0=x0, max_iter=3))
    assert res.residual_norm <= np.linalg.norm(residual(x0)) + 1e-12


def test_covariance_needs_excess_data():
    # two residuals, two parameters: no degrees of freedom left
    res = minimize(FitProblem(lambda x: x - np.array([1.0, 2.0]), np.zeros(2)))
    assert res.covariance is None
    assert np.all(np.isnan(res.sigma))


def test_covariance_matches_linear_theory():
    rng = np.random.default_rng(1)
    t = np.linspace(0, 1, 40)
    noise = 0.05
    y = 2.0 * t + 1.0 + rng.normal(0, noise, t.size)

    def residual(x):
        return x[0] * t + x[1] - y

    res = minimize(FitProblem(residual, x0=np.array([0.0, 0.0])))
    # closed form: cov = sigma^2 (X^T X)^{-1}
    design = np.column_stack([t, np.ones_like(t)])
    ssr = res.residual_norm ** 2
    expected = ssr / (t.size - 2) * np.linalg.inv(design.T @ design)
    assert np.allclose(res.covariance, expected, rtol=1e-3)


def test_problem_validation():
    with pytest.raises(ValueError):
        FitProblem(lambda x: x, x0=np.zeros(2), bounds=[(0, 1)])
    with pytest.raises(ValueError):
        FitProblem(lambda x: x, x0=np.zeros(1), bounds=[(1.0, 0.0)])
    with pytest.raises(ValueError):
        FitProblem(lambda x: x, x0=np.array([5.0]), bounds=[(0.0, 1.0)])


# ---------------------------------------------------------------------------
# stage 1: empty-cavity lineshape


def _cavity_data(params, noise=0.0, seed=0, n=61):
    freq = np.linspace(-30.0, 45.0, n)
    spec = empty_cavity_spectrum(params, None, freq)
    y = spec.transmission.copy()
    if noise:
        y *= 1 + np.random.default_rng(seed).normal(0, noise, y.size)
    return freq, y


def test_cavity_stage_noiseless_recovery():
    # diagonal drive exposes both cavity modes in a single scan
    truth = dataclasses.replace(
        SystemParams.reference_device(), drive_theta_deg=45.0
    )
    freq, y = _cavity_data(truth)
    guess = dataclasses.replace(truth, f_cav_h=0.0, f_cav_v=15.0, kappa=50.0)
    res = fit_cavity_stage(freq, y, guess)
    assert res.fit.converged
    assert res.f_cav_h == pytest.approx(truth.f_cav_h, abs=1e-4)
    assert res.cavity_splitting == pytest.approx(18.0, abs=1e-4)
    assert res.kappa == pytest.approx(truth.kappa, rel=1e-5)


def test_cavity_stage_with_one_percent_noise():
    truth = dataclasses.replace(
        SystemParams.reference_device(), drive_theta_deg=45.0
    )
    freq, y = _cavity_data(truth, noise=0.01, seed=7, n=201)
    guess = dataclasses.replace(truth, f_cav_h=1.0, f_cav_v=18.0, kappa=60.0)
    res = fit_cavity_stage(freq, y, guess)
    assert res.kappa == pytest.approx(truth.kappa, rel=0.02)
    assert res.sigma["kappa"] > 0


# ---------------------------------------------------------------------------
# stage 2: emitter parameters on top of the fixed cavity


def _qd_data(params, space, noise=0.0, seed=0, n=41):
    freq = np.linspace(-8.0, 4.0, n)
    spec = transmission_spectrum(params, space, None, freq)
    y = spec.transmission.copy()
    if noise:
        y *= 1 + np.random.default_rng(seed).normal(0, noise, y.size)
    return freq, y


def test_qd_stage_recovers_coupling_and_axis_angle():
    truth = SystemParams.reference_device()
    space = HilbertSpace(2)
    freq, y = _qd_data(truth, space)
    start = dataclasses.replace(truth, g=10.0, phi_deg=10.0)
    res = fit_qd_stage(
        freq, y, start, space=space, vary=("g", "phi_deg"), max_iter=80
    )
    assert res.params.g == pytest.approx(truth.g, rel=0.02)
    assert res.params.phi_deg == pytest.approx(truth.phi_deg, abs=1.0)


def test_qd_stage_drives_coupling_to_zero_for_bare_cavity():
    truth = dataclasses.replace(SystemParams.reference_device(), g=0.0)
    space = HilbertSpace(2)
    freq, y = _qd_data(truth, space)
    start = dataclasses.replace(truth, g=3.0)
    res = fit_qd_stage(
        freq,
        y,
        start,
        space=space,
        vary=("g",),
        bounds={"g": (0.0, 5.0)},
        max_iter=80,
    )
    assert res.params.g == pytest.approx(0.0, abs=0.05)


def test_qd_stage_rejects_unknown_parameter():
    truth = SystemParams.reference_device()
    freq, y = _qd_data(truth, HilbertSpace(2), n=11)
    with pytest.raises(ValueError):
        fit_qd_stage(freq, y, truth, vary=("kappa",))
    assert set(QD_STAGE_PARAMS) == {
        "g", "gamma_par", "gamma_star", "qd_splitting", "phi_deg"
    }


# ---------------------------------------------------------------------------
# stage 3: power dependence


def test_saturation_joint_fit_recovers_knee():
    truth = SaturationModel(r_max=4.3e6, p_sat=1.0, c_leak=2.0e4)
    g2_single = 0.05
    p = np.geomspace(0.05, 20.0, 15)
    rates = count_rate_model(p, truth)
    g2 = g2_power_curve(truth, g2_single, None, p)
    res = fit_saturation(p, rates, g2)
    assert res.fit.converged
    assert res.model.p_sat == pytest.approx(truth.p_sat, rel=0.10)
    assert res.model.r_max == pytest.approx(truth.r_max, rel=0.05)
    assert res.g2_single == pytest.approx(g2_single, abs=0.02)


def test_saturation_without_leak_hits_floor():
    truth = SaturationModel(r_max=2.0e6, p_sat=0.8, c_leak=0.0)
    p = np.geomspace(0.05, 10.0, 12)
    res = fit_saturation(p, count_rate_model(p, truth))
    assert res.model.c_leak == pytest.approx(0.0, abs=truth.r_max * 1e-4)


def test_saturation_power_dependent_g2_implies_leak():
    truth = SaturationModel(r_max=3.0e6, p_sat=1.2, c_leak=1.5e5)
    p = np.geomspace(0.1, 15.0, 14)
    g2 = g2_power_curve(truth, 0.02, None, p)
    assert np.all(np.diff(g2) > 0)  # leak fraction grows with power
    res = fit_saturation(p, count_rate_model(p, truth), g2)
    assert res.model.c_leak > 1e4


# ---------------------------------------------------------------------------
# stage 4: detector response


def test_detector_round_trip_with_noise():
    truth = DetectorResponse(weight=0.7, tau1=0.3, tau2=1.0)
    tau = np.linspace(-6, 6, 241)
    kernel = truth.kernel(tau)
    rng = np.random.default_rng(21)
    counts = kernel * (1 + rng.normal(0, 0.03, tau.size)) * 1e4
    res = fit_detector_response(tau, counts)
    assert res.fit.converged
    assert not res.degenerate
    assert res.response.weight == pytest.approx(0.7, abs=0.1)
    assert res.response.tau1 == pytest.approx(0.3, rel=0.15)
    assert res.response.tau2 == pytest.approx(1.0, rel=0.15)


def test_detector_canonical_ordering():
    truth = DetectorResponse(weight=0.25, tau1=0.9, tau2=0.2)
    tau = np.linspace(-5, 5, 201)
    res = fit_detector_response(tau, truth.kernel(tau) * 5e3)
    assert res.response.tau1 <= res.response.tau2


def test_detector_single_exponential_flags_degenerate():
    tau = np.linspace(-5, 5, 201)
    counts = np.exp(-np.abs(tau) / 0.4) * 1e4
    res = fit_detector_response(tau, counts)
    assert res.degenerate


def test_fitted_kernel_keeps_unit_area():
    truth = DetectorResponse(weight=0.6, tau1=0.25, tau2=0.8)
    tau = np.linspace(-8, 8, 401)
    res = fit_detector_response(tau, truth.kernel(tau) * 2e3)
    grid = np.linspace(-12, 12, 4801)
    area = np.trapezoid(res.response.kernel(grid), grid)
    assert area == pytest.approx(1.0, abs=1e-3)
