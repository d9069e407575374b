"""Spectra, correlation functions, detector convolution, and the
rate/correlation mixture model.  Closed-form oracles: the two-mode
Lorentzian transmission of the uncoupled cavity, coherent-state
factorization of g2, and the Poisson statistics of merged click streams."""

import math

import numpy as np
import pytest

from qdsps import HilbertSpace, PolarizationProjector, SystemParams
from qdsps.observables import (
    CorrelationCurve,
    DetectorResponse,
    SaturationModel,
    Spectrum,
    count_rate_model,
    detector_convolve,
    empty_cavity_spectrum,
    fallback_detector_response,
    g2_cw,
    g2_mixture,
    g2_power_curve,
    spectrum_vs_voltage,
    transmission_spectrum,
)
from qdsps.device import StarkMap

REF = SystemParams.reference_device()


# ---------------------------------------------------------------------------
# empty-cavity spectrum (analytic)


def test_h_projected_peak_is_normalized_at_cavity_frequency():
    f = np.array([REF.f_cav_h])
    spec = empty_cavity_spectrum(REF, PolarizationProjector.h(), f)
    assert spec.transmission[0] == pytest.approx(1.0, abs=1e-12)


def test_lorentzian_half_width_is_kappa_over_4pi():
    half = REF.kappa / (4 * math.pi)
    f = np.array([REF.f_cav_h - half, REF.f_cav_h + half])
    spec = empty_cavity_spectrum(REF, PolarizationProjector.h(), f)
    assert np.allclose(spec.transmission, 0.5, atol=1e-12)


def test_v_projected_spectrum_peaks_at_v_cavity():
    params = SystemParams.reference_device(drive_theta_deg=45.0)
    f = np.linspace(10, 30, 201)
    spec = empty_cavity_spectrum(params, PolarizationProjector.v(), f)
    assert f[np.argmax(spec.transmission)] == pytest.approx(20.0, abs=0.1)


def test_unpolarized_empty_cavity_is_sum_of_modes():
    params = SystemParams.reference_device(drive_theta_deg=45.0)
    f = np.linspace(-20, 40, 61)
    total = empty_cavity_spectrum(params, None, f).transmission
    th = empty_cavity_spectrum(params, PolarizationProjector.h(), f).transmission
    tv = empty_cavity_spectrum(params, PolarizationProjector.v(), f).transmission
    assert np.allclose(total, th + tv, atol=1e-12)


# ---------------------------------------------------------------------------
# full transmission spectrum


def test_uncoupled_transmission_matches_analytic_lorentzian():
    # weak drive keeps the two-level Fock truncation exact to < 1e-6
    params = SystemParams.reference_device(g=0.0, drive_amplitude=0.02)
    space = HilbertSpace(2)
    f = np.linspace(-15, 20, 31)
    numeric = transmission_spectrum(
        params, space, PolarizationProjector.h(), f
    ).transmission
    analytic = empty_cavity_spectrum(params, PolarizationProjector.h(), f).transmission
    assert np.max(np.abs(numeric - analytic) / analytic.max()) < 1e-6


def test_reference_spectrum_shows_dips_at_both_transitions():
    space = HilbertSpace(2)
    f = np.linspace(-6.0, 2.0, 81)
    spec = transmission_spectrum(REF, space, None, f)
    t = spec.transmission
    interior = (t[1:-1] < t[:-2]) & (t[1:-1] < t[2:])
    dips = f[1:-1][interior]
    assert any(abs(d - REF.f_qd_x) < 0.3 for d in dips)
    assert any(abs(d - REF.f_qd_y) < 0.3 for d in dips)


def test_crossed_polarizer_shows_scattering_peak_near_y():
    space = HilbertSpace(2)
    f = np.linspace(-2.0, 2.0, 81)
    spec = transmission_spectrum(REF, space, PolarizationProjector.v(), f)
    t = spec.transmission
    interior = (t[1:-1] > t[:-2]) & (t[1:-1] > t[2:])
    peaks = f[1:-1][interior]
    assert any(abs(pk - REF.f_qd_y) < 0.55 for pk in peaks)


def test_spectrum_metadata_and_validation():
    f = np.linspace(-5, 5, 5)
    spec = Spectrum(freq_ghz=f, transmission=np.ones(5))
    assert spec.transmission.shape == (5,)
    with pytest.raises(ValueError):
        Spectrum(freq_ghz=f, transmission=-np.ones(5))
    with pytest.raises(ValueError):
        Spectrum(freq_ghz=f, transmission=np.ones(4))


def test_voltage_map_slices_match_direct_spectra():
    space = HilbertSpace(2)
    f = np.linspace(-8, 3, 21)
    voltages = np.array([0.915, 0.935, 0.955])
    sx = StarkMap(v_ref=0.935, f_ref=REF.f_qd_x, slope=25.0)
    sy = StarkMap(v_ref=0.935, f_ref=REF.f_qd_y, slope=25.0)
    themap = spectrum_vs_voltage(REF, space, None, f, voltages, sx, sy)
    assert themap.transmission.shape == (3, 21)
    for i, v in enumerate(voltages):
        params = SystemParams.reference_device(
            f_qd_x=sx.frequency(v), f_qd_y=sy.frequency(v)
        )
        direct = transmission_spectrum(params, space, None, f).transmission
        assert np.allclose(themap.transmission[i], direct, atol=1e-12)


# ---------------------------------------------------------------------------
# g2


def test_coherent_drive_gives_flat_g2():
    params = SystemParams.reference_device(g=0.0, drive_amplitude=0.01)
    space = HilbertSpace(3)
    tau = np.linspace(0.0, 10.0, 26)
    curve = g2_cw(params, space, PolarizationProjector.h(), tau)
    assert np.max(np.abs(curve.values - 1.0)) < 1e-6


def test_crossed_polarizer_single_photons_antibunch():
    space = HilbertSpace(3)
    tau = np.linspace(0.0, 24.0, 9)
    curve = g2_cw(REF, space, PolarizationProjector.v(), tau)
    assert curve.values[0] < 0.1
    assert abs(curve.values[-1] - 1.0) < 1e-4


def test_g2_requires_nonzero_flux():
    params = SystemParams.reference_device(drive_amplitude=0.0)
    space = HilbertSpace(2)
    with pytest.raises(ValueError):
        g2_cw(params, space, PolarizationProjector.h(), np.array([0.0, 1.0]))


def test_correlation_curve_validation():
    with pytest.raises(ValueError):
        CorrelationCurve(tau_ns=np.array([0.5, 1.0]), values=np.ones(2))
    with pytest.raises(ValueError):
        CorrelationCurve(tau_ns=np.array([0.0, 1.0, 0.5]), values=np.ones(3))


# ---------------------------------------------------------------------------
# detector response and convolution


def test_detector_kernel_is_normalized_and_symmetric():
    resp = DetectorResponse(weight=0.69, tau1=0.16, tau2=0.55)
    t = np.linspace(-40, 40, 160001)
    kern = resp.kernel(t)
    assert np.trapezoid(kern, t) == pytest.approx(1.0, abs=1e-6)
    assert np.allclose(kern, kern[::-1])


def test_detector_response_validation():
    with pytest.raises(ValueError):
        DetectorResponse(weight=1.5, tau1=0.2, tau2=0.5)
    with pytest.raises(ValueError):
        DetectorResponse(weight=0.5, tau1=-0.2, tau2=0.5)
    single = DetectorResponse.single_exponential(0.35)
    assert single.weight == 1.0 and single.tau1 == 0.35


def test_fallback_response_is_single_exponential():
    resp = fallback_detector_response()
    assert resp.weight == 1.0
    assert resp.tau1 == pytest.approx(0.35)


def test_convolution_is_near_identity_for_fast_detector():
    tau = np.linspace(0.0, 10.0, 2001)
    curve = CorrelationCurve(tau, 1.0 - np.exp(-tau / 2.0))
    resp = DetectorResponse.single_exponential(0.02)
    out = detector_convolve(curve, resp)
    assert np.max(np.abs(out.values - curve.values)) < 2e-2
    assert abs(out.values[0] - curve.values[0]) < 2e-2


def test_convolution_fills_antibunching_dip():
    tau = np.linspace(0.0, 10.0, 2001)
    curve = CorrelationCurve(tau, 1.0 - np.exp(-tau / 0.05))
    resp = DetectorResponse(weight=0.69, tau1=0.16, tau2=0.55)
    out = detector_convolve(curve, resp)
    assert out.values[0] > 0.5
    assert abs(out.values[-1] - 1.0) < 1e-3


def test_convolution_preserves_flat_curve_exactly():
    tau = np.linspace(0.0, 5.0, 501)
    curve = CorrelationCurve(tau, np.ones(tau.size))
    out = detector_convolve(curve, DetectorResponse(0.5, 0.2, 0.8))
    assert np.allclose(out.values, 1.0, atol=1e-12)


def test_convolution_never_lowers_a_global_minimum_at_zero():
    rng = np.random.default_rng(8)
    tau = np.linspace(0.0, 12.0, 1201)
    for _ in range(20):
        depth = rng.uniform(0.3, 1.0)
        width = rng.uniform(0.1, 1.5)
        curve = CorrelationCurve(tau, 1.0 - depth * np.exp(-tau / width))
        resp = DetectorResponse(
            weight=rng.uniform(0.1, 0.9),
            tau1=rng.uniform(0.05, 0.3),
            tau2=rng.uniform(0.3, 1.0),
        )
        out = detector_convolve(curve, resp)
        assert out.values[0] >= curve.values[0] - 1e-12


def test_convolution_rejects_coarse_grids():
    tau = np.linspace(0.0, 10.0, 21)
    curve = CorrelationCurve(tau, np.ones(21))
    with pytest.raises(ValueError):
        detector_convolve(curve, DetectorResponse.single_exponential(0.1))


# ---------------------------------------------------------------------------
# saturation / mixture model


def test_count_rate_zero_at_zero_power():
    model = SaturationModel(r_max=2e6, p_sat=1.0, c_leak=3e4)
    assert count_rate_model(np.array([0.0]), model)[0] == pytest.approx(0.0)


def test_count_rate_half_maximum_at_knee():
    model = SaturationModel(r_max=2e6, p_sat=1.0, c_leak=0.0)
    assert count_rate_model(np.array([1.0]), model)[0] == pytest.approx(1e6)


def test_saturation_curve_knee_location():
    model = SaturationModel(r_max=2e6, p_sat=1.0, c_leak=0.0)
    p = np.geomspace(0.01, 100, 301)
    rate = count_rate_model(p, model)
    # second derivative of rate vs log-power peaks near the knee
    knee = p[np.argmax(np.gradient(np.gradient(rate, np.log(p)), np.log(p)) * -1)]
    assert 0.2 < knee < 5.0


def test_mixture_limits():
    assert g2_mixture(0.0, 1.0, 0.0) == pytest.approx(1.0)
    assert g2_mixture(1.0, 0.0, 0.2) == pytest.approx(0.2)
    assert g2_mixture(1.0, 1.0, 0.0) == pytest.approx(0.75)


def test_mixture_matches_click_stream_simulation():
    # merged streams: antibunched source (at most one photon per bin) plus
    # Poisson leak at equal mean rate; zero-delay g2 counts same-bin pairs
    rng = np.random.default_rng(123)
    n_bins = 4_000_000
    mean = 0.05
    singles = rng.random(n_bins) < mean
    coherent = rng.poisson(mean, n_bins)
    n = singles.astype(np.int64) + coherent
    pairs = np.sum(n * (n - 1) / 2)
    g2_est = pairs / (n_bins * (2 * mean) ** 2 / 2)
    assert g2_est == pytest.approx(g2_mixture(1.0, 1.0, 0.0), abs=0.02)


def test_power_curve_flat_without_leak():
    model = SaturationModel(r_max=1e6, p_sat=1.0, c_leak=0.0)
    p = np.geomspace(0.1, 10, 7)
    curve = g2_power_curve(model, 0.05, None, p)
    assert np.allclose(curve, 0.05, atol=1e-12)


def test_power_curve_increases_with_leak():
    model = SaturationModel(r_max=1e6, p_sat=1.0, c_leak=1e5)
    p = np.geomspace(0.1, 50, 9)
    curve = g2_power_curve(model, 0.05, None, p)
    assert np.all(np.diff(curve) > 0)
    assert curve[-1] < 1.0


def test_power_curve_approaches_one_when_leak_dominates():
    model = SaturationModel(r_max=1e4, p_sat=0.5, c_leak=1e6)
    curve = g2_power_curve(model, 0.0, None, np.array([1e4]))
    assert curve[0] == pytest.approx(1.0, abs=1e-3)


def test_power_curve_accepts_correlation_curve_input():
    tau = np.linspace(0.0, 10.0, 1001)
    raw = CorrelationCurve(tau, 1.0 - np.exp(-tau / 0.3))
    model = SaturationModel(r_max=1e6, p_sat=1.0, c_leak=0.0)
    resp = DetectorResponse(0.69, 0.16, 0.55)
    flat = g2_power_curve(model, raw, resp, np.array([0.5, 1.0]))
    # convolved zero-delay value replaces the raw zero
    assert flat[0] == flat[1]
    assert 0.0 < flat[0] < 1.0
