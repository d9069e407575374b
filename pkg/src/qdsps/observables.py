"""Polarization-resolved spectra and photon-correlation observables.

Spectra are steady-state detected photon numbers normalized so that the
on-resonance H-detected peak of the empty cavity equals 1; the input/output
coupling constants of the real device therefore never appear.  Correlation
curves are one-sided (tau >= 0) and understood to be symmetric in tau.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .qed import (
    TWO_PI,
    DensityMatrix,
    HilbertSpace,
    Liouvillian,
    PolarizationProjector,
    SteadyStateError,
    SystemParams,
    build_hamiltonian,
    build_liouvillian,
    hamiltonian_superoperator,
    propagate,
    steady_state,
)

__all__ = [
    "Spectrum",
    "CorrelationCurve",
    "DetectorResponse",
    "SaturationModel",
    "transmission_spectrum",
    "empty_cavity_spectrum",
    "spectrum_vs_voltage",
    "g2_cw",
    "detector_convolve",
    "count_rate_model",
    "g2_mixture",
    "g2_power_curve",
    "fallback_detector_response",
]


# ---------------------------------------------------------------------------
# containers


@dataclass
class Spectrum:
    """Normalized transmission vs laser frequency (GHz).

    For voltage maps ``voltage`` is the scan axis and ``transmission`` has
    shape (n_voltage, n_freq); otherwise ``voltage`` is None and
    ``transmission`` is 1-d.
    """

    freq_ghz: np.ndarray
    transmission: np.ndarray
    projector: PolarizationProjector | None = None
    voltage: np.ndarray | None = None

    def __post_init__(self):
        self.freq_ghz = np.asarray(self.freq_ghz, dtype=float)
        self.transmission = np.asarray(self.transmission, dtype=float)
        if self.freq_ghz.ndim != 1:
            raise ValueError("freq_ghz must be 1-d")
        if self.voltage is None:
            if self.transmission.shape != self.freq_ghz.shape:
                raise ValueError("transmission must match the frequency grid")
        else:
            self.voltage = np.asarray(self.voltage, dtype=float)
            expected = (self.voltage.size, self.freq_ghz.size)
            if self.transmission.shape != expected:
                raise ValueError(
                    f"2-d transmission must have shape {expected}, "
                    f"got {self.transmission.shape}"
                )
        if np.any(self.transmission < 0):
            raise ValueError("transmission values must be >= 0")


@dataclass
class CorrelationCurve:
    """One-sided second-order correlation g2(tau), tau in ns (tau >= 0).

    The physical curve is symmetric, g2(-tau) = g2(tau); operations that
    need the two-sided function mirror this one.
    """

    tau_ns: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.tau_ns = np.asarray(self.tau_ns, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.tau_ns.ndim != 1 or self.tau_ns.shape != self.values.shape:
            raise ValueError("tau_ns and values must be matching 1-d arrays")
        if self.tau_ns.size and self.tau_ns[0] != 0.0:
            raise ValueError("correlation curves start at tau = 0")
        if np.any(np.diff(self.tau_ns) <= 0):
            raise ValueError("tau grid must be strictly increasing")


@dataclass(frozen=True)
class DetectorResponse:
    """Timing-jitter kernel: w * Exp(tau1) + (1-w) * Exp(tau2).

    Each component is a two-sided normalized exponential
    exp(-|t|/tau_i)/(2 tau_i); the kernel therefore integrates to exactly
    1 analytically for any 0 <= w <= 1.
    """

    weight: float
    tau1: float
    tau2: float

    def __post_init__(self):
        if not 0.0 <= self.weight <= 1.0:
            raise ValueError(f"weight must be in [0, 1], got {self.weight}")
        if self.tau1 <= 0 or self.tau2 <= 0:
            raise ValueError("tau1 and tau2 must be > 0")

    def kernel(self, t: np.ndarray) -> np.ndarray:
        t = np.abs(np.asarray(t, dtype=float))
        return (
            self.weight * np.exp(-t / self.tau1) / (2.0 * self.tau1)
            + (1.0 - self.weight) * np.exp(-t / self.tau2) / (2.0 * self.tau2)
        )

    @classmethod
    def single_exponential(cls, tau: float) -> "DetectorResponse":
        return cls(weight=1.0, tau1=tau, tau2=tau)


def fallback_detector_response() -> DetectorResponse:
    """Single-exponential stand-in (tau = 0.35 ns), typical for the class of
    silicon avalanche single-photon counters used with such sources.  This
    is NOT a measured calibration — fit the real response when available."""
    return DetectorResponse.single_exponential(0.35)


@dataclass(frozen=True)
class SaturationModel:
    """Detected count rate vs excitation power.

    rate(P) = r_max * (P/p_sat) / (1 + P/p_sat) + c_leak * P

    ``r_max`` saturated emitter rate (counts/s), ``p_sat`` saturation power
    (nW), ``c_leak`` linear leak slope (counts/s per nW).
    """

    r_max: float
    p_sat: float
    c_leak: float = 0.0

    def __post_init__(self):
        if self.r_max < 0 or self.c_leak < 0:
            raise ValueError("r_max and c_leak must be >= 0")
        if self.p_sat <= 0:
            raise ValueError("p_sat must be > 0")

    def emitter_rate(self, power):
        power = np.asarray(power, dtype=float)
        x = power / self.p_sat
        return self.r_max * x / (1.0 + x)

    def leak_rate(self, power):
        return self.c_leak * np.asarray(power, dtype=float)


# ---------------------------------------------------------------------------
# spectra


def _drive_jones(params: SystemParams) -> np.ndarray:
    th = math.radians(params.drive_theta_deg)
    de = math.radians(params.drive_delta_deg)
    return np.array([math.cos(th), np.exp(1j * de) * math.sin(th)])


def _normalization(params: SystemParams) -> float:
    if params.drive_amplitude <= 0:
        raise ValueError("spectra need a nonzero drive amplitude")
    return (params.kappa / 2.0) ** 2 / params.drive_amplitude ** 2


def empty_cavity_spectrum(
    params: SystemParams,
    projector: PolarizationProjector | None,
    f_grid: Sequence[float],
) -> Spectrum:
    """Closed-form spectrum of the bare bimodal cavity (no emitter).

    Analytic oracle for :func:`transmission_spectrum` with g = 0: each mode
    responds as a Lorentzian amplitude alpha_m = -i E j_m / (i Delta_m +
    kappa/2); a polarization projector interferes the two amplitudes,
    ``projector=None`` sums the mode intensities.
    """
    f = np.asarray(f_grid, dtype=float)
    j_in = _drive_jones(params)
    e_amp = params.drive_amplitude

    alpha = np.empty((2, f.size), dtype=complex)
    for m, f_mode in enumerate((params.f_cav_h, params.f_cav_v)):
        delta = TWO_PI * (f_mode - f)
        alpha[m] = -1j * e_amp * j_in[m] / (1j * delta + params.kappa / 2.0)

    if projector is None:
        values = np.abs(alpha[0]) ** 2 + np.abs(alpha[1]) ** 2
    else:
        jh, jv = projector.jones
        values = np.abs(jh * alpha[0] + jv * alpha[1]) ** 2

    return Spectrum(f, values * _normalization(params), projector)


def _scan_pieces(params: SystemParams, space: HilbertSpace):
    """Base Liouvillian at f_laser = 0 plus the laser-shift superoperator.

    L(f_laser) = L0 + 2*pi*f_laser * i[N, .] with N the total excitation
    number, since shifting the rotating frame subtracts f_laser from every
    mode and transition frequency.
    """
    base = params.with_laser(0.0)
    h0 = build_hamiltonian(base, space)
    l0 = build_liouvillian(base, space, h0).matrix
    n_op = space.excitation_number
    eye = np.eye(space.dim, dtype=complex)
    shift = 1j * (np.kron(n_op, eye) - np.kron(eye, n_op.T))
    return l0, shift


def _steady_batch(
    l0: np.ndarray,
    shift: np.ndarray,
    f_values: np.ndarray,
    dim: int,
    chunk: int = 16,
) -> np.ndarray:
    """Steady states for many laser frequencies; returns (n, dim, dim).

    Solves the trace-constrained linear system in LAPACK batches and
    verifies the residual of every grid point against the true generator.
    """
    n2 = dim * dim
    weight = np.mean(np.abs(np.diag(l0)))
    if weight == 0.0:
        weight = 1.0
    b = np.zeros(n2, dtype=complex)
    b[0] = weight

    out = np.empty((f_values.size, dim, dim), dtype=complex)
    for start in range(0, f_values.size, chunk):
        fs = f_values[start : start + chunk]
        a = l0[None, :, :] + (TWO_PI * fs)[:, None, None] * shift[None, :, :]
        norms = np.linalg.norm(a.reshape(fs.size, -1), axis=1)
        a[:, 0, :] = 0.0
        a[:, 0, :: dim + 1] = weight
        try:
            x = np.linalg.solve(a, np.broadcast_to(b[:, None], (fs.size, n2, 1)))[..., 0]
        except np.linalg.LinAlgError as exc:
            raise SteadyStateError(
                f"steady-state solve failed in scan chunk starting at "
                f"f_laser = {fs[0]:g} GHz"
            ) from exc
        # residual against the unmodified generator, point by point
        resid = x @ l0.T + (TWO_PI * fs)[:, None] * (x @ shift.T)
        resid_norms = np.linalg.norm(resid, axis=1)
        bad = resid_norms > 1e-9 * norms
        if np.any(bad):
            i = int(np.argmax(bad))
            raise SteadyStateError(
                f"steady-state residual {resid_norms[i]:.3e} at "
                f"f_laser = {fs[i]:g} GHz exceeds tolerance"
            )
        rho = x.reshape(fs.size, dim, dim)
        rho = 0.5 * (rho + np.conj(np.swapaxes(rho, 1, 2)))
        tr = np.einsum("nii->n", rho).real
        out[start : start + fs.size] = rho / tr[:, None, None]
    return out


def _detection_number_operator(
    space: HilbertSpace, projector: PolarizationProjector | None
) -> np.ndarray:
    if projector is None:
        return space.n_h + space.n_v
    a_det = projector.detection_operator(space)
    return a_det.conj().T @ a_det


def transmission_spectrum(
    params: SystemParams,
    space: HilbertSpace,
    projector: PolarizationProjector | None,
    f_grid: Sequence[float],
) -> Spectrum:
    """Steady-state transmission spectrum from the full master equation.

    The laser frequency is scanned over ``f_grid`` (GHz); the detected
    steady-state photon number is normalized to the analytic empty-cavity
    peak.  Solver failures carry the offending grid point in the message.
    """
    f = np.asarray(f_grid, dtype=float)
    if f.ndim != 1 or f.size == 0:
        raise ValueError("f_grid must be a non-empty 1-d array")

    l0, shift = _scan_pieces(params, space)
    rhos = _steady_batch(l0, shift, f, space.dim)
    n_det = _detection_number_operator(space, projector)
    values = np.einsum("nij,ji->n", rhos, n_det).real
    values = np.where(np.abs(values) < 1e-14, np.maximum(values, 0.0), values)
    if np.any(values < 0):
        raise SteadyStateError("negative detected photon number in scan")
    return Spectrum(f, values * _normalization(params), projector)


def spectrum_vs_voltage(
    params: SystemParams,
    space: HilbertSpace,
    projector: PolarizationProjector | None,
    f_grid: Sequence[float],
    voltages: Sequence[float],
    stark_x,
    stark_y,
) -> Spectrum:
    """2-d transmission map: gate voltage tunes the exciton lines.

    ``stark_x``/``stark_y`` provide ``frequency(voltage)`` (see
    :class:`qdsps.device.StarkMap`); one full frequency scan is run per
    voltage.
    """
    v = np.asarray(voltages, dtype=float)
    rows = []
    for vi in v:
        p = replace(params, f_qd_x=stark_x.frequency(vi), f_qd_y=stark_y.frequency(vi))
        rows.append(transmission_spectrum(p, space, projector, f_grid).transmission)
    return Spectrum(np.asarray(f_grid, dtype=float), np.vstack(rows), projector, voltage=v)


# ---------------------------------------------------------------------------
# correlations


def g2_cw(
    params: SystemParams,
    space: HilbertSpace,
    projector: PolarizationProjector | None,
    tau_grid: Sequence[float],
) -> CorrelationCurve:
    """Second-order correlation of the detected field under cw drive.

    Quantum regression: g2(tau) = Tr[n_det e^{L tau}(a_det rho_ss a_det^dag)]
    / <n_det>^2.  ``tau_grid`` must start at 0; the result is one-sided.
    Raises ValueError when the detected steady-state flux vanishes.
    """
    if projector is None:
        raise ValueError("g2_cw needs a polarization projector (detected mode)")
    h = build_hamiltonian(params, space)
    liou = build_liouvillian(params, space, h)
    rho_ss = steady_state(liou)

    a_det = projector.detection_operator(space)
    n_det = a_det.conj().T @ a_det
    flux = rho_ss.expect(n_det).real
    if flux <= 1e-14:
        raise ValueError(
            "detected steady-state flux is zero; g2 undefined for this projector"
        )

    reduced = a_det @ rho_ss.matrix @ a_det.conj().T
    tr = np.trace(reduced).real
    mats = propagate(liou, reduced / tr, tau_grid)
    values = np.array([np.einsum("ij,ji->", n_det, m).real for m in mats])
    values *= tr / flux ** 2
    return CorrelationCurve(np.asarray(tau_grid, dtype=float), values)


def detector_convolve(
    curve: CorrelationCurve, response: DetectorResponse
) -> CorrelationCurve:
    """Convolve a symmetric correlation curve with the detector kernel.

    The one-sided input is mirrored, padded with its edge value, and
    convolved with the kernel sampled on the same grid and renormalized to
    unit discrete mass (this keeps a flat far-tail baseline exactly flat).
    Requires a uniform tau grid with spacing <= min(tau1, tau2)/4.
    """
    tau = curve.tau_ns
    if tau.size < 3:
        raise ValueError("curve too short to convolve")
    steps = np.diff(tau)
    dt = steps[0]
    if not np.allclose(steps, dt, rtol=1e-8, atol=1e-12):
        raise ValueError("detector_convolve requires a uniform tau grid")
    limit = min(response.tau1, response.tau2) / 4.0
    if dt > limit:
        raise ValueError(
            f"tau grid spacing {dt:g} ns is coarser than min(tau1, tau2)/4 = "
            f"{limit:g} ns; refine the grid"
        )

    # two-sided extension
    full = np.concatenate([curve.values[:0:-1], curve.values])

    half_width = int(math.ceil(30.0 * max(response.tau1, response.tau2) / dt))
    k_tau = np.arange(-half_width, half_width + 1) * dt
    kernel = response.kernel(k_tau)
    kernel = kernel / kernel.sum()

    padded = np.concatenate(
        [np.full(half_width, full[0]), full, np.full(half_width, full[-1])]
    )
    smoothed = np.convolve(padded, kernel, mode="valid")
    one_sided = smoothed[tau.size - 1 :]
    return CorrelationCurve(tau.copy(), one_sided)


# ---------------------------------------------------------------------------
# saturation and mixtures


def count_rate_model(power, model: SaturationModel):
    """Total detected rate: saturating emitter plus linear leak."""
    return model.emitter_rate(power) + model.leak_rate(power)


def g2_mixture(single_rate, coherent_rate, g2_single):
    """g2(0) of an antibunched stream mixed with an independent coherent one.

    (S^2 g2_s + 2 S C + C^2) / (S + C)^2 for rates S (single photons) and C
    (coherent leak).
    """
    s = np.asarray(single_rate, dtype=float)
    c = np.asarray(coherent_rate, dtype=float)
    if np.any(s < 0) or np.any(c < 0):
        raise ValueError("rates must be >= 0")
    total = s + c
    if np.any(total == 0):
        raise ValueError("total rate must be > 0")
    return (s ** 2 * np.asarray(g2_single, dtype=float) + 2 * s * c + c ** 2) / total ** 2


def g2_power_curve(
    model: SaturationModel,
    g2_single,
    response: DetectorResponse | None,
    powers,
) -> np.ndarray:
    """Measured g2(0) vs excitation power for the leaky saturating source.

    ``g2_single`` is either the intrinsic single-photon correlation curve
    (a :class:`CorrelationCurve`, convolved with ``response`` when given)
    or an already detector-limited scalar.  Convolution is linear, so the
    mixture is evaluated from the convolved single-photon zero-delay value.
    """
    if isinstance(g2_single, CorrelationCurve):
        if response is not None:
            g2_single = detector_convolve(g2_single, response)
        g2_zero_single = float(g2_single.values[0])
    else:
        g2_zero_single = float(g2_single)
        if not 0.0 <= g2_zero_single <= 1.0:
            raise ValueError("scalar g2_single must lie in [0, 1]")

    p = np.asarray(powers, dtype=float)
    if np.any(p <= 0):
        raise ValueError("powers must be > 0")
    s = model.emitter_rate(p)
    c = model.leak_rate(p)
    return np.asarray(g2_mixture(s, c, g2_zero_single), dtype=float)
