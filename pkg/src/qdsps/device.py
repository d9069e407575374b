"""Closed-form device figures of merit.

Fiber-to-cavity mode matching, emitter-cavity cooperativity and Purcell
enhancement, the empirical DC-Stark tuning line, and photons-per-pulse
brightness accounting.  Everything here is algebraic; the master-equation
machinery lives in :mod:`qdsps.qed` and :mod:`qdsps.observables`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "GaussianMode",
    "StarkMap",
    "coupling_efficiency",
    "cooperativity",
    "purcell",
    "stark_map",
    "brightness",
]


@dataclass(frozen=True)
class GaussianMode:
    """Fundamental Gaussian mode described by its waist (micrometers)."""

    waist: float

    def __post_init__(self):
        if not self.waist > 0:
            raise ValueError("waist must be > 0")


@dataclass(frozen=True)
class StarkMap:
    """Empirical linear DC-Stark tuning of one transition.

    f(V) = f0 + slope * (V - v0), with f0 in GHz at the reference gate
    voltage v0 and slope in GHz/V.  The tuning is linearized per device;
    the slope is a fit input, not a model prediction.
    """

    v_ref: float
    f_ref: float
    slope: float

    def __post_init__(self):
        for name in ("v_ref", "f_ref", "slope"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    def frequency(self, voltage):
        """Transition frequency (GHz) at the given gate voltage(s)."""
        v = np.asarray(voltage, dtype=float)
        out = self.f_ref + self.slope * (v - self.v_ref)
        return float(out) if out.ndim == 0 else out


def coupling_efficiency(
    fiber: GaussianMode, cavity: GaussianMode, offset: float = 0.0
) -> float:
    """Power coupling between two Gaussian modes with a transverse offset.

    eta = (2 w_f w_c / (w_f^2 + w_c^2))^2 * exp(-2 u^2 / (w_f^2 + w_c^2))

    with waists in micrometers and the offset u in micrometers.  Phase-front
    curvature is neglected (waist-to-waist coupling).  Symmetric in the two
    modes; equals 1 exactly when the waists match at zero offset.
    """
    wf, wc = fiber.waist, cavity.waist
    w2 = wf * wf + wc * wc
    overlap = (2.0 * wf * wc / w2) ** 2
    return float(overlap * np.exp(-2.0 * offset * offset / w2))


def cooperativity(
    g: float, kappa: float, gamma_par: float, gamma_star: float
) -> float:
    """Emitter-cavity cooperativity C = g^2 / (kappa (gamma_par/2 + gamma_star)).

    g and all rates in ns^-1.  The denominator combines the cavity decay
    with the total transverse dipole decoherence rate.
    """
    denom = kappa * (gamma_par / 2.0 + gamma_star)
    if denom <= 0:
        raise ValueError("kappa * (gamma_par/2 + gamma_star) must be > 0")
    return float(g * g / denom)


def purcell(c: float) -> float:
    """Purcell enhancement of the excited-state decay rate, F_p = C + 1."""
    if c < 0:
        raise ValueError("cooperativity must be >= 0")
    return float(c + 1.0)


def stark_map(mapping: StarkMap, voltage):
    """Transition frequency (GHz) from the linear Stark line at ``voltage``.

    Vectorized over voltage; composing this with a spectrum calculation per
    voltage builds the 2D (voltage x frequency) transmission maps.
    """
    return mapping.frequency(voltage)


def brightness(
    detected_rate: float, rep_rate: float, total_efficiency: float
) -> float:
    """Photons per excitation pulse inferred from a detected count rate.

    ``detected_rate`` in counts/s, ``rep_rate`` in pulses/s, and
    ``total_efficiency`` the product of all collection and detection
    efficiencies between source and counter (caller-supplied budget).
    """
    if rep_rate <= 0:
        raise ValueError("rep_rate must be > 0")
    if not 0.0 < total_efficiency <= 1.0:
        raise ValueError("total_efficiency must lie in (0, 1]")
    if detected_rate < 0:
        raise ValueError("detected_rate must be >= 0")
    return float(detected_rate / (rep_rate * total_efficiency))
