"""Closed-form figures of merit for the fiber-coupled device.

Small calculations that frame the simulation results: how well the fiber
mode matches the cavity mode, how strongly the emitter is Purcell
enhanced, where the gate voltage parks the emitter lines, and what the
detected count rate says about the source brightness.

Run from the repository root:  python3 demos/05_device_figures.py
"""

import pathlib

import numpy as np

from qdsps.device import (
    GaussianMode,
    StarkMap,
    brightness,
    cooperativity,
    coupling_efficiency,
    purcell,
)
from qdsps.qed import SystemParams

OUT = pathlib.Path(__file__).parent / "demo_output"
OUT.mkdir(exist_ok=True)

params = SystemParams.reference_device()

# --- fiber-cavity mode matching ----------------------------------------------
fiber = GaussianMode(waist=2.95)
cavity = GaussianMode(waist=2.14)
eta0 = coupling_efficiency(fiber, cavity)
print(f"mode overlap (aligned): {eta0:.4f}")
offsets = np.linspace(0.0, 3.0, 61)
etas = [coupling_efficiency(fiber, cavity, offset=u) for u in offsets]
half = offsets[np.argmin(np.abs(np.array(etas) - eta0 / 2))]
print(f"falls to half at a transverse offset of ~{half:.2f} um")

# --- cooperativity and Purcell factor ----------------------------------------
c = cooperativity(params.g, params.kappa, params.gamma_par, params.gamma_star)
print(f"cooperativity C = {c:.2f}, Purcell factor C+1 = {purcell(c):.2f}")

# --- Stark tuning --------------------------------------------------------------
line_x = StarkMap(v_ref=0.5, f_ref=params.f_qd_x, slope=8.0)
line_y = StarkMap(v_ref=0.5, f_ref=params.f_qd_y, slope=8.0)
for v in (0.0, 0.5, 1.0):
    print(f"gate {v:3.1f} V: lines at {line_x.frequency(v):6.2f} and "
          f"{line_y.frequency(v):6.2f} GHz")

# --- brightness ----------------------------------------------------------------
detected = 1.1e6       # counts/s at the detector
clock = 80.0e6         # pulsed excitation rate
efficiency = 0.034     # end-to-end: fiber, filters, detector
b = brightness(detected, clock, efficiency)
print(f"{detected:.2e} counts/s at {clock:.0e} Hz clock through "
      f"{efficiency:.1%} efficiency -> {b:.3f} photons per pulse at the source")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 3.4), constrained_layout=True)
    ax.plot(offsets, etas)
    ax.axhline(eta0 / 2, color="k", lw=0.6, ls=":")
    ax.set_xlabel("transverse offset (um)")
    ax.set_ylabel("coupling efficiency")
    ax.set_title("fiber-cavity mode matching")
    fig.savefig(OUT / "05_device_figures.png", dpi=160)
    print(f"wrote {OUT / '05_device_figures.png'}")
except ImportError:
    print("matplotlib not installed; no figure written")
