"""Second-order correlations of the transmitted light.

Under crossed polarizers the transmitted light inherits the emitter's
antibunching; a real detector smears the dip on the scale of its timing
jitter.  The script computes

1. g2(tau) of the crossed-polarizer output and of the plain cavity
   transmission,
2. the same curve convolved with a two-exponential timing response,
3. the saturation curve of detected rate vs drive power, and the way a
   linear leak degrades the g2 of the mixture at high power.

Run from the repository root:  python3 demos/02_photon_statistics.py
"""

import dataclasses
import pathlib

import numpy as np

from qdsps.observables import (
    DetectorResponse,
    SaturationModel,
    count_rate_model,
    detector_convolve,
    g2_cw,
    g2_power_curve,
)
from qdsps.qed import HilbertSpace, PolarizationProjector, SystemParams
from qdsps.tables import DataTable, write_csv

OUT = pathlib.Path(__file__).parent / "demo_output"
OUT.mkdir(exist_ok=True)

params = SystemParams.reference_device()
space = HilbertSpace(3)
tau = np.linspace(0.0, 10.0, 501)

# --- correlations ------------------------------------------------------------
# Tune the laser onto the Y line so the emitter actually scatters.
driven = dataclasses.replace(params, f_laser=params.f_qd_y)
antibunched = g2_cw(driven, space, PolarizationProjector.v(), tau)
cavity_like = g2_cw(driven, space, PolarizationProjector.h(), tau)
print(f"crossed polarizer: g2(0) = {antibunched.values[0]:.4f}  "
      f"(co-polarized: {cavity_like.values[0]:.4f})")

# --- detector convolution ----------------------------------------------------
detector = DetectorResponse(weight=0.7, tau1=0.3, tau2=1.0)
smeared = detector_convolve(antibunched, detector)
print(f"after the detector: g2(0) = {smeared.values[0]:.4f} "
      f"(timing response {detector.tau1}/{detector.tau2} ns)")

write_csv(
    DataTable.from_columns(
        tau_ns=tau, g2_raw=antibunched.values, g2_convolved=smeared.values
    ),
    OUT / "g2_crossed.csv",
)

# --- saturation --------------------------------------------------------------
model = SaturationModel(r_max=4.3e6, p_sat=1.0, c_leak=5.0e4)
powers = np.geomspace(0.02, 20.0, 40)
rates = count_rate_model(powers, model)
g2_vs_power = g2_power_curve(model, 0.02, detector, powers)
print(f"saturated rate {model.r_max:.2e} /s at knee {model.p_sat} "
      f"(g2 rises to {g2_vs_power[-1]:.3f} at {powers[-1]:.0f}x saturation)")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, 3, figsize=(13, 3.6), constrained_layout=True)
    axes[0].plot(tau, antibunched.values, label="crossed (raw)")
    axes[0].plot(tau, smeared.values, label="crossed (detector)")
    axes[0].plot(tau, cavity_like.values, label="co-polarized", ls="--")
    axes[0].axhline(1.0, color="k", lw=0.6, ls=":")
    axes[0].set_xlabel("delay (ns)")
    axes[0].set_ylabel("g2")
    axes[0].legend()

    axes[1].loglog(powers, rates)
    axes[1].axvline(model.p_sat, color="k", lw=0.6, ls=":")
    axes[1].set_xlabel("drive power (saturation units)")
    axes[1].set_ylabel("detected rate (1/s)")

    axes[2].semilogx(powers, g2_vs_power)
    axes[2].set_xlabel("drive power (saturation units)")
    axes[2].set_ylabel("g2(0) of the mixture")
    fig.savefig(OUT / "02_photon_statistics.png", dpi=160)
    print(f"wrote {OUT / '02_photon_statistics.png'}")
except ImportError:
    print("matplotlib not installed; CSV output only")

print(f"wrote {OUT / 'g2_crossed.csv'}")
