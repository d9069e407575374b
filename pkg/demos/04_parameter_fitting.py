"""Staged extraction of device parameters from noisy scans.

The fit proceeds the way the measurement does: first the empty-cavity
doublet pins the cavity frequencies and linewidth, then a narrow scan
around the emitter lines determines the coupling, dephasing, splitting,
and dipole angle on top of the frozen cavity numbers.  A detector
calibration histogram is fitted last.

Run from the repository root:  python3 demos/04_parameter_fitting.py
(takes ~10 s; the emitter stage is a simplex search over five
parameters with a steady-state solve per evaluation)
"""

import dataclasses
import pathlib

import numpy as np

from qdsps.fitting import (
    fit_cavity_stage,
    fit_detector_response,
    fit_qd_stage,
)
from qdsps.observables import (
    DetectorResponse,
    empty_cavity_spectrum,
    transmission_spectrum,
)
from qdsps.qed import HilbertSpace, SystemParams

OUT = pathlib.Path(__file__).parent / "demo_output"
OUT.mkdir(exist_ok=True)

rng = np.random.default_rng(5)
truth = dataclasses.replace(
    SystemParams.reference_device(), drive_theta_deg=45.0
)
space = HilbertSpace(2)

# --- stage 1: cavity ---------------------------------------------------------
cav_freq = np.linspace(-30.0, 45.0, 151)
cav_data = empty_cavity_spectrum(truth, None, cav_freq).transmission
cav_data = cav_data * (1 + rng.normal(0, 0.01, cav_data.size))

start = dataclasses.replace(truth, f_cav_h=0.0, f_cav_v=15.0, kappa=50.0)
stage1 = fit_cavity_stage(cav_freq, cav_data, start)
print("stage 1 (cavity):")
print(f"  f_cav_h  = {stage1.f_cav_h:8.3f} GHz   (truth {truth.f_cav_h})")
print(f"  splitting= {stage1.cavity_splitting:8.3f} GHz   (truth "
      f"{truth.f_cav_v - truth.f_cav_h})")
print(f"  kappa    = {stage1.kappa:8.3f} 1/ns  (truth {truth.kappa})")

# --- stage 2: emitter on the fixed cavity ------------------------------------
qd_freq = np.linspace(-8.0, 4.0, 41)
qd_data = transmission_spectrum(truth, space, None, qd_freq).transmission
qd_data = qd_data * (1 + rng.normal(0, 0.01, qd_data.size))

qd_start = dataclasses.replace(
    stage1.params, g=11.0, phi_deg=12.0, gamma_par=1.2, gamma_star=0.3
)
stage2 = fit_qd_stage(qd_freq, qd_data, qd_start, space=space, max_iter=160)
print("stage 2 (emitter):")
for name, true_val in (
    ("g", truth.g),
    ("gamma_par", truth.gamma_par),
    ("gamma_star", truth.gamma_star),
    ("phi_deg", truth.phi_deg),
):
    fitted = getattr(stage2.params, name)
    print(f"  {name:10s}= {fitted:8.3f}       (truth {true_val})")
print(f"  splitting = {stage2.params.f_qd_y - stage2.params.f_qd_x:8.3f} GHz  "
      f"(truth {truth.f_qd_y - truth.f_qd_x})")

# --- stage 3: detector calibration --------------------------------------------
det_truth = DetectorResponse(weight=0.7, tau1=0.3, tau2=1.0)
irf_tau = np.linspace(0.0, 6.0, 241)
irf = det_truth.kernel(irf_tau) * 1e4
irf = irf * (1 + rng.normal(0, 0.02, irf.size))
stage3 = fit_detector_response(irf_tau, irf)
print("stage 3 (detector):")
print(f"  weight = {stage3.response.weight:.3f}  (truth {det_truth.weight})")
print(f"  tau1   = {stage3.response.tau1:.3f}  (truth {det_truth.tau1})")
print(f"  tau2   = {stage3.response.tau2:.3f}  (truth {det_truth.tau2})")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, 2, figsize=(10, 3.6), constrained_layout=True)
    axes[0].plot(cav_freq, cav_data, ".", ms=3, label="data")
    fit_curve = stage1.scale * empty_cavity_spectrum(
        stage1.params, None, cav_freq
    ).transmission
    axes[0].plot(cav_freq, fit_curve, label="stage-1 fit")
    axes[0].set_xlabel("laser detuning (GHz)")
    axes[0].set_ylabel("transmission")
    axes[0].legend()

    axes[1].plot(qd_freq, qd_data, ".", ms=4, label="data")
    model = transmission_spectrum(
        stage2.params, space, None, qd_freq
    ).transmission
    axes[1].plot(qd_freq, model, label="stage-2 fit")
    axes[1].set_xlabel("laser detuning (GHz)")
    axes[1].legend()
    fig.savefig(OUT / "04_parameter_fitting.png", dpi=160)
    print(f"wrote {OUT / '04_parameter_fitting.png'}")
except ImportError:
    print("matplotlib not installed; no figure written")
