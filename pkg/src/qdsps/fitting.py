"""Bounded derivative-free least squares and the staged parameter fits.

The optimizer is a Nelder-Mead simplex on sinusoidally transformed
coordinates: a variable with finite bounds (lo, hi) is represented
internally as u with x = lo + (hi - lo) (sin u + 1)/2, which makes the
search unconstrained while confining x to the open box.  Residuals are
vectors; the objective is the sum of squares.  Parameter covariance comes
from a finite-difference Gauss-Newton approximation at the optimum.

The staged fits mirror how the device is characterized: the empty-cavity
stage pins (f_cav_h, cavity splitting, kappa) from a detuned-emitter scan,
then the emitter stage fits (g, gamma_par, gamma_star, exciton splitting,
polarization angle) with the cavity numbers frozen.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np
import scipy.optimize

from .qed import HilbertSpace, PolarizationProjector, SystemParams
from .observables import (
    DetectorResponse,
    SaturationModel,
    count_rate_model,
    empty_cavity_spectrum,
    g2_power_curve,
    transmission_spectrum,
)

__all__ = [
    "FitProblem",
    "FitResult",
    "minimize",
    "fit_cavity_stage",
    "fit_qd_stage",
    "fit_saturation",
    "fit_detector_response",
    "CavityStageResult",
    "QdStageResult",
    "SaturationFitResult",
    "DetectorFitResult",
]


# ---------------------------------------------------------------------------
# core optimizer


@dataclass
class FitProblem:
    """Residual-vector least-squares problem for :func:`minimize`.

    ``bounds`` is a sequence of (lo, hi) tuples or None entries (None =
    unconstrained variable); finite bounds must be finite on both sides.
    """

    residual: Callable[[np.ndarray], np.ndarray]
    x0: np.ndarray
    bounds: Sequence | None = None
    xtol: float = 1e-10
    ftol: float = 1e-12
    max_iter: int | None = None

    def __post_init__(self):
        self.x0 = np.asarray(self.x0, dtype=float)
        if self.x0.ndim != 1:
            raise ValueError("x0 must be 1-d")
        if self.bounds is not None:
            if len(self.bounds) != self.x0.size:
                raise ValueError("bounds length must match x0")
            for i, b in enumerate(self.bounds):
                if b is None:
                    continue
                lo, hi = b
                if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
                    raise ValueError(f"bound {i} must be finite with hi > lo")
                if not lo <= self.x0[i] <= hi:
                    raise ValueError(
                        f"x0[{i}] = {self.x0[i]} outside bound ({lo}, {hi})"
                    )


@dataclass
class FitResult:
    """Best-fit parameters with Gauss-Newton covariance.

    ``residual_norm`` is the Euclidean norm of the residual vector at the
    optimum; ``sigma`` the square-root diagonal of ``covariance`` (NaN where
    the covariance is unavailable).
    """

    x: np.ndarray
    residual_norm: float
    iterations: int
    converged: bool
    covariance: np.ndarray | None = None

    @property
    def sigma(self) -> np.ndarray:
        if self.covariance is None:
            return np.full(self.x.size, np.nan)
        d = np.diag(self.covariance).copy()
        d[d < 0] = np.nan
        return np.sqrt(d)


def _make_transform(bounds, n):
    if bounds is None:
        bounds = [None] * n

    def to_internal(x):
        u = np.array(x, dtype=float)
        for i, b in enumerate(bounds):
            if b is None:
                continue
            lo, hi = b
            frac = np.clip(2.0 * (x[i] - lo) / (hi - lo) - 1.0, -1.0, 1.0)
            u[i] = math.asin(frac)
        return u

    def to_external(u):
        x = np.array(u, dtype=float)
        for i, b in enumerate(bounds):
            if b is None:
                continue
            lo, hi = b
            x[i] = lo + (hi - lo) * (math.sin(u[i]) + 1.0) / 2.0
        return x

    return to_internal, to_external


def _fd_jacobian(residual, x, r0, bounds=None):
    """Central-difference Jacobian of the residual vector.

    Evaluation points are clamped to the box bounds, degrading to a
    one-sided difference when the optimum sits on a boundary.
    """
    n = x.size
    jac = np.empty((r0.size, n))
    for i in range(n):
        step = 1e-6 * max(abs(x[i]), 1.0)
        xp = x.copy()
        xm = x.copy()
        xp[i] += step
        xm[i] -= step
        if bounds is not None and bounds[i] is not None:
            lo, hi = bounds[i]
            xp[i] = min(xp[i], hi)
            xm[i] = max(xm[i], lo)
        span = xp[i] - xm[i]
        if span == 0.0:
            jac[:, i] = 0.0
            continue
        jac[:, i] = (residual(xp) - residual(xm)) / span
    return jac


def _covariance(residual, x, r0, bounds=None):
    m, n = r0.size, x.size
    if m <= n:
        return None
    jac = _fd_jacobian(residual, x, r0, bounds)
    jtj = jac.T @ jac
    try:
        cov = np.linalg.inv(jtj)
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(jtj)
    s_sq = float(r0 @ r0) / (m - n)
    return cov * s_sq


def minimize(problem: FitProblem) -> FitResult:
    """Nelder-Mead least squares honoring the problem's box bounds.

    Deterministic for identical inputs; never raises on max-iteration
    exhaustion (the result is flagged ``converged=False`` instead).  The
    returned residual norm never exceeds the one at the initial guess.
    """
    n = problem.x0.size
    to_internal, to_external = _make_transform(problem.bounds, n)

    def objective(u):
        r = np.asarray(problem.residual(to_external(u)), dtype=float)
        return float(r @ r)

    u0 = to_internal(problem.x0)
    max_iter = problem.max_iter if problem.max_iter is not None else 400 * n
    res = scipy.optimize.minimize(
        objective,
        u0,
        method="Nelder-Mead",
        options={
            "xatol": problem.xtol,
            "fatol": problem.ftol,
            "maxiter": max_iter,
            "maxfev": 4 * max_iter,
            "adaptive": n > 4,
        },
    )

    x_best = to_external(res.x)
    r_best = np.asarray(problem.residual(x_best), dtype=float)
    cov = _covariance(problem.residual, x_best, r_best, problem.bounds)
    return FitResult(
        x=x_best,
        residual_norm=float(np.linalg.norm(r_best)),
        iterations=int(res.nit),
        converged=bool(res.success),
        covariance=cov,
    )


# ---------------------------------------------------------------------------
# staged device fits


@dataclass
class CavityStageResult:
    params: SystemParams          # input params with fitted cavity numbers
    f_cav_h: float
    cavity_splitting: float
    kappa: float
    scale: float
    sigma: dict
    fit: FitResult


def fit_cavity_stage(
    freq_ghz: Sequence[float],
    transmission: Sequence[float],
    initial: SystemParams,
    projector: PolarizationProjector | None = None,
    bounds: dict | None = None,
) -> CavityStageResult:
    """Stage 1: empty-cavity Lorentzians -> (f_cav_h, splitting, kappa).

    Fits the analytic two-mode spectrum (plus a free amplitude scale) to a
    scan taken with the emitter far detuned or absent.  The drive
    polarization of ``initial`` decides how much each mode shows up; use a
    diagonal drive to expose both modes in one scan.
    """
    f = np.asarray(freq_ghz, dtype=float)
    data = np.asarray(transmission, dtype=float)
    if f.shape != data.shape or f.ndim != 1:
        raise ValueError("freq_ghz and transmission must be matching 1-d arrays")

    x0 = np.array(
        [initial.f_cav_h, initial.cavity_splitting, initial.kappa, 1.0]
    )
    span = f[-1] - f[0]
    default_bounds = [
        (f[0] - span, f[-1] + span),
        (0.1 * initial.cavity_splitting, 10.0 * initial.cavity_splitting)
        if initial.cavity_splitting > 0
        else (-10.0 * span, 10.0 * span),
        (0.05 * initial.kappa, 20.0 * initial.kappa),
        (1e-3, 1e3),
    ]
    if bounds:
        names = ["f_cav_h", "cavity_splitting", "kappa", "scale"]
        default_bounds = [bounds.get(nm, db) for nm, db in zip(names, default_bounds)]

    def model(x):
        p = replace(
            initial, f_cav_h=x[0], f_cav_v=x[0] + x[1], kappa=x[2]
        )
        return x[3] * empty_cavity_spectrum(p, projector, f).transmission

    problem = FitProblem(
        residual=lambda x: model(x) - data,
        x0=x0,
        bounds=default_bounds,
        xtol=1e-9,
        ftol=1e-12,
    )
    res = minimize(problem)
    f_h, split, kappa, scale = res.x
    sig = res.sigma
    fitted = replace(initial, f_cav_h=f_h, f_cav_v=f_h + split, kappa=kappa)
    return CavityStageResult(
        params=fitted,
        f_cav_h=f_h,
        cavity_splitting=split,
        kappa=kappa,
        scale=scale,
        sigma={
            "f_cav_h": sig[0],
            "cavity_splitting": sig[1],
            "kappa": sig[2],
            "scale": sig[3],
        },
        fit=res,
    )


QD_STAGE_PARAMS = ("g", "gamma_par", "gamma_star", "qd_splitting", "phi_deg")


@dataclass
class QdStageResult:
    params: SystemParams
    g: float
    gamma_par: float
    gamma_star: float
    qd_splitting: float
    phi_deg: float
    sigma: dict
    fit: FitResult


def fit_qd_stage(
    freq_ghz: Sequence[float],
    transmission: Sequence[float],
    cavity_params: SystemParams,
    space: HilbertSpace | None = None,
    projector: PolarizationProjector | None = None,
    vary: Sequence[str] = QD_STAGE_PARAMS,
    bounds: dict | None = None,
    max_iter: int | None = None,
) -> QdStageResult:
    """Stage 2: full master-equation spectrum -> emitter parameters.

    Cavity numbers come frozen in ``cavity_params`` (from
    :func:`fit_cavity_stage`); the exciton doublet is parameterized as
    center ± splitting/2 with the center frequency taken from
    ``cavity_params`` and held fixed unless added to ``vary``.
    """
    f = np.asarray(freq_ghz, dtype=float)
    data = np.asarray(transmission, dtype=float)
    if f.shape != data.shape or f.ndim != 1:
        raise ValueError("freq_ghz and transmission must be matching 1-d arrays")
    space = space if space is not None else HilbertSpace(2)

    names = list(vary)
    allowed = set(QD_STAGE_PARAMS) | {"qd_center"}
    unknown = set(names) - allowed
    if unknown:
        raise ValueError(f"unknown fit parameters: {sorted(unknown)}")

    center0 = 0.5 * (cavity_params.f_qd_x + cavity_params.f_qd_y)
    start = {
        "g": cavity_params.g,
        "gamma_par": cavity_params.gamma_par,
        "gamma_star": cavity_params.gamma_star,
        "qd_splitting": cavity_params.qd_splitting,
        "phi_deg": cavity_params.phi_deg,
        "qd_center": center0,
    }
    default_bounds = {
        "g": (0.2 * start["g"], 5.0 * start["g"]),
        "gamma_par": (1e-3, 30.0),
        "gamma_star": (0.0, 30.0),
        "qd_splitting": (0.2 * start["qd_splitting"], 5.0 * start["qd_splitting"]),
        "phi_deg": (0.0, 45.0),
        "qd_center": (center0 - 5.0, center0 + 5.0),
    }
    if bounds:
        default_bounds.update(bounds)

    def build(x):
        vals = dict(start)
        vals.update(dict(zip(names, x)))
        center = vals["qd_center"]
        return replace(
            cavity_params,
            g=vals["g"],
            gamma_par=vals["gamma_par"],
            gamma_star=vals["gamma_star"],
            f_qd_x=center - vals["qd_splitting"] / 2.0,
            f_qd_y=center + vals["qd_splitting"] / 2.0,
            phi_deg=vals["phi_deg"],
        )

    def residual(x):
        p = build(x)
        return transmission_spectrum(p, space, projector, f).transmission - data

    problem = FitProblem(
        residual=residual,
        x0=np.array([start[nm] for nm in names]),
        bounds=[default_bounds[nm] for nm in names],
        xtol=1e-4,
        ftol=1e-8,
        max_iter=max_iter,
    )
    res = minimize(problem)
    fitted = build(res.x)
    sig = dict(zip(names, res.sigma))
    return QdStageResult(
        params=fitted,
        g=fitted.g,
        gamma_par=fitted.gamma_par,
        gamma_star=fitted.gamma_star,
        qd_splitting=fitted.qd_splitting,
        phi_deg=fitted.phi_deg,
        sigma=sig,
        fit=res,
    )


# ---------------------------------------------------------------------------
# saturation and detector response


@dataclass
class SaturationFitResult:
    model: SaturationModel
    g2_single: float
    sigma: dict
    fit: FitResult
    degenerate: bool = False


def fit_saturation(
    powers: Sequence[float],
    rates: Sequence[float],
    g2_values: Sequence[float] | None = None,
    initial: SaturationModel | None = None,
    g2_single_guess: float = 0.2,
) -> SaturationFitResult:
    """Joint fit of the count-rate curve and (optionally) g2(0) vs power.

    Rates are normalized by their maximum so the two residual blocks carry
    comparable weight.  Returns the saturation model and the effective
    (detector-limited) single-photon g2(0).  ``degenerate`` flags fits where
    the saturation knee is not constrained by the data (p_sat at the bound).
    """
    p = np.asarray(powers, dtype=float)
    rate = np.asarray(rates, dtype=float)
    if p.shape != rate.shape or p.ndim != 1:
        raise ValueError("powers and rates must be matching 1-d arrays")
    if np.any(p <= 0):
        raise ValueError("powers must be > 0")
    g2 = None if g2_values is None else np.asarray(g2_values, dtype=float)
    if g2 is not None and g2.shape != p.shape:
        raise ValueError("g2_values must match powers")

    if initial is None:
        r0 = float(rate.max())
        initial = SaturationModel(
            r_max=r0, p_sat=float(np.median(p)), c_leak=0.1 * r0 / p.max()
        )
    rate_scale = float(rate.max()) if rate.max() > 0 else 1.0

    p_sat_hi = 100.0 * p.max()
    bounds = [
        (1e-6 * rate_scale, 100.0 * rate_scale),
        (1e-3 * p.min(), p_sat_hi),
        (0.0, 10.0 * rate_scale / p.min()),
        (0.0, 1.0),
    ]
    x0 = np.array(
        [initial.r_max, initial.p_sat, initial.c_leak, g2_single_guess]
    )
    x0[0] = min(max(x0[0], bounds[0][0]), bounds[0][1])
    x0[1] = min(max(x0[1], bounds[1][0]), bounds[1][1])

    def residual(x):
        model = SaturationModel(r_max=x[0], p_sat=x[1], c_leak=x[2])
        blocks = [(count_rate_model(p, model) - rate) / rate_scale]
        if g2 is not None:
            blocks.append(g2_power_curve(model, x[3], None, p) - g2)
        return np.concatenate(blocks)

    problem = FitProblem(residual=residual, x0=x0, bounds=bounds,
                         xtol=1e-10, ftol=1e-14)
    res = minimize(problem)
    model = SaturationModel(r_max=res.x[0], p_sat=res.x[1], c_leak=res.x[2])
    sig = res.sigma
    degenerate = res.x[1] > 0.9 * p_sat_hi
    return SaturationFitResult(
        model=model,
        g2_single=float(res.x[3]),
        sigma={
            "r_max": sig[0],
            "p_sat": sig[1],
            "c_leak": sig[2],
            "g2_single": sig[3],
        },
        fit=res,
        degenerate=degenerate,
    )


@dataclass
class DetectorFitResult:
    response: DetectorResponse
    scale: float
    sigma: dict
    fit: FitResult
    degenerate: bool = False


def fit_detector_response(
    tau_ns: Sequence[float],
    counts: Sequence[float],
) -> DetectorFitResult:
    """Fit the two-exponential timing-response kernel to calibration counts.

    The data is a measured impulse-response histogram (|tau| used, so either
    one- or two-sided input works).  Components are sorted so tau1 <= tau2;
    when the two time constants collapse onto each other (or one component's
    weight vanishes) the result is flagged degenerate — the data only
    supports a single exponential.
    """
    tau = np.abs(np.asarray(tau_ns, dtype=float))
    data = np.asarray(counts, dtype=float)
    if tau.shape != data.shape or tau.ndim != 1:
        raise ValueError("tau_ns and counts must be matching 1-d arrays")
    if np.any(data < 0):
        raise ValueError("counts must be >= 0")

    t_span = float(tau.max())
    area = float(np.trapezoid(data[np.argsort(tau)], np.sort(tau)))
    scale0 = max(2.0 * area, data.max() * 0.5)

    def model(x):
        w, t1, t2, scale = x
        resp = DetectorResponse(weight=w, tau1=t1, tau2=t2)
        return scale * resp.kernel(tau)

    x0 = np.array([0.6, 0.2 * t_span, 0.6 * t_span, scale0])
    bounds = [
        (0.0, 1.0),
        (1e-3 * t_span, 10.0 * t_span),
        (1e-3 * t_span, 10.0 * t_span),
        (1e-6 * scale0, 1e6 * scale0),
    ]

    problem = FitProblem(
        residual=lambda x: model(x) - data,
        x0=x0,
        bounds=bounds,
        xtol=1e-10,
        ftol=1e-14,
    )
    res = minimize(problem)
    w, t1, t2, scale = res.x
    sig = dict(zip(("weight", "tau1", "tau2", "scale"), res.sigma))
    if t1 > t2:
        t1, t2 = t2, t1
        w = 1.0 - w
        sig["tau1"], sig["tau2"] = sig["tau2"], sig["tau1"]
    response = DetectorResponse(weight=w, tau1=t1, tau2=t2)
    degenerate = (t2 - t1) < 0.05 * t2 or w < 0.02 or w > 0.98
    return DetectorFitResult(
        response=response, scale=float(scale), sigma=sig, fit=res,
        degenerate=degenerate,
    )
