"""Driven quantum-dot / bimodal-cavity master equation core.

Model
-----
A three-level emitter (ground state ``|g>`` and two orthogonally polarized
exciton states ``|X>``, ``|Y>``) is coupled to the two polarization modes
(H, V) of a single cavity.  In a frame rotating at the drive laser frequency
the Hamiltonian is

    H = sum_m Delta_m a_m^dag a_m  +  sum_i Delta_i s_i^dag s_i
        + g [ cos(phi) (a_H^dag s_X + h.c.) + sin(phi) (a_H^dag s_Y + h.c.)
            - sin(phi) (a_V^dag s_X + h.c.) + cos(phi) (a_V^dag s_Y + h.c.) ]
        + E (a_d^dag + a_d)

with ``s_X = |g><X|``, ``s_Y = |g><Y|`` and ``a_d`` the driven cavity mode
(H-polarized unless configured otherwise).  ``phi`` is the misalignment angle
between the exciton dipoles and the cavity polarization axes.

Dissipation is Lindblad form with collapse channels

    kappa D[a_H],  kappa D[a_V],  gamma_par D[s_X],  gamma_par D[s_Y],
    2*gamma_star D[P_e]

where ``P_e = |X><X| + |Y><Y|``.  With this convention the ground-exciton
coherence decays at ``gamma_par/2 + gamma_star``.

Units
-----
All frequencies (``f_cav_h``, ``f_cav_v``, ``f_qd_x``, ``f_qd_y``,
``f_laser``) are plain (non-angular) GHz on a common reference axis;
detunings are converted to angular units (rad/ns) inside operator
construction via a factor 2*pi.  All rates and couplings (``kappa``,
``gamma_par``, ``gamma_star``, ``g``, ``drive_amplitude``) are in 1/ns and
enter the Hamiltonian and dissipators directly, WITHOUT a 2*pi factor.
Time is in ns.

Consequence worth remembering: the empty-cavity intensity spectrum has a
full width at half maximum of kappa/(2*pi) GHz in laser frequency, i.e.
about 11.1 GHz for kappa = 70/ns.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
import scipy.linalg

__all__ = [
    "SystemParams",
    "HilbertSpace",
    "DensityMatrix",
    "Liouvillian",
    "PolarizationProjector",
    "build_hamiltonian",
    "build_liouvillian",
    "steady_state",
    "evolve",
    "propagate",
    "SteadyStateError",
    "EvolutionError",
]

TWO_PI = 2.0 * math.pi


class SteadyStateError(RuntimeError):
    """Steady-state solve failed (degenerate kernel or bad conditioning)."""


class EvolutionError(RuntimeError):
    """Time evolution failed its accuracy/trace-preservation checks."""


# ---------------------------------------------------------------------------
# parameters


@dataclass(frozen=True)
class SystemParams:
    """Physical parameters of the emitter-cavity system.

    Rates in 1/ns, frequencies in GHz (see module docstring for the unit
    conventions), angles in degrees.
    """

    g: float                  # emitter-cavity coupling, 1/ns
    kappa: float              # cavity intensity decay rate (both modes), 1/ns
    gamma_par: float          # exciton population decay rate, 1/ns
    gamma_star: float         # pure dephasing rate, 1/ns
    f_cav_h: float            # H cavity mode frequency, GHz
    f_cav_v: float            # V cavity mode frequency, GHz
    f_qd_x: float             # X exciton transition frequency, GHz
    f_qd_y: float             # Y exciton transition frequency, GHz
    phi_deg: float            # dipole/cavity polarization misalignment, degrees
    drive_amplitude: float = 0.1   # coherent drive strength E, 1/ns
    f_laser: float = 0.0      # drive laser frequency, GHz
    drive_theta_deg: float = 0.0   # drive polarization angle (0 = H)
    drive_delta_deg: float = 0.0   # drive polarization phase

    def __post_init__(self):
        for name in ("g", "kappa", "gamma_par", "gamma_star", "drive_amplitude"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {v!r}")
        for name in ("f_cav_h", "f_cav_v", "f_qd_x", "f_qd_y", "phi_deg",
                     "f_laser", "drive_theta_deg", "drive_delta_deg"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v!r}")

    @property
    def cavity_splitting(self) -> float:
        """f_cav_v - f_cav_h in GHz."""
        return self.f_cav_v - self.f_cav_h

    @property
    def qd_splitting(self) -> float:
        """f_qd_y - f_qd_x in GHz."""
        return self.f_qd_y - self.f_qd_x

    def with_laser(self, f_laser: float) -> "SystemParams":
        return replace(self, f_laser=f_laser)

    @classmethod
    def reference_device(cls, **overrides) -> "SystemParams":
        """Parameter set of the fiber-coupled micropillar device this
        toolkit was validated against (weak H-polarized drive)."""
        defaults = dict(
            g=14.0, kappa=70.0, gamma_par=1.0, gamma_star=0.4,
            f_cav_h=2.0, f_cav_v=20.0, f_qd_x=-3.6, f_qd_y=0.3,
            phi_deg=17.0, drive_amplitude=0.1, f_laser=0.0,
        )
        defaults.update(overrides)
        return cls(**defaults)


# ---------------------------------------------------------------------------
# Hilbert space and operators


def _destroy(n: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n)), 1).astype(complex)


class HilbertSpace:
    """Product space (3-level emitter) x (H Fock) x (V Fock).

    Basis ordering: emitter index (0=g, 1=X, 2=Y) slowest, then H photon
    number, then V photon number.  ``n_fock`` is the per-mode truncation
    (number of Fock levels, photons 0..n_fock-1) and must be >= 2.
    """

    def __init__(self, n_fock: int = 3):
        if n_fock < 2:
            raise ValueError(f"n_fock must be >= 2, got {n_fock}")
        self.n_fock = int(n_fock)
        self.dim = 3 * self.n_fock ** 2

        eye_f = np.eye(self.n_fock, dtype=complex)
        eye_qd = np.eye(3, dtype=complex)
        a = _destroy(self.n_fock)

        def emb(qd, fh, fv):
            return np.kron(qd, np.kron(fh, fv))

        self.identity = emb(eye_qd, eye_f, eye_f)
        self.a_h = emb(eye_qd, a, eye_f)
        self.a_v = emb(eye_qd, eye_f, a)

        lower_x = np.zeros((3, 3), dtype=complex)
        lower_x[0, 1] = 1.0          # |g><X|
        lower_y = np.zeros((3, 3), dtype=complex)
        lower_y[0, 2] = 1.0          # |g><Y|
        self.sigma_x = emb(lower_x, eye_f, eye_f)
        self.sigma_y = emb(lower_y, eye_f, eye_f)

        proj = np.zeros((3, 3), dtype=complex)
        proj[1, 1] = proj[2, 2] = 1.0
        self.excited_projector = emb(proj, eye_f, eye_f)

        self.n_h = self.a_h.conj().T @ self.a_h
        self.n_v = self.a_v.conj().T @ self.a_v
        # total excitation number: commutes term-by-term with the coupling,
        # generates the rotating-frame shift used for fast laser scans
        self.excitation_number = (
            self.n_h + self.n_v
            + self.sigma_x.conj().T @ self.sigma_x
            + self.sigma_y.conj().T @ self.sigma_y
        )

    def __eq__(self, other):
        return isinstance(other, HilbertSpace) and other.n_fock == self.n_fock

    def __hash__(self):
        return hash(("HilbertSpace", self.n_fock))

    def __repr__(self):
        return f"HilbertSpace(n_fock={self.n_fock})"

    def ground_state(self) -> np.ndarray:
        rho = np.zeros((self.dim, self.dim), dtype=complex)
        rho[0, 0] = 1.0
        return rho


@dataclass(frozen=True)
class PolarizationProjector:
    """Detection polarization: a_det = cos(theta) a_H + e^{i delta} sin(theta) a_V.

    ``theta`` and ``delta`` in radians; theta = 0 detects H, theta = pi/2
    detects V (crossed polarizer for an H-polarized drive).
    """

    theta: float
    delta: float = 0.0

    @classmethod
    def h(cls) -> "PolarizationProjector":
        return cls(theta=0.0)

    @classmethod
    def v(cls) -> "PolarizationProjector":
        return cls(theta=math.pi / 2.0)

    @property
    def jones(self) -> np.ndarray:
        return np.array(
            [math.cos(self.theta),
             np.exp(1j * self.delta) * math.sin(self.theta)]
        )

    def detection_operator(self, space: HilbertSpace) -> np.ndarray:
        jh, jv = self.jones
        return jh * space.a_h + jv * space.a_v


# ---------------------------------------------------------------------------
# states


@dataclass
class DensityMatrix:
    """Validated density operator on a :class:`HilbertSpace`."""

    matrix: np.ndarray
    space: HilbertSpace

    HERM_TOL = 1e-9
    TRACE_TOL = 1e-9
    EIG_FLOOR = -1e-9

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)
        if self.matrix.shape != (self.space.dim, self.space.dim):
            raise ValueError(
                f"matrix shape {self.matrix.shape} does not match "
                f"space dimension {self.space.dim}"
            )
        self.validate()

    def validate(self) -> "DensityMatrix":
        m = self.matrix
        herm = np.max(np.abs(m - m.conj().T))
        if herm > self.HERM_TOL:
            raise ValueError(f"density matrix not Hermitian: deviation {herm:.3e}")
        tr = np.trace(m)
        if abs(tr - 1.0) > self.TRACE_TOL:
            raise ValueError(f"density matrix trace {tr} deviates from 1")
        evals = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
        if evals.min() < self.EIG_FLOOR:
            raise ValueError(
                f"density matrix has negative eigenvalue {evals.min():.3e}"
            )
        return self

    def expect(self, operator: np.ndarray):
        """<O> = Tr(O rho); real for Hermitian operators, complex otherwise."""
        value = complex(np.einsum("ij,ji->", operator, self.matrix))
        if np.max(np.abs(operator - operator.conj().T)) < 1e-12:
            return value.real
        return value

    @classmethod
    def ground(cls, space: HilbertSpace) -> "DensityMatrix":
        return cls(space.ground_state(), space)


# ---------------------------------------------------------------------------
# Hamiltonian and Liouvillian


def build_hamiltonian(params: SystemParams, space: HilbertSpace) -> np.ndarray:
    """Rotating-frame Hamiltonian matrix (rad/ns units).

    Raises ValueError for non-finite parameters; asserts Hermiticity of the
    assembled matrix to 1e-12.
    """
    d_cav_h = TWO_PI * (params.f_cav_h - params.f_laser)
    d_cav_v = TWO_PI * (params.f_cav_v - params.f_laser)
    d_qd_x = TWO_PI * (params.f_qd_x - params.f_laser)
    d_qd_y = TWO_PI * (params.f_qd_y - params.f_laser)

    phi = math.radians(params.phi_deg)
    c, s = math.cos(phi), math.sin(phi)

    sx_dag = space.sigma_x.conj().T
    sy_dag = space.sigma_y.conj().T

    h = (
        d_cav_h * space.n_h
        + d_cav_v * space.n_v
        + d_qd_x * (sx_dag @ space.sigma_x)
        + d_qd_y * (sy_dag @ space.sigma_y)
    )

    def jc(a_op, lower):
        cross = a_op.conj().T @ lower
        return cross + cross.conj().T

    h = h + params.g * (
        c * jc(space.a_h, space.sigma_x)
        + s * jc(space.a_h, space.sigma_y)
        - s * jc(space.a_v, space.sigma_x)
        + c * jc(space.a_v, space.sigma_y)
    )

    th = math.radians(params.drive_theta_deg)
    de = math.radians(params.drive_delta_deg)
    a_drive = math.cos(th) * space.a_h + np.exp(1j * de) * math.sin(th) * space.a_v
    h = h + params.drive_amplitude * (a_drive + a_drive.conj().T)

    herm_dev = np.max(np.abs(h - h.conj().T))
    if herm_dev > 1e-12:
        raise ValueError(f"assembled Hamiltonian not Hermitian ({herm_dev:.3e})")
    return h


def spre(op: np.ndarray) -> np.ndarray:
    """Superoperator for left multiplication, row-stacked convention."""
    d = op.shape[0]
    return np.kron(op, np.eye(d, dtype=complex))


def spost(op: np.ndarray) -> np.ndarray:
    """Superoperator for right multiplication, row-stacked convention."""
    d = op.shape[0]
    return np.kron(np.eye(d, dtype=complex), op.T)


def dissipator_matrix(c_op: np.ndarray) -> np.ndarray:
    """Superoperator of D[c] rho = c rho c^dag - 1/2 {c^dag c, rho}."""
    cdc = c_op.conj().T @ c_op
    return (
        np.kron(c_op, c_op.conj())
        - 0.5 * (spre(cdc) + spost(cdc))
    )


@dataclass
class Liouvillian:
    """Dense generator of the master equation, d(vec rho)/dt = matrix @ vec rho.

    ``vec`` is row-major (C-order) flattening.  ``collapse`` holds the
    (rate, operator) channels the generator was assembled from.
    """

    matrix: np.ndarray
    space: HilbertSpace
    hamiltonian: np.ndarray
    collapse: tuple = ()

    @property
    def dim(self) -> int:
        return self.space.dim

    def apply(self, rho: np.ndarray) -> np.ndarray:
        d = self.dim
        return (self.matrix @ rho.reshape(-1)).reshape(d, d)


def hamiltonian_superoperator(h: np.ndarray) -> np.ndarray:
    """-i [H, .] as a matrix on row-stacked density operators."""
    return -1j * (spre(h) - spost(h))


def build_liouvillian(
    params: SystemParams,
    space: HilbertSpace,
    hamiltonian: np.ndarray | None = None,
) -> Liouvillian:
    """Assemble the Lindblad generator for the standard channel set.

    ``hamiltonian`` defaults to :func:`build_hamiltonian` on the same
    parameters; pass one explicitly to reuse a precomputed matrix.
    """
    if hamiltonian is None:
        hamiltonian = build_hamiltonian(params, space)
    if hamiltonian.shape != (space.dim, space.dim):
        raise ValueError("hamiltonian dimension does not match space")

    channels = (
        (params.kappa, space.a_h),
        (params.kappa, space.a_v),
        (params.gamma_par, space.sigma_x),
        (params.gamma_par, space.sigma_y),
        (2.0 * params.gamma_star, space.excited_projector),
    )
    mat = hamiltonian_superoperator(hamiltonian)
    for rate, c_op in channels:
        if rate != 0.0:
            mat = mat + rate * dissipator_matrix(c_op)
    return Liouvillian(matrix=mat, space=space, hamiltonian=hamiltonian,
                       collapse=channels)


# ---------------------------------------------------------------------------
# steady state


RESIDUAL_RTOL = 1e-9
RCOND_FLOOR = 1e-13


def _trace_row_system(matrix: np.ndarray, dim: int):
    """Replace row 0 with a scaled trace constraint; returns (A, b, weight)."""
    a = matrix.copy()
    weight = np.mean(np.abs(np.diag(matrix)))
    if weight == 0.0:
        weight = 1.0
    a[0, :] = 0.0
    a[0, :: dim + 1] = weight
    b = np.zeros(dim * dim, dtype=complex)
    b[0] = weight
    return a, b


def steady_state(liouvillian: Liouvillian) -> DensityMatrix:
    """Unique steady state of the generator.

    Solves L vec(rho) = 0 with the trace normalization replacing one row of
    the (singular) generator.  Raises :class:`SteadyStateError` when the
    kernel is degenerate (reciprocal condition estimate below 1e-13) or the
    residual ‖L[rho]‖_F exceeds 1e-9 ‖L‖_F.
    """
    dim = liouvillian.dim
    a, b = _trace_row_system(liouvillian.matrix, dim)

    try:
        with warnings.catch_warnings():
            # exact singularity is reported through rcond below
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            lu, piv = scipy.linalg.lu_factor(a, check_finite=False)
    except scipy.linalg.LinAlgError as exc:  # pragma: no cover - exact singularity
        raise SteadyStateError("steady-state system is singular") from exc

    gecon = scipy.linalg.get_lapack_funcs("gecon", (a,))
    rcond, info = gecon(lu, np.linalg.norm(a, 1))
    if info != 0 or not np.isfinite(rcond) or rcond < RCOND_FLOOR:
        raise SteadyStateError(
            f"steady state not unique or ill-conditioned (rcond={rcond:.2e}); "
            "check that every mode has a nonzero decay channel"
        )

    x = scipy.linalg.lu_solve((lu, piv), b, check_finite=False)
    rho = x.reshape(dim, dim)
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho).real

    residual = np.linalg.norm(liouvillian.apply(rho))
    scale = np.linalg.norm(liouvillian.matrix)
    if residual > RESIDUAL_RTOL * scale:
        raise SteadyStateError(
            f"steady-state residual {residual:.3e} exceeds "
            f"{RESIDUAL_RTOL:.0e} * ||L|| = {RESIDUAL_RTOL * scale:.3e}"
        )

    return DensityMatrix(rho, liouvillian.space).validate()


# ---------------------------------------------------------------------------
# time evolution


TRACE_DRIFT_TOL = 1e-8


def _check_time_grid(t_grid: np.ndarray) -> np.ndarray:
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size < 1:
        raise ValueError("time grid must be a 1-d array")
    if t[0] != 0.0:
        raise ValueError("time grid must start at 0")
    if t.size > 1 and np.any(np.diff(t) <= 0):
        raise ValueError("time grid must be strictly increasing")
    return t


def propagate(
    liouvillian: Liouvillian, operator: np.ndarray, t_grid: Sequence[float]
) -> list[np.ndarray]:
    """Propagate an arbitrary operator under exp(L t) on a time grid.

    Exact matrix-exponential stepping: one expm per distinct step size
    (uniform grids therefore cost a single expm).  No trace or positivity
    checks — see :func:`evolve` for the density-matrix front end.
    """
    t = _check_time_grid(t_grid)
    operator = np.asarray(operator, dtype=complex)
    dim = liouvillian.dim
    if operator.shape != (dim, dim):
        raise ValueError("operator dimension does not match the Liouvillian")

    propagators: dict[float, np.ndarray] = {}
    out = [operator.copy()]
    vec = operator.reshape(-1)
    for dt in np.diff(t):
        key = round(float(dt), 12)
        if key not in propagators:
            try:
                propagators[key] = scipy.linalg.expm(liouvillian.matrix * dt)
            except (ValueError, scipy.linalg.LinAlgError) as exc:
                raise EvolutionError(f"propagator for dt={dt} failed") from exc
        vec = propagators[key] @ vec
        if not np.all(np.isfinite(vec)):
            raise EvolutionError("time evolution produced non-finite values")
        out.append(vec.reshape(dim, dim))
    return out


def evolve(
    liouvillian: Liouvillian, rho0: DensityMatrix, t_grid: Sequence[float]
) -> list[DensityMatrix]:
    """Evolve a density matrix; returns validated states at each grid time.

    Trace drift beyond 1e-8 raises :class:`EvolutionError` (accuracy is
    never silently degraded); surviving roundoff is projected out before
    validation.
    """
    mats = propagate(liouvillian, rho0.matrix, t_grid)
    space = liouvillian.space
    states = []
    for t, m in zip(np.asarray(t_grid, dtype=float), mats):
        drift = abs(np.trace(m).real - 1.0)
        if drift > TRACE_DRIFT_TOL:
            raise EvolutionError(
                f"trace drift {drift:.3e} at t={t} exceeds {TRACE_DRIFT_TOL:.0e}"
            )
        m = 0.5 * (m + m.conj().T)
        m = m / np.trace(m).real
        states.append(DensityMatrix(m, space).validate())
    return states
