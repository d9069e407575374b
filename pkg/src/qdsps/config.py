"""INI run configuration: typed sections with exact round-trip serialization.

Sections and keys:

    [system]    g, kappa, gamma_par, gamma_star (ns^-1); f_cav_h, f_cav_v,
                f_qd_x, f_qd_y (GHz); phi_deg (degrees) — all required
    [drive]     amplitude (ns^-1), f_laser (GHz), theta_deg, delta_deg
    [space]     n_fock
    [detector]  weight, tau1, tau2 (ns) — optional section
    [splitters] r, t, visibility — optional section
    [scan]      f_start, f_stop, f_points; tau_max, tau_points;
                v_start, v_stop, v_points (optional voltage axis);
                stark_x_v_ref, stark_x_f_ref, stark_x_slope and the
                stark_y_* triple (optional tuning lines)

Unknown sections or keys are rejected.  Floats are serialized with
``repr`` so that parse -> serialize -> parse is the identity.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field, replace

import numpy as np

from .qed import SystemParams
from .observables import DetectorResponse
from .hom import SplitterParams
from .device import StarkMap

__all__ = [
    "ConfigError",
    "ScanGrid",
    "RunConfig",
    "default_config",
    "loads",
    "dumps",
    "load",
    "save",
]


class ConfigError(ValueError):
    """Raised for malformed, incomplete, or out-of-range configuration."""


@dataclass(frozen=True)
class ScanGrid:
    """Frequency / delay / voltage grids for scans.

    The voltage axis and the Stark lines are optional; commands that need
    them raise :class:`ConfigError` when absent.
    """

    f_start: float = -25.0
    f_stop: float = 25.0
    f_points: int = 201
    tau_max: float = 10.0
    tau_points: int = 401
    v_start: float | None = None
    v_stop: float | None = None
    v_points: int | None = None
    stark_x: StarkMap | None = None
    stark_y: StarkMap | None = None

    def __post_init__(self):
        if not self.f_stop > self.f_start:
            raise ConfigError("scan: f_stop must exceed f_start")
        if self.f_points < 2:
            raise ConfigError("scan: f_points must be >= 2")
        if not self.tau_max > 0:
            raise ConfigError("scan: tau_max must be > 0")
        if self.tau_points < 2:
            raise ConfigError("scan: tau_points must be >= 2")
        volt = (self.v_start, self.v_stop, self.v_points)
        if any(v is not None for v in volt) and any(v is None for v in volt):
            raise ConfigError("scan: v_start, v_stop, v_points must appear together")
        if self.v_points is not None:
            if not self.v_stop > self.v_start:
                raise ConfigError("scan: v_stop must exceed v_start")
            if self.v_points < 2:
                raise ConfigError("scan: v_points must be >= 2")

    def frequencies(self) -> np.ndarray:
        return np.linspace(self.f_start, self.f_stop, self.f_points)

    def tau_grid(self) -> np.ndarray:
        return np.linspace(0.0, self.tau_max, self.tau_points)

    def voltages(self) -> np.ndarray:
        if self.v_points is None:
            raise ConfigError("scan: voltage axis not configured")
        return np.linspace(self.v_start, self.v_stop, self.v_points)


@dataclass(frozen=True)
class RunConfig:
    """Full run configuration assembled from the typed pieces."""

    params: SystemParams
    n_fock: int = 3
    detector: DetectorResponse | None = None
    splitters: SplitterParams | None = None
    scan: ScanGrid = field(default_factory=ScanGrid)

    def __post_init__(self):
        if self.n_fock < 2:
            raise ConfigError("space: n_fock must be >= 2")


def default_config() -> RunConfig:
    """Reference-device configuration used by config-file generation."""
    return RunConfig(params=SystemParams.reference_device())


_SYSTEM_KEYS = (
    "g",
    "kappa",
    "gamma_par",
    "gamma_star",
    "f_cav_h",
    "f_cav_v",
    "f_qd_x",
    "f_qd_y",
    "phi_deg",
)
_DRIVE_KEYS = {
    "amplitude": "drive_amplitude",
    "f_laser": "f_laser",
    "theta_deg": "drive_theta_deg",
    "delta_deg": "drive_delta_deg",
}
_SCAN_FLOAT_KEYS = ("f_start", "f_stop", "tau_max", "v_start", "v_stop")
_SCAN_INT_KEYS = ("f_points", "tau_points", "v_points")
_STARK_SUFFIXES = ("v_ref", "f_ref", "slope")
_SCAN_KEYS = (
    _SCAN_FLOAT_KEYS
    + _SCAN_INT_KEYS
    + tuple(f"stark_x_{s}" for s in _STARK_SUFFIXES)
    + tuple(f"stark_y_{s}" for s in _STARK_SUFFIXES)
)
_SECTIONS = ("system", "drive", "space", "detector", "splitters", "scan")


def _get_float(section, sect_name, key):
    raw = section[key]
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"[{sect_name}] {key}: not a number: {raw!r}") from None


def _get_int(section, sect_name, key):
    raw = section[key]
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"[{sect_name}] {key}: not an integer: {raw!r}") from None


def _check_keys(section, sect_name, allowed):
    unknown = set(section) - set(allowed)
    if unknown:
        raise ConfigError(f"[{sect_name}]: unknown keys {sorted(unknown)}")


def loads(text: str) -> RunConfig:
    """Parse configuration text into a validated :class:`RunConfig`."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None

    unknown_sections = set(parser.sections()) - set(_SECTIONS)
    if unknown_sections:
        raise ConfigError(f"unknown sections {sorted(unknown_sections)}")
    if not parser.has_section("system"):
        raise ConfigError("missing required section [system]")

    sys_sect = parser["system"]
    _check_keys(sys_sect, "system", _SYSTEM_KEYS)
    missing = set(_SYSTEM_KEYS) - set(sys_sect)
    if missing:
        raise ConfigError(f"[system]: missing keys {sorted(missing)}")
    kwargs = {k: _get_float(sys_sect, "system", k) for k in _SYSTEM_KEYS}

    if parser.has_section("drive"):
        drv = parser["drive"]
        _check_keys(drv, "drive", _DRIVE_KEYS)
        for key, attr in _DRIVE_KEYS.items():
            if key in drv:
                kwargs[attr] = _get_float(drv, "drive", key)

    try:
        params = SystemParams(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    n_fock = 3
    if parser.has_section("space"):
        sp = parser["space"]
        _check_keys(sp, "space", ("n_fock",))
        if "n_fock" in sp:
            n_fock = _get_int(sp, "space", "n_fock")

    detector = None
    if parser.has_section("detector"):
        det = parser["detector"]
        _check_keys(det, "detector", ("weight", "tau1", "tau2"))
        missing = {"weight", "tau1", "tau2"} - set(det)
        if missing:
            raise ConfigError(f"[detector]: missing keys {sorted(missing)}")
        try:
            detector = DetectorResponse(
                weight=_get_float(det, "detector", "weight"),
                tau1=_get_float(det, "detector", "tau1"),
                tau2=_get_float(det, "detector", "tau2"),
            )
        except ValueError as exc:
            raise ConfigError(f"[detector]: {exc}") from None

    splitters = None
    if parser.has_section("splitters"):
        spl = parser["splitters"]
        _check_keys(spl, "splitters", ("r", "t", "visibility"))
        missing = {"r", "t"} - set(spl)
        if missing:
            raise ConfigError(f"[splitters]: missing keys {sorted(missing)}")
        try:
            splitters = SplitterParams(
                r=_get_float(spl, "splitters", "r"),
                t=_get_float(spl, "splitters", "t"),
                visibility=_get_float(spl, "splitters", "visibility")
                if "visibility" in spl
                else 1.0,
            )
        except ValueError as exc:
            raise ConfigError(f"[splitters]: {exc}") from None

    scan_kwargs = {}
    if parser.has_section("scan"):
        sc = parser["scan"]
        _check_keys(sc, "scan", _SCAN_KEYS)
        for k in _SCAN_FLOAT_KEYS:
            if k in sc:
                scan_kwargs[k] = _get_float(sc, "scan", k)
        for k in _SCAN_INT_KEYS:
            if k in sc:
                scan_kwargs[k] = _get_int(sc, "scan", k)
        for axis in ("x", "y"):
            keys = [f"stark_{axis}_{s}" for s in _STARK_SUFFIXES]
            present = [k for k in keys if k in sc]
            if present and len(present) != 3:
                raise ConfigError(
                    f"[scan]: stark_{axis}_* needs all of {keys}"
                )
            if len(present) == 3:
                scan_kwargs[f"stark_{axis}"] = StarkMap(
                    v_ref=_get_float(sc, "scan", keys[0]),
                    f_ref=_get_float(sc, "scan", keys[1]),
                    slope=_get_float(sc, "scan", keys[2]),
                )
    scan = ScanGrid(**scan_kwargs)

    return RunConfig(
        params=params,
        n_fock=n_fock,
        detector=detector,
        splitters=splitters,
        scan=scan,
    )


def _r(x) -> str:
    """repr of a builtin float: exact round-trip, numpy scalars coerced."""
    return repr(float(x))


def dumps(config: RunConfig) -> str:
    """Serialize to INI text; floats use ``repr`` for exact round-trips."""
    parser = configparser.ConfigParser(interpolation=None)
    p = config.params
    parser["system"] = {k: _r(getattr(p, k)) for k in _SYSTEM_KEYS}
    parser["drive"] = {
        key: _r(getattr(p, attr)) for key, attr in _DRIVE_KEYS.items()
    }
    parser["space"] = {"n_fock": str(int(config.n_fock))}
    if config.detector is not None:
        d = config.detector
        parser["detector"] = {
            "weight": _r(d.weight),
            "tau1": _r(d.tau1),
            "tau2": _r(d.tau2),
        }
    if config.splitters is not None:
        s = config.splitters
        parser["splitters"] = {
            "r": _r(s.r),
            "t": _r(s.t),
            "visibility": _r(s.visibility),
        }
    sc = config.scan
    scan_out = {
        "f_start": _r(sc.f_start),
        "f_stop": _r(sc.f_stop),
        "f_points": str(int(sc.f_points)),
        "tau_max": _r(sc.tau_max),
        "tau_points": str(int(sc.tau_points)),
    }
    if sc.v_points is not None:
        scan_out["v_start"] = _r(sc.v_start)
        scan_out["v_stop"] = _r(sc.v_stop)
        scan_out["v_points"] = str(int(sc.v_points))
    for axis in ("x", "y"):
        line = getattr(sc, f"stark_{axis}")
        if line is not None:
            scan_out[f"stark_{axis}_v_ref"] = _r(line.v_ref)
            scan_out[f"stark_{axis}_f_ref"] = _r(line.f_ref)
            scan_out[f"stark_{axis}_slope"] = _r(line.slope)
    parser["scan"] = scan_out

    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def load(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return loads(fh.read())


def save(config: RunConfig, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(config))
