"""Command-line front end.

Subcommands map one-to-one onto the library layers: ``spectrum`` and ``g2``
drive the master-equation solvers, ``hom`` the two-photon interference
statistics, ``fit`` the staged parameter extraction, ``utils`` the
closed-form device figures, and ``init-config`` writes a reference
configuration to start from.

Exit codes: 0 success, 2 configuration/usage error, 3 numerical failure,
4 fit non-convergence (the report is still produced).  All output is
deterministic: identical config, flags, and seed give byte-identical
tables.
"""

from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from . import config as config_mod
from .config import ConfigError, RunConfig
from .device import (
    GaussianMode,
    StarkMap,
    brightness,
    cooperativity,
    coupling_efficiency,
    purcell,
)
from .fitting import (
    fit_cavity_stage,
    fit_detector_response,
    fit_qd_stage,
    fit_saturation,
)
from .hom import (
    CorrelationHistogram,
    PulseTrain,
    SplitterParams,
    delay_table,
    extract_indistinguishability,
    fit_double_exponential_peaks,
    monte_carlo_hom,
    predict_peak_areas,
    pulsed_g2_from_histogram,
)
from .observables import (
    detector_convolve,
    fallback_detector_response,
    g2_cw,
    transmission_spectrum,
)
from .qed import (
    EvolutionError,
    HilbertSpace,
    PolarizationProjector,
    SteadyStateError,
    SystemParams,
)
from .tables import DataTable, format_float

__all__ = ["main"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_NO_CONVERGENCE = 4


class _CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_CONFIG):
        super().__init__(message)
        self.code = code


def _load_config(path: str) -> RunConfig:
    try:
        return config_mod.load(path)
    except FileNotFoundError:
        raise _CliError(f"config file not found: {path}") from None
    except ConfigError as exc:
        raise _CliError(f"config: {exc}") from None


def _parse_projector(spec: str) -> PolarizationProjector | None:
    if spec.lower() == "none":
        return None
    if spec.upper() == "H":
        return PolarizationProjector.h()
    if spec.upper() == "V":
        return PolarizationProjector.v()
    try:
        angle = float(spec)
    except ValueError:
        raise _CliError(
            f"projector must be H, V, none, or an angle in degrees, got {spec!r}"
        ) from None
    return PolarizationProjector(theta=math.radians(angle))


def _emit(table: DataTable, output: str | None) -> None:
    text = table.to_csv()
    if output is None:
        sys.stdout.write(text)
    else:
        with open(output, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _report(lines, output: str | None = None) -> None:
    text = "".join(f"{ln}\n" for ln in lines)
    sys.stdout.write(text)
    if output is not None:
        with open(output, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _fmt_pair(name: str, value: float, sigma: float | None) -> str:
    if sigma is None or not np.isfinite(sigma):
        return f"{name} = {format_float(value)}"
    return f"{name} = {format_float(value)} +/- {format_float(sigma)}"


def _read_table(path: str, required_columns) -> DataTable:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            table = DataTable.from_csv(fh.read())
    except FileNotFoundError:
        raise _CliError(f"input file not found: {path}") from None
    except ValueError as exc:
        raise _CliError(f"{path}: {exc}") from None
    missing = [c for c in required_columns if c not in table.columns]
    if missing:
        raise _CliError(
            f"{path}: missing columns {missing}; found {list(table.columns)}"
        )
    return table


# ---------------------------------------------------------------------------
# spectrum


def cmd_spectrum(args) -> int:
    cfg = _load_config(args.config)
    projector = _parse_projector(args.projector)
    space = HilbertSpace(cfg.n_fock)
    freqs = cfg.scan.frequencies()

    if args.scan == "freq":
        spec = transmission_spectrum(cfg.params, space, projector, freqs)
        table = DataTable.from_columns(
            freq_ghz=spec.freq_ghz, transmission=spec.transmission
        )
    else:  # voltage-map
        if cfg.scan.stark_x is None or cfg.scan.stark_y is None:
            raise _CliError("voltage map needs stark_x_* and stark_y_* in [scan]")
        voltages = cfg.scan.voltages()
        rows_f, rows_t, rows_v = [], [], []
        for v in voltages:
            p = SystemParams(
                **{
                    **{k: getattr(cfg.params, k) for k in (
                        "g", "kappa", "gamma_par", "gamma_star",
                        "f_cav_h", "f_cav_v", "phi_deg",
                        "drive_amplitude", "f_laser",
                        "drive_theta_deg", "drive_delta_deg",
                    )},
                    "f_qd_x": cfg.scan.stark_x.frequency(v),
                    "f_qd_y": cfg.scan.stark_y.frequency(v),
                }
            )
            spec = transmission_spectrum(p, space, projector, freqs)
            rows_f.append(spec.freq_ghz)
            rows_t.append(spec.transmission)
            rows_v.append(np.full(freqs.size, v))
        table = DataTable.from_columns(
            voltage_v=np.concatenate(rows_v),
            freq_ghz=np.concatenate(rows_f),
            transmission=np.concatenate(rows_t),
        )
    _emit(table, args.output)
    return EXIT_OK


# ---------------------------------------------------------------------------
# g2


def _resolve_detector(cfg: RunConfig, choice: str):
    if choice == "none":
        return None
    if choice == "fallback":
        return fallback_detector_response()
    if cfg.detector is None:
        raise _CliError(
            "convolution requested but the config has no [detector] section; "
            "use --detector fallback or --detector none"
        )
    return cfg.detector


def cmd_g2(args) -> int:
    if args.mode == "cw":
        cfg = _load_config(args.config)
        response = _resolve_detector(cfg, args.detector)
        projector = _parse_projector(args.projector)
        if projector is None:
            raise _CliError("cw correlation needs a polarized detection path")
        space = HilbertSpace(cfg.n_fock)
        curve = g2_cw(cfg.params, space, projector, cfg.scan.tau_grid())
        columns = {"tau_ns": curve.tau_ns, "g2_raw": curve.values}
        if response is not None:
            columns["g2_convolved"] = detector_convolve(curve, response).values
        _emit(DataTable.from_columns(**columns), args.output)
        return EXIT_OK

    # pulsed-analyze
    if args.input is None:
        raise _CliError("--mode pulsed-analyze requires --input histogram CSV")
    table = _read_table(args.input, ("tau_ns", "counts"))
    hist = CorrelationHistogram(
        bin_centers=table.column("tau_ns"), counts=table.column("counts")
    )
    try:
        result = pulsed_g2_from_histogram(
            hist, rep_period=args.rep_period, window=args.window
        )
    except ValueError as exc:
        raise _CliError(f"histogram analysis: {exc}", EXIT_NUMERICAL) from None
    _report(
        [
            _fmt_pair("g2_zero", result.value, result.sigma),
            f"center_counts = {format_float(result.center_counts)}",
            f"side_counts_mean = "
            f"{format_float(float(np.mean(result.side_counts)))}",
        ],
        args.output,
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# hom


def _splitters_from(args, cfg: RunConfig | None) -> SplitterParams:
    r, t, vis = args.r, args.t, args.visibility
    if cfg is not None and cfg.splitters is not None:
        base = cfg.splitters
        r = base.r if r is None else r
        t = base.t if t is None else t
        vis = base.visibility if vis is None else vis
    if r is None and t is None:
        r = t = 0.5
    elif r is None:
        r = 1.0 - t
    elif t is None:
        t = 1.0 - r
    if vis is None:
        vis = 1.0
    try:
        return SplitterParams(r=r, t=t, visibility=vis)
    except ValueError as exc:
        raise _CliError(f"splitters: {exc}") from None


def _hom_analyze(hist: CorrelationHistogram, train: PulseTrain, mz: float,
                 split: SplitterParams, g2_zero: float):
    table = delay_table(train, mz)
    delays = sorted({0.0} | {d for d in table.delays() if d > 0})
    centers = sorted({s * d for d in delays for s in (+1.0, -1.0)})
    fit = fit_double_exponential_peaks(hist, centers)
    area0 = fit.area_at(0.0)
    area_mz = fit.area_at(+mz) + fit.area_at(-mz)
    if area_mz <= 0:
        raise _CliError("side peaks at the interferometer delay are empty",
                        EXIT_NUMERICAL)
    ratio = area0 / area_mz
    result = extract_indistinguishability(ratio, g2_zero, split)
    return fit, ratio, result


def cmd_hom(args) -> int:
    cfg = _load_config(args.config) if args.config else None
    split = _splitters_from(args, cfg)
    modes = [m for m, on in (("--ratio", args.ratio is not None),
                             ("--input", args.input is not None),
                             ("--simulate", args.simulate)) if on]
    if len(modes) != 1:
        raise _CliError("choose exactly one of --ratio, --input, --simulate")

    if args.ratio is not None:
        result = extract_indistinguishability(
            args.ratio,
            args.g2_zero,
            split,
            area_ratio_sigma=args.ratio_sigma,
            g2_zero_sigma=args.g2_zero_sigma,
        )
        _report([_fmt_pair("indistinguishability", result.value, result.sigma)],
                args.output)
        return EXIT_OK

    train = PulseTrain(times=(0.0, args.pulse_gap), period=args.period)
    mz = args.mz_delay if args.mz_delay is not None else args.pulse_gap

    if args.input is not None:
        table = _read_table(args.input, ("tau_ns", "counts"))
        hist = CorrelationHistogram(
            bin_centers=table.column("tau_ns"), counts=table.column("counts")
        )
        fit, ratio, result = _hom_analyze(hist, train, mz, split, args.g2_zero)
        lines = [_fmt_pair("indistinguishability", result.value, result.sigma),
                 f"area_ratio = {format_float(ratio)}",
                 f"fit_converged = {fit.converged}"]
        _report(lines, args.output)
        return EXIT_OK if fit.converged else EXIT_NO_CONVERGENCE

    # --simulate
    if not 0.0 <= args.m <= 1.0:
        raise _CliError("--m must lie in [0, 1]")
    hist = monte_carlo_hom(
        train,
        split,
        m_overlap=args.m,
        g2_zero=args.g2_zero,
        n_periods=args.n_periods,
        seed=args.seed,
        emission_tau=args.emission_tau,
    )
    if args.histogram_output is not None:
        _emit(
            DataTable.from_columns(tau_ns=hist.bin_centers, counts=hist.counts),
            args.histogram_output,
        )
    fit, ratio, result = _hom_analyze(hist, train, mz, split, args.g2_zero)
    predicted = predict_peak_areas(
        delay_table(train, mz), split, m_overlap=args.m, g2_zero=args.g2_zero
    )
    lines = [_fmt_pair("indistinguishability", result.value, result.sigma),
             f"area_ratio = {format_float(ratio)}",
             f"fit_converged = {fit.converged}",
             "predicted_relative_areas:"]
    lines += [f"  delay_{format_float(d)} = {format_float(a)}"
              for d, a in sorted(predicted.areas.items())]
    _report(lines, args.output)
    return EXIT_OK if fit.converged else EXIT_NO_CONVERGENCE


# ---------------------------------------------------------------------------
# fit


def cmd_fit(args) -> int:
    cfg = _load_config(args.config)
    lines = [f"stage = {args.stage}"]

    if args.stage == "cavity":
        table = _read_table(args.data, ("freq_ghz", "transmission"))
        res = fit_cavity_stage(
            table.column("freq_ghz"), table.column("transmission"), cfg.params
        )
        new_cfg = RunConfig(
            params=res.params,
            n_fock=cfg.n_fock,
            detector=cfg.detector,
            splitters=cfg.splitters,
            scan=cfg.scan,
        )
        for name in ("f_cav_h", "cavity_splitting", "kappa", "scale"):
            lines.append(_fmt_pair(name, getattr(res, name), res.sigma[name]))
        converged = res.fit.converged
    elif args.stage == "qd":
        table = _read_table(args.data, ("freq_ghz", "transmission"))
        res = fit_qd_stage(
            table.column("freq_ghz"),
            table.column("transmission"),
            cfg.params,
            HilbertSpace(cfg.n_fock),
        )
        new_cfg = RunConfig(
            params=res.params,
            n_fock=cfg.n_fock,
            detector=cfg.detector,
            splitters=cfg.splitters,
            scan=cfg.scan,
        )
        for name in ("g", "gamma_par", "gamma_star", "qd_splitting", "phi_deg"):
            lines.append(_fmt_pair(name, getattr(res, name),
                                   res.sigma.get(name)))
        converged = res.fit.converged
    elif args.stage == "saturation":
        table = _read_table(args.data, ("power", "rate"))
        g2_vals = table.column("g2") if "g2" in table.columns else None
        res = fit_saturation(table.column("power"), table.column("rate"), g2_vals)
        new_cfg = cfg
        for name in ("r_max", "p_sat", "c_leak"):
            lines.append(_fmt_pair(name, getattr(res.model, name),
                                   res.sigma[name]))
        if g2_vals is not None:
            lines.append(_fmt_pair("g2_single", res.g2_single,
                                   res.sigma["g2_single"]))
        if res.degenerate:
            lines.append("degenerate = True")
        converged = res.fit.converged
    else:  # detector
        table = _read_table(args.data, ("tau_ns", "counts"))
        res = fit_detector_response(table.column("tau_ns"), table.column("counts"))
        new_cfg = RunConfig(
            params=cfg.params,
            n_fock=cfg.n_fock,
            detector=res.response,
            splitters=cfg.splitters,
            scan=cfg.scan,
        )
        for name in ("weight", "tau1", "tau2"):
            lines.append(_fmt_pair(name, getattr(res.response, name),
                                   res.sigma[name]))
        lines.append(_fmt_pair("scale", res.scale, res.sigma["scale"]))
        if res.degenerate:
            lines.append("degenerate = True")
        converged = res.fit.converged

    lines.append(f"converged = {converged}")
    lines.append(f"residual_norm = {format_float(res.fit.residual_norm)}")
    _report(lines, args.report)
    if args.output_config is not None:
        config_mod.save(new_cfg, args.output_config)
    return EXIT_OK if converged else EXIT_NO_CONVERGENCE


# ---------------------------------------------------------------------------
# utils


def cmd_utils(args) -> int:
    if args.util == "coupling":
        try:
            eta = coupling_efficiency(
                GaussianMode(args.values[0]), GaussianMode(args.values[1]),
                args.values[2] if len(args.values) > 2 else 0.0,
            )
        except (ValueError, IndexError) as exc:
            raise _CliError(f"coupling: {exc}") from None
        _report([f"coupling_efficiency = {format_float(eta)}"])
    elif args.util == "cooperativity":
        if len(args.values) != 4:
            raise _CliError("cooperativity needs: g kappa gamma_par gamma_star")
        try:
            c = cooperativity(*args.values)
        except ValueError as exc:
            raise _CliError(f"cooperativity: {exc}") from None
        _report([f"cooperativity = {format_float(c)}"])
    elif args.util == "purcell":
        if len(args.values) != 1:
            raise _CliError("purcell needs: cooperativity")
        try:
            fp = purcell(args.values[0])
        except ValueError as exc:
            raise _CliError(f"purcell: {exc}") from None
        _report([f"purcell_factor = {format_float(fp)}"])
    else:  # brightness
        if len(args.values) != 3:
            raise _CliError("brightness needs: detected_rate rep_rate efficiency")
        try:
            b = brightness(*args.values)
        except ValueError as exc:
            raise _CliError(f"brightness: {exc}") from None
        _report([f"photons_per_pulse = {format_float(b)}"])
    return EXIT_OK


def cmd_init_config(args) -> int:
    cfg = config_mod.default_config()
    text = config_mod.dumps(cfg)
    if args.output is None:
        sys.stdout.write(text)
    else:
        with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qdsps",
        description="Cavity-QED single-photon source: spectra, correlations, "
        "two-photon interference analysis, and parameter fitting.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_spec = sub.add_parser("spectrum", help="transmission spectra and maps")
    p_spec.add_argument("--config", required=True)
    p_spec.add_argument("--scan", choices=("freq", "voltage-map"), default="freq")
    p_spec.add_argument("--projector", default="none",
                        help="H, V, none, or detection angle in degrees")
    p_spec.add_argument("--output", default=None, help="CSV path (default stdout)")
    p_spec.set_defaults(func=cmd_spectrum)

    p_g2 = sub.add_parser("g2", help="second-order correlation")
    p_g2.add_argument("--config", default=None)
    p_g2.add_argument("--mode", choices=("cw", "pulsed-analyze"), default="cw")
    p_g2.add_argument("--projector", default="H")
    p_g2.add_argument("--detector", choices=("config", "fallback", "none"),
                      default="config",
                      help="timing-response source for the convolved column")
    p_g2.add_argument("--input", default=None, help="histogram CSV (pulsed)")
    p_g2.add_argument("--rep-period", type=float, default=12.5)
    p_g2.add_argument("--window", type=float, default=None)
    p_g2.add_argument("--output", default=None)
    p_g2.set_defaults(func=cmd_g2)

    p_hom = sub.add_parser("hom", help="two-photon interference analysis")
    p_hom.add_argument("--config", default=None)
    p_hom.add_argument("--ratio", type=float, default=None,
                       help="measured center/side peak-area ratio")
    p_hom.add_argument("--ratio-sigma", type=float, default=None)
    p_hom.add_argument("--input", default=None, help="histogram CSV")
    p_hom.add_argument("--simulate", action="store_true")
    p_hom.add_argument("--g2-zero", type=float, default=0.0)
    p_hom.add_argument("--g2-zero-sigma", type=float, default=None)
    p_hom.add_argument("--m", type=float, default=1.0,
                       help="overlap for --simulate")
    p_hom.add_argument("--n-periods", type=int, default=200000)
    p_hom.add_argument("--seed", type=int, default=0)
    p_hom.add_argument("--emission-tau", type=float, default=0.17)
    p_hom.add_argument("--period", type=float, default=12.5)
    p_hom.add_argument("--pulse-gap", type=float, default=5.2)
    p_hom.add_argument("--mz-delay", type=float, default=None,
                       help="interferometer delay (default: pulse gap)")
    p_hom.add_argument("--r", type=float, default=None)
    p_hom.add_argument("--t", type=float, default=None)
    p_hom.add_argument("--visibility", type=float, default=None)
    p_hom.add_argument("--output", default=None)
    p_hom.add_argument("--histogram-output", default=None,
                       help="CSV path for the simulated histogram")
    p_hom.set_defaults(func=cmd_hom)

    p_fit = sub.add_parser("fit", help="staged parameter fits")
    p_fit.add_argument("--stage", required=True,
                       choices=("cavity", "qd", "saturation", "detector"))
    p_fit.add_argument("--data", required=True, help="input CSV")
    p_fit.add_argument("--config", required=True)
    p_fit.add_argument("--output-config", default=None,
                       help="write config updated with fitted values")
    p_fit.add_argument("--report", default=None, help="also write report here")
    p_fit.set_defaults(func=cmd_fit)

    p_utils = sub.add_parser("utils", help="closed-form device figures")
    p_utils.add_argument("util", choices=("coupling", "cooperativity",
                                          "purcell", "brightness"))
    p_utils.add_argument("values", type=float, nargs="+")
    p_utils.set_defaults(func=cmd_utils)

    p_init = sub.add_parser("init-config",
                            help="write a reference-device configuration")
    p_init.add_argument("--output", default=None)
    p_init.set_defaults(func=cmd_init_config)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SteadyStateError, EvolutionError) as exc:
        print(f"error: numerical: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
