"""Two-photon interference statistics for a pulsed single-photon source.

The source emits pairs of pulses (delay ``pulse_delay`` inside a repetition
period) into an unbalanced Mach-Zehnder interferometer whose long arm adds
``mz_delay``; coincidences between the two output detectors form a
correlation histogram whose peak at zero delay is suppressed by two-photon
interference.  This module provides

- the table of photon-pair delays and interferometer path combinations,
- predicted relative peak areas including the interference suppression and
  a same-pulse multi-photon contamination term,
- the inverse problem (indistinguishability M from a measured area ratio),
- pulsed-excitation g2(0) peak integration,
- a double-exponential multi-peak fitter for measured histograms,
- a Monte Carlo sampler of the identical event model.

Conventions: a photon takes the long arm with probability R (the splitter
reflectivity) and the short arm with probability T = 1 - R; the relative
area of the peak at delay |dt| > 0 collects both signed orderings (+dt and
-dt) while the center peak is a single peak at 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .fitting import FitProblem, minimize

__all__ = [
    "PulseTrain",
    "SplitterParams",
    "DelayTable",
    "CorrelationHistogram",
    "PeakAreas",
    "PeakFit",
    "PulsedG2",
    "IndistinguishabilityResult",
    "delay_table",
    "predict_peak_areas",
    "extract_indistinguishability",
    "pulsed_g2_from_histogram",
    "fit_double_exponential_peaks",
    "monte_carlo_hom",
    "PATHS",
]

PATHS = ("first_long", "both_short", "both_long", "first_short")


# ---------------------------------------------------------------------------
# containers


@dataclass(frozen=True)
class PulseTrain:
    """Excitation pulse times within one repetition period (ns)."""

    times: tuple
    period: float

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        object.__setattr__(self, "times", times)
        if self.period <= 0:
            raise ValueError("period must be > 0")
        if any(t < 0 or t >= self.period for t in times):
            raise ValueError("pulse times must lie in [0, period)")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("pulse times must be strictly increasing")


@dataclass(frozen=True)
class SplitterParams:
    """Interferometer splitter intensity coefficients and setup visibility.

    ``r`` + ``t`` must equal 1 (lossless splitter); ``visibility`` is the
    classical interferometer visibility 1 - epsilon.
    """

    r: float
    t: float
    visibility: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.r < 1.0 or not 0.0 < self.t < 1.0:
            raise ValueError("r and t must lie in (0, 1)")
        if abs(self.r + self.t - 1.0) > 1e-6:
            raise ValueError(f"r + t must equal 1, got {self.r + self.t}")
        if not 0.0 <= self.visibility <= 1.0:
            raise ValueError("visibility must lie in [0, 1]")


@dataclass(frozen=True)
class DelayTable:
    """Pair labels -> raw delay, and (pair, path) -> detected delay (ns)."""

    pair_delays: Mapping[str, float]
    entries: Mapping[str, Mapping[str, float]]
    mz_delay: float

    def delays(self) -> np.ndarray:
        """Sorted unique |detected delay| values."""
        vals = {round(abs(d), 9) for row in self.entries.values() for d in row.values()}
        return np.array(sorted(vals))


@dataclass
class CorrelationHistogram:
    """Uniformly binned coincidence histogram (bin centers in ns)."""

    bin_centers: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        self.bin_centers = np.asarray(self.bin_centers, dtype=float)
        self.counts = np.asarray(self.counts, dtype=float)
        if self.bin_centers.ndim != 1 or self.bin_centers.shape != self.counts.shape:
            raise ValueError("bin_centers and counts must be matching 1-d arrays")
        widths = np.diff(self.bin_centers)
        if self.bin_centers.size >= 2 and not np.allclose(
            widths, widths[0], rtol=1e-6, atol=1e-12
        ):
            raise ValueError("histogram binning must be uniform")
        if np.any(self.counts < 0):
            raise ValueError("counts must be >= 0")

    @property
    def bin_width(self) -> float:
        if self.bin_centers.size < 2:
            raise ValueError("histogram needs at least two bins")
        return float(self.bin_centers[1] - self.bin_centers[0])

    def window_sum(self, center: float, half_width: float) -> float:
        mask = np.abs(self.bin_centers - center) <= half_width
        return float(self.counts[mask].sum())


@dataclass
class PeakAreas:
    """Relative coincidence peak areas keyed by |delay| (ns).

    Off-zero entries collect both signed peaks; ``bunched`` is the weight
    removed from the center peak by two-photon interference (booking it
    keeps the total independent of M).
    """

    areas: dict
    bunched: float

    @property
    def total(self) -> float:
        return float(sum(self.areas.values()) + self.bunched)

    def area(self, delay: float) -> float:
        return self.areas[round(abs(delay), 9)]


@dataclass
class PulsedG2:
    """Pulsed-excitation g2(0) estimate with Poisson error."""

    value: float
    sigma: float
    center_counts: float
    side_counts: tuple


@dataclass
class IndistinguishabilityResult:
    value: float
    sigma: float | None = None


@dataclass
class PeakFit:
    """Result of the multi-peak double-exponential histogram fit.

    Model: sum_k A_k exp(-|t - t_k| / tau_r) (shared tau_r), or per-peak
    tau_k when fitted with ``shared_tau=False``.  ``areas`` are the
    two-sided analytic areas 2 A_k tau_k.
    """

    centers: np.ndarray
    amplitudes: np.ndarray
    tau_r: np.ndarray
    residual_norm: float
    converged: bool

    @property
    def areas(self) -> np.ndarray:
        return 2.0 * self.amplitudes * self.tau_r

    def area_at(self, center: float, atol: float = 1e-6) -> float:
        idx = np.nonzero(np.abs(self.centers - center) <= atol)[0]
        if idx.size != 1:
            raise KeyError(f"no unique fitted peak at {center} ns")
        return float(self.areas[idx[0]])


# ---------------------------------------------------------------------------
# delay table


def delay_table(train: PulseTrain, mz_delay: float) -> DelayTable:
    """Photon-pair delays for a two-pulse train through the interferometer.

    Pairs within two consecutive periods of pulses A (early) and B (late):
    AB and BA' span the pulse gap, AA' and BB' span the full period.  For
    each pair the four path combinations shift the raw delay by
    -mz (first photon long), 0 (both same arm), +mz (first photon short).
    """
    if len(train.times) != 2:
        raise ValueError("delay_table implements the two-pulse excitation scheme")
    if mz_delay < 0:
        raise ValueError("mz_delay must be >= 0")

    t_a, t_b = train.times
    gap = t_b - t_a
    pair_delays = {
        "AB": gap,
        "BA'": train.period - gap,
        "AA'": train.period,
        "BB'": train.period,
    }
    entries = {
        pair: {
            "first_long": raw - mz_delay,
            "both_short": raw,
            "both_long": raw,
            "first_short": raw + mz_delay,
        }
        for pair, raw in pair_delays.items()
    }
    return DelayTable(pair_delays=pair_delays, entries=entries, mz_delay=mz_delay)


# ---------------------------------------------------------------------------
# peak-area prediction


def _path_probability(path: str, split: SplitterParams) -> float:
    r, t = split.r, split.t
    return {
        "both_short": t * t,
        "both_long": r * r,
        "first_long": r * t,
        "first_short": r * t,
    }[path]


def _ordering_factor(path: str, split: SplitterParams) -> float:
    # probability that the pair ends on different detectors, summed over the
    # two signed orderings: same-arm pairs split 2RT, opposite-arm R^2+T^2
    r, t = split.r, split.t
    if path in ("both_short", "both_long"):
        return 2.0 * r * t
    return r * r + t * t


def predict_peak_areas(
    table: DelayTable,
    split: SplitterParams,
    m_overlap: float,
    g2_zero: float,
) -> PeakAreas:
    """Relative coincidence peak areas for the tabulated pair delays.

    Pathway counting: every (pair, path) entry contributes its arm
    probability times the detector-ordering factor at its |delay|.  Entries
    with zero detected delay are two-photon overlaps: interference removes
    2 R T (1-eps)^2 M from their ordering factor (booked in ``bunched``).
    Multi-photon events enter as same-pulse distinguishable pairs with total
    strength ``g2_zero`` per period; they populate the center and the
    ±mz_delay peaks.  The resulting center area equals
    R T (R^2+T^2) (1 + 2 g2) - 2 (1-eps)^2 M R^2 T^2 exactly.
    """
    if not 0.0 <= m_overlap <= 1.0:
        raise ValueError("m_overlap must lie in [0, 1]")
    if g2_zero < 0:
        raise ValueError("g2_zero must be >= 0")

    r, t, vis = split.r, split.t, split.visibility
    areas: dict = {}
    bunched = 0.0

    def add(delay: float, weight: float):
        key = round(abs(delay), 9)
        areas[key] = areas.get(key, 0.0) + weight

    # main pairs: one of each per period, mutually interfering at overlap
    for pair, row in table.entries.items():
        for path, delay in row.items():
            p = _path_probability(path, split)
            factor = _ordering_factor(path, split)
            if abs(delay) < 1e-9 and path in ("first_long", "first_short"):
                suppression = 2.0 * r * t * vis ** 2 * m_overlap
                add(delay, p * (factor - suppression))
                bunched += p * suppression
            else:
                add(delay, p * factor)

    # same-pulse contamination: strength g2_zero per period, no interference
    if g2_zero > 0:
        for path in PATHS:
            p = _path_probability(path, split)
            factor = _ordering_factor(path, split)
            delay = {
                "first_long": -table.mz_delay,
                "both_short": 0.0,
                "both_long": 0.0,
                "first_short": table.mz_delay,
            }[path]
            add(delay, g2_zero * p * factor)

    return PeakAreas(areas=areas, bunched=bunched)


def center_peak_area(split: SplitterParams, m_overlap: float, g2_zero: float) -> float:
    """Closed form for the zero-delay coincidence peak area."""
    r, t, vis = split.r, split.t, split.visibility
    return (
        (r ** 3 * t + t ** 3 * r) * (1.0 + 2.0 * g2_zero)
        - 2.0 * vis ** 2 * m_overlap * r ** 2 * t ** 2
    )


# ---------------------------------------------------------------------------
# indistinguishability extraction


def extract_indistinguishability(
    area_ratio: float,
    g2_zero: float,
    split: SplitterParams,
    *,
    area_ratio_sigma: float | None = None,
    g2_zero_sigma: float | None = None,
    visibility_sigma: float | None = None,
) -> IndistinguishabilityResult:
    """Photon indistinguishability M from the center/side peak-area ratio.

    ``area_ratio`` is A(0) / [A(-pulse_delay) + A(+pulse_delay)].  Inverts
    the peak-area model:

        M = (R^2+T^2)/(2 R T (1-eps)^2) * [(1 + 2 g2) - ratio (2 + 2 g2)]

    Optional 1-sigma input uncertainties are propagated to first order.
    """
    r, t, vis = split.r, split.t, split.visibility
    if vis <= 0:
        raise ValueError("visibility must be > 0 to extract M")
    k = (r * r + t * t) / (2.0 * r * t)
    bracket = (1.0 + 2.0 * g2_zero) - area_ratio * (2.0 + 2.0 * g2_zero)
    value = k / vis ** 2 * bracket

    sigmas = []
    if area_ratio_sigma is not None:
        sigmas.append(-k / vis ** 2 * (2.0 + 2.0 * g2_zero) * area_ratio_sigma)
    if g2_zero_sigma is not None:
        sigmas.append(k / vis ** 2 * (2.0 - 2.0 * area_ratio) * g2_zero_sigma)
    if visibility_sigma is not None:
        sigmas.append(-2.0 * value / vis * visibility_sigma)
    sigma = math.sqrt(sum(s * s for s in sigmas)) if sigmas else None
    return IndistinguishabilityResult(value=value, sigma=sigma)


# ---------------------------------------------------------------------------
# pulsed g2(0)


def pulsed_g2_from_histogram(
    hist: CorrelationHistogram,
    rep_period: float,
    window: float | None = None,
) -> PulsedG2:
    """g2(0) under pulsed excitation: center-peak counts over the mean of
    the four nearest side peaks (±rep_period, ±2 rep_period).

    ``window`` is the integration half-width (default rep_period/4).  The
    error bar is standard Poisson propagation of the integrated counts.
    """
    if rep_period <= 0:
        raise ValueError("rep_period must be > 0")
    window = rep_period / 4.0 if window is None else float(window)
    if not 0 < window < rep_period / 2.0:
        raise ValueError("window must lie in (0, rep_period/2)")
    span_needed = 2.0 * rep_period + window
    if hist.bin_centers[0] > -span_needed or hist.bin_centers[-1] < span_needed:
        raise ValueError(
            "histogram must span at least five peaks (±2 repetition periods)"
        )

    n0 = hist.window_sum(0.0, window)
    sides = tuple(
        hist.window_sum(k * rep_period, window) for k in (-2, -1, 1, 2)
    )
    side_total = sum(sides)
    if side_total <= 0:
        raise ValueError("side peaks are empty; cannot normalize g2(0)")

    mean_side = side_total / 4.0
    value = n0 / mean_side
    # Poisson: var(n0) = n0, var(side_total) = side_total
    sigma = math.sqrt(
        n0 / mean_side ** 2 + (n0 * 4.0 / side_total ** 2) ** 2 * side_total
    )
    return PulsedG2(value=value, sigma=sigma, center_counts=n0, side_counts=sides)


# ---------------------------------------------------------------------------
# histogram peak fitting


def fit_double_exponential_peaks(
    hist: CorrelationHistogram,
    peak_centers: Sequence[float],
    shared_tau: bool = True,
    tau_guess: float = 0.2,
) -> PeakFit:
    """Fit sum_k A_k exp(-|t - t_k|/tau) to a coincidence histogram.

    Separable least squares: amplitudes are solved linearly (non-negative)
    inside a simplex search over the decay constant(s).  ``shared_tau``
    fits one tau for all peaks (the usual case — all peaks share the
    emitter lifetime); otherwise each peak gets its own.
    """
    from scipy.optimize import nnls

    centers = np.asarray(peak_centers, dtype=float)
    if centers.size == 0:
        raise ValueError("need at least one peak center")
    if np.any(centers < hist.bin_centers[0]) or np.any(centers > hist.bin_centers[-1]):
        raise ValueError("peak centers must lie inside the histogram span")
    if tau_guess <= 0:
        raise ValueError("tau_guess must be > 0")

    tbins = hist.bin_centers
    counts = hist.counts

    def design(taus: np.ndarray) -> np.ndarray:
        return np.exp(-np.abs(tbins[:, None] - centers[None, :]) / taus[None, :])

    def amplitudes_for(taus: np.ndarray):
        m = design(taus)
        amps, rnorm = nnls(m, counts)
        return amps, rnorm

    n_tau = 1 if shared_tau else centers.size

    def residual(log_tau: np.ndarray) -> np.ndarray:
        taus = np.exp(log_tau)
        if not shared_tau:
            t_arr = taus
        else:
            t_arr = np.repeat(taus, centers.size)
        amps, _ = amplitudes_for(t_arr)
        return design(t_arr) @ amps - counts

    problem = FitProblem(
        residual=residual,
        x0=np.full(n_tau, math.log(tau_guess)),
        bounds=[(math.log(1e-4), math.log(1e3))] * n_tau,
        xtol=1e-12,
        ftol=1e-14,
    )
    result = minimize(problem)
    taus = np.exp(result.x)
    t_arr = taus if not shared_tau else np.repeat(taus, centers.size)
    amps, _ = amplitudes_for(t_arr)
    return PeakFit(
        centers=centers,
        amplitudes=amps,
        tau_r=t_arr,
        residual_norm=result.residual_norm,
        converged=result.converged,
    )


# ---------------------------------------------------------------------------
# Monte Carlo


_BLOCK_PERIODS = 1 << 19


def monte_carlo_hom(
    train: PulseTrain,
    split: SplitterParams,
    m_overlap: float,
    g2_zero: float,
    n_periods: int,
    seed: int,
    *,
    emission_tau: float = 0.0,
    bin_width: float = 0.1,
    tau_max: float | None = None,
) -> CorrelationHistogram:
    """Stochastic sampling of the pulsed two-photon interference experiment.

    Per period the four tabulated photon pairs are propagated through the
    interferometer: independent arm choices (long with probability R),
    detector draws at the output splitter, and — for simultaneous arrivals
    from opposite arms — a coincidence probability reduced from R^2+T^2 by
    the interference term 2 R T (1-eps)^2 M.  Same-pulse contamination pairs
    fire with probability g2_zero/2 per pulse slot and never interfere.
    ``emission_tau`` adds a two-sided exponential emission-time jitter so the
    histogram peaks acquire the shape the double-exponential fitter expects.

    The stream is split into fixed-size period blocks with child seeds
    spawned from ``seed``; the block partition depends only on
    ``n_periods``, so results do not depend on execution order.
    """
    if n_periods <= 0:
        raise ValueError("n_periods must be > 0")
    if not 0.0 <= m_overlap <= 1.0:
        raise ValueError("m_overlap must lie in [0, 1]")
    if not 0.0 <= g2_zero <= 1.0:
        raise ValueError("g2_zero must lie in [0, 1] for the pair model")
    if emission_tau < 0:
        raise ValueError("emission_tau must be >= 0")

    table = delay_table(train, train.times[1] - train.times[0])
    mz = table.mz_delay
    if tau_max is None:
        tau_max = train.period + mz + max(1.0, 10.0 * emission_tau)
    n_bins = int(math.ceil(2.0 * tau_max / bin_width))
    edges = np.linspace(-tau_max, tau_max, n_bins + 1)
    counts = np.zeros(n_bins)

    r, t, vis = split.r, split.t, split.visibility
    p_coin_overlap = (r * r + t * t) - 2.0 * r * t * vis ** 2 * m_overlap

    n_blocks = (n_periods + _BLOCK_PERIODS - 1) // _BLOCK_PERIODS
    seeds = np.random.SeedSequence(seed).spawn(n_blocks)

    for block, child in enumerate(seeds):
        rng = np.random.default_rng(child)
        n = min(_BLOCK_PERIODS, n_periods - block * _BLOCK_PERIODS)

        def record(delta: np.ndarray):
            if delta.size == 0:
                return
            if emission_tau > 0:
                delta = delta + rng.exponential(emission_tau, delta.size)
                delta = delta - rng.exponential(emission_tau, delta.size)
            hist_block, _ = np.histogram(delta, bins=edges)
            counts[:] += hist_block

        def classical_pair(raw_delay: float, size: int, interfere: bool):
            """Sample one pair type; returns recorded signed delays."""
            long1 = rng.random(size) < r
            long2 = rng.random(size) < r
            detected = raw_delay + mz * (long2.astype(float) - long1.astype(float))
            overlap = np.abs(detected) < 1e-12

            out = []
            if interfere:
                ov = np.nonzero(overlap & (long1 != long2))[0]
                keep = rng.random(ov.size) < p_coin_overlap
                out.append(np.zeros(int(keep.sum())))
                rest = np.nonzero(~(overlap & (long1 != long2)))[0]
            else:
                rest = np.arange(size)

            # non-interfering events: independent detector draws; coincidence
            # means the two photons end on different detectors
            p1 = np.where(long1[rest], r, t)
            p2 = np.where(long2[rest], r, t)
            at_a1 = rng.random(rest.size) < p1
            at_a2 = rng.random(rest.size) < p2
            coin = at_a1 != at_a2
            sign = np.where(at_a1[coin], 1.0, -1.0)
            out.append(sign * detected[rest][coin])
            return np.concatenate(out) if out else np.empty(0)

        for pair, raw in table.pair_delays.items():
            record(classical_pair(raw, n, interfere=True))

        # same-pulse two-photon contamination, one Bernoulli per pulse slot
        for _ in train.times:
            fires = int((rng.random(n) < g2_zero / 2.0).sum())
            record(classical_pair(0.0, fires, interfere=False))

    centers = 0.5 * (edges[:-1] + edges[1:])
    return CorrelationHistogram(bin_centers=centers, counts=counts)
