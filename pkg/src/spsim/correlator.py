"""Start-stop correlation analysis of detector click streams.

Classic start-stop semantics: for every start-channel click, the delay to the
first subsequent stop-channel click is histogrammed.  An optional electronic
delay on the stop channel (``stop_delay_ns``, the histogram's origin) shifts
zero physical delay into the middle of the axis so both orderings of a
coincidence are visible, as in a delayed-stop coincidence card.

Peak analysis integrates background-corrected areas in windows around the
expected peak positions (multiples of the pulse period away from the origin),
forms the central-to-lateral area ratio, and fits the 1/e half-width of the
peak tails.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .detection import EventStream
from .errors import NumericsError


@dataclass
class Histogram:
    """Binned start-stop delay counts.

    ``origin_delay_ns`` is the delay-axis position of zero physical delay
    (the stop-channel electronic delay).  ``counts[i]`` covers delays
    [i*bin_width_ns, (i+1)*bin_width_ns).
    """

    bin_width_ns: float
    counts: np.ndarray
    origin_delay_ns: float = 0.0
    n_starts: int = 0
    total_acquisition_time_s: float = 0.0
    gate_description: str = ""

    def __post_init__(self) -> None:
        if self.bin_width_ns <= 0:
            raise ValueError("bin width must be positive")
        c = np.asarray(self.counts, dtype=np.int64)
        if np.any(c < 0):
            raise ValueError("counts must be non-negative")
        self.counts = c

    @property
    def n_bins(self) -> int:
        return int(self.counts.size)

    @property
    def bin_starts_ns(self) -> np.ndarray:
        return np.arange(self.n_bins) * self.bin_width_ns

    @property
    def bin_centers_ns(self) -> np.ndarray:
        return (np.arange(self.n_bins) + 0.5) * self.bin_width_ns

    @property
    def total_counts(self) -> int:
        return int(self.counts.sum())


def _sorted_stamps(events) -> np.ndarray:
    ts = events.timestamps_ns if isinstance(events, EventStream) else np.asarray(events)
    ts = np.asarray(ts)
    if ts.size > 1 and np.any(np.diff(ts) < 0):
        raise ValueError("event stream must be time-sorted")
    return ts.astype(np.float64)


def start_stop_histogram(starts, stops, bin_width_ns: float, max_delay_ns: float,
                         stop_delay_ns: float = 0.0,
                         total_acquisition_time_s: float = 0.0,
                         gate_description: str = "") -> Histogram:
    """Histogram of start-to-first-stop delays.

    For each start click the delay to the first stop click at or after it
    (with the stop channel delayed by ``stop_delay_ns``) is recorded; delays
    of ``max_delay_ns`` or more and starts without any stop are discarded.
    """
    if bin_width_ns <= 0:
        raise ValueError("bin width must be positive")
    if max_delay_ns <= bin_width_ns:
        raise ValueError("max_delay must exceed the bin width")
    a = _sorted_stamps(starts)
    b = _sorted_stamps(stops) + stop_delay_ns
    n_bins = int(math.ceil(max_delay_ns / bin_width_ns))
    if a.size == 0 or b.size == 0:
        counts = np.zeros(n_bins, dtype=np.int64)
        return Histogram(bin_width_ns, counts, stop_delay_ns, int(a.size),
                         total_acquisition_time_s, gate_description)
    idx = np.searchsorted(b, a, side="left")
    has_stop = idx < b.size
    delays = b[idx[has_stop]] - a[has_stop]
    delays = delays[delays < max_delay_ns]
    bins = (delays / bin_width_ns).astype(np.int64)
    counts = np.bincount(bins, minlength=n_bins).astype(np.int64)
    return Histogram(bin_width_ns, counts, stop_delay_ns, int(a.size),
                     total_acquisition_time_s, gate_description)


def rebin(h: Histogram, factor: int) -> Histogram:
    """Merge groups of ``factor`` adjacent bins (counts are summed).

    A trailing group shorter than ``factor`` is dropped with a warning.
    """
    if factor == 0:
        raise ValueError("rebin factor must be at least 1")
    if factor < 0 or int(factor) != factor:
        raise ValueError("rebin factor must be a positive integer")
    factor = int(factor)
    if factor == 1:
        return Histogram(h.bin_width_ns, h.counts.copy(), h.origin_delay_ns,
                         h.n_starts, h.total_acquisition_time_s, h.gate_description)
    n_full = h.n_bins // factor
    if h.n_bins % factor:
        warnings.warn(f"dropping trailing partial bin group "
                      f"({h.n_bins % factor} of {h.n_bins} bins)", stacklevel=2)
    counts = h.counts[:n_full * factor].reshape(n_full, factor).sum(axis=1)
    return Histogram(h.bin_width_ns * factor, counts, h.origin_delay_ns,
                     h.n_starts, h.total_acquisition_time_s, h.gate_description)


@dataclass
class PeakReport:
    """Background-corrected peak areas and shape summary of an HBT histogram."""

    period_ns: float
    halfwindow_ns: float
    peak_offsets: np.ndarray          # peak index k (0 = zero physical delay)
    peak_centers_ns: np.ndarray       # delay-axis positions
    peak_areas: np.ndarray            # background-corrected counts
    peak_area_uncertainties: np.ndarray
    background_per_bin: float
    background_per_bin_uncertainty: float
    central_ratio: float
    central_ratio_uncertainty: float
    half_width_ns: float
    half_width_uncertainty_ns: float
    field_order: tuple = field(default=(
        "central_ratio", "central_ratio_uncertainty", "background_per_bin",
        "background_per_bin_uncertainty", "half_width_ns",
        "half_width_uncertainty_ns"), repr=False)

    def to_text(self) -> str:
        lines = [
            f"period_ns: {self.period_ns:g}",
            f"peak_halfwindow_ns: {self.halfwindow_ns:g}",
            f"n_peaks: {self.peak_offsets.size}",
            f"background_per_bin: {self.background_per_bin:.6g} "
            f"± {self.background_per_bin_uncertainty:.3g}",
            f"central_peak_ratio: {self.central_ratio:.6g} "
            f"± {self.central_ratio_uncertainty:.3g}",
            f"half_width_ns: {self.half_width_ns:.4g} "
            f"± {self.half_width_uncertainty_ns:.2g}",
        ]
        for k, c, a, s in zip(self.peak_offsets, self.peak_centers_ns,
                              self.peak_areas, self.peak_area_uncertainties):
            lines.append(f"peak[{int(k):+d}] at {c:g} ns: area {a:.6g} ± {s:.3g}")
        return "\n".join(lines) + "\n"


def _fit_tail_half_width(offsets_ns: np.ndarray, net_counts: np.ndarray,
                         min_counts: float) -> float | None:
    """Weighted LSQ of log(net counts) vs offset on a decaying tail.

    Bins are taken contiguously outward from the peak until the first one
    below ``min_counts`` (a plain threshold would keep only upward
    fluctuations at the tail end and fatten the fitted width).
    """
    order = np.argsort(offsets_ns)
    offsets_ns, net_counts = offsets_ns[order], net_counts[order]
    ok = np.zeros(net_counts.size, dtype=bool)
    for i, value in enumerate(net_counts):
        if value < min_counts:
            break
        ok[i] = True
    if ok.sum() < 3:
        return None
    x = offsets_ns[ok]
    y = np.log(net_counts[ok])
    w = net_counts[ok]  # var(log n) ~ 1/n for Poisson counts
    sw = w.sum()
    xm = (w * x).sum() / sw
    ym = (w * y).sum() / sw
    sxx = (w * (x - xm) ** 2).sum()
    if sxx <= 0:
        return None
    slope = (w * (x - xm) * (y - ym)).sum() / sxx
    if slope >= 0:
        return None
    return -1.0 / slope


def _laplace_mass(lo: np.ndarray, hi: np.ndarray, tau: float) -> np.ndarray:
    """Mass of the unit two-sided exponential exp(-|x|/tau)/(2 tau) in [lo, hi]."""
    def cdf(x):
        return np.where(x < 0, 0.5 * np.exp(x / tau), 1.0 - 0.5 * np.exp(-x / tau))
    return cdf(hi) - cdf(lo)


def expected_noise_floor(bin_width_ns: float, n_starts: int, n_stops: int,
                         gate_duration_s: float,
                         noise_rate_per_detector: float) -> float:
    """Flat accidental level per bin from known detector noise rates.

    Accidental coincidences pair a start with an uncorrelated noise stop or a
    noise start with any stop: per delay bin the expected count is
    ``bin_width * r_n * (N_starts + N_stops - r_n * T)`` with ``r_n`` the
    per-detector noise rate and T the live (gated) duration.  This mirrors
    correcting the histogram for independently measured dark/stray rates.
    """
    if gate_duration_s <= 0:
        raise ValueError("gate duration must be positive")
    r = noise_rate_per_detector
    return bin_width_ns * 1e-9 * r * (n_starts + n_stops - r * gate_duration_s)


def peak_analysis(h: Histogram, period_ns: float, peak_halfwindow_ns: float = 80.0,
                  background_exclusion_ns: float = 90.0,
                  noise_floor_per_bin: float | None = None,
                  fit_min_offset_ns: float = 5.0,
                  fit_min_counts: float = 5.0) -> PeakReport:
    """Integrate peak areas, correct the flat background, fit peak widths.

    Peaks are expected every ``period_ns`` on the delay axis, offset by the
    histogram origin.  The histogram is decomposed by weighted linear least
    squares into a flat accidental floor plus one two-sided exponential peak
    per period position, with the 1/e half-width taken from a log-linear fit
    of the lateral peaks' decaying sides.  At a lifetime-to-period ratio this
    large the exponential tails, not the noise, dominate the inter-peak
    region, so a plain inter-peak mean would overcorrect badly; the joint
    decomposition separates the two.  When ``noise_floor_per_bin`` is given
    (computed from independently known noise rates, see
    :func:`expected_noise_floor`) the floor is fixed instead of fitted,
    mirroring the correction of measured dark/stray coincidence rates.

    Fitted amplitudes are full (tail-completed) peak areas.  The central
    ratio is the zero-delay area over the mean lateral area; non-positive
    areas are reported as such with their uncertainty.  Raw windowed sums
    over ±``peak_halfwindow_ns`` minus the floor are used as the fallback
    when no peak width can be resolved (for instance pure-noise data).
    """
    if peak_halfwindow_ns >= 0.5 * period_ns:
        raise ValueError("peak half-window must be below half the period")
    if background_exclusion_ns >= 0.5 * period_ns:
        raise ValueError("background exclusion must be below half the period")
    span = h.n_bins * h.bin_width_ns
    k_min = int(math.ceil((peak_halfwindow_ns - h.origin_delay_ns) / period_ns))
    k_max = int(math.floor((span - peak_halfwindow_ns - h.origin_delay_ns) / period_ns))
    ks = np.arange(k_min, k_max + 1)
    if ks.size < 3:
        raise ValueError(f"need at least 3 peaks in range, found {ks.size}")
    if 0 not in ks:
        raise ValueError("central (zero-delay) peak is outside the histogram")
    centers = h.origin_delay_ns + ks * period_ns

    # the full lattice covers every period multiple crossing the axis,
    # including peaks whose windows stick out of range
    k_lat = np.arange(int(math.floor(-h.origin_delay_ns / period_ns)) - 1,
                      int(math.ceil((span - h.origin_delay_ns) / period_ns)) + 2)
    lattice = h.origin_delay_ns + k_lat * period_ns

    mids = h.bin_centers_ns
    bw = h.bin_width_ns
    counts = h.counts.astype(float)
    dist_lattice = np.abs(mids[:, None] - lattice[None, :]).min(axis=1)
    bg_mask = dist_lattice > background_exclusion_ns
    n_bg = int(bg_mask.sum())
    if n_bg == 0:
        raise ValueError("no background bins outside the exclusion zones")
    level_raw = float(counts[bg_mask].mean())
    bg_sigma = math.sqrt(max(level_raw, 1.0 / n_bg) / n_bg)

    win_masks = [np.abs(mids - c) <= peak_halfwindow_ns for c in centers]
    raw_sums = np.array([float(counts[m].sum()) for m in win_masks])
    n_wins = np.array([int(m.sum()) for m in win_masks])

    def fit_width(n0: float) -> tuple[float | None, list[float]]:
        taus = []
        for i, c in enumerate(centers):
            if ks[i] == 0:
                continue
            tail = win_masks[i] & (mids - c >= fit_min_offset_ns)
            tau = _fit_tail_half_width(mids[tail] - c, counts[tail] - n0,
                                       fit_min_counts)
            if tau is not None:
                taus.append(tau)
        if not taus:
            return None, []
        return float(np.mean(taus)), taus

    def decompose(tau: float, fit_mask: np.ndarray):
        """Weighted LSQ of counts = n0 + sum_k A_k * laplace_mass_k.

        Restricted to bins where the two-sided exponential model is exact
        (away from the drive-smeared peak tops); returns the floor and the
        tail-implied full amplitude of every lattice peak.
        """
        masses = np.column_stack([
            _laplace_mass(mids - c - 0.5 * bw, mids - c + 0.5 * bw, tau)
            for c in lattice])[fit_mask]
        target_all = counts[fit_mask]
        if noise_floor_per_bin is None:
            design = np.column_stack([np.ones(int(fit_mask.sum())), masses])
            target = target_all
        else:
            design = masses
            target = target_all - noise_floor_per_bin
        w = 1.0 / np.clip(target_all, 1.0, None)
        sw = np.sqrt(w)
        sol, *_ = np.linalg.lstsq(design * sw[:, None], target * sw, rcond=None)
        resid = target - design @ sol
        sse = float((w * resid**2).sum())
        cov = np.linalg.pinv((design * w[:, None]).T @ design)
        if noise_floor_per_bin is None:
            n0_fit = float(sol[0])
            n0_var = float(cov[0, 0])
            amps = sol[1:]
        else:
            n0_fit = float(noise_floor_per_bin)
            n0_var = 0.0
            amps = sol
        return n0_fit, math.sqrt(max(n0_var, 0.0)), np.asarray(amps), sse

    tau, _ = fit_width(noise_floor_per_bin
                       if noise_floor_per_bin is not None else level_raw)
    widths_per_peak: list[float] = []
    top_mask = dist_lattice >= fit_min_offset_ns
    if tau is None or int(top_mask.sum()) <= k_lat.size + 2:
        # unresolvable peaks: plain windowed sums over the raw floor
        n0 = (level_raw if noise_floor_per_bin is None
              else float(noise_floor_per_bin))
        areas = raw_sums - n0 * n_wins
        sigmas = np.sqrt(raw_sums + (n_wins * bg_sigma) ** 2)
    else:
        # pin the tail width by the decomposition residual, which is immune
        # to the floor/tail feedback that biases a sequential estimate
        from scipy.optimize import minimize_scalar
        res = minimize_scalar(lambda t: decompose(t, top_mask)[3],
                              bounds=(0.3 * tau, 3.0 * tau), method="bounded",
                              options={"xatol": 1e-3 * tau})
        tau_model = float(res.x) if res.success else tau
        n0, n0_sigma, amps, _ = decompose(tau_model, top_mask)
        tau, widths_per_peak = fit_width(n0)
        bg_sigma = max(bg_sigma, n0_sigma)

        # report true areas from window sums: subtract floor and the modelled
        # neighbour tails, complete by the out-of-window exponential mass
        own_frac = 1.0 - math.exp(-peak_halfwindow_ns / tau_model)
        masses_full = np.column_stack([
            _laplace_mass(mids - c - 0.5 * bw, mids - c + 0.5 * bw, tau_model)
            for c in lattice])
        areas = np.empty(ks.size)
        sigmas = np.empty(ks.size)
        for i, (m, nw, raw) in enumerate(zip(win_masks, n_wins, raw_sums)):
            other = [j for j, k in enumerate(k_lat) if k != ks[i]]
            neighbour = float(
                (masses_full[m][:, other] * np.clip(amps[other], 0.0, None)).sum())
            areas[i] = (raw - n0 * nw - neighbour) / own_frac
            sigmas[i] = math.sqrt(raw + (nw * bg_sigma) ** 2) / own_frac

    lateral = ks != 0
    lateral_mean = float(areas[lateral].mean())
    lateral_sigma = math.sqrt(float((sigmas[lateral] ** 2).sum())) / lateral.sum()
    central_idx = int(np.flatnonzero(ks == 0)[0])
    if lateral_mean > 0:
        ratio = float(areas[central_idx]) / lateral_mean
        rel2 = (sigmas[central_idx] / max(abs(areas[central_idx]), 1e-300)) ** 2 \
            + (lateral_sigma / lateral_mean) ** 2
        ratio_sigma = abs(ratio) * math.sqrt(rel2) if areas[central_idx] != 0 \
            else sigmas[central_idx] / lateral_mean
    else:
        ratio = float("nan")
        ratio_sigma = float("nan")

    if widths_per_peak:
        width = float(np.mean(widths_per_peak))
        width_sigma = (float(np.std(widths_per_peak, ddof=1))
                       / math.sqrt(len(widths_per_peak))
                       if len(widths_per_peak) > 1 else float("nan"))
    else:
        width = float("nan")
        width_sigma = float("nan")

    return PeakReport(
        period_ns=period_ns, halfwindow_ns=peak_halfwindow_ns,
        peak_offsets=ks, peak_centers_ns=centers, peak_areas=areas,
        peak_area_uncertainties=sigmas, background_per_bin=n0,
        background_per_bin_uncertainty=bg_sigma, central_ratio=ratio,
        central_ratio_uncertainty=ratio_sigma, half_width_ns=width,
        half_width_uncertainty_ns=width_sigma)


# ---------------------------------------------------------------------------
# histogram interchange format
# ---------------------------------------------------------------------------

HISTOGRAM_HEADER = "bin_start_ns,bin_width_ns,counts"


def write_histogram_csv(path, h: Histogram) -> None:
    with open(path, "w") as fh:
        fh.write(HISTOGRAM_HEADER + "\n")
        bw = h.bin_width_ns
        for i, c in enumerate(h.counts):
            fh.write(f"{i * bw:.6g},{bw:.6g},{int(c)}\n")


def read_histogram_csv(path, origin_delay_ns: float = 0.0) -> Histogram:
    starts, widths, counts = [], [], []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != HISTOGRAM_HEADER:
            raise ValueError(f"unexpected histogram header: {header!r}")
        for line in fh:
            if not line.strip():
                continue
            a, b, c = line.strip().split(",")
            starts.append(float(a))
            widths.append(float(b))
            counts.append(int(c))
    if not counts:
        raise ValueError("histogram file contains no bins")
    return Histogram(widths[0], np.array(counts, np.int64), origin_delay_ns)
