"""Experimental duty cycle: loading, excitation/cooling alternation, survival.

A sequence starts when an atom is present: ``cycles_per_sequence`` repetitions
of an excitation window (pulsed drive, stray light on) followed by a cooling
window (molasses fluorescence only).  The atom survives an exponential time
with the trap lifetime; afterwards only detector noise remains.  Trap loading
follows the collisional-blockade rule: a second atom entering the trap ejects
both, so the occupancy never exceeds one.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .bloch import AtomModel, PulseTrain
from .detection import (ORIGIN_FLUORESCENCE, DetectorParams, EventStream,
                        _as_windows, _in_windows, _poisson_times, detect)
from .jump import LevelScheme, PulseSampler


@dataclass(frozen=True)
class SequenceConfig:
    """Timing of one trapped-atom sequence (all values in SI units)."""

    excitation_window: float = 115e-6
    cooling_window: float = 885e-6
    cycles_per_sequence: int = 100
    trap_lifetime: float = 34e-3
    capture_rate: float = 3.0
    molasses_background_rate: float = 2000.0  # detected s^-1 during cooling

    def __post_init__(self) -> None:
        for name in ("excitation_window", "cooling_window", "trap_lifetime",
                     "capture_rate"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.cycles_per_sequence < 1:
            raise ValueError("cycles_per_sequence must be at least 1")
        if self.molasses_background_rate < 0:
            raise ValueError("molasses rate must be non-negative")

    @property
    def cycle_period(self) -> float:
        return self.excitation_window + self.cooling_window

    @property
    def duration(self) -> float:
        return self.cycle_period * self.cycles_per_sequence

    def excitation_windows(self) -> np.ndarray:
        starts = np.arange(self.cycles_per_sequence) * self.cycle_period
        return np.column_stack([starts, starts + self.excitation_window])

    def cooling_windows(self) -> np.ndarray:
        starts = (np.arange(self.cycles_per_sequence) * self.cycle_period
                  + self.excitation_window)
        return np.column_stack([starts, starts + self.cooling_window])


# ---------------------------------------------------------------------------
# collisional-blockade loading
# ---------------------------------------------------------------------------

@dataclass
class LoadingRecord:
    """Atom arrival times and the resulting 0/1 occupancy history."""

    arrival_times: np.ndarray
    horizon: float

    def occupancy_after_arrivals(self) -> np.ndarray:
        """Occupancy following each arrival (1 after odd arrivals, else 0)."""
        return (np.arange(self.arrival_times.size) % 2 == 0).astype(np.int64)

    @property
    def max_occupancy(self) -> int:
        return 1 if self.arrival_times.size else 0

    @property
    def mean_occupancy(self) -> float:
        """Time-averaged occupancy over the horizon."""
        t = np.concatenate([[0.0], self.arrival_times, [self.horizon]])
        occ = np.concatenate([[0], self.occupancy_after_arrivals(), [0]])[:-1]
        return float(np.sum(np.diff(t) * occ) / self.horizon)

    def waits_for_atom(self) -> np.ndarray:
        """Durations of the empty periods preceding each capture."""
        a = self.arrival_times
        starts = np.concatenate([[0.0], a[1::2]])
        captures = a[0::2]
        n = min(starts.size, captures.size)
        return captures[:n] - starts[:n]


def simulate_loading(capture_rate: float, horizon: float,
                     seed: int | np.random.Generator = 0) -> LoadingRecord:
    """Simulate collisional-blockade loading over ``horizon`` seconds.

    Arrivals form a Poisson process at ``capture_rate``; an arrival fills an
    empty trap and empties a filled one (both atoms ejected), so the
    occupancy alternates between 0 and 1 and averages one half.
    """
    if capture_rate <= 0:
        raise ValueError("capture_rate must be positive")
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    times = []
    t = 0.0
    chunk = max(16, int(capture_rate * horizon * 1.2))
    while True:
        gaps = rng.exponential(1.0 / capture_rate, size=chunk)
        arr = t + np.cumsum(gaps)
        inside = arr < horizon
        times.append(arr[inside])
        if not inside.all():
            break
        t = arr[-1]
    return LoadingRecord(np.concatenate(times), horizon)


# ---------------------------------------------------------------------------
# one sequence of the source pipeline
# ---------------------------------------------------------------------------

@dataclass
class PipelineHandles:
    """Bundle of the source, level-scheme, and detection models."""

    atom: AtomModel
    train: PulseTrain
    scheme: LevelScheme
    detectors: DetectorParams
    efficiency: float
    sampler: PulseSampler

    @classmethod
    def build(cls, atom: AtomModel, train: PulseTrain, scheme: LevelScheme,
              detectors: DetectorParams, efficiency: float,
              n_noise_levels: int = 129) -> "PipelineHandles":
        if not 0.0 <= efficiency <= 1.0:
            raise ValueError("efficiency must be in [0, 1]")
        sampler = PulseSampler(atom, train, scheme, n_noise_levels=n_noise_levels)
        return cls(atom, train, scheme, detectors, efficiency, sampler)


@dataclass
class SequenceRun:
    """Detection record of one sequence (times relative to its start)."""

    duration: float
    survival_time: float
    events_a: EventStream
    events_b: EventStream
    gates: np.ndarray            # excitation windows, seconds, (n, 2)
    n_bright_pulses: int
    n_emitted: int


def run_sequence(config: SequenceConfig, handles: PipelineHandles,
                 seed: int | np.random.Generator = 0) -> SequenceRun:
    """Simulate one atom's sequence: emission, detection, molasses, noise.

    The atom is present at the sequence start and is lost after an
    exponential survival time; excitation pulses fired afterwards emit
    nothing.  The returned streams are ungated (acquisition over the whole
    sequence) with stray light confined to the excitation windows; HBT
    analysis applies the excitation gates afterwards.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    train = handles.train
    survival = rng.exponential(config.trap_lifetime)

    windows = config.excitation_windows()
    per_window = int(math.floor(config.excitation_window / train.period + 1e-9))
    offsets = np.arange(per_window) * train.period
    starts = (windows[:, 0][:, None] + offsets[None, :]).ravel()
    bright = starts[starts < survival]

    times, _, _ = handles.sampler.sample_stream(bright, rng)
    ev_a, ev_b = detect(times, handles.efficiency, handles.detectors,
                        gates=[(0.0, config.duration)], seed=rng,
                        stray_windows=windows)

    # molasses fluorescence while the atom is present during cooling
    cooling = config.cooling_windows()
    alive = cooling[:, 0] < survival
    cool_alive = cooling[alive].copy()
    if cool_alive.size:
        cool_alive[-1, 1] = min(cool_alive[-1, 1], max(survival, cool_alive[-1, 0] + 1e-12))
    res_ns = handles.detectors.resolution_ns
    merged = []
    for ev in (ev_a, ev_b):
        if cool_alive.size and config.molasses_background_rate > 0:
            t_mol = _poisson_times(0.5 * config.molasses_background_rate,
                                   cool_alive, rng)
            ts_mol = (np.floor(t_mol * 1e9 / res_ns)).astype(np.int64) * res_ns
            ts = np.concatenate([ev.timestamps_ns, ts_mol])
            origin = np.concatenate([ev.origin,
                                     np.full(ts_mol.size, ORIGIN_FLUORESCENCE,
                                             np.int8)])
            order = np.argsort(ts, kind="stable")
            merged.append(EventStream(ev.detector, ts[order], origin[order]))
        else:
            merged.append(ev)
    return SequenceRun(config.duration, survival, merged[0], merged[1],
                       windows, int(bright.size), int(times.size))


# ---------------------------------------------------------------------------
# traces and closed-form rates
# ---------------------------------------------------------------------------

@dataclass
class FluorescenceTrace:
    """Mean detected rate (both detectors) versus time within the sequence."""

    bin_width: float
    mean_rate: np.ndarray        # s^-1 per bin
    n_sequences: int

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.mean_rate.size) * self.bin_width


def average_trace(runs, bin_width: float = 5e-6) -> FluorescenceTrace:
    """Average of detected rates over sequences on a common time grid."""
    runs = list(runs)
    if not runs:
        raise ValueError("at least one sequence is required")
    duration = runs[0].duration
    if any(abs(r.duration - duration) > 1e-12 for r in runs):
        raise ValueError("sequences have inconsistent durations")
    n_bins = int(round(duration / bin_width))
    counts = np.zeros(n_bins, dtype=np.int64)
    for r in runs:
        for ev in (r.events_a, r.events_b):
            idx = (ev.timestamps_ns * 1e-9 / bin_width).astype(np.int64)
            np.clip(idx, 0, n_bins - 1, out=idx)
            counts += np.bincount(idx, minlength=n_bins)
    rate = counts / (len(runs) * bin_width)
    return FluorescenceTrace(bin_width, rate, len(runs))


def fit_trace_envelope(trace: FluorescenceTrace, config: SequenceConfig) -> tuple[float, float]:
    """Fit exp(-t/tau) to the excitation-window rates of an averaged trace.

    Returns (tau, statistical uncertainty).  Weighted log-linear least
    squares with Poisson weights.
    """
    t = trace.times
    rates = np.zeros(config.cycles_per_sequence)
    centers = np.zeros(config.cycles_per_sequence)
    for w, (lo, hi) in enumerate(config.excitation_windows()):
        mask = (t >= lo) & (t + trace.bin_width <= hi)
        if not mask.any():
            raise ValueError("trace binning too coarse for the excitation windows")
        rates[w] = trace.mean_rate[mask].mean()
        centers[w] = 0.5 * (lo + hi)
    ok = rates > 0
    if ok.sum() < 3:
        raise ValueError("not enough populated excitation windows to fit")
    x = centers[ok]
    y = np.log(rates[ok])
    # weights = detected counts per window; var(log rate) ~ 1/counts
    wgt = rates[ok] * config.excitation_window * trace.n_sequences
    xm = (wgt * x).sum() / wgt.sum()
    ym = (wgt * y).sum() / wgt.sum()
    sxx = (wgt * (x - xm) ** 2).sum()
    slope = (wgt * (x - xm) * (y - ym)).sum() / sxx
    if slope >= 0:
        return math.inf, math.inf
    tau = -1.0 / slope
    resid = y - (ym + slope * (x - xm))
    dof = max(1, int(ok.sum()) - 2)
    chi2_red = (wgt * resid**2).sum() / dof
    slope_var = max(chi2_red, 1.0) / sxx
    tau_sigma = tau**2 * math.sqrt(slope_var)
    return float(tau), float(tau_sigma)


def expected_peak_rate(mean_photons_per_pulse: float, occupancy: float,
                       efficiency: float, repetition_rate: float) -> float:
    """Closed-form detected peak rate, both detectors summed (s^-1)."""
    return mean_photons_per_pulse * occupancy * efficiency * repetition_rate


def expected_average_excitation_rate(peak_rate: float, trap_lifetime: float,
                                     sequence_duration: float) -> float:
    """Sequence-averaged excitation-window rate given exponential survival."""
    frac = (trap_lifetime / sequence_duration
            * (1.0 - math.exp(-sequence_duration / trap_lifetime)))
    return peak_rate * frac


# ---------------------------------------------------------------------------
# multi-sequence pipeline
# ---------------------------------------------------------------------------

@dataclass
class HbtRunResult:
    """Concatenated detection record of many sequences (absolute time)."""

    events_a: EventStream        # ungated, absolute ns over the whole run
    events_b: EventStream
    gates: np.ndarray            # absolute excitation windows, seconds
    n_sequences: int
    sequence_duration: float
    excitation_time: float       # total gate duration, seconds
    n_bright_pulses: int
    n_emitted: int
    survival_times: np.ndarray
    trace: FluorescenceTrace


def _sequence_seed(master_seed: int, index: int) -> np.random.Generator:
    ss = np.random.SeedSequence([int(master_seed) & 0xFFFFFFFF, 1, index])
    return np.random.default_rng(ss)


def run_hbt_pipeline(config: SequenceConfig, handles: PipelineHandles,
                     n_sequences: int, master_seed: int = 0,
                     threads: int = 1, trace_bin: float = 5e-6) -> HbtRunResult:
    """Run many sequences and assemble the experiment-level event record.

    Sequences are independent given per-sequence seeds derived from
    ``master_seed``; results are identical for any ``threads`` count because
    the merge order is fixed by the sequence index.
    """
    if n_sequences < 1:
        raise ValueError("n_sequences must be at least 1")
    if threads < 1:
        raise ValueError("threads must be at least 1")

    def one(idx: int) -> SequenceRun:
        return run_sequence(config, handles, _sequence_seed(master_seed, idx))

    if threads == 1:
        runs = [one(i) for i in range(n_sequences)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            runs = list(pool.map(one, range(n_sequences)))

    seq_ns = int(round(config.duration * 1e9))
    ts_a, or_a, ts_b, or_b, gate_list = [], [], [], [], []
    survival = np.empty(n_sequences)
    n_bright = 0
    n_emitted = 0
    for i, r in enumerate(runs):
        off = i * seq_ns
        ts_a.append(r.events_a.timestamps_ns + off)
        or_a.append(r.events_a.origin)
        ts_b.append(r.events_b.timestamps_ns + off)
        or_b.append(r.events_b.origin)
        gate_list.append(r.gates + i * config.duration)
        survival[i] = r.survival_time
        n_bright += r.n_bright_pulses
        n_emitted += r.n_emitted
    events_a = EventStream("A", np.concatenate(ts_a), np.concatenate(or_a))
    events_b = EventStream("B", np.concatenate(ts_b), np.concatenate(or_b))
    gates = np.concatenate(gate_list)
    trace = average_trace(runs, trace_bin)
    return HbtRunResult(
        events_a=events_a, events_b=events_b, gates=gates,
        n_sequences=n_sequences, sequence_duration=config.duration,
        excitation_time=float((gates[:, 1] - gates[:, 0]).sum()),
        n_bright_pulses=n_bright, n_emitted=n_emitted,
        survival_times=survival, trace=trace)


def gate_events(stream: EventStream, windows) -> EventStream:
    """Keep only events whose timestamps fall inside the windows."""
    w = _as_windows(windows)
    mask = _in_windows(stream.timestamps_ns * 1e-9, w)
    return EventStream(stream.detector, stream.timestamps_ns[mask],
                       stream.origin[mask])


TRACE_HEADER = "time_us,mean_rate_hz,n_sequences"


def write_trace_csv(path, trace: FluorescenceTrace) -> None:
    with open(path, "w") as fh:
        fh.write(TRACE_HEADER + "\n")
        for t, r in zip(trace.times, trace.mean_rate):
            fh.write(f"{t * 1e6:.6g},{r:.8g},{trace.n_sequences}\n")


GATE_HEADER = "start_ns,end_ns"


def write_gates_csv(path, gates) -> None:
    with open(path, "w") as fh:
        fh.write(GATE_HEADER + "\n")
        for lo, hi in np.asarray(gates, dtype=float):
            fh.write(f"{int(round(lo * 1e9))},{int(round(hi * 1e9))}\n")
