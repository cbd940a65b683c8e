"""Detection chain: efficiency thinning, 50/50 splitting, noise counts, gating.

Emitted photons survive with the overall detection efficiency and are routed
to one of two avalanche photodiodes, A or B.  Dark counts are Poissonian at
all times, stray-laser counts are Poissonian during the excitation windows
only; acquisition gating discards everything outside the gate windows.
Timestamps are quantized to the counting-card resolution (floor) and stored
as integer nanoseconds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ORIGIN_NAMES = ("fluorescence", "dark", "stray")
ORIGIN_FLUORESCENCE = 0
ORIGIN_DARK = 1
ORIGIN_STRAY = 2
ORIGIN_UNKNOWN = -1

DETECTOR_NAMES = ("A", "B")


@dataclass(frozen=True)
class DetectorParams:
    """Noise and timing parameters of the photodiode pair.

    Rates are totals over both detectors and are split evenly between them.
    The timestamp resolution must be a whole number of nanoseconds.
    """

    dark_count_rate: float = 150.0      # s^-1, both detectors combined
    stray_light_rate: float = 175.0     # s^-1 combined, excitation windows only
    timestamp_resolution: float = 1e-9  # s
    dead_time: float = 0.0              # s

    def __post_init__(self) -> None:
        if self.dark_count_rate < 0 or self.stray_light_rate < 0:
            raise ValueError("noise rates must be non-negative")
        if self.timestamp_resolution <= 0:
            raise ValueError("timestamp resolution must be positive")
        res_ns = self.timestamp_resolution * 1e9
        if abs(res_ns - round(res_ns)) > 1e-9 or round(res_ns) < 1:
            raise ValueError("timestamp resolution must be a whole number of ns")
        if self.dead_time < 0:
            raise ValueError("dead time must be non-negative")

    @property
    def resolution_ns(self) -> int:
        return int(round(self.timestamp_resolution * 1e9))


@dataclass
class EventStream:
    """Time-ordered detection events of one detector."""

    detector: str
    timestamps_ns: np.ndarray
    origin: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.detector not in DETECTOR_NAMES:
            raise ValueError(f"unknown detector {self.detector!r}")
        ts = np.asarray(self.timestamps_ns, dtype=np.int64)
        self.timestamps_ns = ts
        if self.origin is None:
            self.origin = np.full(ts.size, ORIGIN_UNKNOWN, dtype=np.int8)
        else:
            self.origin = np.asarray(self.origin, dtype=np.int8)
        if self.origin.size != ts.size:
            raise ValueError("origin and timestamps must have equal length")
        if ts.size > 1 and np.any(np.diff(ts) < 0):
            raise ValueError("timestamps must be non-decreasing")

    def __len__(self) -> int:
        return int(self.timestamps_ns.size)


def _as_windows(windows) -> np.ndarray:
    """Validate [start, end) windows (seconds): sorted, non-overlapping."""
    w = np.asarray(windows, dtype=float)
    if w.ndim != 2 or w.shape[1] != 2 or w.shape[0] == 0:
        raise ValueError("windows must be a non-empty list of (start, end) pairs")
    if np.any(w[:, 1] <= w[:, 0]):
        raise ValueError("windows must have positive duration")
    order = np.argsort(w[:, 0])
    w = w[order]
    if np.any(w[1:, 0] < w[:-1, 1]):
        raise ValueError("windows must not overlap")
    return w


def _intersect_windows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Intersection of two sorted non-overlapping window lists."""
    out = []
    i = j = 0
    while i < len(a) and j < len(b):
        lo = max(a[i, 0], b[j, 0])
        hi = min(a[i, 1], b[j, 1])
        if lo < hi:
            out.append((lo, hi))
        if a[i, 1] <= b[j, 1]:
            i += 1
        else:
            j += 1
    return np.array(out).reshape(-1, 2)


def _poisson_times(rate: float, windows: np.ndarray,
                   rng: np.random.Generator) -> np.ndarray:
    """Homogeneous Poisson arrival times confined to the given windows."""
    if rate <= 0 or len(windows) == 0:
        return np.empty(0)
    durations = windows[:, 1] - windows[:, 0]
    total = float(durations.sum())
    n = rng.poisson(rate * total)
    pos = np.sort(rng.random(n)) * total
    cum = np.concatenate(([0.0], np.cumsum(durations)))
    idx = np.searchsorted(cum, pos, side="right") - 1
    idx = np.clip(idx, 0, len(windows) - 1)
    return windows[idx, 0] + (pos - cum[idx])


def _in_windows(t: np.ndarray, windows: np.ndarray) -> np.ndarray:
    """Boolean mask of times lying inside any [start, end) window."""
    starts = windows[:, 0]
    ends = windows[:, 1]
    idx = np.searchsorted(starts, t, side="right") - 1
    ok = idx >= 0
    safe = np.clip(idx, 0, len(windows) - 1)
    return ok & (t < ends[safe])


def _apply_dead_time(ts: np.ndarray, dead_ns: int) -> np.ndarray:
    """Non-paralyzable dead time: drop events too close to the last accepted."""
    keep = np.ones(ts.size, dtype=bool)
    last = -np.inf
    for i, t in enumerate(ts):
        if t - last < dead_ns:
            keep[i] = False
        else:
            last = t
    return keep


def detect(photons, efficiency: float, params: DetectorParams, gates,
           seed: int | np.random.Generator = 0,
           stray_windows=None) -> tuple[EventStream, EventStream]:
    """Turn emitted photons into two gated detector click streams.

    Each photon survives with probability ``efficiency`` and lands on detector
    A or B with probability 1/2 each.  ``gates`` are the acquisition windows
    (seconds, non-overlapping): events outside them are discarded and dark
    counts accumulate only there.  Stray-light counts are confined to
    ``stray_windows`` (the excitation windows; defaults to the gates) clipped
    by the gates.  The seed fully determines the output.
    """
    if not 0.0 <= efficiency <= 1.0:
        raise ValueError("efficiency must be in [0, 1]")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    gate_arr = _as_windows(gates)
    stray_arr = gate_arr if stray_windows is None else _intersect_windows(
        gate_arr, _as_windows(stray_windows))

    if hasattr(photons, "__len__") and len(photons) and hasattr(photons[0], "emission_time"):
        times = np.array([p.emission_time for p in photons], dtype=float)
    else:
        times = np.asarray(photons, dtype=float)

    u = rng.random(times.size)
    to_a = u < 0.5 * efficiency
    to_b = (u >= 0.5 * efficiency) & (u < efficiency)

    res_ns = params.resolution_ns
    streams = []
    for det, mask in (("A", to_a), ("B", to_b)):
        fl = times[mask]
        dark = _poisson_times(0.5 * params.dark_count_rate, gate_arr, rng)
        stray = _poisson_times(0.5 * params.stray_light_rate, stray_arr, rng)
        t_all = np.concatenate([fl, dark, stray])
        origin = np.concatenate([
            np.full(fl.size, ORIGIN_FLUORESCENCE, np.int8),
            np.full(dark.size, ORIGIN_DARK, np.int8),
            np.full(stray.size, ORIGIN_STRAY, np.int8),
        ])
        # quantize (floor) to the card resolution, then gate on the stamp
        ts_ns = (np.floor(t_all * 1e9 / res_ns)).astype(np.int64) * res_ns
        inside = _in_windows(ts_ns * 1e-9, gate_arr)
        ts_ns, origin = ts_ns[inside], origin[inside]
        order = np.argsort(ts_ns, kind="stable")
        ts_ns, origin = ts_ns[order], origin[order]
        if params.dead_time > 0 and ts_ns.size:
            keep = _apply_dead_time(ts_ns, int(round(params.dead_time * 1e9)))
            ts_ns, origin = ts_ns[keep], origin[keep]
        streams.append(EventStream(det, ts_ns, origin))
    return streams[0], streams[1]


def count_rate(events, windows) -> float:
    """Mean event rate (s^-1) inside the given windows."""
    w = _as_windows(windows)
    total = float((w[:, 1] - w[:, 0]).sum())
    if total <= 0:
        raise ValueError("windows have zero total duration")
    ts = events.timestamps_ns if isinstance(events, EventStream) else np.asarray(events)
    if ts.size == 0:
        return 0.0
    inside = _in_windows(np.asarray(ts, dtype=np.int64) * 1e-9, w)
    return float(inside.sum()) / total


# ---------------------------------------------------------------------------
# event stream interchange format
# ---------------------------------------------------------------------------

EVENT_HEADER = "detector,timestamp_ns,origin"


def write_event_streams(path, stream_a: EventStream, stream_b: EventStream) -> None:
    """Write both detector streams to one delimited text file, time-ordered."""
    ts = np.concatenate([stream_a.timestamps_ns, stream_b.timestamps_ns])
    det = np.concatenate([np.zeros(len(stream_a), np.int8),
                          np.ones(len(stream_b), np.int8)])
    origin = np.concatenate([stream_a.origin, stream_b.origin])
    order = np.lexsort((det, ts))
    with open(path, "w") as fh:
        fh.write(EVENT_HEADER + "\n")
        for i in order:
            name = ORIGIN_NAMES[origin[i]] if origin[i] >= 0 else "unknown"
            fh.write(f"{DETECTOR_NAMES[det[i]]},{ts[i]},{name}\n")


def read_event_streams(path) -> tuple[EventStream, EventStream]:
    """Read an event file; the origin column may be absent (external tags)."""
    det_codes, stamps, origins = [], [], []
    with open(path) as fh:
        header = fh.readline().strip()
        if header not in (EVENT_HEADER, "detector,timestamp_ns"):
            raise ValueError(f"unexpected event file header: {header!r}")
        has_origin = header == EVENT_HEADER
        for line in fh:
            parts = line.strip().split(",")
            if len(parts) < 2:
                continue
            det_codes.append(DETECTOR_NAMES.index(parts[0]))
            stamps.append(int(parts[1]))
            if has_origin and len(parts) > 2 and parts[2] != "unknown":
                origins.append(ORIGIN_NAMES.index(parts[2]))
            else:
                origins.append(ORIGIN_UNKNOWN)
    det_codes = np.array(det_codes, np.int8)
    stamps = np.array(stamps, np.int64)
    origins = np.array(origins, np.int8)
    out = []
    for code, name in enumerate(DETECTOR_NAMES):
        mask = det_codes == code
        order = np.argsort(stamps[mask], kind="stable")
        out.append(EventStream(name, stamps[mask][order], origins[mask][order]))
    return out[0], out[1]
