"""Run configuration: sectioned key-value files with explicit unit suffixes.

Every physical quantity carries its unit in the key name (``_ns``, ``_us``,
``_ms``, ``_per_s``, ``_deg``) to keep unit handling out of the values.
Unknown sections or keys are rejected; all module-level invariants are
validated while the configuration objects are built.
"""

from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, field

from .bloch import AtomModel, PulseTrain
from .detection import DetectorParams
from .errors import ConfigError
from .jump import LevelScheme
from .optics import CollectionGeometry, EfficiencyBudget
from .sequence import SequenceConfig

_PI_PULSE_RABI = math.pi / 4e-9

_DEFAULTS: dict[str, dict[str, object]] = {
    "atom": {
        "lifetime_ns": 26.0,
        "detuning_rad_per_s": 0.0,
        "transition": "F=2,mF=+2 -> F'=3,mF'=+3",
    },
    "pulse_train": {
        "pulse_duration_ns": 4.0,
        "period_ns": 200.0,
        "peak_rabi_rad_per_s": _PI_PULSE_RABI,
        "intensity_noise_rel_sigma": 0.10,
    },
    "level_scheme": {
        "depump_prob_per_excitation": 1.0 / 120.0,
        "repump_rate_per_s": 1.0e6,
        "pi_fraction_emitted": 1.0,
    },
    "geometry": {
        "numerical_aperture": 0.7,
        "collection_axis_angle_deg": 90.0,
        "solid_angle_fraction": 0.15,
        "measured_contrast": 0.72,
        "measured_contrast_uncertainty": 0.02,
    },
    "budget": {
        "lens_transmission": 0.87,
        "solid_angle_fraction": 0.15,
        "pattern_correction": 0.85,
        "imaging_optics": 0.58,
        "pinhole_and_quantum_efficiency": 0.10,
        "measured_efficiency": 0.0060,
        "measured_uncertainty": 0.0004,
    },
    "detection": {
        "efficiency": 0.0060,
        "dark_count_rate_per_s": 150.0,
        "stray_light_rate_per_s": 175.0,
        "timestamp_resolution_ns": 1.0,
        "dead_time_ns": 0.0,
    },
    "sequence": {
        "excitation_window_us": 115.0,
        "cooling_window_us": 885.0,
        "cycles_per_sequence": 100,
        "trap_lifetime_ms": 34.0,
        "capture_rate_per_s": 3.0,
        "molasses_rate_per_s": 2000.0,
    },
    "correlator": {
        "bin_width_ns": 1.175,
        "rebin_factor": 4,
        "max_delay_ns": 2350.0,
        "stop_delay_ns": 1000.0,
        "peak_halfwindow_ns": 80.0,
        "background_exclusion_ns": 90.0,
    },
    "rabi": {
        "calib_rabi_sq_per_power": _PI_PULSE_RABI**2,
        "samples_per_point": 400,
        "power_max": 26.0,
        "power_step": 0.25,
    },
    "run": {
        "master_seed": 1,
        "sequences": 8700,
        "threads": 1,
        "noise_quantization_levels": 129,
        "output_dir": "out",
    },
}

_INT_KEYS = {
    ("sequence", "cycles_per_sequence"),
    ("correlator", "rebin_factor"),
    ("rabi", "samples_per_point"),
    ("run", "master_seed"),
    ("run", "sequences"),
    ("run", "threads"),
    ("run", "noise_quantization_levels"),
}


@dataclass(frozen=True)
class CorrelatorSettings:
    bin_width_ns: float = 1.175
    rebin_factor: int = 4
    max_delay_ns: float = 2350.0
    stop_delay_ns: float = 1000.0
    peak_halfwindow_ns: float = 80.0
    background_exclusion_ns: float = 90.0

    def __post_init__(self) -> None:
        if self.bin_width_ns <= 0 or self.max_delay_ns <= self.bin_width_ns:
            raise ValueError("invalid correlator binning")
        if self.rebin_factor < 1:
            raise ValueError("rebin factor must be at least 1")
        if self.stop_delay_ns < 0:
            raise ValueError("stop delay must be non-negative")


@dataclass(frozen=True)
class RabiSettings:
    calib_rabi_sq_per_power: float = _PI_PULSE_RABI**2
    samples_per_point: int = 400
    power_max: float = 26.0
    power_step: float = 0.25

    def __post_init__(self) -> None:
        if self.calib_rabi_sq_per_power <= 0:
            raise ValueError("calibration constant must be positive")
        if self.samples_per_point < 1:
            raise ValueError("samples_per_point must be at least 1")
        if self.power_max <= 0 or self.power_step <= 0:
            raise ValueError("power axis must be positive")


@dataclass
class RunConfig:
    """Validated configuration with all module objects built."""

    atom: AtomModel
    train: PulseTrain
    scheme: LevelScheme
    geometry: CollectionGeometry
    budget: EfficiencyBudget
    measured_efficiency: float
    measured_efficiency_uncertainty: float
    measured_contrast: float
    measured_contrast_uncertainty: float
    detectors: DetectorParams
    detection_efficiency: float
    sequence: SequenceConfig
    correlator: CorrelatorSettings
    rabi: RabiSettings
    master_seed: int
    sequences: int
    threads: int
    noise_quantization_levels: int
    output_dir: str


def _coerce(section: str, key: str, raw: str):
    default = _DEFAULTS[section][key]
    if isinstance(default, str):
        return raw
    try:
        if (section, key) in _INT_KEYS:
            return int(raw)
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r}") from exc


def _build(values: dict[str, dict[str, object]]) -> RunConfig:
    v = values
    try:
        atom = AtomModel(
            gamma=1.0 / (float(v["atom"]["lifetime_ns"]) * 1e-9),
            detuning=float(v["atom"]["detuning_rad_per_s"]),
            transition_label=str(v["atom"]["transition"]))
        train = PulseTrain(
            pulse_duration=float(v["pulse_train"]["pulse_duration_ns"]) * 1e-9,
            period=float(v["pulse_train"]["period_ns"]) * 1e-9,
            peak_rabi=float(v["pulse_train"]["peak_rabi_rad_per_s"]),
            intensity_noise_rel_sigma=float(
                v["pulse_train"]["intensity_noise_rel_sigma"]))
        scheme = LevelScheme(
            depump_prob_per_excitation=float(
                v["level_scheme"]["depump_prob_per_excitation"]),
            repump_rate=float(v["level_scheme"]["repump_rate_per_s"]),
            pi_fraction_emitted=float(v["level_scheme"]["pi_fraction_emitted"]))
        geometry = CollectionGeometry(
            numerical_aperture=float(v["geometry"]["numerical_aperture"]),
            collection_axis_angle_to_quantization_axis=math.radians(
                float(v["geometry"]["collection_axis_angle_deg"])),
            solid_angle_fraction=float(v["geometry"]["solid_angle_fraction"]))
        budget = EfficiencyBudget(factors=(
            ("lens_transmission", float(v["budget"]["lens_transmission"])),
            ("solid_angle_fraction", float(v["budget"]["solid_angle_fraction"])),
            ("pattern_correction", float(v["budget"]["pattern_correction"])),
            ("imaging_optics", float(v["budget"]["imaging_optics"])),
            ("pinhole_and_quantum_efficiency",
             float(v["budget"]["pinhole_and_quantum_efficiency"])),
        ))
        detectors = DetectorParams(
            dark_count_rate=float(v["detection"]["dark_count_rate_per_s"]),
            stray_light_rate=float(v["detection"]["stray_light_rate_per_s"]),
            timestamp_resolution=float(
                v["detection"]["timestamp_resolution_ns"]) * 1e-9,
            dead_time=float(v["detection"]["dead_time_ns"]) * 1e-9)
        efficiency = float(v["detection"]["efficiency"])
        if not 0.0 <= efficiency <= 1.0:
            raise ValueError("detection efficiency must be in [0, 1]")
        sequence = SequenceConfig(
            excitation_window=float(v["sequence"]["excitation_window_us"]) * 1e-6,
            cooling_window=float(v["sequence"]["cooling_window_us"]) * 1e-6,
            cycles_per_sequence=int(v["sequence"]["cycles_per_sequence"]),
            trap_lifetime=float(v["sequence"]["trap_lifetime_ms"]) * 1e-3,
            capture_rate=float(v["sequence"]["capture_rate_per_s"]),
            molasses_background_rate=float(v["sequence"]["molasses_rate_per_s"]))
        correlator = CorrelatorSettings(
            bin_width_ns=float(v["correlator"]["bin_width_ns"]),
            rebin_factor=int(v["correlator"]["rebin_factor"]),
            max_delay_ns=float(v["correlator"]["max_delay_ns"]),
            stop_delay_ns=float(v["correlator"]["stop_delay_ns"]),
            peak_halfwindow_ns=float(v["correlator"]["peak_halfwindow_ns"]),
            background_exclusion_ns=float(
                v["correlator"]["background_exclusion_ns"]))
        rabi = RabiSettings(
            calib_rabi_sq_per_power=float(v["rabi"]["calib_rabi_sq_per_power"]),
            samples_per_point=int(v["rabi"]["samples_per_point"]),
            power_max=float(v["rabi"]["power_max"]),
            power_step=float(v["rabi"]["power_step"]))
        master_seed = int(v["run"]["master_seed"])
        sequences = int(v["run"]["sequences"])
        threads = int(v["run"]["threads"])
        levels = int(v["run"]["noise_quantization_levels"])
        if sequences < 1 or threads < 1 or levels < 1:
            raise ValueError("run counts must be positive")
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return RunConfig(
        atom=atom, train=train, scheme=scheme, geometry=geometry,
        budget=budget,
        measured_efficiency=float(v["budget"]["measured_efficiency"]),
        measured_efficiency_uncertainty=float(v["budget"]["measured_uncertainty"]),
        measured_contrast=float(v["geometry"]["measured_contrast"]),
        measured_contrast_uncertainty=float(
            v["geometry"]["measured_contrast_uncertainty"]),
        detectors=detectors, detection_efficiency=efficiency,
        sequence=sequence, correlator=correlator, rabi=rabi,
        master_seed=master_seed, sequences=sequences, threads=threads,
        noise_quantization_levels=levels, output_dir=str(v["run"]["output_dir"]))


def default_config() -> RunConfig:
    return _build(_DEFAULTS)


def load_config(path: str | None = None) -> RunConfig:
    """Load and validate a configuration file; ``None`` gives the defaults.

    Raises :class:`ConfigError` on unknown sections/keys, unparsable values,
    or any violated module invariant.
    """
    if path is None:
        return default_config()
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path!r}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config file {path!r}: {exc}") from exc

    values = {s: dict(d) for s, d in _DEFAULTS.items()}
    for section in parser.sections():
        if section not in _DEFAULTS:
            raise ConfigError(f"unknown config section [{section}]")
        for key, raw in parser.items(section):
            if key not in _DEFAULTS[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            values[section][key] = _coerce(section, key, raw)
    return _build(values)


def default_config_text() -> str:
    """The default configuration rendered as a config file."""
    buf = io.StringIO()
    for section, entries in _DEFAULTS.items():
        buf.write(f"[{section}]\n")
        for key, value in entries.items():
            if isinstance(value, float):
                buf.write(f"{key} = {value!r}\n")
            else:
                buf.write(f"{key} = {value}\n")
        buf.write("\n")
    return buf.getvalue()


def write_default_config(path) -> None:
    with open(path, "w") as fh:
        fh.write(default_config_text())
