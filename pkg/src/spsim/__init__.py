"""Stochastic simulator for a pulsed single-photon source from one trapped atom.

The package models the full chain from first-principles dynamics to detected
click statistics: optical Bloch dynamics of the driven two-level atom
(:mod:`spsim.bloch`), quantum-jump photon emission sampling
(:mod:`spsim.jump`), dipole collection optics and the efficiency budget
(:mod:`spsim.optics`), the detector chain (:mod:`spsim.detection`), start-stop
correlation analysis (:mod:`spsim.correlator`), and the trapped-atom duty
cycle (:mod:`spsim.sequence`).
"""

from .bloch import (AtomModel, BlochState, PulseTrain, RabiScanPoint,
                    TimeSpectrum, evolve_bloch, ideal_excitation_probability,
                    pulse_excitation_and_yield, pulse_time_spectrum, rabi_scan)
from .config import RunConfig, default_config, load_config, write_default_config
from .correlator import (Histogram, PeakReport, expected_noise_floor,
                         peak_analysis, rebin, start_stop_histogram)
from .detection import DetectorParams, EventStream, count_rate, detect
from .errors import ConfigError, NumericsError
from .jump import (LevelScheme, PhotonNumberDistribution, PhotonRecord,
                   PulseSampler, cycling_occupancy, expected_central_peak_ratio,
                   photon_number_distribution, sample_pulse_counts,
                   sample_trajectory)
from .optics import (CollectionGeometry, EfficiencyBudget,
                     calibrate_efficiency_from_saturation, dipole_pattern,
                     invert_pi_fraction, overall_efficiency,
                     pattern_correction_factor, polarization_contrast)
from .sequence import (FluorescenceTrace, HbtRunResult, LoadingRecord,
                       PipelineHandles, SequenceConfig, SequenceRun,
                       average_trace, expected_average_excitation_rate,
                       expected_peak_rate, fit_trace_envelope, gate_events,
                       run_hbt_pipeline, run_sequence, simulate_loading)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
