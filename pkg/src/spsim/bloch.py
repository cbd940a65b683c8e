"""Deterministic dynamics of a resonantly driven, decaying two-level atom.

The atom is described by its density matrix (populations plus the ground-excited
coherence) evolving under the optical Bloch equations with spontaneous decay at
rate ``gamma``.  On resonance and for a square drive of Rabi frequency ``omega``
the equations of motion are

    d(pe)/dt = omega * Im(rho_ge) - gamma * pe
    d(rho_ge)/dt = -i * detuning * rho_ge - i * (omega/2) * (pe - pg)
                   - (gamma/2) * rho_ge

Everything in this module is SI: times in seconds, rates in s^-1, angular
frequencies in rad/s.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericsError

# Sub-step divisor applied on top of the min(1/gamma, 2pi/omega) guard.  A
# divisor of 80 keeps the global RK4 error below ~1e-5 even for multi-cycle
# pulses, comfortably inside the 1e-3 oracle tolerance.
_STEP_DIVISOR = 80.0
_GUARD_DIVISOR = 20.0


@dataclass(frozen=True)
class AtomModel:
    """Two-level atom parameters.

    gamma: spontaneous decay rate in s^-1 (defaults to a 26 ns lifetime).
    detuning: drive detuning from resonance in rad/s.
    transition_label: free-text label of the physical transition.
    """

    gamma: float = 1.0 / 26e-9
    detuning: float = 0.0
    transition_label: str = "F=2,mF=+2 -> F'=3,mF'=+3"

    def __post_init__(self) -> None:
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")

    @property
    def lifetime(self) -> float:
        """Excited-state lifetime 1/gamma in seconds."""
        return 1.0 / self.gamma


@dataclass(frozen=True)
class PulseTrain:
    """Square-pulse excitation schedule with per-pulse intensity noise.

    The drive is a train of ``n_pulses`` square pulses of duration
    ``pulse_duration`` repeating every ``period`` seconds.  Pulse-to-pulse
    intensity fluctuations are modelled as a multiplicative Gaussian factor on
    the power (mean 1, relative sigma ``intensity_noise_rel_sigma``, truncated
    at zero); the Rabi frequency scales with its square root.
    """

    pulse_duration: float = 4e-9
    period: float = 200e-9
    peak_rabi: float = math.pi / 4e-9
    intensity_noise_rel_sigma: float = 0.10
    n_pulses: int = 1
    pulse_shape: str = "square"

    def __post_init__(self) -> None:
        if not self.pulse_duration > 0:
            raise ValueError("pulse_duration must be positive")
        if not self.pulse_duration < self.period:
            raise ValueError("pulse_duration must be shorter than the period")
        if self.peak_rabi < 0:
            raise ValueError("peak_rabi must be non-negative")
        if self.intensity_noise_rel_sigma < 0:
            raise ValueError("intensity noise sigma must be non-negative")
        if self.n_pulses < 1:
            raise ValueError("n_pulses must be at least 1")
        if self.pulse_shape != "square":
            raise ValueError(f"unsupported pulse shape {self.pulse_shape!r}")

    @property
    def repetition_rate(self) -> float:
        return 1.0 / self.period

    def noise_factors(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``n`` per-pulse intensity factors (Gaussian, truncated at 0)."""
        sigma = self.intensity_noise_rel_sigma
        if sigma == 0.0:
            return np.ones(n)
        f = rng.normal(1.0, sigma, size=n)
        while np.any(f <= 0.0):  # truncation; essentially never triggers at 10%
            bad = f <= 0.0
            f[bad] = rng.normal(1.0, sigma, size=int(bad.sum()))
        return f


@dataclass(frozen=True)
class BlochState:
    """Density-matrix snapshot: populations and the ground-excited coherence."""

    population_excited: float
    population_ground: float
    coherence_re: float = 0.0
    coherence_im: float = 0.0

    def __post_init__(self) -> None:
        self.check()

    @classmethod
    def ground(cls) -> "BlochState":
        return cls(0.0, 1.0)

    @classmethod
    def excited(cls) -> "BlochState":
        return cls(1.0, 0.0)

    def check(self, tol: float = 1e-9) -> None:
        """Validate trace and positivity invariants; raises on violation."""
        pe, pg = self.population_excited, self.population_ground
        if not (-tol <= pe <= 1 + tol and -tol <= pg <= 1 + tol):
            raise ValueError(f"populations out of range: pe={pe}, pg={pg}")
        if abs(pe + pg - 1.0) > tol:
            raise ValueError(f"populations must sum to 1, got {pe + pg}")
        coh2 = self.coherence_re**2 + self.coherence_im**2
        if coh2 > pe * pg + tol:
            raise ValueError("coherence exceeds the purity bound |rho_ge|^2 <= pe*pg")


@dataclass(frozen=True)
class TimeSpectrum:
    """Emission rate gamma * pe(t) on a uniform time grid."""

    times: np.ndarray
    emission_rate: np.ndarray

    def __post_init__(self) -> None:
        if self.times.shape != self.emission_rate.shape:
            raise ValueError("times and emission_rate must have the same shape")
        if np.any(self.emission_rate < 0):
            raise ValueError("emission rate must be non-negative")


def ideal_excitation_probability(omega: float, t: float) -> float:
    """Excited-state probability sin^2(omega*t/2) for a lossless resonant pulse."""
    if omega < 0:
        raise ValueError("omega must be non-negative")
    if t < 0:
        raise ValueError("t must be non-negative")
    return math.sin(0.5 * omega * t) ** 2


def _step_guard(gamma: float, omega: float) -> float:
    """Maximum admissible integrator step min(1/gamma, 2pi/omega)/20."""
    guard = 1.0 / gamma
    if omega > 0:
        guard = min(guard, 2.0 * math.pi / omega)
    return guard / _GUARD_DIVISOR


def _obe_rhs(y: np.ndarray, omega, gamma: float, detuning: float) -> np.ndarray:
    """Right-hand side for (pg, pe, re, im, n_emitted); omega may be an array."""
    pg, pe, re, im = y[0], y[1], y[2], y[3]
    out = np.empty_like(y)
    out[0] = -omega * im + gamma * pe
    out[1] = omega * im - gamma * pe
    out[2] = detuning * im - 0.5 * gamma * re
    out[3] = -detuning * re + 0.5 * omega * (pg - pe) - 0.5 * gamma * im
    out[4] = gamma * pe  # cumulative emitted-photon number
    return out


def _march(y: np.ndarray, omega, gamma: float, detuning: float,
           duration: float, h_max: float) -> np.ndarray:
    """Fixed-step RK4 march of the Bloch vector over ``duration``.

    ``y`` has shape (5,) or (5, n); ``omega`` is a scalar or an array matching
    the trailing dimension.  The step is ``duration/ceil(duration/h_max)`` so
    the guard is always respected exactly.
    """
    if duration <= 0:
        return y
    n_steps = max(1, int(math.ceil(duration / h_max)))
    h = duration / n_steps
    for _ in range(n_steps):
        k1 = _obe_rhs(y, omega, gamma, detuning)
        k2 = _obe_rhs(y + 0.5 * h * k1, omega, gamma, detuning)
        k3 = _obe_rhs(y + 0.5 * h * k2, omega, gamma, detuning)
        k4 = _obe_rhs(y + h * k3, omega, gamma, detuning)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return y


def _state_to_vec(state: BlochState) -> np.ndarray:
    return np.array([state.population_ground, state.population_excited,
                     state.coherence_re, state.coherence_im, 0.0])


def evolve_bloch(state: BlochState, model: AtomModel, omega: float,
                 dt: float, max_step: float | None = None) -> BlochState:
    """Evolve a Bloch state for a duration ``dt`` under a constant drive.

    Integration uses fixed-step RK4 with an internal sub-step no larger than
    min(1/gamma, 2pi/omega)/20 (the step guard), so ``dt`` may span many
    lifetimes.  An explicit ``max_step`` larger than the guard is rejected.
    Raises :class:`NumericsError` if the state invariants break after the
    evolution, which would signal an integrator bug.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if omega < 0:
        raise ValueError("omega must be non-negative")
    guard = _step_guard(model.gamma, omega)
    if max_step is not None:
        if max_step > guard:
            raise ValueError(
                f"max_step {max_step:g} violates the step guard {guard:g}")
        guard = max_step
    # accuracy sub-step below the hard guard
    h = min(guard, _step_guard(model.gamma, omega) * _GUARD_DIVISOR / _STEP_DIVISOR)
    y = _march(_state_to_vec(state), omega, model.gamma, model.detuning, dt, h)
    new = BlochState.__new__(BlochState)
    object.__setattr__(new, "population_ground", float(y[0]))
    object.__setattr__(new, "population_excited", float(y[1]))
    object.__setattr__(new, "coherence_re", float(y[2]))
    object.__setattr__(new, "coherence_im", float(y[3]))
    try:
        new.check()
    except ValueError as exc:
        raise NumericsError(f"integrator produced an invalid state: {exc}") from exc
    return new


def pulse_time_spectrum(model: AtomModel, omega: float, pulse_duration: float,
                        horizon: float, grid_dt: float) -> TimeSpectrum:
    """Emission rate gamma*pe(t) for one square pulse followed by free decay.

    The atom starts in the ground state; the drive is on for
    ``pulse_duration`` and off until ``horizon``.  The rate is sampled on a
    uniform grid of spacing ``grid_dt`` (internal sub-steps keep the
    integrator inside its guard regardless of the grid).
    """
    if horizon <= pulse_duration:
        raise ValueError("horizon must exceed the pulse duration")
    if grid_dt <= 0:
        raise ValueError("grid_dt must be positive")
    if omega < 0:
        raise ValueError("omega must be non-negative")
    h_on = min(_step_guard(model.gamma, omega),
               _step_guard(model.gamma, omega) * _GUARD_DIVISOR / _STEP_DIVISOR)
    h_off = _step_guard(model.gamma, 0.0)
    times = np.arange(0.0, horizon + 0.5 * grid_dt, grid_dt)
    pe = np.empty_like(times)
    y = _state_to_vec(BlochState.ground())
    pe[0] = y[1]
    for i in range(1, len(times)):
        t0, t1 = times[i - 1], times[i]
        if t1 <= pulse_duration:  # fully driven segment
            y = _march(y, omega, model.gamma, model.detuning, t1 - t0, h_on)
        elif t0 >= pulse_duration:  # fully free segment
            y = _march(y, 0.0, model.gamma, model.detuning, t1 - t0, h_off)
        else:  # grid interval straddles the pulse edge
            y = _march(y, omega, model.gamma, model.detuning, pulse_duration - t0, h_on)
            y = _march(y, 0.0, model.gamma, model.detuning, t1 - pulse_duration, h_off)
        pe[i] = y[1]
    rate = model.gamma * np.clip(pe, 0.0, None)
    return TimeSpectrum(times=times, emission_rate=rate)


def pulse_excitation_and_yield(model: AtomModel, omega, pulse_duration: float):
    """Excited population at pulse end and mean photons per pulse.

    ``omega`` may be a scalar or an array (one integration vectorised over
    drive strengths).  The mean photon number per pulse is the in-pulse
    emission integral plus the end-of-pulse excited population (an excited
    atom decays and emits exactly one photon once the drive is off).

    Returns (pe_end, mean_photons), matching the shape of ``omega``.
    """
    om = np.asarray(omega, dtype=float)
    if np.any(om < 0):
        raise ValueError("omega must be non-negative")
    scalar = om.ndim == 0
    om = np.atleast_1d(om)
    y = np.zeros((5, om.size))
    y[0] = 1.0
    omega_max = float(om.max())
    h = min(_step_guard(model.gamma, omega_max),
            _step_guard(model.gamma, omega_max) * _GUARD_DIVISOR / _STEP_DIVISOR)
    y = _march(y, om, model.gamma, model.detuning, pulse_duration, h)
    pe_end = np.clip(y[1], 0.0, 1.0)
    mean_photons = y[4] + pe_end
    if scalar:
        return float(pe_end[0]), float(mean_photons[0])
    return pe_end, mean_photons


@dataclass(frozen=True)
class RabiScanPoint:
    """One point of a pulsed Rabi power scan."""

    power: float
    probability: float            # mean excited population at pulse end
    mean_photons_per_pulse: float


def rabi_scan(model: AtomModel, train: PulseTrain, power_axis,
              calib: float, samples_per_point: int = 1,
              seed: int | None = 0) -> list[RabiScanPoint]:
    """Scan the mean per-pulse excitation probability against pulse power.

    ``calib`` converts relative power to squared Rabi frequency,
    omega^2 = calib * power.  For each power, ``samples_per_point``
    intensity-noise factors are drawn from the train's noise model and the
    Bloch equations are integrated over one pulse per draw; the reported
    probability is the noise-averaged excited population at the end of the
    pulse.  ``mean_photons_per_pulse`` additionally counts photons emitted
    while the drive is on, and is the quantity a count-rate measurement sees.
    """
    powers = np.asarray(power_axis, dtype=float)
    if powers.size == 0:
        raise ValueError("power axis must not be empty")
    if np.any(powers < 0):
        raise ValueError("powers must be non-negative")
    if calib <= 0:
        raise ValueError("calibration constant must be positive")
    if samples_per_point < 1:
        raise ValueError("samples_per_point must be at least 1")

    omega_nominal = np.sqrt(calib * powers)
    if train.intensity_noise_rel_sigma == 0.0 or samples_per_point == 1:
        factors = np.ones((1, powers.size))
    else:
        rng = np.random.default_rng(seed)
        factors = train.noise_factors(samples_per_point * powers.size, rng)
        factors = factors.reshape(samples_per_point, powers.size)
    omega_eff = omega_nominal[None, :] * np.sqrt(factors)
    pe_end, nu = pulse_excitation_and_yield(model, omega_eff.ravel(),
                                            train.pulse_duration)
    pe_end = pe_end.reshape(omega_eff.shape).mean(axis=0)
    nu = nu.reshape(omega_eff.shape).mean(axis=0)
    return [RabiScanPoint(float(p), float(pe), float(n))
            for p, pe, n in zip(powers, pe_end, nu)]
