import math

import numpy as np
import pytest

from spsim.bloch import (AtomModel, BlochState, PulseTrain, evolve_bloch,
                         ideal_excitation_probability,
                         pulse_excitation_and_yield, pulse_time_spectrum,
                         rabi_scan)

GAMMA = 1.0 / 26e-9
T_PULSE = 4e-9
PI_RABI = math.pi / T_PULSE

# Fine-step oracle values for the driven decaying atom starting in the ground
# state (independent integration, rtol 1e-12); see oracle_rk4 below.
PE_END_PI = 0.944375453       # excited population after a 4 ns pi pulse
NU_PI = 1.017808234           # mean photons per pi pulse (in-pulse + tail)
PE_END_2PI = 0.054472949
PE_END_3PI = 0.945385306


def oracle_rk4(omega, duration, gamma=GAMMA, detuning=0.0, n_steps=40_000):
    """Independent fine-step RK4 integration of the optical Bloch equations."""
    def rhs(y):
        pg, pe, re, im, nem = y
        return (
            -omega * im + gamma * pe,
            omega * im - gamma * pe,
            detuning * im - 0.5 * gamma * re,
            -detuning * re + 0.5 * omega * (pg - pe) - 0.5 * gamma * im,
            gamma * pe,
        )

    y = (1.0, 0.0, 0.0, 0.0, 0.0)
    h = duration / n_steps
    for _ in range(n_steps):
        k1 = rhs(y)
        k2 = rhs(tuple(a + 0.5 * h * b for a, b in zip(y, k1)))
        k3 = rhs(tuple(a + 0.5 * h * b for a, b in zip(y, k2)))
        k4 = rhs(tuple(a + h * b for a, b in zip(y, k3)))
        y = tuple(a + (h / 6.0) * (b + 2 * c + 2 * d + e)
                  for a, b, c, d, e in zip(y, k1, k2, k3, k4))
    return y


class TestIdealExcitation:
    def test_pi_pulse_maximum(self):
        assert ideal_excitation_probability(PI_RABI, T_PULSE) == pytest.approx(1.0)

    def test_no_drive(self):
        assert ideal_excitation_probability(0.0, T_PULSE) == 0.0

    def test_full_cycle(self):
        assert ideal_excitation_probability(2 * PI_RABI, T_PULSE) == \
            pytest.approx(0.0, abs=1e-12)

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            ideal_excitation_probability(-1.0, 1e-9)
        with pytest.raises(ValueError):
            ideal_excitation_probability(1.0, -1e-9)

    def test_periodic_in_pulse_area(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            omega = rng.uniform(0, 5e9)
            t = rng.uniform(1e-10, 2e-8)
            shifted = omega + 2 * math.pi / t * rng.integers(1, 4)
            assert ideal_excitation_probability(omega, t) == pytest.approx(
                ideal_excitation_probability(shifted, t), abs=1e-9)


class TestEvolveBloch:
    def test_ground_state_is_stationary(self, atom):
        out = evolve_bloch(BlochState.ground(), atom, 0.0, 10e-9)
        assert out.population_excited == pytest.approx(0.0, abs=1e-12)
        assert out.population_ground == pytest.approx(1.0, abs=1e-12)

    def test_pure_exponential_decay(self, atom):
        out = evolve_bloch(BlochState.excited(), atom, 0.0, 26e-9)
        assert out.population_excited == pytest.approx(math.exp(-1.0), abs=1e-6)

    def test_pi_pulse_matches_fine_step_oracle(self, atom):
        out = evolve_bloch(BlochState.ground(), atom, PI_RABI, T_PULSE)
        oracle = oracle_rk4(PI_RABI, T_PULSE)[1]
        assert oracle == pytest.approx(PE_END_PI, abs=1e-7)
        assert out.population_excited == pytest.approx(oracle, abs=1e-6)
        assert out.population_excited < 1.0  # decay during the pulse

    def test_step_guard_violation(self, atom):
        with pytest.raises(ValueError):
            evolve_bloch(BlochState.ground(), atom, PI_RABI, 4e-9, max_step=1e-9)

    def test_population_conservation(self, atom):
        state = BlochState.ground()
        for omega in (0.0, 0.3 * PI_RABI, 2.2 * PI_RABI):
            s = state
            for _ in range(5):
                s = evolve_bloch(s, atom, omega, 1.7e-9)
                total = s.population_excited + s.population_ground
                assert total == pytest.approx(1.0, abs=1e-9)

    def test_invalid_dt(self, atom):
        with pytest.raises(ValueError):
            evolve_bloch(BlochState.ground(), atom, 0.0, 0.0)


class TestBlochState:
    def test_rejects_bad_trace(self):
        with pytest.raises(ValueError):
            BlochState(0.6, 0.6)

    def test_rejects_purity_violation(self):
        with pytest.raises(ValueError):
            BlochState(0.5, 0.5, coherence_re=0.7)


class TestTimeSpectrum:
    def test_zero_drive_is_dark(self, atom):
        spec = pulse_time_spectrum(atom, 0.0, T_PULSE, 100e-9, 0.5e-9)
        assert np.all(spec.emission_rate == 0.0)

    @pytest.mark.parametrize("mult,n_maxima", [(1, 1), (2, 1), (3, 2)])
    def test_number_of_rabi_maxima(self, atom, mult, n_maxima):
        # expected count is floor(omega*T / 2pi + 1/2)
        spec = pulse_time_spectrum(atom, mult * PI_RABI, T_PULSE, 150e-9, 0.01e-9)
        in_pulse = spec.times <= T_PULSE
        r = spec.emission_rate[in_pulse]
        interior = np.flatnonzero((r[1:-1] > r[:-2]) & (r[1:-1] >= r[2:])) + 1
        count = interior.size
        if r[-1] > r[-2]:  # maximum reached at the pulse edge
            count += 1
        assert count == n_maxima
        assert n_maxima == int(mult * math.pi / (2 * math.pi) + 0.5)

    def test_pi_pulse_tail_is_exponential(self, atom):
        spec = pulse_time_spectrum(atom, PI_RABI, T_PULSE, 150e-9, 0.1e-9)
        tail = spec.times > T_PULSE + 1e-12
        t = spec.times[tail]
        r = spec.emission_rate[tail]
        model = r[0] * np.exp(-GAMMA * (t - t[0]))
        assert np.max(np.abs(r - model) / model) < 1e-3

    def test_two_pi_returns_near_zero(self, atom):
        spec = pulse_time_spectrum(atom, 2 * PI_RABI, T_PULSE, 20e-9, 0.01e-9)
        in_pulse = spec.emission_rate[spec.times <= T_PULSE]
        assert spec.emission_rate[np.searchsorted(spec.times, T_PULSE)] < \
            0.1 * in_pulse.max()

    def test_invalid_grid(self, atom):
        with pytest.raises(ValueError):
            pulse_time_spectrum(atom, PI_RABI, 4e-9, 3e-9, 0.1e-9)


class TestRabiScan:
    CALIB = PI_RABI**2  # power 1.0 drives a pi pulse

    def test_noiseless_matches_oracle(self, atom, quiet_train):
        powers = [0.0, 1.0, 4.0, 9.0]
        pts = rabi_scan(atom, quiet_train, powers, self.CALIB)
        assert pts[0].probability == 0.0
        assert pts[1].probability == pytest.approx(PE_END_PI, abs=1e-3)
        assert pts[2].probability == pytest.approx(PE_END_2PI, abs=1e-3)
        assert pts[3].probability == pytest.approx(PE_END_3PI, abs=1e-3)
        assert pts[1].mean_photons_per_pulse == pytest.approx(NU_PI, abs=1e-3)
        for p in pts[1:]:
            oracle = oracle_rk4(math.sqrt(self.CALIB * p.power), T_PULSE)
            assert p.probability == pytest.approx(oracle[1], abs=1e-4)
            assert p.mean_photons_per_pulse == pytest.approx(
                oracle[4] + oracle[1], abs=1e-4)

    def test_low_decay_limit_reaches_unity(self, quiet_train):
        slow = AtomModel(gamma=1.0)  # lifetime far beyond the pulse
        pts = rabi_scan(slow, quiet_train, [1.0], self.CALIB)
        assert pts[0].probability == pytest.approx(1.0, abs=1e-3)

    def test_noise_smears_oscillations(self, atom, pi_train):
        # maxima at pulse areas pi, 3pi, 5pi; minima at 2pi, 4pi, 6pi
        maxima = [1.0, 9.0, 25.0]
        minima = [4.0, 16.0, 36.0]
        pts = rabi_scan(atom, pi_train, maxima + minima, self.CALIB,
                        samples_per_point=10_000, seed=11)
        top = [p.probability for p in pts[:3]]
        bottom = [p.probability for p in pts[3:]]
        contrast = [(t - b) / (t + b) for t, b in zip(top, bottom)]
        assert contrast[0] > contrast[1] > contrast[2]

    def test_reproducible(self, atom, pi_train):
        a = rabi_scan(atom, pi_train, [1.0, 2.0], self.CALIB, 100, seed=5)
        b = rabi_scan(atom, pi_train, [1.0, 2.0], self.CALIB, 100, seed=5)
        assert a == b

    def test_errors(self, atom, quiet_train):
        with pytest.raises(ValueError):
            rabi_scan(atom, quiet_train, [], self.CALIB)
        with pytest.raises(ValueError):
            rabi_scan(atom, quiet_train, [1.0], -1.0)


class TestPulseTrain:
    def test_validation(self):
        with pytest.raises(ValueError):
            PulseTrain(pulse_duration=300e-9)  # longer than the period
        with pytest.raises(ValueError):
            PulseTrain(peak_rabi=-1.0)
        with pytest.raises(ValueError):
            PulseTrain(intensity_noise_rel_sigma=-0.1)

    def test_noise_factors_truncated_and_reproducible(self):
        train = PulseTrain()
        rng = np.random.default_rng(3)
        f = train.noise_factors(50_000, rng)
        assert np.all(f > 0)
        assert f.mean() == pytest.approx(1.0, abs=3 * 0.1 / math.sqrt(50_000))
        rng2 = np.random.default_rng(3)
        assert np.array_equal(f, train.noise_factors(50_000, rng2))


def test_atom_model_defaults(atom):
    assert atom.lifetime == pytest.approx(26e-9, rel=1e-12)
    with pytest.raises(ValueError):
        AtomModel(gamma=0.0)


def test_yield_vectorised_matches_scalar(atom):
    # the vectorised path shares one step set by the largest drive, so
    # agreement with per-value integration is at discretisation level
    omegas = np.array([0.5, 1.0, 2.0]) * PI_RABI
    pe_vec, nu_vec = pulse_excitation_and_yield(atom, omegas, T_PULSE)
    for om, pe, nu in zip(omegas, pe_vec, nu_vec):
        pe_s, nu_s = pulse_excitation_and_yield(atom, float(om), T_PULSE)
        assert pe == pytest.approx(pe_s, abs=1e-6)
        assert nu == pytest.approx(nu_s, abs=1e-6)
