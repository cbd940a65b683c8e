import math

import numpy as np
import pytest
from scipy.stats import kstest

from spsim.bloch import AtomModel, PulseTrain
from spsim.detection import DetectorParams, count_rate
from spsim.jump import LevelScheme, cycling_occupancy, photon_number_distribution
from spsim.sequence import (PipelineHandles, SequenceConfig, average_trace,
                            expected_average_excitation_rate,
                            expected_peak_rate, fit_trace_envelope, gate_events,
                            run_hbt_pipeline, run_sequence, simulate_loading,
                            write_gates_csv, write_trace_csv)


class TestLoading:
    def test_blockade_occupancy_never_two(self):
        rec = simulate_loading(3.0, 500.0, seed=1)
        assert rec.max_occupancy <= 1
        assert set(np.unique(rec.occupancy_after_arrivals())) <= {0, 1}

    def test_balanced_regime_mean_half(self):
        rec = simulate_loading(3.0, 4000.0, seed=2)
        assert rec.mean_occupancy == pytest.approx(0.5, abs=0.03)

    def test_capture_wait_time(self):
        rec = simulate_loading(3.0, 4000.0, seed=3)
        waits = rec.waits_for_atom()
        se = (1 / 3.0) / math.sqrt(waits.size)
        assert waits.mean() == pytest.approx(1 / 3.0, abs=4 * se)

    def test_deterministic(self):
        a = simulate_loading(3.0, 100.0, seed=4)
        b = simulate_loading(3.0, 100.0, seed=4)
        assert np.array_equal(a.arrival_times, b.arrival_times)

    def test_validation(self):
        with pytest.raises(ValueError):
            simulate_loading(0.0, 10.0)
        with pytest.raises(ValueError):
            simulate_loading(1.0, 0.0)


class TestSequenceConfig:
    def test_default_timing(self):
        cfg = SequenceConfig()
        assert cfg.cycle_period == pytest.approx(1e-3)
        assert cfg.duration == pytest.approx(0.1)
        windows = cfg.excitation_windows()
        assert windows.shape == (100, 2)
        assert windows[0, 1] - windows[0, 0] == pytest.approx(115e-6)

    def test_validation(self):
        with pytest.raises(ValueError):
            SequenceConfig(trap_lifetime=0.0)
        with pytest.raises(ValueError):
            SequenceConfig(cycles_per_sequence=0)


class TestRunSequence:
    def test_gates_match_excitation_windows(self, medium_run):
        cfg, handles, _ = medium_run
        run = run_sequence(cfg, handles, seed=5)
        assert np.allclose(run.gates, cfg.excitation_windows())

    def test_no_fluorescence_during_cooling_after_gating(self, medium_run):
        cfg, handles, _ = medium_run
        run = run_sequence(cfg, handles, seed=6)
        gated = gate_events(run.events_a, cfg.excitation_windows())
        t = gated.timestamps_ns * 1e-9
        phase = t % cfg.cycle_period
        assert np.all(phase < cfg.excitation_window)

    def test_fluorescence_stops_at_atom_loss(self, medium_run):
        cfg, handles, _ = medium_run
        run = run_sequence(cfg, handles, seed=7)
        for ev in (run.events_a, run.events_b):
            fluor = ev.timestamps_ns[ev.origin == 0] * 1e-9
            if fluor.size:
                assert fluor.max() <= run.survival_time + 2e-6

    def test_infinite_lifetime_keeps_rates_flat(self):
        cfg = SequenceConfig(trap_lifetime=1e6, molasses_background_rate=0.0)
        handles = PipelineHandles.build(
            AtomModel(), PulseTrain(intensity_noise_rel_sigma=0.0),
            LevelScheme(depump_prob_per_excitation=0.0),
            DetectorParams(dark_count_rate=0.0, stray_light_rate=0.0),
            efficiency=0.006)
        counts_first, counts_last = 0, 0
        for seed in range(150):
            run = run_sequence(cfg, handles, seed=seed)
            for ev in (run.events_a, run.events_b):
                t = ev.timestamps_ns * 1e-9
                counts_first += int(((t >= 0) & (t < 10e-3)).sum())
                counts_last += int(((t >= 90e-3) & (t < 100e-3)).sum())
        diff = counts_first - counts_last
        assert abs(diff) < 4 * math.sqrt(counts_first + counts_last)

    def test_single_loss_transition(self, medium_run):
        # after the atom is lost, only detector noise remains
        cfg, handles, _ = medium_run
        run = run_sequence(cfg, handles, seed=8)
        for ev in (run.events_a, run.events_b):
            t = ev.timestamps_ns * 1e-9
            late = t > run.survival_time + 2e-6
            assert np.all(ev.origin[late] != 0)


class TestPipeline:
    def test_survival_times_are_exponential(self, medium_run):
        cfg, _, result = medium_run
        stat = kstest(result.survival_times,
                      lambda x: 1 - np.exp(-x / cfg.trap_lifetime))
        assert stat.pvalue > 0.01

    def test_excitation_time_accounting(self, medium_run):
        cfg, _, result = medium_run
        expected = result.n_sequences * cfg.cycles_per_sequence * cfg.excitation_window
        assert result.excitation_time == pytest.approx(expected, rel=1e-9)

    def test_average_rate_matches_closed_form(self, medium_run):
        cfg, handles, result = medium_run
        ga = gate_events(result.events_a, result.gates)
        gb = gate_events(result.events_b, result.gates)
        rate = count_rate(ga, result.gates) + count_rate(gb, result.gates)
        dist = photon_number_distribution(handles.atom)
        peak = expected_peak_rate(dist.mean,
                                  cycling_occupancy(handles.scheme, handles.train),
                                  handles.efficiency,
                                  handles.train.repetition_rate)
        noise = (handles.detectors.dark_count_rate
                 + handles.detectors.stray_light_rate)
        expected = expected_average_excitation_rate(
            peak, cfg.trap_lifetime, cfg.duration) + noise
        assert rate == pytest.approx(expected, rel=0.06)

    def test_trace_envelope_lifetime(self, medium_run):
        cfg, _, result = medium_run
        tau, sigma = fit_trace_envelope(result.trace, cfg)
        assert tau == pytest.approx(cfg.trap_lifetime, abs=3e-3)

    def test_threads_do_not_change_results(self):
        cfg = SequenceConfig()
        handles = PipelineHandles.build(AtomModel(), PulseTrain(), LevelScheme(),
                                        DetectorParams(), efficiency=0.006)
        r1 = run_hbt_pipeline(cfg, handles, 12, master_seed=3, threads=1)
        r2 = run_hbt_pipeline(cfg, handles, 12, master_seed=3, threads=4)
        assert np.array_equal(r1.events_a.timestamps_ns, r2.events_a.timestamps_ns)
        assert np.array_equal(r1.events_b.origin, r2.events_b.origin)

    def test_gate_events_filters(self):
        from spsim.detection import EventStream
        ev = EventStream("A", np.array([50, 150, 250], dtype=np.int64))
        out = gate_events(ev, [(100e-9, 200e-9)])
        assert np.array_equal(out.timestamps_ns, [150])


class TestTrace:
    def test_single_run_average_is_identity(self, medium_run):
        cfg, handles, _ = medium_run
        run = run_sequence(cfg, handles, seed=9)
        trace = average_trace([run], bin_width=1e-3)
        total = len(run.events_a) + len(run.events_b)
        assert trace.mean_rate.sum() * 1e-3 == pytest.approx(total)
        assert trace.n_sequences == 1

    def test_inconsistent_durations_rejected(self, medium_run):
        cfg, handles, _ = medium_run
        run = run_sequence(cfg, handles, seed=10)
        other = run_sequence(SequenceConfig(cycles_per_sequence=50), handles,
                             seed=10)
        with pytest.raises(ValueError):
            average_trace([run, other])

    def test_csv_formats(self, medium_run, tmp_path):
        cfg, _, result = medium_run
        trace_path = tmp_path / "trace.csv"
        write_trace_csv(trace_path, result.trace)
        lines = trace_path.read_text().splitlines()
        assert lines[0] == "time_us,mean_rate_hz,n_sequences"
        assert len(lines) == result.trace.mean_rate.size + 1
        gates_path = tmp_path / "gates.csv"
        write_gates_csv(gates_path, result.gates[:5])
        lines = gates_path.read_text().splitlines()
        assert lines[0] == "start_ns,end_ns"
        assert lines[1] == "0,115000"


class TestClosedFormRates:
    def test_peak_rate_paper_numbers(self, atom, pi_train, scheme):
        dist = photon_number_distribution(atom)
        occ = cycling_occupancy(scheme, pi_train)
        peak = expected_peak_rate(dist.mean, occ, 0.006, pi_train.repetition_rate)
        assert peak == pytest.approx(2.9e4, abs=0.2e4)

    def test_average_rate_paper_numbers(self):
        avg = expected_average_excitation_rate(2.93e4, 34e-3, 0.1)
        assert avg == pytest.approx(9.6e3, abs=1.5e3)
        # survival factor (tau/T)(1 - exp(-T/tau)) at the paper timing
        assert avg / 2.93e4 == pytest.approx(0.322, abs=1e-3)
