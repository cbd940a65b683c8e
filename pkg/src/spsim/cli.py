"""Command-line entry point for seeded runs of the simulation pipeline.

Commands write plain CSV / structured-text results into the output directory;
identical configuration and seed produce byte-identical files.  Exit codes:
0 success, 2 configuration error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import jump, optics
from .bloch import rabi_scan
from .config import RunConfig, load_config, write_default_config
from .correlator import (expected_noise_floor, peak_analysis, rebin,
                         start_stop_histogram, write_histogram_csv)
from .detection import write_event_streams
from .errors import ConfigError, NumericsError
from .sequence import (PipelineHandles, gate_events, run_hbt_pipeline,
                       write_gates_csv, write_trace_csv)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _ensure_out(out_dir: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    return out_dir


def _parse_powers(spec: str | None, cfg: RunConfig) -> np.ndarray:
    if spec is None:
        step = cfg.rabi.power_step
        return np.arange(0.0, cfg.rabi.power_max + 0.5 * step, step)
    try:
        if ":" in spec:
            parts = [float(x) for x in spec.split(":")]
            if len(parts) == 2:
                lo, hi, step = parts[0], parts[1], 1.0
            elif len(parts) == 3:
                lo, hi, step = parts
            else:
                raise ValueError(spec)
            return np.arange(lo, hi + 0.5 * step, step)
        return np.array([float(x) for x in spec.split(",")])
    except ValueError as exc:
        raise ConfigError(f"cannot parse power axis {spec!r}") from exc


def cmd_rabi_scan(cfg: RunConfig, out_dir: str, powers: np.ndarray,
                  seed: int) -> None:
    """Pulsed power scan: CSV of (power, probability, count_rate_hz)."""
    points = rabi_scan(cfg.atom, cfg.train, powers,
                       cfg.rabi.calib_rabi_sq_per_power,
                       samples_per_point=cfg.rabi.samples_per_point, seed=seed)
    path = os.path.join(_ensure_out(out_dir), "rabi.csv")
    rep = cfg.train.repetition_rate
    eta = cfg.detection_efficiency
    with open(path, "w") as fh:
        fh.write("power,probability,count_rate_hz\n")
        for p in points:
            rate = rep * eta * p.mean_photons_per_pulse
            fh.write(f"{p.power:.6g},{p.probability:.8g},{rate:.8g}\n")
    print(f"wrote {path} ({len(points)} points)")


def cmd_hbt(cfg: RunConfig, out_dir: str, sequences: int, seed: int,
            threads: int, export_photon_sequences: int = 0) -> None:
    """Full pipeline run: event files, histogram CSV, peak report, trace."""
    out = _ensure_out(out_dir)
    handles = PipelineHandles.build(cfg.atom, cfg.train, cfg.scheme,
                                    cfg.detectors, cfg.detection_efficiency,
                                    n_noise_levels=cfg.noise_quantization_levels)
    result = run_hbt_pipeline(cfg.sequence, handles, sequences,
                              master_seed=seed, threads=threads)
    gated_a = gate_events(result.events_a, result.gates)
    gated_b = gate_events(result.events_b, result.gates)

    cs = cfg.correlator
    hist_raw = start_stop_histogram(
        gated_a, gated_b, cs.bin_width_ns, cs.max_delay_ns,
        stop_delay_ns=cs.stop_delay_ns,
        total_acquisition_time_s=result.excitation_time,
        gate_description=f"{sequences} sequences x "
                         f"{cfg.sequence.cycles_per_sequence} excitation windows")
    hist = rebin(hist_raw, cs.rebin_factor)
    noise_rate = 0.5 * (cfg.detectors.dark_count_rate
                        + cfg.detectors.stray_light_rate)
    floor = expected_noise_floor(hist.bin_width_ns, len(gated_a), len(gated_b),
                                 result.excitation_time, noise_rate)
    report = peak_analysis(hist, cfg.train.period * 1e9,
                           peak_halfwindow_ns=cs.peak_halfwindow_ns,
                           background_exclusion_ns=cs.background_exclusion_ns,
                           noise_floor_per_bin=floor)

    write_event_streams(os.path.join(out, "events.csv"), gated_a, gated_b)
    write_histogram_csv(os.path.join(out, "histogram.csv"), hist)
    write_trace_csv(os.path.join(out, "trace.csv"), result.trace)
    write_gates_csv(os.path.join(out, "gates.csv"), result.gates)
    with open(os.path.join(out, "peaks.txt"), "w") as fh:
        fh.write(f"excitation_time_s: {result.excitation_time:.6g}\n")
        fh.write(f"n_sequences: {result.n_sequences}\n")
        fh.write(f"noise_floor_per_bin: {floor:.6g}\n")
        fh.write(report.to_text())

    if export_photon_sequences > 0:
        n_exp = min(export_photon_sequences, sequences)
        tids, pidx, times, pols = _export_photons(cfg, handles, seed, n_exp)
        jump.write_photon_stream(os.path.join(out, "photons.csv"),
                                 tids, pidx, times, pols)
        print(f"wrote photons.csv for {n_exp} sequences")

    print(f"wrote {out}/events.csv ({len(gated_a) + len(gated_b)} events), "
          f"histogram.csv, peaks.txt, trace.csv, gates.csv")
    print(f"excitation time: {result.excitation_time:.1f} s; "
          f"central ratio {report.central_ratio:.4f} "
          f"± {report.central_ratio_uncertainty:.4f}; "
          f"peak 1/e half-width {report.half_width_ns:.1f} ns")


def _export_photons(cfg: RunConfig, handles: PipelineHandles, seed: int,
                    n_sequences: int):
    """Regenerate the emission streams of the first sequences (same seeds)."""
    import math as _math

    from .sequence import _sequence_seed
    tids, pidx, times, pols = [], [], [], []
    for i in range(n_sequences):
        rng = _sequence_seed(seed, i)
        survival = rng.exponential(cfg.sequence.trap_lifetime)
        windows = cfg.sequence.excitation_windows()
        per_window = int(_math.floor(cfg.sequence.excitation_window
                                     / cfg.train.period + 1e-9))
        offsets = np.arange(per_window) * cfg.train.period
        starts = (windows[:, 0][:, None] + offsets[None, :]).ravel()
        bright = starts[starts < survival]
        t, owner, pol = handles.sampler.sample_stream(bright, rng)
        pulse_index = np.searchsorted(starts, bright[owner], side="right") - 1
        tids.append(np.full(t.size, i, np.int64))
        pidx.append(pulse_index.astype(np.int64))
        times.append(t + i * cfg.sequence.duration)
        pols.append(pol)
    return (np.concatenate(tids), np.concatenate(pidx),
            np.concatenate(times), np.concatenate(pols))


def cmd_budget(cfg: RunConfig, out_dir: str) -> None:
    """Efficiency budget table, overall product, compatibility flag."""
    overall = optics.overall_efficiency(cfg.budget)
    compatible = optics.budget_compatible(cfg.budget, cfg.measured_efficiency,
                                          cfg.measured_efficiency_uncertainty)
    recomputed = optics.pattern_correction_factor(cfg.geometry, optics.SIGMA_PLUS)
    lines = ["collection/detection efficiency budget", ""]
    for label, value in cfg.budget.factors:
        lines.append(f"{label}: {value:.4g}")
    lines += [
        "",
        f"overall_efficiency: {overall:.6g}",
        f"measured_efficiency: {cfg.measured_efficiency:.6g} "
        f"± {cfg.measured_efficiency_uncertainty:.2g}",
        f"compatible_within_2_sigma: {'yes' if compatible else 'no'}",
        f"pattern_correction_recomputed: {recomputed:.4f}",
    ]
    text = "\n".join(lines) + "\n"
    path = os.path.join(_ensure_out(out_dir), "budget.txt")
    with open(path, "w") as fh:
        fh.write(text)
    print(text, end="")


def cmd_contrast(cfg: RunConfig, out_dir: str) -> None:
    """Polarization-contrast report for the configured geometry."""
    g = cfg.geometry
    c_sigma = optics.polarization_contrast(g, 0.0)
    c_pi = optics.polarization_contrast(g, 1.0)
    pi_frac = optics.invert_pi_fraction(g, cfg.measured_contrast)
    lo = optics.invert_pi_fraction(
        g, min(cfg.measured_contrast + cfg.measured_contrast_uncertainty, c_sigma))
    hi = optics.invert_pi_fraction(
        g, max(cfg.measured_contrast - cfg.measured_contrast_uncertainty, c_pi))
    lines = [
        f"numerical_aperture: {g.numerical_aperture:g}",
        f"pure_sigma_contrast: {c_sigma:.4f}",
        f"pure_pi_contrast: {c_pi:.4f}",
        f"measured_contrast: {cfg.measured_contrast:g} "
        f"± {cfg.measured_contrast_uncertainty:g}",
        f"collected_pi_fraction: {pi_frac:.4f} "
        f"(range {lo:.4f} .. {hi:.4f})",
        f"emitted_pi_fraction: "
        f"{optics.emitted_fraction_from_collected(g, pi_frac):.4f}",
    ]
    text = "\n".join(lines) + "\n"
    path = os.path.join(_ensure_out(out_dir), "contrast.txt")
    with open(path, "w") as fh:
        fh.write(text)
    print(text, end="")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spsim",
        description="Pulsed single-photon source simulator and analysis")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", metavar="PATH", default=None,
                       help="configuration file (defaults when omitted)")
        p.add_argument("--seed", type=int, default=None, metavar="N",
                       help="master seed (overrides the config)")
        p.add_argument("--out", metavar="DIR", default=None,
                       help="output directory (default: from config)")
        p.add_argument("--sequences", type=int, default=None, metavar="N",
                       help="number of sequences (overrides the config)")
        p.add_argument("--threads", type=int, default=None, metavar="N",
                       help="worker threads (overrides the config)")

    p = sub.add_parser("rabi-scan", help="pulsed Rabi power scan")
    common(p)
    p.add_argument("--powers", metavar="LO:HI:STEP|P1,P2,...", default=None,
                   help="relative power axis (default from config)")

    p = sub.add_parser("hbt", help="full pipeline and start-stop histogram")
    common(p)
    p.add_argument("--export-photons", type=int, default=0, metavar="N",
                   help="also export the emission streams of the first N sequences")

    for name, help_text in (("budget", "efficiency budget report"),
                            ("contrast", "polarization contrast report")):
        p = sub.add_parser(name, help=help_text)
        common(p)

    p = sub.add_parser("write-config", help="write the default config file")
    p.add_argument("path", metavar="PATH")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "write-config":
            write_default_config(args.path)
            print(f"wrote {args.path}")
            return EXIT_OK
        cfg = load_config(args.config)
        seed = cfg.master_seed if args.seed is None else args.seed
        out_dir = cfg.output_dir if args.out is None else args.out
        sequences = cfg.sequences if args.sequences is None else args.sequences
        threads = cfg.threads if args.threads is None else args.threads
        if sequences < 1 or threads < 1:
            raise ConfigError("sequences and threads must be positive")
        if args.command == "rabi-scan":
            cmd_rabi_scan(cfg, out_dir, _parse_powers(args.powers, cfg), seed)
        elif args.command == "hbt":
            cmd_hbt(cfg, out_dir, sequences, seed, threads,
                    export_photon_sequences=args.export_photons)
        elif args.command == "budget":
            cmd_budget(cfg, out_dir)
        elif args.command == "contrast":
            cmd_contrast(cfg, out_dir)
        return EXIT_OK
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericsError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
