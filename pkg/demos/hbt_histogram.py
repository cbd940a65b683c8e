"""Start-stop correlation histogram of the full source pipeline.

Runs trapped-atom sequences (excitation/cooling duty cycle, trap-lifetime
survival, emission sampling, detection with dark and stray counts), builds
the delayed-stop coincidence histogram, and analyses the peak areas.  The
missing peak at zero delay is the single-photon signature; the residual
central area comes from the rare two-photon pulses.  Saves
hbt_histogram.png next to this script.
"""

import os
import time

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from spsim import (default_config, expected_noise_floor, gate_events,
                   peak_analysis, rebin, run_hbt_pipeline, start_stop_histogram)
from spsim.sequence import PipelineHandles

cfg = default_config()
handles = PipelineHandles.build(cfg.atom, cfg.train, cfg.scheme, cfg.detectors,
                                cfg.detection_efficiency)

n_sequences = 4000   # ~46 s of equivalent excitation; raise for more counts
t0 = time.time()
result = run_hbt_pipeline(cfg.sequence, handles, n_sequences, master_seed=5)
print(f"simulated {n_sequences} sequences "
      f"({result.excitation_time:.0f} s excitation) in {time.time() - t0:.0f} s")
print(f"emitted {result.n_emitted} photons from {result.n_bright_pulses} "
      f"bright pulses; detected {len(result.events_a) + len(result.events_b)} "
      f"events")

gated_a = gate_events(result.events_a, result.gates)
gated_b = gate_events(result.events_b, result.gates)
cs = cfg.correlator
hist = rebin(start_stop_histogram(gated_a, gated_b, cs.bin_width_ns,
                                  cs.max_delay_ns,
                                  stop_delay_ns=cs.stop_delay_ns),
             cs.rebin_factor)
floor = expected_noise_floor(hist.bin_width_ns, len(gated_a), len(gated_b),
                             result.excitation_time,
                             0.5 * (cfg.detectors.dark_count_rate
                                    + cfg.detectors.stray_light_rate))
report = peak_analysis(hist, cfg.train.period * 1e9,
                       noise_floor_per_bin=floor)
print()
print(report.to_text())

fig, ax = plt.subplots(figsize=(9, 4))
ax.bar(hist.bin_starts_ns - cs.stop_delay_ns, hist.counts,
       width=hist.bin_width_ns, color="tab:blue")
ax.set_xlabel("delay (ns)")
ax.set_ylabel(f"coincidences per {hist.bin_width_ns:g} ns")
ax.set_title("start-stop histogram: peaks every 200 ns, none at zero delay")
out = os.path.join(os.path.dirname(__file__), "hbt_histogram.png")
fig.tight_layout()
fig.savefig(out, dpi=130)
print(f"saved {out}")
