"""Trapped-atom duty cycle: loading, fluorescence trace, trap lifetime.

Simulates collisional-blockade loading (the trap holds zero or one atom,
never two) and the alternating excitation/cooling sequence, then averages
many sequences into the fluorescence trace whose envelope decays with the
trap lifetime.  Saves trap_sequence.png next to this script.
"""

import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from spsim import (default_config, fit_trace_envelope, run_hbt_pipeline,
                   simulate_loading)
from spsim.sequence import PipelineHandles

# --- collisional-blockade loading ----------------------------------------
loading = simulate_loading(capture_rate=3.0, horizon=20.0, seed=2)
print(f"{loading.arrival_times.size} atoms arrived in 20 s; "
      f"mean occupancy {simulate_loading(3.0, 2000.0, seed=3).mean_occupancy:.3f} "
      f"(blockade keeps it near 1/2)")

# --- averaged fluorescence trace ------------------------------------------
cfg = default_config()
handles = PipelineHandles.build(cfg.atom, cfg.train, cfg.scheme, cfg.detectors,
                                cfg.detection_efficiency)
n_sequences = 3000
result = run_hbt_pipeline(cfg.sequence, handles, n_sequences, master_seed=8)
tau, tau_sigma = fit_trace_envelope(result.trace, cfg.sequence)
print(f"averaged {n_sequences} sequences; fitted envelope lifetime "
      f"{tau * 1e3:.1f} ± {tau_sigma * 1e3:.1f} ms "
      f"(configured {cfg.sequence.trap_lifetime * 1e3:.0f} ms)")

fig, axes = plt.subplots(2, 1, figsize=(9, 6))
ax = axes[0]
t_occ = np.concatenate([[0.0], loading.arrival_times, [loading.horizon]])
occ = np.concatenate([[0], loading.occupancy_after_arrivals(),
                      [loading.occupancy_after_arrivals()[-1]]])
ax.step(t_occ, occ, where="post")
ax.set_xlim(0, 20)
ax.set_yticks([0, 1])
ax.set_xlabel("time (s)")
ax.set_ylabel("atoms in trap")
ax.set_title("collisional-blockade loading: occupancy toggles 0 <-> 1")

ax = axes[1]
t_ms = result.trace.times * 1e3
ax.plot(t_ms, result.trace.mean_rate / 1e3, lw=0.7)
env_t = np.linspace(0, t_ms.max(), 200)
peak0 = result.trace.mean_rate[:23].mean() / 1e3
ax.plot(env_t, peak0 * np.exp(-env_t / (tau * 1e3)), "r--",
        label=f"envelope exp(-t/{tau * 1e3:.1f} ms)")
ax.set_xlabel("time in sequence (ms)")
ax.set_ylabel("mean detected rate (kcounts/s)")
ax.set_title("excitation windows decaying with the trap lifetime")
ax.legend()

out = os.path.join(os.path.dirname(__file__), "trap_sequence.png")
fig.tight_layout()
fig.savefig(out, dpi=130)
print(f"saved {out}")
