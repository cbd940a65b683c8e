"""Pulsed Rabi oscillations of the driven atom.

Scans the mean excitation probability per 4 ns pulse against the (relative)
pulse power, with and without the 10% pulse-to-pulse intensity noise, and
shows the time-resolved emission for pulse areas pi, 2pi, and 3pi.  Saves
rabi_oscillations.png next to this script.
"""

import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from spsim import AtomModel, PulseTrain, pulse_time_spectrum, rabi_scan

atom = AtomModel()                       # 26 ns lifetime
quiet = PulseTrain(intensity_noise_rel_sigma=0.0)
noisy = PulseTrain()                     # 10% intensity noise
calib = (np.pi / quiet.pulse_duration) ** 2   # power 1.0 -> pi pulse

powers = np.arange(0.0, 26.0, 0.25)
clean = rabi_scan(atom, quiet, powers, calib)
smeared = rabi_scan(atom, noisy, powers, calib, samples_per_point=3000, seed=1)

fig, axes = plt.subplots(1, 2, figsize=(11, 4))
ax = axes[0]
ax.plot(powers, [p.probability for p in clean], label="noiseless")
ax.plot(powers, [p.probability for p in smeared],
        label="10% intensity noise")
ax.set_xlabel("pulse power (pi-pulse units)")
ax.set_ylabel("excitation probability per pulse")
ax.set_title("Rabi oscillations vs pulse power")
ax.legend()

pi_point = clean[np.searchsorted(powers, 1.0)]
print(f"pi-pulse excitation probability: {pi_point.probability:.4f}")
print(f"mean photons per pi pulse:       {pi_point.mean_photons_per_pulse:.4f}")

ax = axes[1]
for mult, label in ((1, "pi"), (2, "2pi"), (3, "3pi")):
    omega = mult * np.pi / quiet.pulse_duration
    spec = pulse_time_spectrum(atom, omega, quiet.pulse_duration, 60e-9, 0.05e-9)
    ax.plot(spec.times * 1e9, spec.emission_rate / 1e6, label=label)
ax.axvspan(0, 4, color="0.9", label="drive on")
ax.set_xlabel("time (ns)")
ax.set_ylabel("emission rate (photons/us)")
ax.set_title("time spectra: coherent drive then free decay")
ax.legend()

out = os.path.join(os.path.dirname(__file__), "rabi_oscillations.png")
fig.tight_layout()
fig.savefig(out, dpi=130)
print(f"saved {out}")
