"""Separation metrics on hand-made estimates.

Run: python demos/04_metrics.py
"""

import numpy as np

from chansep.metrics import mse_s, mse_z, sdr, si_snr, si_snr_z

rng = np.random.default_rng(3)
ref = rng.standard_normal(1000)
noise = rng.standard_normal(1000)

for label, est in [
    ("exact", ref),
    ("scaled x3", 3 * ref),
    ("sign flipped", -ref),
    ("half amplitude", ref / 2),
    ("+ noise at 10 dB", ref + noise * np.sqrt(0.1) * np.std(ref) / np.std(noise)),
]:
    print(f"{label:>16}: SI-SNR {si_snr(est, ref):7.2f} dB   SDR {sdr(est, ref):7.2f} dB")

# A mute channel should stay silent; leaking a source shows up in SI-SNR_z.
quiet = 1e-3 * rng.standard_normal(1000)
leaky = 0.2 * ref + 1e-3 * rng.standard_normal(1000)
print(f"\nMSE_z quiet {mse_z([quiet], [True]):.2e}, leaky {mse_z([leaky], [True]):.2e}")
print("SI-SNR_z quiet:", si_snr_z(quiet, [("B", ref)]))
print("SI-SNR_z leaky:", si_snr_z(leaky, [("B", ref)]))
print(f"\nMSE_s over two active channels: {mse_s([ref, ref], [ref, ref / 2], [True, True]):.4f}")
