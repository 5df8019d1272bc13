"""
How far the Gaussian approximation goes
=======================================

All closed forms in the package rest on a first-order expansion of the
sign quantizer. It is accurate at low input SNR. This script shows where
the expansion starts to break, and compares the interference-plus-noise
output power with simulation and with an exact arcsine-law computation.
"""

import math

import matplotlib.pyplot as plt
import numpy as np

from onebit_mimo import McConfig, load_scene, matched_phase_onebit_waveform
from onebit_mimo import qsinr as qs
from onebit_mimo.montecarlo import moment_error_mc, moment_error_exact, sigma_in_sq_mc
from onebit_mimo.radar_model import apply_channel

# %%
# Moments of a quantized Gaussian
# -------------------------------

snrs = np.arange(-30, 6, 2.5)
exact, mc = [], []
for i, snr in enumerate(snrs):
    h = math.sqrt(10 ** (snr / 10) / 2) * (1 + 1j)
    exact.append(moment_error_exact(h, 1.0))
    mc.append(moment_error_mc(h, 1.0, McConfig(trials=200_000, seed=i)))
exact, mc = np.array(exact), np.array(mc)

fig, ax = plt.subplots(figsize=(6, 3))
ax.semilogy(snrs, exact[:, 0], label="mean, exact")
ax.semilogy(snrs, exact[:, 1], label="variance, exact")
ax.semilogy(snrs, mc[:, 0], "o", ms=3, label="mean, simulated")
ax.semilogy(snrs, mc[:, 1], "s", ms=3, label="variance, simulated")
ax.set_xlabel("$|h|^2/\\sigma^2$ (dB)")
ax.set_ylabel("relative error")
ax.legend(fontsize=8)

# %%
# Output power under H0
# ---------------------
# The filter below deliberately lets both interferers through. The exact
# value treats the received vector as jointly Gaussian and applies the
# arcsine law to every pair of sign bits.

scene = load_scene("scenes/low_snr_validation.yaml")
s = matched_phase_onebit_waveform(scene.geometry, scene.target.angle, scene.code_length)
w = sum(apply_channel(scene.geometry, om, s.s) for om in
        [math.sin(scene.target.angle)] + [src.mean_normalized_angle for src in scene.interferences])

R = scene.noise_power * np.eye(scene.rx_dim, dtype=complex)
for src in scene.interferences:
    b = apply_channel(scene.geometry, src.mean_normalized_angle, s.s)
    R += src.power * np.outer(b, b.conj())
d = np.sqrt(np.diag(R).real)
c = R / np.outer(d, d)
M = 4 / np.pi * (np.arcsin(c.real.clip(-1, 1)) + 1j * np.arcsin(c.imag.clip(-1, 1)))

est, se = sigma_in_sq_mc(w, s, scene, McConfig(trials=50_000, seed=1))
print(f"formula   {qs.sigma_in_sq(w, s, scene):.5f}")
print(f"exact     {np.vdot(w, M @ w).real:.5f}")
print(f"simulated {est:.5f} +- {se:.5f}")
plt.show()
