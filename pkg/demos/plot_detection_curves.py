"""
Detection with a one-bit receiver
=================================

At low per-sample SNR the filtered one-bit output behaves like a complex
Gaussian, so the false-alarm rate is ``exp(-T^2 / sigma_in^2)`` and the
detection rate follows the usual Rayleigh or Rice forms. Here both are
checked against simulated outputs in a scene with two interferers.
"""

import math

import matplotlib.pyplot as plt
import numpy as np

from onebit_mimo import McConfig, load_scene, matched_phase_onebit_waveform, mvdr_filter
from onebit_mimo import qsinr as qs
from onebit_mimo.montecarlo import exceedance_curve, simulate_outputs
from onebit_mimo.radar_model import db
from onebit_mimo.experiments import with_target_power

scene = load_scene("scenes/low_snr_validation.yaml")
s = matched_phase_onebit_waveform(scene.geometry, scene.target.angle, scene.code_length)
w = mvdr_filter(s, scene)
sin2 = qs.sigma_in_sq(w, s, scene)

# %%
# False alarms
# ------------
# One batch of H0 outputs gives the whole empirical curve.

T = np.linspace(0, 3.2 * math.sqrt(sin2), 40)
z0, _ = simulate_outputs(w, s, scene, McConfig(trials=50_000, seed=3))
p_mc, se = exceedance_curve(z0, T)

fig, ax = plt.subplots(figsize=(6, 3))
ax.semilogy(T, [qs.pf(t, sin2) for t in T], label="formula")
ax.errorbar(T, p_mc, yerr=3 * se, fmt=".", label="simulated (3 s.e.)")
ax.set_ylim(1e-5, 1.5)
ax.set_xlabel("threshold")
ax.set_ylabel("$P_f$")
ax.legend()

# %%
# Detection probability versus target power
# -----------------------------------------
# P_f is pinned at 1e-2 so the simulation can resolve it with a few thousand
# trials. At 1e-6 only the formulas are practical.

pf = 1e-2
thr = qs.threshold_for_pf(pf, sin2)
powers_db = np.arange(-12, 9, 2.0)
nft, rft, sim = [], [], []
for i, p in enumerate(powers_db):
    sc = with_target_power(scene, 10 ** (p / 10))
    rep = qs.detection_report(w, s, sc, pf)
    nft.append(rep.pd)
    rft.append(qs.pd_rft(pf, sc.target.power, rep.beta0, sin2))
    _, z1 = simulate_outputs(w, s, sc, McConfig(trials=4000, seed=10 + i))
    sim.append(exceedance_curve(z1, [thr])[0][0])

qsinr_db = [db(qs.qsinr(w, s, with_target_power(scene, 10 ** (p / 10)))) for p in powers_db]
fig, ax = plt.subplots(figsize=(6, 3))
ax.plot(qsinr_db, nft, label="nonfluctuating")
ax.plot(qsinr_db, rft, "--", label="Rayleigh")
ax.plot(qsinr_db, sim, "o", label="simulated, nonfluctuating")
ax.set_xlabel("QSINR (dB)")
ax.set_ylabel("$P_d$")
ax.legend()
plt.show()
