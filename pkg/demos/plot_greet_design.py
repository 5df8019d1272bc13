"""
Designing a one-bit waveform and its filter
===========================================

The QSINR depends on the filter ``w`` and on the waveform ``s``. For fixed
``s`` the best filter is the MVDR solution. For fixed ``w`` the waveform
problem is a ratio of quadratics over the binary alphabet. ``greet``
alternates the two steps and handles the waveform step with ADMM.
"""

import math

import matplotlib.pyplot as plt
import numpy as np

from onebit_mimo import GreetConfig, greet, load_scene, matched_phase_onebit_waveform, mvdr_filter
from onebit_mimo import qsinr as qs
from onebit_mimo.radar_model import db, transmit_beampattern

scene = load_scene("scenes/two_interferers.yaml")
print(scene.geometry.n_tx, "x", scene.geometry.n_rx, "array, L =", scene.code_length)

w, s, diag = greet(scene, GreetConfig(seed=0))

m = matched_phase_onebit_waveform(scene.geometry, scene.target.angle, scene.code_length)
print(f"matched waveform + MVDR : {db(qs.qsinr(mvdr_filter(m, scene), m, scene)):.2f} dB")
print(f"designed pair           : {db(qs.qsinr(w, s, scene)):.2f} dB")

# %%
# The design is local. On a small array like this one the matched-phase
# waveform with an MVDR filter is already a fixed point, and a random start
# can finish a few tenths of a dB below it. Trying several starts, including
# the matched one, is cheap.

best = max([greet(scene, GreetConfig(seed=k, max_altopt_iters=20)) for k in range(4)]
           + [greet(scene, GreetConfig(max_altopt_iters=2), initial=m)],
           key=lambda r: r[2].qsinr_trace[-1])
print(f"best of five starts     : {db(best[2].qsinr_trace[-1]):.2f} dB")

# %%
# Outer loop
# ----------
# Each outer pass solves the ADMM subproblem for the current filter and
# then recomputes the MVDR filter.

fig, ax = plt.subplots(figsize=(6, 3))
ax.plot(db(np.array(diag.qsinr_trace)), ".-")
ax.set_xlabel("outer iteration")
ax.set_ylabel("QSINR (dB)")

# %%
# Inner loop of the last pass
# ---------------------------
# ``d`` measures how far the relaxed waveform moves. ``c1`` and ``c2`` are
# the gaps to the sphere and ratio splitting variables. The modulus range
# shows how close the relaxed iterate is to the alphabet. On a small problem
# the relaxed iterate can keep cycling, so it is always projected at the end.

last = np.array(diag.outer_index) == diag.outer_index[-1]
fig, (a1, a2) = plt.subplots(1, 2, figsize=(9, 3))
for key in ("residual_d", "residual_c1", "residual_c2"):
    a1.semilogy(np.array(getattr(diag, key))[last], label=key.split("_")[1])
a1.legend()
a1.set_xlabel("ADMM iteration")
a2.plot(np.array(diag.modulus_min)[last], label="min")
a2.plot(np.array(diag.modulus_max)[last], label="max")
a2.axhline(1 / math.sqrt(2 * scene.tx_dim), color="k", ls=":", lw=0.8)
a2.set_xlabel("ADMM iteration")
a2.legend()

# %%
# Where the energy goes
# ---------------------

angles = np.linspace(-90, 90, 361)
bp = [transmit_beampattern(scene.geometry, s, math.radians(a)) for a in angles]
fig, ax = plt.subplots(figsize=(6, 3))
ax.plot(angles, db(np.maximum(bp, 1e-6)))
for src in scene.interferences:
    ax.axvline(math.degrees(math.asin(src.mean_normalized_angle)), color="r", ls="--", lw=0.8)
ax.axvline(math.degrees(scene.target.angle), color="g", lw=0.8)
ax.set_xlabel("angle (deg)")
ax.set_ylabel("transmit beampattern (dB)")
plt.show()
