"""
Seeded Monte Carlo estimators for the one-bit receiver.

Trials are generated in fixed-size blocks. Block ``b`` draws from
``PCG64(SeedSequence(seed, spawn_key=(b,)))`` so a run is bitwise
reproducible and does not depend on how many worker processes share the
blocks.

Per trial, with ``z = w^H Q(h + v)``:

* noise ``v`` is fresh (two independent real Gaussians of variance
  ``sigma^2 / 2`` per entry);
* interference amplitudes ``xi_k ~ CN(0, sigma_k^2)`` are fresh;
* interference angles are redrawn from ``U(varpi_k +- delta_k)`` when the
  source is uncertain and ``draw_interference_angles`` is set;
* the target amplitude is ``alpha0`` (NFT) or a fresh ``CN(0, sigma0^2)``
  (RFT with ``draw_target``).

``h0`` and ``h1`` share the same noise and interference within a trial.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .qsinr import sign_moments
from .radar_model import RadarScene, _as_vector, apply_channel, one_bit_quantize

log = logging.getLogger(__name__)

MAX_BLOCK_ELEMENTS = 1 << 21


@dataclass(frozen=True)
class McConfig:
    """Trial budget and RNG settings.

    ``block_size=None`` picks a block size from the problem dimension only,
    never from ``workers``.
    """

    trials: int = 10_000
    seed: int = 0
    draw_interference_angles: bool = True
    draw_target: bool = True
    block_size: Optional[int] = None
    workers: int = 1

    def __post_init__(self):
        if int(self.trials) < 1:
            raise ValueError("trials must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")
        if self.block_size is not None and self.block_size < 1:
            raise ValueError("block_size must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def resolved_block_size(self, dim: int) -> int:
        if self.block_size is not None:
            return int(self.block_size)
        return max(1, min(65536, MAX_BLOCK_ELEMENTS // max(1, dim)))


def block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(block,))))


def complex_gaussian(rng: np.random.Generator, shape, variance: float) -> np.ndarray:
    """Circular complex Gaussian samples with ``E|x|^2 = variance``."""
    scale = math.sqrt(variance / 2.0)
    return scale * rng.standard_normal(shape) + 1j * (scale * rng.standard_normal(shape))


def _blocks(trials: int, size: int):
    n_blocks = -(-trials // size)
    return [(b, min(size, trials - b * size)) for b in range(n_blocks)]


def _run_blocks(fn, args, mc: McConfig, dim: int):
    """Apply ``fn(block_index, count, *args)`` over all blocks, in block order."""
    blocks = _blocks(int(mc.trials), mc.resolved_block_size(dim))
    if mc.workers == 1 or len(blocks) == 1:
        return [fn(b, n, *args) for b, n in blocks]
    with ProcessPoolExecutor(max_workers=mc.workers) as pool:
        futures = [pool.submit(fn, b, n, *args) for b, n in blocks]
        return [f.result() for f in futures]


# --------------------------------------------------------------------------
# Filter-output simulation
# --------------------------------------------------------------------------

def _draw_returns(rng, n, scene: RadarScene, s, mc: McConfig):
    """Noise-free ``(h0, h1)`` of shape ``(n, n_rx L)`` plus the noise draw."""
    geom = scene.geometry
    dim = scene.rx_dim
    v = complex_gaussian(rng, (n, dim), scene.noise_power)
    h0 = np.zeros((n, dim), dtype=complex)
    for src in scene.interferences:
        xi = complex_gaussian(rng, n, src.power)
        if src.uncertainty > 0 and mc.draw_interference_angles:
            om = rng.uniform(src.mean_normalized_angle - src.uncertainty,
                             src.mean_normalized_angle + src.uncertainty, n)
            h0 += xi[:, None] * apply_channel(geom, om, s)
        else:
            h0 += np.outer(xi, apply_channel(geom, src.mean_normalized_angle, s))
    target = apply_channel(geom, math.sin(scene.target.angle), s)
    if scene.target.kind == "rft" and mc.draw_target:
        amp = complex_gaussian(rng, n, scene.target.variance)
    elif scene.target.kind == "rft":
        amp = np.full(n, math.sqrt(scene.target.variance), dtype=complex)
    else:
        amp = np.full(n, complex(scene.target.amplitude))
    h1 = h0 + np.outer(amp, target)
    return h0, h1, v


def _output_block(b, n, w, s, scene, mc):
    rng = block_rng(mc.seed, b)
    h0, h1, v = _draw_returns(rng, n, scene, s, mc)
    wc = w.conj()
    z0 = one_bit_quantize(h0 + v) @ wc
    z1 = one_bit_quantize(h1 + v) @ wc
    return z0, z1


def simulate_outputs(w, s, scene: RadarScene, mc: McConfig) -> Tuple[np.ndarray, np.ndarray]:
    """Filter outputs ``(z0, z1)`` under H0 and H1 for every trial."""
    w = _as_vector(w)
    s = _as_vector(s)
    if w.size != scene.rx_dim or s.size != scene.tx_dim:
        raise ValueError("filter/waveform size does not match the scene")
    parts = _run_blocks(_output_block, (w, s, scene, mc), mc, scene.rx_dim)
    return (np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts]))


def _redraw_block(b, n, w, s, scene, mc):
    # independent stream for replacement trials (spawn key depth 2)
    rng = np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(mc.seed, spawn_key=(b, 1))))
    z0 = np.zeros(n, dtype=complex)
    z1 = np.zeros(n, dtype=complex)
    todo = np.arange(n)
    while todo.size:
        h0, h1, v = _draw_returns(rng, todo.size, scene, s, mc)
        a = one_bit_quantize(h0 + v) @ w.conj()
        c = one_bit_quantize(h1 + v) @ w.conj()
        z0[todo], z1[todo] = a, c
        todo = todo[a == 0]
    return z0, z1


# --------------------------------------------------------------------------
# Estimators
# --------------------------------------------------------------------------

def qsinr_mc(w, s, scene: RadarScene, mc: McConfig,
             estimator: str = "ratio_of_means") -> Tuple[float, float]:
    """Monte Carlo QSINR.

    ``ratio_of_means`` (default) returns ``sum|z1|^2 / sum|z0|^2 - 1`` with a
    delta-method standard error. ``mean_of_ratios`` averages the per-trial
    ratio ``|z1|^2 / |z0|^2`` and subtracts one; trials with ``z0 = 0`` are
    redrawn. The per-trial ratio has a heavy right tail (``|z0|^2`` is
    roughly exponential), so that variant is slow to converge and is kept
    for comparison only.
    """
    w = _as_vector(w)
    s = _as_vector(s)
    z0, z1 = simulate_outputs(w, s, scene, mc)
    p0 = np.abs(z0) ** 2
    p1 = np.abs(z1) ** 2
    n = p0.size
    if estimator == "ratio_of_means":
        m0, m1 = p0.mean(), p1.mean()
        if m0 == 0:
            raise ValueError("all H0 outputs are zero")
        ratio = m1 / m0
        cov = np.cov(np.vstack([p1, p0]), ddof=1) if n > 1 else np.zeros((2, 2))
        var = (cov[0, 0] - 2 * ratio * cov[0, 1] + ratio ** 2 * cov[1, 1]) / (m0 ** 2 * n)
        return float(ratio - 1.0), float(math.sqrt(max(var, 0.0)))
    if estimator == "mean_of_ratios":
        bad = np.flatnonzero(p0 == 0)
        if bad.size:
            log.info("qsinr_mc: redrawing %d trials with zero H0 output", bad.size)
            z0r, z1r = _redraw_block(0, bad.size, w, s, scene, mc)
            p0[bad] = np.abs(z0r) ** 2
            p1[bad] = np.abs(z1r) ** 2
        ratios = p1 / p0
        se = float(ratios.std(ddof=1) / math.sqrt(n)) if n > 1 else float("nan")
        return float(ratios.mean() - 1.0), se
    raise ValueError(f"unknown estimator {estimator!r}")


def _exceed(z, threshold):
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    hits = np.abs(z) >= threshold
    p = float(hits.mean())
    return p, math.sqrt(p * (1 - p) / hits.size)


def empirical_pf(w, s, scene: RadarScene, threshold: float, mc: McConfig) -> Tuple[float, float]:
    """Fraction of H0 trials with ``|z| >= threshold`` and its binomial standard error."""
    z0, _ = simulate_outputs(w, s, scene, mc)
    return _exceed(z0, threshold)


def empirical_pd(w, s, scene: RadarScene, threshold: float, mc: McConfig) -> Tuple[float, float]:
    """Fraction of H1 trials with ``|z| >= threshold`` and its binomial standard error."""
    _, z1 = simulate_outputs(w, s, scene, mc)
    return _exceed(z1, threshold)


def exceedance_curve(z, thresholds) -> Tuple[np.ndarray, np.ndarray]:
    """Empirical ``P(|z| >= T)`` on a threshold grid from one set of outputs."""
    a = np.sort(np.abs(np.asarray(z)))
    t = np.asarray(thresholds, dtype=float)
    p = 1.0 - np.searchsorted(a, t, side="left") / a.size
    return p, np.sqrt(p * (1 - p) / a.size)


def sigma_in_sq_mc(w, s, scene: RadarScene, mc: McConfig) -> Tuple[float, float]:
    """Sample ``E|z0|^2`` under H0 and its standard error."""
    z0, _ = simulate_outputs(w, s, scene, mc)
    p = np.abs(z0) ** 2
    return float(p.mean()), float(p.std(ddof=1) / math.sqrt(p.size))


def _scalar_block(b, n, h, sigma_sq, seed):
    rng = block_rng(seed, b)
    return one_bit_quantize(h + complex_gaussian(rng, n, sigma_sq))


def quantized_moments_mc(h: complex, sigma_sq: float, mc: McConfig):
    """Sample mean and variance of ``Q(h + v)`` with their standard errors."""
    y = np.concatenate(_run_blocks(_scalar_block, (complex(h), sigma_sq, mc.seed), mc, 1))
    n = y.size
    mean = complex(y.mean())
    dev = np.abs(y - mean) ** 2
    var = float(dev.mean())
    mean_se = math.sqrt(var / n)
    var_se = float(dev.std(ddof=1) / math.sqrt(n)) if n > 1 else float("nan")
    return mean, var, mean_se, var_se


def moment_error_mc(h: complex, sigma_sq: float, mc: McConfig, return_margin: bool = False):
    """Relative error of the first-order moments against Monte Carlo.

    Returns ``(rae_mean, rae_var)``; at ``h = 0`` the mean error is absolute.
    With ``return_margin`` two more values are appended: three standard
    errors of the MC reference, expressed on the same scale.
    """
    approx = sign_moments(h, sigma_sq)
    mean, var, mean_se, var_se = quantized_moments_mc(h, sigma_sq, mc)
    if abs(mean) > 0 and h != 0:
        rae_mean = abs(approx.mean - mean) / abs(mean)
        margin_mean = 3 * mean_se / abs(mean)
    else:
        rae_mean = abs(approx.mean - mean)
        margin_mean = 3 * mean_se
    rae_var = abs(approx.variance - var) / var
    if return_margin:
        return rae_mean, rae_var, margin_mean, 3 * var_se / var
    return rae_mean, rae_var


def moment_error_exact(h: complex, sigma_sq: float) -> Tuple[float, float]:
    """Relative error of the first-order moments against the closed-form exact ones."""
    m = sign_moments(h, sigma_sq)
    rae_mean = abs(m.mean - m.exact_mean) / abs(m.exact_mean) if h != 0 else abs(m.mean)
    return rae_mean, abs(m.variance - m.exact_variance) / m.exact_variance
