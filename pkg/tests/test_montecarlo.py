import math

import numpy as np
import pytest

from conftest import exact_h0_power, make_scene
from onebit_mimo import qsinr as qs
from onebit_mimo.greet import mvdr_filter
from onebit_mimo.montecarlo import (McConfig, block_rng, complex_gaussian, empirical_pd,
                                    empirical_pf, exceedance_curve, moment_error_mc, qsinr_mc,
                                    quantized_moments_mc, sigma_in_sq_mc, simulate_outputs)
from onebit_mimo.radar_model import (TargetModel, Waveform, apply_channel,
                                     matched_phase_onebit_waveform)


def matched_pair(scene):
    s = matched_phase_onebit_waveform(scene.geometry, scene.target.angle, scene.code_length)
    w = apply_channel(scene.geometry, math.sin(scene.target.angle), s.s)
    return w, s


def test_config_validation():
    with pytest.raises(ValueError):
        McConfig(trials=0)
    with pytest.raises(ValueError):
        McConfig(workers=0)
    assert McConfig().resolved_block_size(1) == 65536
    assert McConfig().resolved_block_size(1 << 20) == 2
    assert McConfig(block_size=7).resolved_block_size(100) == 7


def test_block_streams_are_distinct_and_reproducible():
    a = block_rng(5, 0).standard_normal(4)
    np.testing.assert_array_equal(a, block_rng(5, 0).standard_normal(4))
    assert not np.array_equal(a, block_rng(5, 1).standard_normal(4))
    assert not np.array_equal(a, block_rng(6, 0).standard_normal(4))


def test_noise_is_circular():
    x = complex_gaussian(block_rng(0, 0), 100_000, 2.5)
    n = x.size
    # E{v^2} -> 0 and E{|v|^2} -> sigma^2, each within 3 standard errors
    m2 = np.mean(x * x)
    se2 = math.sqrt(np.var((x * x).real) / n + np.var((x * x).imag) / n)
    assert abs(m2) < 3 * se2
    p = np.abs(x) ** 2
    assert abs(p.mean() - 2.5) < 3 * p.std() / math.sqrt(n)


def test_simulation_is_deterministic_and_worker_independent(desk_scene, rng):
    s = Waveform.random_one_bit(4, 8, rng)
    w = mvdr_filter(s, desk_scene).w
    mc = McConfig(trials=3000, seed=4, block_size=700)
    z0, z1 = simulate_outputs(w, s, desk_scene, mc)
    y0, y1 = simulate_outputs(w, s, desk_scene, mc)
    p0, p1 = simulate_outputs(w, s, desk_scene, McConfig(trials=3000, seed=4, block_size=700,
                                                          workers=2))
    assert z0.shape == (3000,)
    np.testing.assert_array_equal(z0, y0)
    np.testing.assert_array_equal(z1, y1)
    np.testing.assert_array_equal(z0, p0)
    np.testing.assert_array_equal(z1, p1)
    assert qsinr_mc(w, s, desk_scene, mc) == qsinr_mc(w, s, desk_scene, mc)


def test_shape_mismatch_raises(desk_scene):
    with pytest.raises(ValueError):
        simulate_outputs(np.ones(5), np.ones(32), desk_scene, McConfig(trials=2))


def test_pf_trivial_thresholds(desk_scene, rng):
    s = Waveform.random_one_bit(4, 8, rng)
    w = mvdr_filter(s, desk_scene).w
    mc = McConfig(trials=500, seed=1)
    assert empirical_pf(w, s, desk_scene, 0.0, mc) == (1.0, 0.0)
    assert empirical_pf(w, s, desk_scene, 1e9, mc) == (0.0, 0.0)
    with pytest.raises(ValueError):
        empirical_pf(w, s, desk_scene, -1.0, mc)


def test_exceedance_curve_matches_direct_count():
    z = np.array([0.0, 1.0, 2.0, 2.0, 3.0])
    p, _ = exceedance_curve(z, [0.0, 1.0, 2.0, 2.5, 4.0])
    np.testing.assert_allclose(p, [1.0, 0.8, 0.6, 0.2, 0.0])


def test_zero_amplitude_target_degenerates_to_h0(desk_scene, rng):
    scene = desk_scene.replace(target=TargetModel(desk_scene.target.angle, "nft", amplitude=0.0))
    s = Waveform.random_one_bit(4, 8, rng)
    w = mvdr_filter(s, scene).w
    mc = McConfig(trials=4000, seed=2)
    T = 1.3 * math.sqrt(qs.sigma_in_sq(w, s, scene))
    assert empirical_pd(w, s, scene, T, mc) == empirical_pf(w, s, scene, T, mc)
    est, se = qsinr_mc(w, s, scene, mc)
    assert est == 0.0 and se == 0.0


def test_pd_nondecreasing_in_target_power(rng):
    s = Waveform.random_one_bit(4, 8, rng)
    base = make_scene()
    w = mvdr_filter(s, base).w
    T = qs.threshold_for_pf(1e-2, qs.sigma_in_sq(w, s, base))
    mc = McConfig(trials=4000, seed=3)
    prev = (0.0, 0.0)
    for p_db in (-10, -5, 0, 3, 6):
        scene = make_scene(power=10 ** (p_db / 10))
        cur = empirical_pd(w, s, scene, T, mc)
        assert cur[0] >= prev[0] - 3 * math.hypot(cur[1], prev[1])
        prev = cur


def test_nft_pd_matches_marcum_formula():
    scene = make_scene(n_tx=8, n_rx=5, L=100, theta0_deg=22.0, power=1.0, interferers=())
    w, s = matched_pair(scene)
    sin2 = qs.sigma_in_sq(w, s, scene)
    b0 = qs.target_beta(w, s, scene)
    T = qs.threshold_for_pf(1e-2, sin2)
    for power in (2.0, 5.0, 10.0):
        sc = scene.replace(target=TargetModel(scene.target.angle, "nft", amplitude=math.sqrt(power)))
        pd_hat, se = empirical_pd(w, s, sc, T, McConfig(trials=20_000, seed=7))
        pd = qs.pd_nft(1e-2, sc.target.amplitude, b0, sin2)
        assert abs(pd_hat - pd) < 3 * se, (power, pd_hat, pd, se)


def test_noise_only_pf_at_one_percent():
    scene = make_scene(n_tx=8, n_rx=5, L=100, theta0_deg=0.0, power=1.0, interferers=())
    w, s = matched_pair(scene)
    T = qs.threshold_for_pf(0.01, qs.sigma_in_sq(w, s, scene))
    pf_hat, se = empirical_pf(w, s, scene, T, McConfig(trials=100_000, seed=8))
    assert abs(pf_hat - 0.01) < 3 * se


def test_noise_only_qsinr_close_to_formula():
    # N_r L = 1000, per-sample SNR -10 dB
    scene = make_scene(n_tx=8, n_rx=5, L=200, theta0_deg=0.0, power=100.0, interferers=())
    w, s = matched_pair(scene)
    h = apply_channel(scene.geometry, 0.0, s.s) * scene.target.amplitude
    assert np.max(np.abs(h) ** 2) / scene.noise_power <= 0.1 + 1e-12
    est, se = qsinr_mc(w, s, scene, McConfig(trials=4000, seed=9))
    assert abs(10 * math.log10(est / qs.qsinr(w, s, scene))) < 0.3


def test_mean_of_ratios_variant(desk_scene, rng):
    s = Waveform.random_one_bit(4, 8, rng)
    w = mvdr_filter(s, desk_scene).w
    mc = McConfig(trials=2000, seed=10)
    a, sa = qsinr_mc(w, s, desk_scene, mc, estimator="mean_of_ratios")
    b, sb = qsinr_mc(w, s, desk_scene, mc)
    assert a > 0 and b > 0 and sa > 0 and sb > 0
    with pytest.raises(ValueError):
        qsinr_mc(w, s, desk_scene, mc, estimator="median")


def test_mean_of_ratios_redraws_zero_outputs():
    # two equal taps: the output is exactly zero whenever the two quantized samples are opposite
    scene = make_scene(n_tx=1, n_rx=2, L=1, theta0_deg=0.0, power=1.0, interferers=())
    s = Waveform.from_signs(np.array([1 + 1j]), 1)
    w = np.array([1.0, 1.0])
    z0, _ = simulate_outputs(w, s, scene, McConfig(trials=200, seed=0))
    assert np.any(z0 == 0)
    est, se = qsinr_mc(w, s, scene, McConfig(trials=200, seed=0), estimator="mean_of_ratios")
    assert math.isfinite(est) and math.isfinite(se)


def test_h0_power_matches_arcsine_law(desk_scene, rng):
    s = Waveform.random_one_bit(4, 8, rng)
    w = mvdr_filter(s, desk_scene).w
    est, se = sigma_in_sq_mc(w, s, desk_scene, McConfig(trials=50_000, seed=11))
    assert abs(est - exact_h0_power(w, s, desk_scene)) < 3 * se


def test_quantized_moments_at_zero_mean():
    mean, var, mse, _ = quantized_moments_mc(0.0, 1.0, McConfig(trials=50_000, seed=12))
    assert abs(mean) < 4 * mse
    assert var == pytest.approx(2.0, abs=1e-3)
    rae_m, rae_v = moment_error_mc(0.0, 1.0, McConfig(trials=50_000, seed=12))
    assert rae_m == pytest.approx(abs(mean)) and rae_m < 0.02 and rae_v < 1e-3


@pytest.mark.parametrize("snr_db,bound", [(-20, 0.01), (-10, 0.07)])
def test_moment_approximation_error(snr_db, bound):
    sig2 = 1.0
    a = math.sqrt(10 ** (snr_db / 10) / 2)
    rm, rv, mm, mv = moment_error_mc(complex(a, a), sig2, McConfig(trials=400_000, seed=13),
                               return_margin=True)
    assert rm < bound + mm and rv < bound + mv
