import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import brentq

from conftest import make_scene
from onebit_mimo import qsinr as qs
from onebit_mimo.greet import (AdmmState, DegenerateProblemError, Diagnostics, GreetConfig,
                               admm_dual_update, admm_r_update, admm_s_update, admm_solve,
                               admm_t_update, gamma_plane, greet, mvdr_filter, solve_r_plane)
from onebit_mimo.numerics import real_symmetric_evd
from onebit_mimo.radar_model import (ArrayGeometry, RadarScene, TargetModel, Waveform, apply_channel,
                                     matched_phase_onebit_waveform)

seeds = st.integers(0, 2**31 - 1)


def r_objective(r1, r2, q1, q2, p):
    return p / (r1 * r1 + r2 * r2) + (r1 - q1) ** 2 + (r2 - q2) ** 2


def random_pd(r, n, spread=10.0):
    Q, _ = np.linalg.qr(r.normal(size=(n, n)))
    return (Q * np.geomspace(1.0, spread, n)) @ Q.T


def rank_two(r, n):
    v = r.normal(size=n // 2) + 1j * r.normal(size=n // 2)
    return qs.realify(np.outer(v, v.conj()))


def qp_oracle(b, rho, bound, iters=2000):
    # projected gradient on (rho/2)||s||^2 - s'b over the box
    s = np.zeros_like(b)
    for _ in range(iters):
        s = np.clip(s - (rho * s - b) / rho * 0.5, -bound, bound)
    return s


# ---- MVDR -----------------------------------------------------------------

def test_mvdr_distortionless(desk_scene, rng):
    s = Waveform.random_one_bit(4, 8, rng)
    w = mvdr_filter(s, desk_scene)
    a0s = apply_channel(desk_scene.geometry, math.sin(desk_scene.target.angle), s)
    assert abs(np.vdot(w.w, a0s) - 1) < 1e-8


def test_mvdr_without_interference_is_matched(rng):
    scene = make_scene(interferers=())
    s = Waveform.random_one_bit(4, 8, rng)
    a0s = apply_channel(scene.geometry, math.sin(scene.target.angle), s)
    np.testing.assert_allclose(mvdr_filter(s, scene).w, a0s / np.vdot(a0s, a0s).real, atol=1e-12)


def test_mvdr_beats_random_filters(desk_scene, rng):
    s = Waveform.random_one_bit(4, 8, rng)
    best = qs.rho(mvdr_filter(s, desk_scene), s, desk_scene)
    for _ in range(100):
        w = rng.normal(size=32) + 1j * rng.normal(size=32)
        assert qs.rho(w, s, desk_scene) <= best * (1 + 1e-10)


def test_mvdr_degenerate_target():
    g = ArrayGeometry.ula(2, 2)
    scene = RadarScene(g, TargetModel(0.0), (), 1.0, 2)
    s = Waveform.from_signs(np.tile([1 + 1j, -1 - 1j], 2), 2)
    with pytest.raises(DegenerateProblemError):
        mvdr_filter(s, scene)


# ---- s-update -------------------------------------------------------------

def test_s_update_trivial_cases():
    z = np.zeros(8)
    np.testing.assert_array_equal(admm_s_update(z, z, z, z, 2.0, 30.0), 0.0)
    big = np.full(8, 10.0)
    np.testing.assert_allclose(admm_s_update(big, big, big, big, 2.0, 30.0), 1 / math.sqrt(8))
    with pytest.raises(ValueError):
        admm_s_update(z, z, z[:4], z, 1.0, 1.0)


@given(seeds)
def test_s_update_matches_qp_and_kkt(seed):
    r = np.random.default_rng(seed)
    n = 16
    t, u1, rr, u2 = (r.normal(scale=0.3, size=n) for _ in range(4))
    rho1, rho2 = r.uniform(0.5, 5), r.uniform(1, 200)
    s = admm_s_update(t, u1, rr, u2, rho1, rho2)
    b = rho1 * (t + u1) + rho2 * (rr + u2)
    bound = 1 / math.sqrt(n)
    np.testing.assert_allclose(s, qp_oracle(b, rho1 + rho2, bound), atol=1e-8)
    grad = (rho1 + rho2) * s - b
    interior = np.abs(s) < bound
    np.testing.assert_allclose(grad[interior], 0.0, atol=1e-12)
    # on a bound the descent direction points outward
    assert np.all(grad[s >= bound] <= 1e-12)
    assert np.all(grad[s <= -bound] >= -1e-12)


# ---- t-update -------------------------------------------------------------

def _t_instance(seed, n=16):
    r = np.random.default_rng(seed)
    phi = random_pd(r, n)
    gam = rank_two(r, n)
    return (r, phi, gam, r.normal(scale=0.3, size=n), r.normal(scale=0.1, size=n),
            r.normal(scale=0.3, size=n))


@given(seeds, st.floats(0.1, 50.0))
def test_t_update_stationarity(seed, rho1):
    _, phi, gam, s, u1, rr = _t_instance(seed)
    evd = real_symmetric_evd(phi)
    t, nu = admm_t_update(evd, s, u1, rr, gam, rho1)
    assert np.linalg.norm(t) == pytest.approx(1.0, abs=1e-8)
    eta = 1 / (rr @ gam @ rr)
    g = evd.eigenvectors.T @ (s - u1)
    tt = evd.eigenvectors.T @ t
    res = 2 * eta * evd.eigenvalues * tt + (rho1 + 2 * nu) * tt - rho1 * g
    assert np.linalg.norm(res) <= 1e-6 * np.linalg.norm(rho1 * g)
    assert nu > -eta * evd.eigenvalues[-1] - rho1 / 2


def test_t_update_isotropic_is_projection(rng):
    n = 10
    phi = 3.0 * np.eye(n)
    gam = rank_two(rng, n)
    s, u1, rr = rng.normal(size=n), rng.normal(size=n), rng.normal(size=n)
    t, _ = admm_t_update(real_symmetric_evd(phi), s, u1, rr, gam, 2.0)
    g = s - u1
    np.testing.assert_allclose(t, g / np.linalg.norm(g), atol=1e-10)


def test_t_update_large_penalty_limit():
    _, phi, gam, s, u1, rr = _t_instance(4)
    t, _ = admm_t_update(real_symmetric_evd(phi), s, u1, rr, gam, 1e9)
    g = s - u1
    np.testing.assert_allclose(t, g / np.linalg.norm(g), atol=1e-6)


def test_secular_function_decreasing():
    from onebit_mimo.greet import _secular
    r = np.random.default_rng(1)
    gaps = np.sort(r.uniform(0, 5, 12))
    g2 = r.uniform(0, 1, 12)
    vals = [_secular(x, gaps, g2, 2.0) for x in np.linspace(-20, 5, 200)]
    assert np.all(np.diff(vals) < 0)


def test_t_update_hard_case():
    # g orthogonal to the bottom eigenvector and too short to reach the pole
    n = 6
    phi = np.diag([6.0, 5.0, 4.0, 3.0, 2.0, 1.0])
    gam = np.diag([1.0, 1.0, 0, 0, 0, 0])
    s = np.array([0.01, 0.01, 0.0, 0.0, 0.0, 0.0])
    rr = np.ones(n)
    t, nu = admm_t_update(real_symmetric_evd(phi), s, np.zeros(n), rr, gam, 1.0)
    assert np.linalg.norm(t) == pytest.approx(1.0)
    assert abs(t[-1]) > 0.99
    eta = 1 / (rr @ gam @ rr)
    assert nu == pytest.approx(-eta * 1.0 - 0.5)


def test_t_update_degenerate_inputs():
    _, phi, gam, s, u1, rr = _t_instance(2)
    evd = real_symmetric_evd(phi)
    prev = np.eye(16)[0]
    t, nu = admm_t_update(evd, s, s, rr, gam, 2.0, t_prev=prev)
    np.testing.assert_array_equal(t, prev)
    assert math.isnan(nu)
    with pytest.raises(DegenerateProblemError):
        admm_t_update(evd, s, s, rr, gam, 2.0)
    with pytest.raises(DegenerateProblemError):
        admm_t_update(evd, s, u1, np.zeros(16), gam, 2.0)


# ---- r-update -------------------------------------------------------------

def test_r_plane_case_b_quartic_root():
    # oracle: bracketed root of x^4 - x^3 - 1 on [1, 2], the other real root is negative
    pos = brentq(lambda x: x**4 - x**3 - 1, 1.0, 2.0, xtol=1e-15)
    neg = brentq(lambda x: x**4 - x**3 - 1, -1.0, 0.0, xtol=1e-15)
    assert r_objective(pos, 0, 1, 0, 1) < r_objective(neg, 0, 1, 0, 1)
    r1, r2 = solve_r_plane(1.0, 0.0, 1.0)
    assert r1 == pytest.approx(pos, abs=1e-12) and r2 == 0.0
    assert pos == pytest.approx(1.3802775690976141, abs=1e-12)


def test_r_plane_cases_a_c_and_zero_p():
    assert solve_r_plane(0.0, 0.0, 16.0) == (2.0, 0.0)
    r1, r2 = solve_r_plane(0.0, -0.7, 0.3)
    s1, s2 = solve_r_plane(-0.7, 0.0, 0.3)
    assert r1 == 0.0 and r2 == pytest.approx(s1) and s2 == 0.0
    assert solve_r_plane(0.4, -0.2, 0.0) == (0.4, -0.2)


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(1e-4, 10))
def test_r_plane_stationary_and_minimal(q1, q2, p):
    if q1 == 0 and q2 == 0:
        return
    r1, r2 = solve_r_plane(q1, q2, p)
    h = 1e-6
    d1 = (r_objective(r1 + h, r2, q1, q2, p) - r_objective(r1 - h, r2, q1, q2, p)) / (2 * h)
    d2 = (r_objective(r1, r2 + h, q1, q2, p) - r_objective(r1, r2 - h, q1, q2, p)) / (2 * h)
    assert abs(d1) < 1e-6 * max(1, abs(q1), p) and abs(d2) < 1e-6 * max(1, abs(q2), p)
    # global check along the stationary line through q and on a coarse polar grid
    best = r_objective(r1, r2, q1, q2, p)
    rad = np.linspace(-5, 5, 2001)
    rad = rad[rad != 0]
    qn = math.hypot(q1, q2)
    assert best <= np.min(r_objective(rad * q1 / qn, rad * q2 / qn, q1, q2, p)) + 1e-9
    ang = np.linspace(0, 2 * np.pi, 181)
    R, A = np.meshgrid(np.linspace(0.05, 5, 120), ang)
    assert best <= np.min(r_objective(R * np.cos(A), R * np.sin(A), q1, q2, p)) + 1e-9


def test_r_update_passthrough_and_zero_p(rng):
    n = 12
    gam = rank_two(rng, n)
    evd = real_symmetric_evd(gam)
    s, u2, t = rng.normal(size=n), rng.normal(size=n), rng.normal(size=n)
    phi = random_pd(rng, n)
    r = admm_r_update(evd, s, u2, t, phi, 30.0)
    q = evd.eigenvectors.T @ (s - u2)
    rt = evd.eigenvectors.T @ r
    np.testing.assert_allclose(rt[2:], q[2:], atol=1e-12)
    np.testing.assert_allclose(admm_r_update(evd, s, u2, t, np.zeros((n, n)), 30.0), s - u2,
                               atol=1e-12)


def test_r_update_rank_violation(rng):
    evd = real_symmetric_evd(random_pd(rng, 8))
    with pytest.raises(DegenerateProblemError):
        gamma_plane(evd)
    z = np.zeros(8)
    with pytest.raises(DegenerateProblemError):
        admm_r_update(evd, z, z, z, np.eye(8), 1.0)


# ---- duals, solve, outer loop --------------------------------------------

def test_dual_update_rules(rng):
    s = rng.normal(size=6)
    st0 = AdmmState.start(s, s, s)
    st1 = admm_dual_update(st0)
    np.testing.assert_array_equal(st1.u1, 0.0)
    t, r = rng.normal(size=6), rng.normal(size=6)
    st2 = admm_dual_update(AdmmState.start(s, t, r))
    np.testing.assert_allclose(st2.u1, t - s)
    np.testing.assert_allclose(st2.u2, r - s)


def test_residual_c1_is_dual_increment(desk_scene, rng):
    s = Waveform.random_one_bit(4, 8, rng)
    w = mvdr_filter(s, desk_scene)
    c = 1 / 8
    init = AdmmState.start(qs.realify_vec(s.s), rng.choice([-c, c], 64), rng.choice([-c, c], 64))
    cfg = GreetConfig(max_admm_iters=1)
    _, d1 = admm_solve(w, desk_scene, init, cfg)
    assert d1.residual_c1[0] == pytest.approx(np.linalg.norm(d1.final_state.u1 - init.u1))


def test_admm_solve_cold_start_is_alphabet_exact(desk_scene, rng):
    s = Waveform.random_one_bit(4, 8, rng)
    w = mvdr_filter(s, desk_scene)
    c = 1 / 8
    init = AdmmState.start(qs.realify_vec(s.s), rng.choice([-c, c], 64), rng.choice([-c, c], 64))
    out, diag = admm_solve(w, desk_scene, init, GreetConfig())
    assert out.one_bit and diag.n_admm_iters == 200
    assert len(diag.objective_trace) == len(diag.residual_c2) == 200
    assert set(np.round(np.abs(qs.realify_vec(out.s)) * 8, 12)) == {1.0}
    assert np.all(np.abs(diag.final_state.s_tilde) <= c + 1e-15)


def test_warm_started_admm_converges(desk_scene):
    # inside the alternating loop with a stiffer sphere penalty the inner solve settles
    _, _, diag = greet(desk_scene, GreetConfig(rho1=10.0, seed=3, max_altopt_iters=10))
    assert max(diag.residual_d[-1], diag.residual_c1[-1], diag.residual_c2[-1]) < 1e-3
    assert abs(diag.modulus_min[-1] - 1 / 8) < 1e-3


def test_early_exit(desk_scene):
    cfg = GreetConfig(rho1=10.0, seed=3, max_altopt_iters=5, early_exit_tol=1e-3)
    _, _, diag = greet(desk_scene, cfg)
    assert diag.n_admm_iters < 5 * 200
    last = max(diag.residual_d[-1], diag.residual_c1[-1], diag.residual_c2[-1])
    assert last < 1e-3


def test_greet_is_deterministic(desk_scene):
    cfg = GreetConfig(max_altopt_iters=3, max_admm_iters=50, seed=9)
    w1, s1, d1 = greet(desk_scene, cfg)
    w2, s2, d2 = greet(desk_scene, cfg)
    np.testing.assert_array_equal(w1.w, w2.w)
    np.testing.assert_array_equal(s1.s, s2.s)
    assert d1.qsinr_trace == d2.qsinr_trace and d1.residual_d == d2.residual_d
    assert len(d1.qsinr_trace) == 4 and d1.n_admm_iters == 150
    assert d1.outer_index[0] == 1 and d1.outer_index[-1] == 3


def test_greet_output_is_alphabet_exact(desk_scene):
    w, s, diag = greet(desk_scene, GreetConfig(max_altopt_iters=2, seed=1))
    Waveform(s.s, 4, one_bit=True)
    assert diag.qsinr_trace[-1] == pytest.approx(qs.qsinr(w, s, desk_scene))


def test_mvdr_step_never_hurts(desk_scene):
    w, s, _ = greet(desk_scene, GreetConfig(max_altopt_iters=2, seed=4))
    r = np.random.default_rng(0)
    for _ in range(20):
        other = r.normal(size=32) + 1j * r.normal(size=32)
        assert qs.rho(other, s, desk_scene) <= qs.rho(mvdr_filter(s, desk_scene), s, desk_scene)


def test_greet_improves_on_its_start():
    scene = make_scene(n_tx=8, n_rx=16, L=16, theta0_deg=-21.0,
                       interferers=((-48.0, 1000.0, 0.0), (5.0, 1000.0, 0.0), (50.0, 1000.0, 0.0)))
    for seed in range(20):
        _, _, d = greet(scene, GreetConfig(rho2=200, max_altopt_iters=3, seed=seed))
        assert d.qsinr_trace[-1] >= d.qsinr_trace[0]


def test_diagnostics_csv(tmp_path, desk_scene):
    _, _, d = greet(desk_scene, GreetConfig(max_altopt_iters=2, max_admm_iters=5))
    path = tmp_path / "d.csv"
    d.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("outer_iter,admm_iter,objective")
    assert len(lines) == 11
    assert lines[-1].split(",")[:2] == ["2", "5"]
    assert Diagnostics().n_admm_iters == 0


def test_config_validation():
    with pytest.raises(ValueError):
        GreetConfig(rho1=0)
    with pytest.raises(ValueError):
        GreetConfig(max_admm_iters=0)
    with pytest.raises(ValueError):
        GreetConfig(early_exit_tol=-1.0)


def test_greet_from_given_waveform(desk_scene):
    m = matched_phase_onebit_waveform(desk_scene.geometry, desk_scene.target.angle, 8)
    w, s, d = greet(desk_scene, GreetConfig(max_altopt_iters=2), initial=m)
    assert d.qsinr_trace[0] == pytest.approx(qs.qsinr(mvdr_filter(m, desk_scene), m, desk_scene))
    # the matched start is a fixed point of the inner solve on this scene
    np.testing.assert_array_equal(s.s, m.s)
    with pytest.raises(ValueError):
        greet(desk_scene, initial=Waveform.random_one_bit(2, 8, np.random.default_rng(0)))
