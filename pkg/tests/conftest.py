import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from onebit_mimo.radar_model import ArrayGeometry, InterferenceSource, RadarScene, TargetModel

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def make_scene(n_tx=4, n_rx=4, L=8, theta0_deg=34.0, power=100.0, kind="nft",
               interferers=((-50.0, 1000.0, 0.0), (10.0, 1000.0, 0.0)), noise=1.0):
    geom = ArrayGeometry.ula(n_tx, n_rx)
    if kind == "nft":
        target = TargetModel(math.radians(theta0_deg), "nft", amplitude=math.sqrt(power))
    else:
        target = TargetModel(math.radians(theta0_deg), "rft", variance=power)
    srcs = tuple(InterferenceSource.from_degrees(a, p, d) for a, p, d in interferers)
    return RadarScene(geom, target, srcs, noise, L)


@pytest.fixture
def desk_scene():
    return make_scene()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES
    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)


def exact_h0_power(w, s, scene):
    """E|w^H Q(h0 + v)|^2 for fixed interference angles via the arcsine law.

    Independent of the package's moment approximations: the H0 return is
    Gaussian with covariance sigma^2 I + sum_k sigma_k^2 b_k b_k^H, and the
    sign correlation of two jointly Gaussian reals is (2/pi) arcsin(rho).
    """
    from onebit_mimo.radar_model import apply_channel
    n = scene.rx_dim
    R = scene.noise_power * np.eye(n, dtype=complex)
    for src in scene.interferences:
        b = apply_channel(scene.geometry, src.mean_normalized_angle, s)
        R += src.power * np.outer(b, b.conj())
    d = np.sqrt(np.real(np.diag(R)))
    c = R / np.outer(d, d)
    M = (4 / np.pi) * (np.arcsin(np.clip(c.real, -1, 1)) + 1j * np.arcsin(np.clip(c.imag, -1, 1)))
    w = np.asarray(w, complex).reshape(-1)
    return float(np.vdot(w, M @ w).real)
