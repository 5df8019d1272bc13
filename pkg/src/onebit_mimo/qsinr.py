"""
Closed-form statistics of the one-bit receiver under low per-sample SNR/INR.

The quantities here are deterministic functions of the filter ``w``, the
waveform ``s`` and the scene. Scenes with angle uncertainty use the
closed-form expectation kernels ``C`` and ``D`` (sinc-damped steering outer
products) in place of the fixed-angle outer products.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .numerics import erf, marcum_q1, sinc
from .radar_model import (ArrayGeometry, RadarScene, _as_vector,
                          apply_channel, rx_steering_normalized,
                          tx_steering_normalized)

HERMITIAN_TOL = 1e-10


@dataclass(frozen=True)
class Filter:
    """Receive filter ``w`` of length ``n_rx L``."""

    w: np.ndarray

    def __post_init__(self):
        w = np.array(self.w, dtype=complex).reshape(-1)
        if not np.all(np.isfinite(w)):
            raise ValueError("filter has non-finite entries")
        if not np.any(w):
            raise ValueError("filter must be nonzero")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    def matrix(self, n_rx: int) -> np.ndarray:
        """``W`` with shape ``(n_rx, L)``."""
        return self.w.reshape(-1, n_rx).T

    def normalized(self) -> "Filter":
        return Filter(self.w / np.linalg.norm(self.w))


class SignMoments(NamedTuple):
    mean: complex
    variance: float
    exact_mean: complex
    exact_variance: float


@dataclass(frozen=True)
class DetectionReport:
    sigma_in_sq: float
    beta0: complex
    betas: Optional[np.ndarray]
    rho: float
    qsinr: float
    threshold: float
    pf: float
    pd: float
    target_kind: str


def _gain(sigma_sq: float) -> float:
    return math.sqrt(4.0 / (math.pi * sigma_sq))


def _interference_weights(scene: RadarScene) -> np.ndarray:
    return np.array([2 * src.power / (math.pi * scene.noise_power)
                     for src in scene.interferences])


def _use_kernels(scene: RadarScene, stochastic: Optional[bool]) -> bool:
    return scene.is_stochastic if stochastic is None else bool(stochastic)


def _hermitize(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.conj().T)


# --------------------------------------------------------------------------
# Scalar statistics
# --------------------------------------------------------------------------

def sign_moments(h: complex, sigma_sq: float) -> SignMoments:
    """First-order mean/variance of ``Q(h + v)``, ``v ~ CN(0, sigma_sq)``.

    The exact values follow from ``P(Re x > 0) = (1 + erf(Re h / sigma)) / 2``.
    """
    if not sigma_sq > 0:
        raise ValueError(f"noise power must be positive, got {sigma_sq}")
    h = complex(h)
    sigma = math.sqrt(sigma_sq)
    exact_mean = erf(h.real / sigma) + 1j * erf(h.imag / sigma)
    return SignMoments(
        mean=_gain(sigma_sq) * h,
        variance=2.0,
        exact_mean=exact_mean,
        exact_variance=2.0 - abs(exact_mean) ** 2,
    )


def beta(w, s, A_theta, sigma_sq: float) -> complex:
    """``sqrt(4 / (pi sigma^2)) s^H A^H w``."""
    w = _as_vector(w)
    s = _as_vector(s)
    A = np.asarray(A_theta)
    if A.shape != (w.size, s.size):
        raise ValueError(f"channel shape {A.shape} incompatible with w ({w.size}) / s ({s.size})")
    return _gain(sigma_sq) * complex(np.vdot(A @ s, w))


def interference_betas(w, s, scene: RadarScene) -> np.ndarray:
    """``beta_k`` at the mean interference angles."""
    w = _as_vector(w)
    if not scene.n_interferences:
        return np.zeros(0, dtype=complex)
    omegas = np.array([src.mean_normalized_angle for src in scene.interferences])
    As = apply_channel(scene.geometry, omegas, s)             # (K, n_rx L)
    return _gain(scene.noise_power) * (As.conj() @ w)


def target_beta(w, s, scene: RadarScene) -> complex:
    As = apply_channel(scene.geometry, math.sin(scene.target.angle), s)
    return _gain(scene.noise_power) * complex(np.vdot(As, _as_vector(w)))


def sigma_in_sq(w, s, scene: RadarScene, stochastic: Optional[bool] = None) -> float:
    """Output interference-plus-noise power under H0.

    Fixed angles: ``2 w^H w + beta^H Sigma beta``. With angle uncertainty the
    per-interference ``beta_k`` are random, so ``beta^H Sigma beta`` is
    replaced by its expectation ``2 w^H Xi(s) w``.
    """
    w = _as_vector(w)
    base = 2.0 * float(np.vdot(w, w).real)
    if not scene.n_interferences:
        return base
    if _use_kernels(scene, stochastic):
        Xi = xi_matrix(s, scene, stochastic=True)
        return base + 2.0 * float(np.vdot(w, Xi @ w).real)
    b = interference_betas(w, s, scene)
    powers = np.array([src.power for src in scene.interferences])
    return base + float(np.sum(powers * np.abs(b) ** 2))


def pf(threshold: float, sigma_in_sq: float) -> float:
    """False-alarm probability ``exp(-T^2 / sigma_in^2)``."""
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    if not sigma_in_sq > 0:
        raise ValueError("sigma_in_sq must be positive")
    return math.exp(-threshold ** 2 / sigma_in_sq)


def threshold_for_pf(target_pf: float, sigma_in_sq: float) -> float:
    """Threshold ``sqrt(-sigma_in^2 ln P_f)``."""
    if not 0 < target_pf <= 1:
        raise ValueError(f"target P_f must lie in (0, 1], got {target_pf}")
    return math.sqrt(max(0.0, -sigma_in_sq * math.log(target_pf)))


def _check_pf(p):
    if not 0 < p <= 1:
        raise ValueError(f"P_f must lie in (0, 1], got {p}")


def pd_rft(pf: float, sigma0_sq: float, beta0: complex, sigma_in_sq: float) -> float:
    """Detection probability of a Rayleigh fluctuating target."""
    _check_pf(pf)
    if not sigma0_sq > 0:
        raise ValueError("RFT variance must be positive")
    snr = sigma0_sq * abs(beta0) ** 2 / sigma_in_sq
    return math.exp(math.log(pf) / (1.0 + snr))


def pd_nft(pf: float, alpha0: complex, beta0: complex, sigma_in_sq: float) -> float:
    """Detection probability of a nonfluctuating target (Marcum Q)."""
    _check_pf(pf)
    a = math.sqrt(2 * abs(alpha0) ** 2 * abs(beta0) ** 2 / sigma_in_sq)
    b = math.sqrt(-2 * math.log(pf))
    return marcum_q1(a, b)


# --------------------------------------------------------------------------
# Uncertainty kernels
# --------------------------------------------------------------------------

def _kernel(outer_pos, inner_pos, wavelength, varpi, delta, sign):
    do = outer_pos[:, None] - outer_pos[None, :]
    di = inner_pos[:, None] - inner_pos[None, :]
    dt = 2.0 * (do[:, None, :, None] + di[None, :, None, :]) / wavelength
    n = outer_pos.size * inner_pos.size
    K = np.exp(sign * 1j * np.pi * dt * varpi) * sinc(dt * delta) / n
    return K.reshape(n, n)


def c_kernel(geometry: ArrayGeometry, varpi: float, delta: float) -> np.ndarray:
    """``E[(a_t kron a_r)(a_t kron a_r)^H]`` for ``omega ~ U(varpi +- delta)``.

    Blocks are indexed by transmit antennas, entries within a block by
    receive antennas.
    """
    if delta < 0:
        raise ValueError("delta must be >= 0")
    return _kernel(geometry.tx_positions, geometry.rx_positions,
                   geometry.wavelength, varpi, delta, -1)


def d_kernel(geometry: ArrayGeometry, varpi: float, delta: float) -> np.ndarray:
    """``E[(a_r* kron a_t*)(a_r* kron a_t*)^H]``; blocks indexed by receive antennas."""
    if delta < 0:
        raise ValueError("delta must be >= 0")
    return _kernel(geometry.rx_positions, geometry.tx_positions,
                   geometry.wavelength, varpi, delta, +1)


# --------------------------------------------------------------------------
# Quadratic-form matrices
# --------------------------------------------------------------------------

def xi_matrix(s, scene: RadarScene, stochastic: Optional[bool] = None) -> np.ndarray:
    """Interference covariance ``Xi(s)`` of size ``n_rx L``.

    ``stochastic=None`` picks the kernel form exactly when some source has a
    nonzero angle uncertainty; ``True``/``False`` force a path.
    """
    s = _as_vector(s)
    n = scene.rx_dim
    Xi = np.zeros((n, n), dtype=complex)
    if not scene.n_interferences:
        return Xi
    weights = _interference_weights(scene)
    geom = scene.geometry
    if _use_kernels(scene, stochastic):
        S = s.reshape(scene.code_length, geom.n_tx).T
        B = np.kron(S.T, np.eye(geom.n_rx))
        for c, src in zip(weights, scene.interferences):
            C = c_kernel(geom, src.mean_normalized_angle, src.uncertainty)
            Xi += c * (B @ C @ B.conj().T)
    else:
        omegas = np.array([src.mean_normalized_angle for src in scene.interferences])
        As = apply_channel(geom, omegas, s)
        Xi = (As.T * weights) @ As.conj()
    return _hermitize(Xi)


def apply_channel_adjoint(geometry: ArrayGeometry, omega, w) -> np.ndarray:
    """``A(omega)^H w = vec(a_t* a_r^H W)`` without forming ``A``."""
    w = _as_vector(w)
    n_rx, n_tx = geometry.n_rx, geometry.n_tx
    L = w.size // n_rx
    W = w.reshape(L, n_rx)                                   # row l = column l of W
    at = tx_steering_normalized(geometry, omega)
    ar = rx_steering_normalized(geometry, omega)
    gain = ar.conj() @ W.T                                   # (..., L) = a_r^H W
    out = gain[..., :, None] * at.conj()[..., None, :]
    return out.reshape(*out.shape[:-2], L * n_tx)


def phi_matrix(w, scene: RadarScene, stochastic: Optional[bool] = None) -> np.ndarray:
    """``Phi(w) = sum_k c_k E[A_k^H w w^H A_k] + ||w||^2 I`` of size ``n_tx L``."""
    w = _as_vector(w)
    if not np.any(w):
        raise ValueError("phi_matrix: zero filter")
    n = scene.tx_dim
    Phi = float(np.vdot(w, w).real) * np.eye(n, dtype=complex)
    if not scene.n_interferences:
        return Phi
    weights = _interference_weights(scene)
    geom = scene.geometry
    if _use_kernels(scene, stochastic):
        W = w.reshape(scene.code_length, geom.n_rx).T
        B = np.kron(W.T, np.eye(geom.n_tx))
        for c, src in zip(weights, scene.interferences):
            D = d_kernel(geom, src.mean_normalized_angle, src.uncertainty)
            Phi += c * (B @ D @ B.conj().T)
    else:
        omegas = np.array([src.mean_normalized_angle for src in scene.interferences])
        Aw = apply_channel_adjoint(geom, omegas, w)
        Phi += (Aw.T * weights) @ Aw.conj()
    return _hermitize(Phi)


def gamma_matrix(w, A_theta0) -> np.ndarray:
    """Rank-one ``Gamma(w) = A^H w w^H A``."""
    v = np.asarray(A_theta0).conj().T @ _as_vector(w)
    return np.outer(v, v.conj())


def realify(M) -> np.ndarray:
    """Real symmetric lift ``[[Re M, -Im M], [Im M, Re M]]`` of a Hermitian matrix."""
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("realify expects a square matrix")
    if np.max(np.abs(M - M.conj().T), initial=0.0) > HERMITIAN_TOL * max(1.0, np.max(np.abs(M))):
        raise ValueError("realify: matrix is not Hermitian")
    R, I = M.real, M.imag
    return np.block([[R, -I], [I, R]])


def realify_vec(v) -> np.ndarray:
    v = np.asarray(v)
    return np.concatenate([v.real, v.imag])


def complexify_vec(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    n = x.size // 2
    return x[:n] + 1j * x[n:]


# --------------------------------------------------------------------------
# QSINR
# --------------------------------------------------------------------------

def rho(w, s, scene: RadarScene, stochastic: Optional[bool] = None) -> float:
    """``(2/(pi sigma^2)) |w^H A0 s|^2 / (w^H Xi(s) w + w^H w)``."""
    w = _as_vector(w)
    if not np.any(w):
        raise ValueError("rho: zero filter")
    A0s = apply_channel(scene.geometry, math.sin(scene.target.angle), s)
    num = abs(np.vdot(w, A0s)) ** 2
    Xi = xi_matrix(s, scene, stochastic)
    den = float(np.vdot(w, Xi @ w).real) + float(np.vdot(w, w).real)
    return 2.0 / (math.pi * scene.noise_power) * num / den


def rho_phi_form(w, s, scene: RadarScene, stochastic: Optional[bool] = None) -> float:
    """Same ratio with denominator ``s^H Phi(w) s`` (valid for unit-energy ``s``)."""
    s = _as_vector(s)
    w = _as_vector(w)
    A0s = apply_channel(scene.geometry, math.sin(scene.target.angle), s)
    num = abs(np.vdot(w, A0s)) ** 2
    den = float(np.vdot(s, phi_matrix(w, scene, stochastic) @ s).real)
    return 2.0 / (math.pi * scene.noise_power) * num / den


def qsinr(w, s, scene: RadarScene, stochastic: Optional[bool] = None) -> float:
    """Linear QSINR: target power times ``rho``."""
    return scene.target.power * rho(w, s, scene, stochastic)


def detection_report(w, s, scene: RadarScene, target_pf: float = 1e-6,
                     stochastic: Optional[bool] = None) -> DetectionReport:
    """Bundle of ``sigma_in^2``, ``beta``'s, QSINR and ``(P_f, P_d)`` at ``target_pf``.

    With angle uncertainty the ``beta_k`` are not defined (``betas=None``) and
    ``P_d`` reuses the fixed-angle Gaussian argument with the expected
    ``sigma_in^2``.
    """
    use_k = _use_kernels(scene, stochastic)
    sin2 = sigma_in_sq(w, s, scene, stochastic=use_k)
    b0 = target_beta(w, s, scene)
    betas = None if use_k else interference_betas(w, s, scene)
    r = abs(b0) ** 2 / sin2
    thr = threshold_for_pf(target_pf, sin2)
    if scene.target.kind == "rft":
        p_d = pd_rft(target_pf, scene.target.variance, b0, sin2)
    else:
        p_d = pd_nft(target_pf, scene.target.amplitude, b0, sin2)
    return DetectionReport(sigma_in_sq=sin2, beta0=b0, betas=betas, rho=r,
                           qsinr=scene.target.power * r, threshold=thr,
                           pf=target_pf, pd=p_d, target_kind=scene.target.kind)
