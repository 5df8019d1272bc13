"""
Array geometry, steering vectors and the one-bit signal chain.

Conventions
-----------
* Angles are radians. Interference directions are stored as normalized
  angles ``omega = sin(theta)``.
* A waveform ``s`` is ``vec(S)`` of an ``(n_tx, L)`` matrix, column-major, so
  ``s[l * n_tx + k] = S[k, l]``. Receive-side vectors follow the same rule
  with ``n_rx``.
* The virtual channel is ``A(theta) = I_L kron a_r(theta) a_t(theta)^T``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

UNIT_ENERGY_TOL = 1e-10


@dataclass(frozen=True)
class ArrayGeometry:
    """Antenna positions (same length unit as ``wavelength``)."""

    tx_positions: np.ndarray
    rx_positions: np.ndarray
    wavelength: float = 1.0

    def __post_init__(self):
        tx = np.asarray(self.tx_positions, dtype=float).reshape(-1)
        rx = np.asarray(self.rx_positions, dtype=float).reshape(-1)
        if tx.size < 1 or rx.size < 1:
            raise ValueError("ArrayGeometry needs at least one tx and one rx antenna")
        if not (np.all(np.isfinite(tx)) and np.all(np.isfinite(rx))):
            raise ValueError("antenna positions must be finite")
        if not (self.wavelength > 0 and math.isfinite(self.wavelength)):
            raise ValueError(f"wavelength must be positive, got {self.wavelength}")
        tx.setflags(write=False)
        rx.setflags(write=False)
        object.__setattr__(self, "tx_positions", tx)
        object.__setattr__(self, "rx_positions", rx)
        object.__setattr__(self, "wavelength", float(self.wavelength))

    @classmethod
    def ula(cls, n_tx: int, n_rx: int, wavelength: float = 1.0,
            spacing: float | None = None) -> "ArrayGeometry":
        """Uniform linear arrays; ``spacing`` defaults to half a wavelength."""
        if spacing is None:
            spacing = wavelength / 2
        return cls(np.arange(n_tx) * spacing, np.arange(n_rx) * spacing, wavelength)

    @property
    def n_tx(self) -> int:
        return self.tx_positions.size

    @property
    def n_rx(self) -> int:
        return self.rx_positions.size


@dataclass(frozen=True)
class TargetModel:
    """Point target at ``angle``; nonfluctuating (``'nft'``) or Rayleigh (``'rft'``)."""

    angle: float
    kind: str = "nft"
    amplitude: complex = 1.0
    variance: float = 1.0

    def __post_init__(self):
        if abs(self.angle) > math.pi / 2 + 1e-12:
            raise ValueError(f"target angle {self.angle} rad outside [-pi/2, pi/2]")
        kind = self.kind.lower()
        if kind not in ("nft", "rft"):
            raise ValueError(f"target kind must be 'nft' or 'rft', got {self.kind!r}")
        if kind == "rft" and not self.variance > 0:
            raise ValueError("RFT variance must be positive")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "amplitude", complex(self.amplitude))

    @property
    def power(self) -> float:
        """``|alpha_0|^2`` for NFT, ``sigma_0^2`` for RFT."""
        if self.kind == "nft":
            return abs(self.amplitude) ** 2
        return float(self.variance)


@dataclass(frozen=True)
class InterferenceSource:
    """Signal-dependent interference with normalized angle ``U(mean - delta, mean + delta)``."""

    mean_normalized_angle: float
    power: float
    uncertainty: float = 0.0

    def __post_init__(self):
        w, d = self.mean_normalized_angle, self.uncertainty
        if d < 0:
            raise ValueError(f"angle uncertainty must be >= 0, got {d}")
        if not self.power > 0:
            raise ValueError(f"interference power must be > 0, got {self.power}")
        if w - d < -1 - 1e-12 or w + d > 1 + 1e-12:
            raise ValueError(
                f"normalized angle support [{w - d:.4f}, {w + d:.4f}] leaves [-1, 1]")

    @classmethod
    def from_degrees(cls, angle_deg: float, power: float, uncertainty: float = 0.0):
        return cls(math.sin(math.radians(angle_deg)), power, uncertainty)

    @property
    def is_deterministic(self) -> bool:
        return self.uncertainty == 0.0


@dataclass(frozen=True)
class RadarScene:
    geometry: ArrayGeometry
    target: TargetModel
    interferences: tuple = field(default_factory=tuple)
    noise_power: float = 1.0
    code_length: int = 1

    def __post_init__(self):
        if not self.noise_power > 0:
            raise ValueError("noise power must be positive")
        if int(self.code_length) < 1:
            raise ValueError("code length L must be >= 1")
        object.__setattr__(self, "interferences", tuple(self.interferences))
        object.__setattr__(self, "code_length", int(self.code_length))

    @property
    def n_interferences(self) -> int:
        return len(self.interferences)

    @property
    def is_stochastic(self) -> bool:
        return any(not src.is_deterministic for src in self.interferences)

    @property
    def tx_dim(self) -> int:
        return self.geometry.n_tx * self.code_length

    @property
    def rx_dim(self) -> int:
        return self.geometry.n_rx * self.code_length

    def replace(self, **changes) -> "RadarScene":
        from dataclasses import replace
        return replace(self, **changes)


def alphabet_scale(n_tx: int, code_length: int) -> float:
    return 1.0 / math.sqrt(2 * n_tx * code_length)


@dataclass(frozen=True)
class Waveform:
    """Unit-energy transmit vector of length ``n_tx * L``."""

    s: np.ndarray
    n_tx: int
    one_bit: bool = False

    def __post_init__(self):
        s = np.array(self.s, dtype=complex).reshape(-1)
        if s.size % self.n_tx:
            raise ValueError(f"waveform length {s.size} not a multiple of n_tx={self.n_tx}")
        energy = float(np.vdot(s, s).real)
        if abs(energy - 1.0) > UNIT_ENERGY_TOL:
            raise ValueError(f"waveform energy {energy:.12g} is not 1")
        if self.one_bit:
            c = alphabet_scale(self.n_tx, s.size // self.n_tx)
            if not (np.all(np.abs(s.real) == c) and np.all(np.abs(s.imag) == c)):
                raise ValueError("one-bit waveform has entries outside the alphabet")
        s.setflags(write=False)
        object.__setattr__(self, "s", s)

    @classmethod
    def from_signs(cls, signs, n_tx: int) -> "Waveform":
        """Build a one-bit waveform from a ``{+-1 +-1j}`` vector."""
        signs = np.asarray(signs, dtype=complex).reshape(-1)
        c = alphabet_scale(n_tx, signs.size // n_tx)
        s = c * np.where(signs.real >= 0, 1.0, -1.0) + 1j * (c * np.where(signs.imag >= 0, 1.0, -1.0))
        return cls(s, n_tx, one_bit=True)

    @classmethod
    def random_one_bit(cls, n_tx: int, code_length: int, rng) -> "Waveform":
        n = n_tx * code_length
        re = rng.choice([-1.0, 1.0], size=n)
        im = rng.choice([-1.0, 1.0], size=n)
        return cls.from_signs(re + 1j * im, n_tx)

    @property
    def code_length(self) -> int:
        return self.s.size // self.n_tx

    @property
    def matrix(self) -> np.ndarray:
        """``S`` with shape ``(n_tx, L)``."""
        return self.s.reshape(self.code_length, self.n_tx).T

    def symbols(self) -> np.ndarray:
        """2-bit index per entry: bit 1 = negative real, bit 0 = negative imag."""
        if not self.one_bit:
            raise ValueError("symbols() only defined for one-bit waveforms")
        return (2 * (self.s.real < 0) + (self.s.imag < 0)).astype(np.uint8)

    @classmethod
    def from_symbols(cls, symbols, n_tx: int) -> "Waveform":
        sym = np.asarray(symbols, dtype=np.int64)
        if np.any((sym < 0) | (sym > 3)):
            raise ValueError("waveform symbols must be in 0..3")
        re = np.where(sym & 2, -1.0, 1.0)
        im = np.where(sym & 1, -1.0, 1.0)
        return cls.from_signs(re + 1j * im, n_tx)


def _as_vector(x) -> np.ndarray:
    if isinstance(x, Waveform):
        return x.s
    if hasattr(x, "w") and not isinstance(x, np.ndarray):
        return x.w
    return np.asarray(x, dtype=complex).reshape(-1)


def _check_angle(theta):
    if abs(theta) > math.pi / 2 + 1e-12:
        raise ValueError(f"angle {theta} rad outside [-pi/2, pi/2]")


def _steer(positions, wavelength, omega):
    return np.exp(-2j * np.pi * positions * omega / wavelength) / math.sqrt(positions.size)


def tx_steering(geometry: ArrayGeometry, theta: float) -> np.ndarray:
    """``a_t(theta)``, unit norm."""
    _check_angle(theta)
    return _steer(geometry.tx_positions, geometry.wavelength, math.sin(theta))


def rx_steering(geometry: ArrayGeometry, theta: float) -> np.ndarray:
    """``a_r(theta)``, unit norm."""
    _check_angle(theta)
    return _steer(geometry.rx_positions, geometry.wavelength, math.sin(theta))


def tx_steering_normalized(geometry: ArrayGeometry, omega) -> np.ndarray:
    """Transmit steering for normalized angle(s) ``omega = sin(theta)``.

    Array input yields one row per angle.
    """
    omega = np.asarray(omega, dtype=float)
    return _steer(geometry.tx_positions, geometry.wavelength, omega[..., None])


def rx_steering_normalized(geometry: ArrayGeometry, omega) -> np.ndarray:
    omega = np.asarray(omega, dtype=float)
    return _steer(geometry.rx_positions, geometry.wavelength, omega[..., None])


def channel_matrix(geometry: ArrayGeometry, theta: float, L: int) -> np.ndarray:
    """Dense ``A(theta) = I_L kron a_r a_t^T`` of shape ``(n_rx L, n_tx L)``."""
    block = np.outer(rx_steering(geometry, theta), tx_steering(geometry, theta))
    return np.kron(np.eye(L), block)


def channel_matrix_normalized(geometry: ArrayGeometry, omega: float, L: int) -> np.ndarray:
    block = np.outer(rx_steering_normalized(geometry, omega),
                     tx_steering_normalized(geometry, omega))
    return np.kron(np.eye(L), block)


def apply_channel(geometry: ArrayGeometry, omega, s) -> np.ndarray:
    """``A(omega) s`` without forming ``A``.

    ``omega`` may be an array of any shape; the result then has that shape
    with a trailing axis of length ``n_rx L``. Uses
    ``A s = vec(a_r a_t^T S)``.
    """
    s = _as_vector(s)
    n_tx, n_rx = geometry.n_tx, geometry.n_rx
    L = s.size // n_tx
    S = s.reshape(L, n_tx)                                  # rows are columns of S
    at = tx_steering_normalized(geometry, omega)            # (..., n_tx)
    ar = rx_steering_normalized(geometry, omega)            # (..., n_rx)
    gain = at @ S.T                                         # (..., L) = a_t^T S
    out = gain[..., :, None] * ar[..., None, :]             # (..., L, n_rx)
    return out.reshape(*out.shape[:-2], L * n_rx)


def one_bit_quantize(x) -> np.ndarray:
    """Complex one-bit quantizer ``sign(Re x) + j sign(Im x)`` with ``sign(0) = +1``."""
    x = np.asarray(x)
    re = np.where(np.real(x) >= 0, 1.0, -1.0)
    im = np.where(np.imag(x) >= 0, 1.0, -1.0)
    return re + 1j * im


def noise_free_returns(scene: RadarScene, s, interference_draw, target_draw,
                       angle_draw=None):
    """Noise-free returns ``(h1, h0)`` for given coefficient and angle draws.

    ``angle_draw`` holds normalized interference angles; ``None`` uses the
    mean angles.
    """
    s = _as_vector(s)
    geom = scene.geometry
    K = scene.n_interferences
    xi = np.asarray(interference_draw, dtype=complex).reshape(-1)
    if xi.size != K:
        raise ValueError(f"expected {K} interference coefficients, got {xi.size}")
    if s.size != scene.tx_dim:
        raise ValueError(f"waveform length {s.size} != n_tx L = {scene.tx_dim}")
    if angle_draw is None:
        omegas = np.array([src.mean_normalized_angle for src in scene.interferences])
    else:
        omegas = np.asarray(angle_draw, dtype=float).reshape(-1)
        if omegas.size != K:
            raise ValueError(f"expected {K} interference angles, got {omegas.size}")
        for om, src in zip(omegas, scene.interferences):
            lo = src.mean_normalized_angle - src.uncertainty
            hi = src.mean_normalized_angle + src.uncertainty
            if not (lo - 1e-12 <= om <= hi + 1e-12):
                raise ValueError(f"angle draw {om} outside [{lo}, {hi}]")

    h0 = np.zeros(scene.rx_dim, dtype=complex)
    if K:
        h0 = xi @ apply_channel(geom, omegas, s)
    target = apply_channel(geom, math.sin(scene.target.angle), s)
    h1 = h0 + complex(target_draw) * target
    return h1, h0


def max_sample_power(h) -> float:
    """``max_l |h_l|^2``; compare to the noise power for the low-input-SNR check."""
    return float(np.max(np.abs(np.asarray(h)) ** 2))


def matched_phase_onebit_waveform(geometry: ArrayGeometry, theta0: float, L: int) -> Waveform:
    """One-bit waveform whose quadrant phases track the target steering phase.

    Every column of ``S`` is identical: the phase ``2 pi d_k sin(theta0)/lambda``
    is shifted by ``pi/4`` and mapped onto the alphabet point whose quadrant
    contains it, leaving a residual phase in ``(0, pi/2]``.
    """
    _check_angle(theta0)
    phase = 2 * np.pi * geometry.tx_positions * math.sin(theta0) / geometry.wavelength
    cell = np.floor(np.mod(phase + np.pi / 4, 2 * np.pi) / (np.pi / 2))
    cell = np.minimum(cell, 3)
    quant_phase = np.pi / 4 + cell * np.pi / 2
    col = np.exp(1j * quant_phase)
    signs = np.tile(col, L)
    return Waveform.from_signs(signs, geometry.n_tx)


def residual_phases(geometry: ArrayGeometry, waveform: Waveform, theta0: float) -> np.ndarray:
    """Residual phase ``angle(S[k,l]) - 2 pi d_k sin(theta0)/lambda`` wrapped to ``[0, 2pi)``."""
    S = waveform.matrix
    steer_phase = 2 * np.pi * geometry.tx_positions * math.sin(theta0) / geometry.wavelength
    return np.mod(np.angle(S) - steer_phase[:, None], 2 * np.pi)


def transmit_beampattern(geometry: ArrayGeometry, s, theta: float) -> float:
    """``F(theta) = ||a_t(theta)^T S||^2``."""
    s = _as_vector(s)
    S = s.reshape(-1, geometry.n_tx).T
    return float(np.sum(np.abs(tx_steering(geometry, theta) @ S) ** 2))


def phase_matched_waveform(geometry: ArrayGeometry, theta0: float, L: int) -> Waveform:
    """Infinite-resolution waveform with ``F(theta0) = 1``."""
    phase = 2 * np.pi * geometry.tx_positions * math.sin(theta0) / geometry.wavelength
    col = np.exp(1j * phase) / math.sqrt(geometry.n_tx * L)
    return Waveform(np.tile(col, L), geometry.n_tx)


def db(x):
    return 10 * np.log10(x)


def from_db(x):
    return 10.0 ** (np.asarray(x, dtype=float) / 10)
