"""
Joint one-bit waveform / receive-filter design.

The outer loop alternates an MVDR filter update with an ADMM solve of the
waveform subproblem

    min  t' Phi t / r' Gamma r   s.t.  t = s, r = s, t't = 1, |s_k| <= c

in the real-valued lift (``c = 1/sqrt(2 n_tx L)``). Each ADMM primal step has
a closed form: a box clip for ``s``, a secular equation for ``t`` and a
quartic for the two nonzero-eigenvalue coordinates of ``r``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np
from scipy.optimize import brentq

from .numerics import (RealSymmetricEvd, hermitian_solve, quartic_real_roots,
                       real_symmetric_evd)
from .qsinr import (Filter, apply_channel_adjoint, complexify_vec, phi_matrix,
                    qsinr, realify, realify_vec, xi_matrix)
from .radar_model import (RadarScene, Waveform, _as_vector, alphabet_scale,
                          apply_channel)

GAMMA_RANK_TOL = 1e-8
ETA_TOL = 1e-14
ROOT_TIE_TOL = 1e-12


class DegenerateProblemError(ValueError):
    """Raised when a design step has no well-defined solution."""


@dataclass(frozen=True)
class GreetConfig:
    """Penalties, iteration budgets and seed for a design run.

    ``early_exit_tol`` stops an ADMM solve once ``||d||``, ``||c1||`` and
    ``||c2||`` all fall below it; ``None`` runs the full budget.
    """

    rho1: float = 2.0
    rho2: float = 30.0
    max_admm_iters: int = 200
    max_altopt_iters: int = 50
    bisection_tol: float = 1e-13
    seed: int = 0
    early_exit_tol: Optional[float] = None

    def __post_init__(self):
        for name in ("rho1", "rho2", "bisection_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("max_admm_iters", "max_altopt_iters"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")
        if self.early_exit_tol is not None and not self.early_exit_tol > 0:
            raise ValueError("early_exit_tol must be positive")


@dataclass(frozen=True)
class AdmmState:
    s_tilde: np.ndarray
    t: np.ndarray
    r: np.ndarray
    u1: np.ndarray
    u2: np.ndarray

    @classmethod
    def start(cls, s_tilde, t, r) -> "AdmmState":
        z = np.zeros_like(np.asarray(s_tilde, dtype=float))
        return cls(np.asarray(s_tilde, float), np.asarray(t, float),
                   np.asarray(r, float), z, z.copy())


@dataclass
class Diagnostics:
    """Per-iteration traces.

    ADMM traces from successive outer iterations are concatenated;
    ``outer_index`` tells which outer iteration each entry came from.
    ``qsinr_trace[0]`` is the QSINR of the random start (after its MVDR
    filter) and entry ``i`` the QSINR after outer iteration ``i``.
    """

    objective_trace: List[float] = field(default_factory=list)
    residual_d: List[float] = field(default_factory=list)
    residual_c1: List[float] = field(default_factory=list)
    residual_c2: List[float] = field(default_factory=list)
    modulus_min: List[float] = field(default_factory=list)
    modulus_max: List[float] = field(default_factory=list)
    outer_index: List[int] = field(default_factory=list)
    qsinr_trace: List[float] = field(default_factory=list)
    final_state: Optional[AdmmState] = None

    @property
    def n_admm_iters(self) -> int:
        return len(self.residual_d)

    def extend(self, other: "Diagnostics", outer: int) -> None:
        for name in ("objective_trace", "residual_d", "residual_c1", "residual_c2",
                     "modulus_min", "modulus_max"):
            getattr(self, name).extend(getattr(other, name))
        self.outer_index.extend([outer] * other.n_admm_iters)
        self.final_state = other.final_state

    def to_csv(self, path) -> None:
        """One row per ADMM iteration; ``qsinr_db`` is the value reached at the end
        of that row's outer iteration (blank for a bare ADMM solve)."""
        cols = ["outer_iter", "admm_iter", "objective", "residual_d", "residual_c1",
                "residual_c2", "modulus_min", "modulus_max", "qsinr_db"]
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(cols)
            counter = {}
            for j in range(self.n_admm_iters):
                outer = self.outer_index[j] if self.outer_index else 1
                counter[outer] = counter.get(outer, 0) + 1
                q = ""
                if outer < len(self.qsinr_trace):
                    q = repr(10 * math.log10(self.qsinr_trace[outer]))
                wr.writerow([outer, counter[outer], repr(self.objective_trace[j]),
                             repr(self.residual_d[j]), repr(self.residual_c1[j]),
                             repr(self.residual_c2[j]), repr(self.modulus_min[j]),
                             repr(self.modulus_max[j]), q])


# --------------------------------------------------------------------------
# Filter step
# --------------------------------------------------------------------------

def mvdr_filter(s, scene: RadarScene) -> Filter:
    """Distortionless minimum-variance filter for a fixed waveform."""
    s = _as_vector(s)
    a0s = apply_channel(scene.geometry, math.sin(scene.target.angle), s)
    if np.linalg.norm(a0s) <= 1e-12 * max(1.0, np.linalg.norm(s)):
        raise DegenerateProblemError("target response A(theta0) s vanishes")
    R = xi_matrix(s, scene) + np.eye(scene.rx_dim)
    x = hermitian_solve(R, a0s)
    return Filter(x / np.vdot(a0s, x))


# --------------------------------------------------------------------------
# ADMM primal/dual steps
# --------------------------------------------------------------------------

def admm_s_update(t, u1, r, u2, rho1: float, rho2: float, n: Optional[int] = None) -> np.ndarray:
    """Box-constrained proximal step: clip ``b / (rho1 + rho2)``.

    ``n`` is the real dimension ``2 n_tx L``; it defaults to ``len(t)``.
    """
    t = np.asarray(t, float)
    n = t.size if n is None else n
    if any(np.asarray(v).size != n for v in (t, u1, r, u2)):
        raise ValueError("admm_s_update: dimension mismatch")
    bound = 1.0 / math.sqrt(n)
    b = rho1 * (t + u1) + rho2 * (np.asarray(r) + u2)
    return np.clip(b / (rho1 + rho2), -bound, bound)


def _secular(log_mu, gaps, g2, rho1):
    d = gaps + 2.0 * math.exp(log_mu)
    live = g2 > 0  # components with no weight contribute nothing, even at a pole
    return float(np.sum(rho1 ** 2 * g2[live] / (d[live] * d[live]))) - 1.0


def admm_t_update(phi_evd: RealSymmetricEvd, s_tilde, u1, r, gamma_tilde, rho1: float,
                  tol: float = 1e-13, t_prev=None) -> Tuple[np.ndarray, float]:
    """Unit-sphere step for ``t``.

    Works in the eigenbasis of ``Phi~``: with ``g = P'(s~ - u1)`` the
    minimizer is ``t~_k = rho1 g_k / (2 eta gamma_k + rho1 + 2 nu)`` where
    ``nu`` solves ``sum t~_k^2 = 1`` to the right of the last pole. The
    root is bracketed in ``mu = nu - nu_pole`` on a log scale: at
    ``mu = rho1 ||g||`` the sum is at most 1/4, and shrinking ``mu``
    drives it past 1 unless ``g`` has no weight on the smallest
    eigenvalue (then that direction absorbs the missing norm).

    Returns
    -------
    t : ndarray
        Unit-norm update.
    nu : float
        Multiplier of the norm constraint (``nan`` when ``g = 0`` and the
        previous ``t`` is returned).
    """
    P = phi_evd.eigenvectors
    gamma = phi_evd.eigenvalues
    r = np.asarray(r, float)
    curv = float(r @ np.asarray(gamma_tilde) @ r)
    if curv <= ETA_TOL * max(1.0, float(np.trace(gamma_tilde))) * max(1.0, r @ r):
        raise DegenerateProblemError(f"r' Gamma r = {curv:g}: eta undefined")
    eta = 1.0 / curv
    g = P.T @ (np.asarray(s_tilde, float) - np.asarray(u1, float))
    gnorm = float(np.linalg.norm(g))
    if gnorm == 0.0:
        if t_prev is None:
            raise DegenerateProblemError("t-update with g = 0 and no previous t")
        return np.asarray(t_prev, float).copy(), float("nan")

    gamma_min = float(gamma[-1])
    gaps = 2.0 * eta * (gamma - gamma_min)          # >= 0, zero on the smallest eigenvalue
    g2 = g * g
    nu_pole = -eta * gamma_min - 0.5 * rho1

    hi = math.log(rho1 * gnorm)
    lo = hi
    found = False
    for _ in range(400):
        lo -= math.log(2.0) * 4
        if _secular(lo, gaps, g2, rho1) > 0:
            found = True
            break
        if lo < -700:
            break

    if found:
        log_mu = brentq(_secular, lo, hi, args=(gaps, g2, rho1), xtol=tol, rtol=1e-15,
                        maxiter=500)
        mu = math.exp(log_mu)
        t_rot = rho1 * g / (gaps + 2.0 * mu)
        nu = nu_pole + mu
    else:
        # g has (numerically) no component on the bottom eigenspace
        bottom = gaps <= 1e-12 * max(1.0, gaps.max())
        t_rot = np.zeros_like(g)
        t_rot[~bottom] = rho1 * g[~bottom] / gaps[~bottom]
        fill = max(0.0, 1.0 - float(t_rot @ t_rot))
        t_rot[np.flatnonzero(bottom)[0]] = math.sqrt(fill)
        nu = nu_pole
    t = P @ t_rot
    return t / np.linalg.norm(t), nu


def _r_objective(r1, r2, q1, q2, p):
    return p / (r1 * r1 + r2 * r2) + (r1 - q1) ** 2 + (r2 - q2) ** 2


def _pick_root(cands, q1, q2, p):
    """Objective-minimizing candidate; ties go to larger |r1| then positive r1."""
    vals = [(_r_objective(a, b, q1, q2, p), a, b) for a, b in cands if a * a + b * b > 0]
    if not vals:
        raise DegenerateProblemError("r-update: no admissible real root")
    best = min(v[0] for v in vals)
    scale = max(1.0, abs(best))
    tied = [v for v in vals if v[0] - best <= ROOT_TIE_TOL * scale]
    tied.sort(key=lambda v: (abs(v[1]), v[1] > 0, abs(v[2]), v[2] > 0), reverse=True)
    return tied[0][1], tied[0][2]


def solve_r_plane(q1: float, q2: float, p: float) -> Tuple[float, float]:
    """Minimize ``p / (r1^2 + r2^2) + (r1 - q1)^2 + (r2 - q2)^2``.

    Stationary points satisfy ``q2 r1 = q1 r2``. For ``q1 != 0, q2 != 0``
    the quartic is solved for the signed radius ``c`` along ``q`` and
    mapped back (``r = c q / |q|``), which is the same family of roots
    as the per-coordinate quartic but avoids dividing by a tiny ``q1``.
    """
    if p == 0:
        return q1, q2
    if p < 0:
        raise ValueError("r-update: p must be nonnegative")
    if q1 == 0 and q2 == 0:
        return p ** 0.25, 0.0
    if q2 == 0:
        roots = quartic_real_roots(1.0, -q1, 0.0, 0.0, -p)
        return _pick_root([(x, 0.0) for x in roots], q1, q2, p)
    if q1 == 0:
        roots = quartic_real_roots(1.0, -q2, 0.0, 0.0, -p)
        return _pick_root([(0.0, x) for x in roots], q1, q2, p)
    qn = math.hypot(q1, q2)
    roots = quartic_real_roots(1.0, -qn, 0.0, 0.0, -p)
    return _pick_root([(c * q1 / qn, c * q2 / qn) for c in roots], q1, q2, p)


def gamma_plane(gamma_evd: RealSymmetricEvd) -> float:
    """Common value of the two nonzero eigenvalues of ``Gamma~``; checks the rank."""
    lam = gamma_evd.eigenvalues
    if lam.size < 2 or not lam[0] > 0:
        raise DegenerateProblemError("Gamma~ has no positive eigenvalue")
    tol = GAMMA_RANK_TOL * lam[0]
    if abs(lam[0] - lam[1]) > tol or (lam.size > 2 and np.max(np.abs(lam[2:])) > tol):
        raise DegenerateProblemError(
            f"Gamma~ is not rank two with equal eigenvalues: {lam[:3]}")
    return 0.5 * float(lam[0] + lam[1])


def admm_r_update(gamma_evd: RealSymmetricEvd, s_tilde, u2, t, phi_tilde, rho2: float) -> np.ndarray:
    """Unconstrained step for ``r`` in the eigenbasis of ``Gamma~``.

    Null-space coordinates copy ``q = U'(s~ - u2)``; the two leading ones
    come from :func:`solve_r_plane` with ``p = 2 t' Phi~ t / (lambda rho2)``.
    """
    lam = gamma_plane(gamma_evd)
    U = gamma_evd.eigenvectors
    t = np.asarray(t, float)
    q = U.T @ (np.asarray(s_tilde, float) - np.asarray(u2, float))
    p = 2.0 * float(t @ np.asarray(phi_tilde) @ t) / (lam * rho2)
    r_rot = q.copy()
    r_rot[0], r_rot[1] = solve_r_plane(float(q[0]), float(q[1]), p)
    return U @ r_rot


def admm_dual_update(state: AdmmState) -> AdmmState:
    """Scaled dual ascent ``u1 += t - s~``, ``u2 += r - s~``."""
    return replace(state, u1=state.u1 + (state.t - state.s_tilde),
                   u2=state.u2 + (state.r - state.s_tilde))


# --------------------------------------------------------------------------
# Solvers
# --------------------------------------------------------------------------

def _real_matrices(w, scene: RadarScene):
    Phi = phi_matrix(w, scene)
    v = apply_channel_adjoint(scene.geometry, math.sin(scene.target.angle), _as_vector(w))
    Gamma = np.outer(v, v.conj())
    return realify(Phi), realify(Gamma)


def project_to_alphabet(s_tilde, n_tx: int) -> Waveform:
    """Entrywise sign map of the real lift onto the one-bit alphabet."""
    return Waveform.from_signs(complexify_vec(np.where(np.asarray(s_tilde) >= 0, 1.0, -1.0)
                                              .astype(float)), n_tx)


def admm_solve(w, scene: RadarScene, init: AdmmState, config: GreetConfig,
               matrices=None) -> Tuple[Waveform, Diagnostics]:
    """Run the ADMM waveform solve for a fixed filter.

    ``matrices`` may carry precomputed ``(Phi~, Gamma~, evd(Phi~), evd(Gamma~))``.
    The relaxed iterate is projected onto the alphabet on return; the last
    ADMM state is kept in ``diagnostics.final_state``.
    """
    if matrices is None:
        phi_t, gam_t = _real_matrices(w, scene)
        matrices = (phi_t, gam_t, real_symmetric_evd(phi_t), real_symmetric_evd(gam_t))
    phi_t, gam_t, phi_evd, gam_evd = matrices
    n = phi_t.shape[0]
    if init.s_tilde.size != n:
        raise ValueError(f"state dimension {init.s_tilde.size} != {n}")

    diag = Diagnostics()
    state = init
    for _ in range(int(config.max_admm_iters)):
        s_new = admm_s_update(state.t, state.u1, state.r, state.u2, config.rho1, config.rho2, n)
        t_new, _nu = admm_t_update(phi_evd, s_new, state.u1, state.r, gam_t, config.rho1,
                                   config.bisection_tol, t_prev=state.t)
        r_new = admm_r_update(gam_evd, s_new, state.u2, t_new, phi_t, config.rho2)
        d = float(np.linalg.norm(s_new - state.s_tilde))
        state = admm_dual_update(AdmmState(s_new, t_new, r_new, state.u1, state.u2))

        c1 = float(np.linalg.norm(t_new - s_new))
        c2 = float(np.linalg.norm(r_new - s_new))
        den = float(s_new @ gam_t @ s_new)
        diag.objective_trace.append(float(s_new @ phi_t @ s_new) / den if den > 0 else math.inf)
        diag.residual_d.append(d)
        diag.residual_c1.append(c1)
        diag.residual_c2.append(c2)
        mod = np.abs(s_new)
        diag.modulus_min.append(float(mod.min()))
        diag.modulus_max.append(float(mod.max()))
        eps = config.early_exit_tol
        if eps is not None and d < eps and c1 < eps and c2 < eps:
            break

    diag.final_state = state
    return project_to_alphabet(state.s_tilde, scene.geometry.n_tx), diag


def greet(scene: RadarScene, config: GreetConfig = GreetConfig(),
          initial: Optional[Waveform] = None) -> Tuple[Filter, Waveform, Diagnostics]:
    """Alternate MVDR filter and ADMM waveform updates.

    Starts from a random one-bit waveform with random ``t``, ``r`` unless
    ``initial`` is given, in which case all three start at that waveform.
    ``t`` and ``r`` carry over between outer iterations; the scaled duals
    restart at zero each time.
    """
    rng = np.random.default_rng(config.seed)
    n_tx, L = scene.geometry.n_tx, scene.code_length
    n = 2 * n_tx * L
    c = alphabet_scale(n_tx, L)
    if initial is None:
        s = Waveform.random_one_bit(n_tx, L, rng)
        t = rng.choice([-c, c], size=n)
        r = rng.choice([-c, c], size=n)
    else:
        if not initial.one_bit or initial.s.size != n // 2 or initial.n_tx != n_tx:
            raise ValueError("initial waveform must be one-bit and match the scene")
        s = initial
        t = realify_vec(s.s)
        r = t.copy()

    w = mvdr_filter(s, scene)
    diag = Diagnostics(qsinr_trace=[qsinr(w, s, scene)])
    for outer in range(1, int(config.max_altopt_iters) + 1):
        init = AdmmState.start(realify_vec(s.s), t, r)
        s, inner = admm_solve(w, scene, init, config)
        diag.extend(inner, outer)
        t, r = inner.final_state.t, inner.final_state.r
        w = mvdr_filter(s, scene)
        diag.qsinr_trace.append(qsinr(w, s, scene))
    return w, s, diag
