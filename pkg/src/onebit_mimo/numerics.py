"""
Scalar special functions and small dense solvers.

Everything here is a pure function on its inputs. Default tolerances are
module-level constants so callers can override them per call.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg as la
from scipy import special

SYMMETRY_TOL = 1e-10
QUARTIC_RESIDUAL_TOL = 1e-8
QUARTIC_IMAG_TOL = 1e-5
MARCUM_REL_TOL = 1e-16
MARCUM_MAX_TERMS = 20000


def erf(x):
    """Error function, elementwise for array input."""
    if np.isscalar(x):
        return math.erf(x)
    return special.erf(np.asarray(x, dtype=float))


def sinc(x):
    """Normalized sinc, ``sin(pi x) / (pi x)`` with ``sinc(0) = 1``."""
    return np.sinc(x)


def marcum_q1(a, b):
    """First-order Marcum Q function ``Q_1(a, b)``.

    Evaluated with the Neumann series in scaled modified Bessel functions::

        b > a :  Q = exp(-(a-b)^2/2) * sum_{k>=0} (a/b)^k Ie_k(ab)
        b <= a:  Q = 1 - exp(-(a-b)^2/2) * sum_{k>=1} (b/a)^k Ie_k(ab)

    where ``Ie_k(x) = exp(-x) I_k(x)``. Both sums have positive, eventually
    decreasing terms, so truncation at a relative threshold is safe.

    Parameters
    ----------
    a, b : float
        Non-centrality and threshold, both nonnegative.

    Returns
    -------
    float
        Tail probability in [0, 1].
    """
    a = float(a)
    b = float(b)
    if not (np.isfinite(a) and np.isfinite(b)):
        raise ValueError("marcum_q1 requires finite arguments")
    if a < 0 or b < 0:
        raise ValueError(f"marcum_q1 domain error: a={a}, b={b} must be >= 0")
    if b == 0.0:
        return 1.0
    if a == 0.0:
        return math.exp(-0.5 * b * b)

    x = a * b
    prefactor = math.exp(-0.5 * (a - b) ** 2)
    if b > a:
        ratio, k0 = a / b, 0
    else:
        ratio, k0 = b / a, 1

    total = 0.0
    chunk = 64
    k = k0
    while k < MARCUM_MAX_TERMS:
        ks = np.arange(k, k + chunk)
        terms = np.power(ratio, ks) * special.ive(ks, x)
        total += float(terms.sum())
        # terms are monotone decreasing once k exceeds sqrt(x); stop when the
        # tail of the chunk no longer moves the sum
        if ks[-1] > math.sqrt(x) and terms[-1] <= MARCUM_REL_TOL * total:
            break
        k += chunk

    if b > a:
        q = prefactor * total
    else:
        q = 1.0 - prefactor * total
    return min(1.0, max(0.0, q))


def quartic_real_roots(c4, c3, c2, c1, c0, tol=QUARTIC_RESIDUAL_TOL):
    """Real roots of ``c4 x^4 + c3 x^3 + c2 x^2 + c1 x + c0``.

    Candidates come from companion-matrix eigenvalues; nearly-real ones are
    projected to the real axis, polished with a few Newton steps and kept if
    the polynomial residual is within ``tol * max(1, max|c|)``. Multiple
    roots may appear once per multiplicity.
    """
    if c4 == 0:
        raise ValueError("quartic_real_roots: leading coefficient c4 is zero")
    coeffs = np.array([c4, c3, c2, c1, c0], dtype=float)
    scale = max(1.0, float(np.max(np.abs(coeffs))))
    monic = coeffs / c4
    cand = np.roots(monic)
    deriv = np.polyder(monic)

    roots = []
    for z in cand:
        mag = max(1.0, abs(z))
        if abs(z.imag) > QUARTIC_IMAG_TOL * mag:
            continue
        x = float(z.real)
        for _ in range(3):
            dp = np.polyval(deriv, x)
            if dp == 0:
                break
            step = np.polyval(monic, x) / dp
            x_new = x - step
            if abs(np.polyval(monic, x_new)) >= abs(np.polyval(monic, x)):
                break
            x = x_new
        if abs(np.polyval(coeffs, x)) <= tol * scale:
            roots.append(x)
    return sorted(roots)


def bisection_root(f: Callable[[float], float], lo: float, hi: float,
                   tol: float = 1e-12, max_iter: int = 500) -> float:
    """Root of a continuous monotone ``f`` on ``[lo, hi]`` by bisection.

    Stops when ``|f(x)| <= tol`` or the bracket is narrower than ``tol``.
    """
    flo, fhi = f(lo), f(hi)
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    if flo * fhi > 0:
        raise ValueError(
            f"bisection_root: f(lo)={flo:g} and f(hi)={fhi:g} do not bracket a root")
    mid = 0.5 * (lo + hi)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fmid = f(mid)
        if abs(fmid) <= tol or (hi - lo) <= tol:
            return mid
        if (fmid > 0) == (flo > 0):
            lo, flo = mid, fmid
        else:
            hi = mid
    return mid


def hermitian_solve(A, b, check_tol=SYMMETRY_TOL):
    """Solve ``A x = b`` for Hermitian positive-definite ``A`` via Cholesky.

    Raises
    ------
    numpy.linalg.LinAlgError
        If ``A`` is not positive definite.
    ValueError
        If ``A`` is not Hermitian within ``check_tol`` elementwise.
    """
    A = np.asarray(A)
    b = np.asarray(b)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"hermitian_solve: A must be square, got {A.shape}")
    if A.shape[0] != b.shape[0]:
        raise ValueError(f"hermitian_solve: shape mismatch {A.shape} vs {b.shape}")
    if np.max(np.abs(A - A.conj().T), initial=0.0) > check_tol:
        raise ValueError("hermitian_solve: matrix is not Hermitian")
    try:
        factor = la.cho_factor(A, lower=True, check_finite=True)
    except la.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            "hermitian_solve: matrix is not positive definite") from exc
    return la.cho_solve(factor, b)


@dataclass(frozen=True)
class RealSymmetricEvd:
    """Eigen-decomposition ``M = V diag(eigenvalues) V^T``, descending order."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.eigenvectors * self.eigenvalues) @ self.eigenvectors.T


def real_symmetric_evd(M, check_tol=SYMMETRY_TOL) -> RealSymmetricEvd:
    """EVD of a real symmetric matrix with eigenvalues sorted descending."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"real_symmetric_evd: M must be square, got {M.shape}")
    if np.max(np.abs(M - M.T), initial=0.0) > check_tol:
        raise ValueError("real_symmetric_evd: matrix is not symmetric")
    vals, vecs = np.linalg.eigh(0.5 * (M + M.T))
    order = np.argsort(vals)[::-1]
    return RealSymmetricEvd(vals[order], vecs[:, order])
