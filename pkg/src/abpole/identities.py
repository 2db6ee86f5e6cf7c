"""Algebraic facts about odd-degree homogeneous polynomials used by the fit."""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla


@dataclass(frozen=True)
class HomogeneousPoly:
    """``sum_j coeffs[j] x1^{degree-j} x2^j``."""

    degree: int
    coeffs: tuple

    def __post_init__(self):
        if len(self.coeffs) != self.degree + 1:
            raise ValueError("need degree + 1 coefficients")

    def __call__(self, x1, x2):
        x1, x2 = np.asarray(x1, float), np.asarray(x2, float)
        return sum(c * x1 ** (self.degree - j) * x2 ** j for j, c in enumerate(self.coeffs))


def sin_product(k, alpha):
    """``prod_{j=1}^k sin(pi (2j-1)/(2k) - alpha)``, which equals ``2^{1-k} cos(k alpha)``."""
    alpha = np.asarray(alpha, dtype=float)
    j = np.arange(1, k + 1).reshape((-1,) + (1,) * alpha.ndim)
    return np.prod(np.sin(np.pi * (2 * j - 1) / (2 * k) - alpha), axis=0)


def direction_rank(h, k, theta_bar, tol=1e-10):
    """Rank of ``M[j, i] = cos^{h-i}(t_j) sin^i(t_j)``, ``t_j = theta_bar + 2 pi j/k``.

    Column-pivoted QR; a pivot counts when it exceeds ``tol`` times the first.
    """
    t = theta_bar + 2 * np.pi * np.arange(k) / k
    i = np.arange(h + 1)
    M = np.cos(t)[:, None] ** (h - i) * np.sin(t)[:, None] ** i
    R = sla.qr(M, mode="r", pivoting=True)[0]
    d = np.abs(np.diag(R))
    if d.size == 0 or d[0] == 0:
        return 0
    return int(np.sum(d > tol * d[0]))


@dataclass
class RootResult:
    roots: np.ndarray
    consistent: bool


def _companion_roots(p):
    """Roots of ``p[0] t^n + ... + p[n]`` from the companion matrix, Newton-polished."""
    p = np.asarray(p, dtype=float)
    n = len(p) - 1
    if n == 0:
        return np.zeros(0, complex)
    C = np.zeros((n, n))
    C[0] = -p[1:] / p[0]
    C[1:, :-1] = np.eye(n - 1)
    z = np.linalg.eigvals(C).astype(complex)
    dp = np.polyder(p)
    for _ in range(3):
        step = np.polyval(p, z) / np.where(np.polyval(dp, z) == 0, 1, np.polyval(dp, z))
        z = z - step
    return z


def factor_roots(poly, imag_tol=1e-8):
    """Zeros of ``g(a) = P(cos a, sin a)`` in (0, pi).

    With ``g(a) = sin^k(a) Q(cot a)`` and ``Q(t) = sum_j c_j t^{k-j}``, the
    real roots t of Q map to ``a = arccot(t)``. ``consistent`` is False when
    fewer than k real roots exist.
    """
    c = np.asarray(poly.coeffs, dtype=float)
    if c[0] == 0:
        raise ValueError("leading coefficient c0 must be nonzero")
    z = _companion_roots(c)
    real = z[np.abs(z.imag) <= imag_tol * (1 + np.abs(z))].real
    a = np.sort(0.5 * np.pi - np.arctan(real))
    return RootResult(a, len(a) == poly.degree)
