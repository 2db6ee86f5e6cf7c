"""Local expansion of an eigenfunction at its pole.

Near the pole ``e^{-it/2} u(r cos t, r sin t) r^{-k/2}`` tends to
``(beta1 cos(kt/2) + beta2 sin(kt/2)) / sqrt(pi)``. The coefficients are the
projections onto the orthonormal modes psi_1^k and psi_2^k.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.special import gamma, jv

from .geom_gauge import AngularMode, angular_mode_eval
from .eigensolve import richardson_extrapolate


class InconclusiveOrderError(RuntimeError):
    pass


@dataclass
class LocalExpansion:
    k: int
    beta1: complex
    beta2: complex
    alpha0: float
    reality_defect: float = 0.0
    fit_residual: float = 0.0
    samples: dict = field(default_factory=dict, repr=False)

    @property
    def beta_sq(self):
        return abs(self.beta1) ** 2 + abs(self.beta2) ** 2


def alpha0_from_betas(beta1, beta2, k, tol=1e-12):
    """Nodal direction ``(2/k) arccot(-beta2/beta1)`` reduced to [0, 2*pi/k)."""
    scale = max(abs(beta1), abs(beta2))
    if abs(beta1) <= tol * scale:
        return 0.0
    ratio = (beta2 / beta1).real
    a = (2.0 / k) * (0.5 * np.pi - np.arctan(-ratio))
    return float(np.mod(a, 2 * np.pi / k))


def _interpolator(grid, u):
    F = grid.embed(u) if np.ndim(u) == 1 else u
    return RegularGridInterpolator((grid.x, grid.y), F, method="linear")


def circle_fourier(grid, u, pole, r, j, nt=None, interp=None):
    """Projections of ``u`` on the circle of radius r around ``pole`` onto psi_1^j, psi_2^j.

    Bilinear interpolation of the lattice field and the trapezoid rule in t
    with ``nt >= max(64, 8j)`` samples.
    """
    nt = max(256, 8 * j) if nt is None else max(nt, 64, 8 * j)
    if r < 4 * grid.h * (1 - 1e-12):
        raise ValueError("radius below 4h")
    t = 2 * np.pi * np.arange(nt) / nt
    x = pole[0] + r * np.cos(t)
    y = pole[1] + r * np.sin(t)
    if not np.all(grid.spec.contains(x, y, tol=1.5 * grid.h)):
        raise ValueError("circle leaves the domain")
    f = (interp or _interpolator(grid, u))(np.c_[x, y])
    dt = 2 * np.pi / nt
    c1 = np.sum(f * np.conj(angular_mode_eval(AngularMode(j, "cos"), t))) * dt
    c2 = np.sum(f * np.conj(angular_mode_eval(AngularMode(j, "sin"), t))) * dt
    return complex(c1), complex(c2)


def _bessel_scale(j, r, lam):
    # radial factor of the Dirichlet eigenfunction: J_{j/2}(sqrt(lam) r), normalised to r^{j/2}
    z = np.sqrt(lam) * r
    return jv(0.5 * j, z) * gamma(0.5 * j + 1) * (2.0 / np.sqrt(lam)) ** (0.5 * j)


def extract_expansion(grid, u, pole, radii, lam=None, kmax=9, presence=1e-2, r_order=2):
    """Vanishing order, coefficients and nodal angle of ``u`` at ``pole``.

    k is the smallest odd j <= kmax whose mode carries at least ``presence``
    of the circle norm and whose magnitudes follow ``c r^{j/2}`` within 10%.
    With ``lam`` the radial profile is divided out exactly with the Bessel
    factor ``J_{k/2}(sqrt(lam) r)`` and the radii are averaged; otherwise the
    scaled coefficients are extrapolated to r = 0 with order ``r_order``.
    The pair is finally projected onto a common real ray, as required for a
    real eigenfunction up to a global phase.
    """
    radii = np.sort(np.asarray(radii, dtype=float))[::-1]
    if len(radii) < 3:
        raise ValueError("need at least three radii")
    interp = _interpolator(grid, u)
    nt = 512
    t = 2 * np.pi * np.arange(nt) / nt
    norms = []
    for r in radii:
        f = interp(np.c_[pole[0] + r * np.cos(t), pole[1] + r * np.sin(t)])
        norms.append(np.sqrt(np.sum(np.abs(f) ** 2) * 2 * np.pi / nt))
    norms = np.array(norms)

    k, coeffs, resid = None, None, None
    for j in range(1, kmax + 1, 2):
        c = np.array([circle_fourier(grid, u, pole, r, j, interp=interp) for r in radii])
        m = np.linalg.norm(c, axis=1)
        if np.min(m / norms) < presence:
            continue
        basis = radii ** (0.5 * j)
        fit = m @ basis / (basis @ basis)
        rel = np.linalg.norm(m - fit * basis) / np.linalg.norm(m)
        if rel < 0.1:
            k, coeffs, resid = j, c, rel
            break
    if k is None:
        raise InconclusiveOrderError("no mode j <= %d follows r^{j/2}" % kmax)

    if lam is not None:
        scaled = coeffs / _bessel_scale(k, radii, lam)[:, None]
        beta = scaled.mean(axis=0)
    else:
        scaled = coeffs / (radii ** (0.5 * k))[:, None]
        beta = np.array([
            richardson_extrapolate(list(zip(radii, scaled[:, m])), model_order=r_order).limit
            for m in (0, 1)])
    phase = 0.5 * np.angle(beta[0] ** 2 + beta[1] ** 2)
    rotated = np.exp(-1j * phase) * beta
    defect = float(np.linalg.norm(rotated.imag) / np.linalg.norm(beta))
    beta = np.exp(1j * phase) * rotated.real
    return LocalExpansion(k, complex(beta[0]), complex(beta[1]),
                          alpha0_from_betas(beta[0], beta[1], k), defect, float(resid),
                          {"radii": radii, "scaled": scaled})
