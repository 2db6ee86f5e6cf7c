"""Magnetic harmonic problems on large disks and the limit profile.

For a unit pole p = (cos a, sin a), w_R solves ``(i grad + A_p)^2 w = 0`` in
the disk D_R with boundary data ``exp(i(theta_p - theta_0^p)/2) exp(i theta_0/2)
psi_k``. As R grows, w_R tends to the limit profile Psi_p. The Fourier-type
coefficient

    upsilon_R(r) = int_a^{a+2pi} exp(-i theta_p/2) w_R exp(i theta_0^p/2) conj(psi_2^k(t)) dt

on |x| = r obeys ``upsilon_R(r) = A r^{k/2} + B r^{-k/2}`` for r >= 1, and
xi_p(1) is its R -> infinity limit at r = 1.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .discrete_operator import DomainSpec, assemble_ab_laplacian, build_grid, dirichlet_lift
from .eigensolve import richardson_extrapolate, solve_pd
from .geom_gauge import AngularMode, _check_odd, angular_mode_eval, psi_k_eval, theta0, theta_pole

SQRT_PI = np.sqrt(np.pi)

# node generation is quadratic in the order; cache it
_leggauss = lru_cache(maxsize=8)(np.polynomial.legendre.leggauss)


@dataclass(frozen=True)
class ProfileProblem:
    k: int
    alpha: float
    R: float
    h: float

    def __post_init__(self):
        _check_odd(self.k)
        if not self.R > 2:
            raise ValueError("R must exceed 2")

    @property
    def pole(self):
        return (float(np.cos(self.alpha)), float(np.sin(self.alpha)))


def boundary_data(k, alpha, x1, x2):
    """Dirichlet data ``exp(i(theta_p - theta_0^p)/2) exp(i theta_0/2) psi_k`` in the A_p gauge."""
    p = (np.cos(alpha), np.sin(alpha))
    X = np.stack(np.broadcast_arrays(np.asarray(x1, float), np.asarray(x2, float)), axis=-1)
    tp = theta_pole(X, p)
    t0p = theta_pole(X, p, centered=True)
    t0 = theta0(X)
    return np.exp(0.5j * (tp - t0p)) * np.exp(0.5j * t0) * psi_k_eval(k, X)


@dataclass
class ProfileSolution:
    problem: ProfileProblem
    grid: object = field(repr=False)
    w: np.ndarray = field(repr=False)
    field: np.ndarray = field(repr=False)
    upsilon1: complex = None

    def interpolator(self):
        g = self.grid
        return RegularGridInterpolator((g.x, g.y), self.field, method="linear")

    def closed_form(self):
        """Coefficients (A, B) of ``A r^{k/2} + B r^{-k/2}`` fixed by upsilon(1) and upsilon(R) = sqrt(pi) R^{k/2}."""
        Rk = self.problem.R ** self.problem.k
        u1 = self.upsilon1
        return (Rk * SQRT_PI - u1) / (Rk - 1), -Rk * (SQRT_PI - u1) / (Rk - 1)

    def xi_estimate(self):
        """Truncation-corrected estimate of xi_p(1).

        Near the pole w_R is close to (A/sqrt(pi)) Psi_p, so the ratio B/A
        carries the profile's own coefficient: ``xi = sqrt(pi) (1 + B/A)``.
        """
        A, B = self.closed_form()
        return SQRT_PI * (1 + B / A)

    def psi_scale(self):
        """Factor turning w_R into the approximation of Psi_p near the pole."""
        A, _ = self.closed_form()
        return SQRT_PI / A


def solve_wR(problem, gauge="peierls", cut=np.pi):
    """Solve the discrete magnetic Laplace problem on D_R.

    The lattice is anchored so that the pole is a plaquette centre; the
    boundary is fitted. Nodes outside the disk are filled with the boundary
    data so that bilinear interpolation is accurate up to |x| = R.
    """
    k, alpha, R, h = problem.k, problem.alpha, problem.R, problem.h
    p = problem.pole
    grid = build_grid(DomainSpec.disk((0.0, 0.0), R), h, anchor=p)
    op = assemble_ab_laplacian(grid, p, gauge=gauge, cut=cut)
    load = dirichlet_lift(grid, op, lambda x, y: boundary_data(k, alpha, x, y))
    w = op.to_peierls(solve_pd(op, load))
    X, Y = grid.mesh()
    out = ~grid.inside
    F = grid.embed(w.astype(complex))
    F[out] = boundary_data(k, alpha, X[out], Y[out])
    sol = ProfileSolution(problem, grid, w, F)
    sol.upsilon1 = compute_upsilon(sol, [1.0])[0]
    return sol


def compute_upsilon(sol, r_grid, nt=1024):
    """upsilon_R(r) by Gauss-Legendre in t on [alpha, alpha + 2 pi].

    Starting at t = alpha places the jumps of both angle functions at the
    endpoints of the integration interval.
    """
    k, alpha, R = sol.problem.k, sol.problem.alpha, sol.problem.R
    r_grid = np.atleast_1d(np.asarray(r_grid, dtype=float))
    if np.any(r_grid < 1 - 1e-12) or np.any(r_grid > R + 1e-12):
        raise ValueError("r outside [1, R]")
    p = sol.problem.pole
    xg, wg = _leggauss(nt)
    t = alpha + np.pi * (xg + 1)
    wt = np.pi * wg
    conj_mode = np.conj(angular_mode_eval(AngularMode(k, "sin"), t))
    interp = sol.interpolator()
    out = []
    for r in r_grid:
        x, y = r * np.cos(t), r * np.sin(t)
        vals = interp(np.c_[x, y])
        X = np.c_[x, y]
        tp = theta_pole(X, p)
        t0p = theta_pole(X, p, centered=True)
        out.append(np.sum(wt * np.exp(-0.5j * tp) * vals * np.exp(0.5j * t0p) * conj_mode))
    return np.array(out)


def data_projection(k, alpha, R, nt=1024):
    """Projection of the boundary data onto psi_2^k over |x| = R, by quadrature alone."""
    xg, wg = _leggauss(nt)
    t = alpha + np.pi * (xg + 1)
    p = (np.cos(alpha), np.sin(alpha))
    x, y = R * np.cos(t), R * np.sin(t)
    X = np.c_[x, y]
    g = boundary_data(k, alpha, x, y)
    tp = theta_pole(X, p)
    t0p = theta_pole(X, p, centered=True)
    mode = angular_mode_eval(AngularMode(k, "sin"), t)
    return np.sum(np.pi * wg * np.exp(-0.5j * tp) * g * np.exp(0.5j * t0p) * np.conj(mode))


def kappa_tilde(sol):
    """``i k sqrt(pi) R^k (sqrt(pi) - upsilon_R(1)) / (R^k - 1)``."""
    k, R = sol.problem.k, sol.problem.R
    return 1j * k * SQRT_PI * R ** k * (SQRT_PI - sol.upsilon1) / (R ** k - 1)


@dataclass
class FAlpha:
    alpha: float
    k: int
    value: float
    xi: complex
    sqrt_pi: float = SQRT_PI
    error: float = 0.0
    by_R: dict = field(default_factory=dict, repr=False)
    flagged: bool = False


def _xi_task(args):
    k, alpha, R, h = args
    sol = solve_wR(ProfileProblem(k, alpha, R, h))
    return sol.xi_estimate(), sol.upsilon1


def xi_and_f(k, alpha, R_seq=(4.0, 8.0), h_seq=(1 / 8, 1 / 16, 1 / 32), h_order=1,
             R_order=None, jobs=1):
    """xi_p(1) and ``f(alpha) = Re xi_p(1) - sqrt(pi)``.

    Each solve is first corrected for the truncation of the psi_2^k mode
    through the closed two-term form. The corrected values are extrapolated
    in h at every R, then in 1/R with order k (``R_order``), which removes the
    remaining O(R^{-k}) coupling to the other angular modes.
    """
    R_seq = sorted(R_seq)
    h_seq = sorted(h_seq, reverse=True)
    tasks = [(k, alpha, R, h) for R in R_seq for h in h_seq]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            vals = list(ex.map(_xi_task, tasks))
    else:
        vals = [_xi_task(t) for t in tasks]
    by_R = {}
    for i, R in enumerate(R_seq):
        chunk = vals[i * len(h_seq):(i + 1) * len(h_seq)]
        by_R[R] = richardson_extrapolate([(h, v[0]) for h, v in zip(h_seq, chunk)],
                                         model_order=h_order)
    last = by_R[R_seq[-1]]
    if len(R_seq) > 1:
        ext = richardson_extrapolate([(1.0 / R, by_R[R].limit) for R in R_seq],
                                     model_order=k if R_order is None else R_order)
        xi = complex(ext.limit)
        err = float(np.hypot(last.error, ext.error))
    else:
        xi, err = complex(last.limit), last.error
    flagged = last.flagged or abs(xi.imag) > 1e-3 * (1 + abs(xi))
    return FAlpha(float(alpha), k, xi.real - SQRT_PI, xi, SQRT_PI, err, by_R, flagged)


def f_table(k, alphas, jobs=1, **kw):
    """f over a list of angles, in input order."""
    return [xi_and_f(k, a, jobs=jobs, **kw) for a in alphas]


def annulus_samples(r_in=1.5, r_out=3.0, nr=24, nt=192):
    """Polar sample points and area weights for the blow-up annulus."""
    xr, wr = _leggauss(nr)
    r = 0.5 * (r_out - r_in) * (xr + 1) + r_in
    wr = 0.5 * (r_out - r_in) * wr
    t = 2 * np.pi * np.arange(nt) / nt
    R, T = np.meshgrid(r, t, indexing="ij")
    W = (wr * r)[:, None] * np.full(nt, 2 * np.pi / nt)
    return np.c_[(R * np.cos(T)).ravel(), (R * np.sin(T)).ravel()], W.ravel()


def blowup_compare(eig_grid, eig_field, a, b, expansion, profile, r_in=1.5, r_out=3.0):
    """Relative L2 distance on the annulus r_in <= |x| <= r_out between
    ``phi_a(b + |a-b| Rot(alpha0) x) / |a-b|^{k/2}`` and ``(|beta|/sqrt(pi)) Psi_p(x)``.

    Psi_p is the truncation-corrected profile for p = Rot(-alpha0)(a-b)/|a-b|;
    a single global phase is optimised away.
    """
    k = expansion.k
    d = np.array(a, float) - np.array(b, float)
    rho = float(np.hypot(*d))
    alpha_rel = float(np.arctan2(d[1], d[0])) - expansion.alpha0
    if abs(np.mod(alpha_rel - profile.problem.alpha + np.pi, 2 * np.pi) - np.pi) > 1e-9:
        raise ValueError("profile pole direction does not match the eigenvalue pole")
    pts, wts = annulus_samples(r_in, r_out)
    c, s = np.cos(expansion.alpha0), np.sin(expansion.alpha0)
    rot = pts @ np.array([[c, s], [-s, c]])
    Y = np.asarray(b, float) + rho * rot
    if not np.all(eig_grid.spec.contains(Y[:, 0], Y[:, 1], tol=1.5 * eig_grid.h)):
        raise ValueError("annulus leaves the domain")
    F = RegularGridInterpolator((eig_grid.x, eig_grid.y), eig_grid.embed(eig_field))(Y) / rho ** (0.5 * k)
    G = np.sqrt(expansion.beta_sq / np.pi) * profile.psi_scale() * profile.interpolator()(pts)
    ov = np.sum(wts * F * np.conj(G))
    ph = ov / abs(ov) if abs(ov) > 0 else 1.0
    num = np.sqrt(np.sum(wts * np.abs(F - ph * G) ** 2))
    return float(num / np.sqrt(np.sum(wts * np.abs(G) ** 2)))


def blowup_sequence(expansion, domain, b, h, steps=(32, 16, 8, 4), R=8.0, n0=1, seed=0):
    """Blow-up discrepancies for poles ``a = b + m h e`` along the nodal direction e.

    For each m the eigenfunction with pole a is computed on the lattice of
    spacing h anchored at b, and the profile on the matched lattice of
    spacing ``h/|a-b|``, so both discretisations agree node for node after
    rescaling. Returns rows ``(m, |a-b|, discrepancy)``.
    """
    from .eigensolve import smallest_eigenpairs

    grid = build_grid(domain, h, anchor=b)
    e = np.array([np.cos(expansion.alpha0), np.sin(expansion.alpha0)])
    rows = []
    for m in steps:
        disp = np.rint(m * e) * h
        rho = float(np.hypot(*disp))
        a = (b[0] + disp[0], b[1] + disp[1])
        op = assemble_ab_laplacian(grid, a, gauge="cut")
        phi = smallest_eigenpairs(op, n0, seed=seed)[n0 - 1].vector
        alpha_rel = float(np.arctan2(disp[1], disp[0])) - expansion.alpha0
        prof = solve_wR(ProfileProblem(expansion.k, alpha_rel, R, h / rho))
        rows.append((int(m), rho, blowup_compare(grid, phi, a, b, expansion, prof)))
    return rows
