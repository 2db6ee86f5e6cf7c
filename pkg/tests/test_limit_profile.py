import numpy as np
import pytest

from abpole.discrete_operator import DomainSpec, assemble_ab_laplacian, build_grid
from abpole.eigensolve import smallest_eigenpairs
from abpole.geom_gauge import psi_k_eval
from abpole.limit_profile import (
    ProfileProblem,
    annulus_samples,
    blowup_compare,
    blowup_sequence,
    boundary_data,
    compute_upsilon,
    data_projection,
    kappa_tilde,
    solve_wR,
    xi_and_f,
)
from abpole.local_expansion import extract_expansion

SQ = np.sqrt(np.pi)


@pytest.fixture(scope="module")
def sol():
    return solve_wR(ProfileProblem(1, 0.0, 8.0, 1 / 16))


@pytest.mark.parametrize("k,alpha,R", [(1, 0.0, 8.0), (1, 2.0, 5.0), (3, 0.4, 8.0), (5, 4.0, 6.0)])
def test_data_projection(k, alpha, R):
    assert data_projection(k, alpha, R) == pytest.approx(SQ * R ** (0.5 * k), rel=1e-6)


def test_boundary_data_modulus():
    t = np.linspace(0, 2 * np.pi, 50)
    x, y = 8 * np.cos(t), 8 * np.sin(t)
    np.testing.assert_allclose(np.abs(boundary_data(3, 0.7, x, y)), np.abs(psi_k_eval(3, np.c_[x, y])))


def test_problem_validation():
    with pytest.raises(ValueError):
        ProfileProblem(2, 0.0, 8.0, 0.1)
    with pytest.raises(ValueError):
        ProfileProblem(1, 0.0, 1.5, 0.1)


def test_upsilon_at_R(sol):
    u = compute_upsilon(sol, [8.0])[0]
    assert u == pytest.approx(SQ * 8 ** 0.5, rel=1e-2)
    with pytest.raises(ValueError):
        compute_upsilon(sol, [0.5])


def test_gauge_cut_independence():
    p = ProfileProblem(1, 0.9, 4.0, 1 / 8)
    a = solve_wR(p)
    for cut in (np.pi, 0.3, 2.0):
        b = solve_wR(p, gauge="cut", cut=cut)
        np.testing.assert_allclose(np.abs(b.w), np.abs(a.w), atol=1e-8)
        assert b.upsilon1 == pytest.approx(a.upsilon1, abs=1e-8)


def test_positive_f_at_zero(sol):
    assert sol.upsilon1.real > SQ


def test_two_term_law(sol):
    r = np.linspace(1, 8, 15)
    u = compute_upsilon(sol, r)
    M = np.c_[r ** 0.5, r ** -0.5]
    coef, *_ = np.linalg.lstsq(M, u, rcond=None)
    fit = M @ coef
    assert np.linalg.norm(u - fit) / np.linalg.norm(u) < 5e-3
    A, B = sol.closed_form()
    closed = A * r ** 0.5 + B * r ** -0.5
    assert np.linalg.norm(u - closed) / np.linalg.norm(u) < 1e-2
    np.testing.assert_allclose([A, B], coef, rtol=1e-2, atol=1e-2 * abs(A))


def test_kappa_tilde(sol):
    kap = kappa_tilde(sol)
    # kappa/(i k sqrt(pi)) is real up to the imaginary part of upsilon(1)
    assert abs((kap / (1j * SQ)).imag) < 1e-3 * abs(kap)
    fake = type(sol)(sol.problem, sol.grid, sol.w, sol.field, complex(SQ))
    assert kappa_tilde(fake) == 0


def test_kappa_tilde_limit():
    k, alpha = 1, 0.0
    vals = []
    for R in (4.0, 8.0):
        s = solve_wR(ProfileProblem(k, alpha, R, 1 / 16))
        vals.append(kappa_tilde(s))
    fa = xi_and_f(k, alpha, R_seq=(4.0, 8.0), h_seq=(1 / 8, 1 / 16))
    target = 1j * k * SQ * (SQ - fa.xi)
    # kappa_R approaches its limit as R grows
    assert abs(vals[1] - target) < abs(vals[0] - target)


@pytest.mark.parametrize("k,alpha", [(1, 0.7), (3, 0.4)])
def test_realness_of_xi(k, alpha):
    fa = xi_and_f(k, alpha, R_seq=(4.0, 8.0), h_seq=(1 / 8, 1 / 16))
    assert abs(fa.xi.imag) <= 1e-3 * (1 + abs(fa.xi))
    assert fa.value == pytest.approx(fa.xi.real - SQ)


def test_f_reflection_and_cosine():
    a = 0.7
    f1 = xi_and_f(1, a).value
    f2 = xi_and_f(1, 2 * np.pi - a).value
    assert abs(f1 - f2) <= 0.02 * abs(f1)
    # independent closed-form value (sqrt(pi)/2) cos(alpha) for k = 1
    assert f1 == pytest.approx(0.5 * SQ * np.cos(a), rel=0.02)


def test_xi_invariance_under_rotation_k3():
    a = 0.4
    x0 = xi_and_f(3, a, R_seq=(4.0, 8.0), h_seq=(1 / 8, 1 / 16)).xi
    x1 = xi_and_f(3, a + 2 * np.pi / 3, R_seq=(4.0, 8.0), h_seq=(1 / 8, 1 / 16)).xi
    assert abs(x1 - x0) <= 0.02 * abs(x0)


def test_profile_rotation_modulus_k3():
    a, R, h = 0.4, 6.0, 1 / 16
    s0 = solve_wR(ProfileProblem(3, a, R, h))
    s1 = solve_wR(ProfileProblem(3, a + 2 * np.pi / 3, R, h))
    pts, _ = annulus_samples(1.5, 3.0, nr=6, nt=48)
    c, s = np.cos(2 * np.pi / 3), np.sin(2 * np.pi / 3)
    rot = pts @ np.array([[c, s], [-s, c]])
    v0 = np.abs(s0.interpolator()(pts))
    v1 = np.abs(s1.interpolator()(rot))
    assert np.max(np.abs(v1 - v0)) <= 0.02 * np.max(v0)


def test_far_field_trend():
    # ||w_R| - |psi_k|| on |x| = R/2 relative to R^{k/4} shrinks as R grows
    out = []
    for R in (8.0, 16.0):
        s = solve_wR(ProfileProblem(1, 0.0, R, 1 / 8))
        t = np.linspace(0, 2 * np.pi, 200, endpoint=False)
        P = 0.5 * R * np.c_[np.cos(t), np.sin(t)]
        d = np.abs(np.abs(s.interpolator()(P)) - np.abs(psi_k_eval(1, P)))
        out.append(np.max(d))
    assert out[1] < out[0]


@pytest.fixture(scope="module")
def eig_setup():
    h, b = 1 / 128, (0.3, 0.0)
    g = build_grid(DomainSpec.disk(), h, anchor=b)
    p = smallest_eigenpairs(assemble_ab_laplacian(g, b, gauge="cut"), 1)[0]
    e = extract_expansion(g, p.vector, b, (0.0625, 0.09375, 0.125), lam=p.value)
    return h, b, e


def test_blowup_phase_invariance(eig_setup):
    h, b, e = eig_setup
    g = build_grid(DomainSpec.disk(), h, anchor=b)
    a = (b[0] + 8 * h, b[1])
    phi = smallest_eigenpairs(assemble_ab_laplacian(g, a, gauge="cut"), 1)[0].vector
    prof = solve_wR(ProfileProblem(1, 0.0, 8.0, 1 / 8))
    d1 = blowup_compare(g, phi, a, b, e, prof)
    d2 = blowup_compare(g, np.exp(1.1j) * phi, a, b, e, prof)
    assert d1 == pytest.approx(d2, rel=1e-10)
    assert 0 <= d1 < 0.5
    with pytest.raises(ValueError):
        blowup_compare(g, phi, a, b, e, solve_wR(ProfileProblem(1, 1.0, 8.0, 1 / 8)))


def test_blowup_sequence_decreases(eig_setup):
    h, b, e = eig_setup
    rows = blowup_sequence(e, DomainSpec.disk(), b, h, steps=(16, 8, 4))
    d = [r[2] for r in rows]
    assert d[0] > d[1] > d[2]
