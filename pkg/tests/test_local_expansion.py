import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import jv

from abpole.discrete_operator import DomainSpec, build_grid
from abpole.geom_gauge import AngularMode, angular_mode_eval
from abpole.local_expansion import (
    InconclusiveOrderError,
    alpha0_from_betas,
    circle_fourier,
    extract_expansion,
)

SQ = np.sqrt(np.pi)
POLE = (0.0, 0.0)
RADII = (0.1, 0.2, 0.4)


@pytest.fixture(scope="module")
def grid():
    return build_grid(DomainSpec.disk(radius=1.0), 1 / 128)


def field(grid, fn):
    X = grid.coords()
    r = np.hypot(X[:, 0], X[:, 1])
    t = np.mod(np.arctan2(X[:, 1], X[:, 0]), 2 * np.pi)
    return fn(r, t)


def mode(j, kind):
    return lambda r, t: r ** (0.5 * j) * angular_mode_eval(AngularMode(j, kind), t)


def exact_interp(fn):
    return lambda P: fn(np.hypot(P[:, 0], P[:, 1]), np.arctan2(P[:, 1], P[:, 0]))


def test_circle_fourier_mode_on_lattice(grid):
    u = field(grid, mode(3, "sin"))
    c1, c2 = circle_fourier(grid, u, POLE, 0.5, 3)
    assert abs(c1) < 1e-3
    assert c2 == pytest.approx(0.5 ** 1.5, rel=1e-3)


def test_circle_fourier_combination(grid):
    fn = lambda r, t: mode(1, "cos")(r, t) + 2 * mode(1, "sin")(r, t)
    c1, c2 = circle_fourier(grid, None, POLE, 0.3, 1, interp=exact_interp(fn))
    assert c1 == pytest.approx(0.3 ** 0.5, abs=1e-12)
    assert c2 == pytest.approx(2 * 0.3 ** 0.5, abs=1e-12)


def test_circle_fourier_orthogonality(grid):
    c = circle_fourier(grid, None, POLE, 0.3, 3, interp=exact_interp(mode(1, "sin")))
    assert np.abs(c).max() < 1e-8
    c = circle_fourier(grid, field(grid, mode(1, "sin")), POLE, 0.3, 3)
    assert np.abs(c).max() < 1e-4


def test_circle_fourier_guards(grid):
    u = field(grid, mode(1, "sin"))
    with pytest.raises(ValueError):
        circle_fourier(grid, u, POLE, 0.995, 1)
    with pytest.raises(ValueError):
        circle_fourier(grid, u, POLE, 2 * grid.h, 1)


def test_extract_sine_profile(grid):
    u = field(grid, lambda r, t: r ** 0.5 * np.exp(0.5j * t) * np.sin(0.5 * t))
    e = extract_expansion(grid, u, POLE, RADII)
    assert e.k == 1
    assert abs(e.beta1) < 1e-3
    assert abs(e.beta2) == pytest.approx(SQ, rel=1e-3)
    assert e.alpha0 == pytest.approx(0.0, abs=1e-3)


def test_extract_equal_betas(grid):
    u = field(grid, lambda r, t: r ** 0.5 * np.exp(0.5j * t) * (np.cos(0.5 * t) + np.sin(0.5 * t)) / SQ)
    e = extract_expansion(grid, u, POLE, RADII)
    assert e.beta1 == pytest.approx(1.0, rel=1e-3)
    assert e.beta2 == pytest.approx(1.0, rel=1e-3)
    assert e.alpha0 == pytest.approx(3 * np.pi / 2, abs=1e-3)


def test_alpha0_examples():
    assert alpha0_from_betas(1.0, 1.0, 1) == pytest.approx(3 * np.pi / 2)
    assert alpha0_from_betas(1.0, 0.0, 1) == pytest.approx(np.pi)
    assert alpha0_from_betas(0.0, 2.0, 1) == 0.0
    # the nodal direction is a zero of beta1 cos(kt/2) + beta2 sin(kt/2)
    for b1, b2, k in [(0.3, -1.2, 3), (2.0, 0.5, 5), (-1.0, 0.7, 1)]:
        a = alpha0_from_betas(b1, b2, k)
        assert 0 <= a < 2 * np.pi / k
        assert b1 * np.cos(0.5 * k * a) + b2 * np.sin(0.5 * k * a) == pytest.approx(0.0, abs=1e-12)


def test_extract_order_three(grid):
    u = field(grid, lambda r, t: r ** 1.5 * np.exp(0.5j * t) * (0.4 * np.cos(1.5 * t) - np.sin(1.5 * t)))
    e = extract_expansion(grid, u, POLE, RADII)
    assert e.k == 3
    assert abs(e.beta1) == pytest.approx(0.4 * SQ, rel=2e-3)
    assert abs(e.beta2) == pytest.approx(SQ, rel=2e-3)


def test_inconclusive(grid):
    u = field(grid, lambda r, t: np.exp(0.5j * t) * np.cos(0.5 * t) + 0 * r)
    with pytest.raises(InconclusiveOrderError):
        extract_expansion(grid, u, POLE, RADII)


def test_bessel_corrected_extraction(grid):
    lam = 2.0
    u = field(grid, lambda r, t: jv(0.5, np.sqrt(lam) * r) * np.exp(0.5j * t) * np.sin(0.5 * t))
    # J_{1/2}(z) ~ (z/2)^{1/2}/Gamma(3/2) at the origin
    b2 = SQ * (np.sqrt(lam) / 2) ** 0.5 / (0.5 * SQ)
    e = extract_expansion(grid, u, POLE, RADII, lam=lam)
    assert abs(e.beta2) == pytest.approx(b2, rel=1e-3)
    plain = extract_expansion(grid, u, POLE, (0.05, 0.1, 0.2))
    assert abs(plain.beta2) == pytest.approx(b2, rel=5e-3)


def test_homogeneity_doubling(grid):
    u = field(grid, lambda r, t: r ** 0.5 * np.exp(0.5j * t) * (0.6 * np.cos(0.5 * t) + np.sin(0.5 * t)))
    a = extract_expansion(grid, u, POLE, (0.1, 0.15, 0.2))
    b = extract_expansion(grid, u, POLE, (0.2, 0.3, 0.4))
    assert a.k == b.k
    assert a.alpha0 == pytest.approx(b.alpha0, abs=1e-3)
    assert a.beta1 == pytest.approx(b.beta1, rel=1e-3)
    assert a.beta2 == pytest.approx(b.beta2, rel=1e-3)


@settings(max_examples=15, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(0, 2 * np.pi))
def test_reality_and_gauge(b1, b2, phase):
    if np.hypot(b1, b2) < 0.1:
        return
    g = build_grid(DomainSpec.disk(radius=1.0), 1 / 64)
    fn = lambda r, t: r ** 0.5 * np.exp(0.5j * t) * (b1 * np.cos(0.5 * t) + b2 * np.sin(0.5 * t)) / SQ
    base = extract_expansion(g, field(g, fn), POLE, RADII)
    rot = extract_expansion(g, np.exp(1j * phase) * field(g, fn), POLE, RADII)
    assert rot.beta_sq == pytest.approx(base.beta_sq, rel=1e-10)
    assert base.beta_sq == pytest.approx(b1 ** 2 + b2 ** 2, rel=5e-3)
    if abs(b1) > 1e-2 and abs(b2) > 1e-2:
        d = np.angle(rot.beta2 * np.conj(rot.beta1))
        assert min(abs(d), abs(abs(d) - np.pi)) < 1e-3
    # a common unit factor relates the two pairs
    f = rot.beta1 / base.beta1 if abs(base.beta1) > abs(base.beta2) else rot.beta2 / base.beta2
    assert abs(f) == pytest.approx(1.0, rel=1e-6)
    assert rot.beta1 == pytest.approx(f * base.beta1, abs=1e-6)
    assert rot.beta2 == pytest.approx(f * base.beta2, abs=1e-6)
