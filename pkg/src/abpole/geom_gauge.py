"""Aharonov-Bohm potential, branched angles and half-angle gauge phases.

Every function accepts scalars or numpy arrays for coordinates and
broadcasts. Poles are plain ``(x1, x2)`` pairs.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

TWO_PI = 2.0 * np.pi


class SingularPointError(ValueError):
    """Raised when a quantity is evaluated at the pole itself."""


class Point(NamedTuple):
    x1: float
    x2: float


@dataclass(frozen=True)
class BranchedAngle:
    """An angle together with the base of its branch, ``base <= value < base + 2*pi``."""

    value: float
    branch_base: float

    def __post_init__(self):
        if not (self.branch_base <= self.value < self.branch_base + TWO_PI):
            raise ValueError("angle outside its branch")


@dataclass(frozen=True)
class AngularMode:
    """Angular eigenfunction of the half-flux operator on the circle.

    ``kind`` is ``"cos"`` for exp(it/2)cos(jt/2)/sqrt(pi) and ``"sin"`` for
    exp(it/2)sin(jt/2)/sqrt(pi).
    """

    j: int
    kind: str

    def __post_init__(self):
        _check_odd(self.j)
        if self.kind not in ("cos", "sin"):
            raise ValueError("kind must be 'cos' or 'sin'")


def _check_odd(k):
    if int(k) != k or k < 1 or k % 2 == 0:
        raise ValueError(f"expected a positive odd integer, got {k}")


def _xy(x):
    x = np.asarray(x, dtype=float)
    return x[..., 0], x[..., 1]


def branched(angle, base):
    """Reduce ``angle`` to the branch ``[base, base + 2*pi)``."""
    v = base + np.mod(np.asarray(angle, dtype=float) - base, TWO_PI)
    # mod can round up to exactly 2*pi
    return np.where(v >= base + TWO_PI, base, v)


def ab_potential(x, a=(0.0, 0.0)):
    """Half-flux AB vector potential ``A_a(x)`` with pole ``a``.

    Returns an array with trailing dimension 2.
    """
    x1, x2 = _xy(x)
    d1, d2 = x1 - a[0], x2 - a[1]
    r2 = d1 * d1 + d2 * d2
    if np.any(r2 == 0):
        raise SingularPointError("the potential is singular at the pole")
    return np.stack([-0.5 * d2 / r2, 0.5 * d1 / r2], axis=-1)


def theta0(x):
    """Polar angle of ``x`` on the branch ``[0, 2*pi)``.

    Implemented piecewise with arctan so that the five branches of the
    classical definition are reproduced exactly.
    """
    x1, x2 = _xy(x)
    if np.any((x1 == 0) & (x2 == 0)):
        raise SingularPointError("theta0 is undefined at the origin")
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        t = np.arctan(x2 / x1)
    out = np.select(
        [(x1 > 0) & (x2 >= 0), x1 == 0, x1 < 0, (x1 > 0) & (x2 < 0)],
        [t, np.where(x2 > 0, np.pi / 2, 3 * np.pi / 2), np.pi + t, TWO_PI + t],
    )
    # 2*pi + t rounds up to 2*pi for tiny negative t
    out = branched(out, 0.0)
    return out[()] if out.ndim == 0 else out


def theta_pole(x, b, centered=False):
    """Angle function attached to the pole ``b``.

    With ``centered=False`` this is the angle of ``x - b`` seen from ``b``;
    with ``centered=True`` it is the angle of ``x`` seen from the origin.
    Either way the branch is ``[alpha, alpha + 2*pi)`` where alpha is the
    polar angle of ``b``, so the discontinuity lies on the ray through ``b``
    pointing away from the origin.
    """
    b1, b2 = float(b[0]), float(b[1])
    if b1 == 0 and b2 == 0:
        raise ValueError("branch undefined for b = 0")
    alpha = float(theta0((b1, b2)))
    x1, x2 = _xy(x)
    c1, c2 = (x1, x2) if centered else (x1 - b1, x2 - b2)
    if np.any((c1 == 0) & (c2 == 0)):
        raise SingularPointError("angle undefined at its centre")
    out = branched(np.arctan2(c2, c1), alpha)
    return out[()] if np.ndim(out) == 0 else out


def peierls_phase(x, y, a):
    """Link variable ``exp(i * int_x^y A_a . dl)`` along the straight segment.

    The line integral equals half the angle subtended at ``a``, taken on the
    nearest branch, so the phase is exact.
    """
    x1, x2 = _xy(x)
    y1, y2 = _xy(y)
    u1, u2 = x1 - a[0], x2 - a[1]
    v1, v2 = y1 - a[0], y2 - a[1]
    cross = u1 * v2 - u2 * v1
    dot = u1 * v1 + u2 * v2
    # a on the closed segment: collinear and between the endpoints
    if np.any((cross == 0) & (dot <= 0)):
        raise SingularPointError("segment passes through the pole")
    delta = np.arctan2(cross, dot)
    return np.exp(0.5j * delta)


def angular_mode_eval(mode, t):
    """Evaluate ``exp(it/2) cos(jt/2)/sqrt(pi)`` or its sine partner."""
    t = np.asarray(t, dtype=float)
    trig = np.cos if mode.kind == "cos" else np.sin
    return np.exp(0.5j * t) * trig(0.5 * mode.j * t) / np.sqrt(np.pi)


def psi_k_eval(k, x):
    """Real profile ``r^{k/2} sin(k t / 2)``, t on the branch [0, 2*pi)."""
    _check_odd(k)
    x1, x2 = _xy(x)
    r = np.hypot(x1, x2)
    t = np.arctan2(x2, x1)
    t = np.where(t < 0, t + TWO_PI, t)
    out = r ** (0.5 * k) * np.sin(0.5 * k * t)
    return out[()] if out.ndim == 0 else out


def psi_k_normal_derivative(k, x1):
    """Upper-side derivative of psi_k across the x1-axis, ``(k/2) x1^{k/2-1}`` for x1 > 0.

    On the negative axis it vanishes for every odd k.
    """
    _check_odd(k)
    x1 = np.asarray(x1, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(x1 > 0, 0.5 * k * np.abs(x1) ** (0.5 * k - 1), 0.0)
    return out[()] if out.ndim == 0 else out


def half_angle_gauge(x, pole, cut=np.pi):
    """Unit field ``exp(i theta_c / 2)`` with theta_c the angle around ``pole``
    on the branch ``[cut, cut + 2*pi)``.

    Multiplying a solution in the AB gauge by the conjugate of this field
    yields a function that is real up to sign flips across the ray from the
    pole in direction ``cut``.
    """
    x1, x2 = _xy(x)
    th = branched(np.arctan2(x2 - pole[1], x1 - pole[0]), cut)
    return np.exp(0.5j * th)


def eq6_phase_field(x, a, b=(0.0, 0.0)):
    """Unit field ``exp(i(theta_b^a - theta_a)/2)`` used to fix eigenvector phases.

    Both angles live on the branch starting at the direction of ``a - b``;
    the first is measured around ``b``, the second around ``a``. The product
    with an eigenfunction for pole ``a`` is comparable with one for pole ``b``.
    """
    x1, x2 = _xy(x)
    d = (a[0] - b[0], a[1] - b[1])
    alpha = float(np.arctan2(d[1], d[0]))
    tb = branched(np.arctan2(x2 - b[1], x1 - b[0]), alpha)
    ta = branched(np.arctan2(x2 - a[1], x1 - a[0]), alpha)
    return np.exp(0.5j * (tb - ta))
