"""The slit half-plane minimisation problem and its constant m_k.

On the upper half-plane with the slit s = {x1 >= 1, x2 = 0}, w_k minimises
``J(u) = 1/2 int |grad u|^2 - int_0^1 (k/2) x1^{k/2-1} u(x1, 0) dx1`` among
functions vanishing on s. The minimum ``m_k = J(w_k)`` equals both
``-1/2 int |grad w_k|^2`` and ``-1/2 int_0^1 (k/2) x1^{k/2-1} w_k dx1``.

The plane is truncated to the half-disk of radius R with w = 0 on the arc,
which minimises J over a subspace, so estimates decrease as R grows.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import roots_jacobi

from .discrete_operator import DomainSpec, NeumannData, assemble_mixed_laplacian, build_grid
from .eigensolve import ExtrapolationResult, richardson_extrapolate, solve_pd
from .geom_gauge import _check_odd


@dataclass(frozen=True)
class SlitProblem:
    """Truncated slit problem.

    ``offset`` shifts the lattice by ``offset*h`` along x1 (0 puts nodes on
    both the origin and the slit tip, 0.5 staggers them); ``method`` picks
    the linear solver.
    """

    k: int
    R: float
    h: float
    offset: float = 0.0
    method: str = "direct"

    def __post_init__(self):
        _check_odd(self.k)
        if self.R < 4:
            raise ValueError("truncation radius must be at least 4")
        if self.h > 1 / 16 + 1e-15:
            raise ValueError("h must not exceed 1/16")


@dataclass
class SlitSolution:
    problem: SlitProblem
    w: np.ndarray = field(repr=False)
    energy: float
    m_energy: float
    m_boundary: float
    n: int
    grid: object = field(default=None, repr=False)


def _trace_integral(grid, w, k, nq=12):
    """``int_0^1 (k/2) x^{k/2-1} w(x, 0) dx`` for the piecewise linear trace.

    Gauss-Jacobi absorbs the endpoint singularity on the first piece,
    Gauss-Legendre is used elsewhere.
    """
    j0 = int(np.argmin(np.abs(grid.y)))
    row = grid.embed(w)[:, j0]
    xs = grid.x
    q = 0.5 * k
    brk = np.unique(np.concatenate([[0.0, 1.0], xs[(xs > 0) & (xs < 1)]]))
    tl, wl = np.polynomial.legendre.leggauss(nq)
    tj, wj = roots_jacobi(nq, 0.0, q - 1.0)
    total = 0.0
    for a, b in zip(brk[:-1], brk[1:]):
        half = 0.5 * (b - a)
        if a == 0.0:
            # weight (1+t)^{q-1} on [-1, 1] maps to x^{q-1} on [0, b]
            x = a + half * (tj + 1)
            total += q * half ** q * np.sum(wj * np.interp(x, xs, row))
        else:
            x = a + half * (tl + 1)
            total += half * np.sum(wl * q * x ** (q - 1) * np.interp(x, xs, row))
    return total


def solve_wk(problem):
    """Discrete minimiser on the truncated half-disk and both estimates of m_k."""
    h = problem.h
    spec = DomainSpec.half_disk(problem.R)
    grid = build_grid(spec, h, anchor=((problem.offset + 0.5) * h, 0.5 * h))
    op, load = assemble_mixed_laplacian(grid, NeumannData.psi_k(problem.k))
    w = solve_pd(op, load, method=problem.method)
    energy = float(w @ (op.matrix @ w))
    m_b = -0.5 * _trace_integral(grid, w, problem.k)
    return SlitSolution(problem, w, energy, -0.5 * energy, float(m_b), grid.n, grid)


def _solve_row(args):
    k, R, h, offset, method = args
    s = solve_wk(SlitProblem(k, R, h, offset, method))
    return {"k": k, "h": h, "R": R, "m_energy": s.m_energy, "m_boundary": s.m_boundary}


@dataclass
class MkResult:
    k: int
    energy: ExtrapolationResult
    boundary: ExtrapolationResult
    rows: list
    per_h: dict = field(default_factory=dict)

    @property
    def value(self):
        return float(np.real(self.energy.limit))


def _double(rows, key, h_seq, R_seq, R_order, h_order):
    table = {(r["h"], r["R"]): r[key] for r in rows}
    inner = []
    for h in h_seq:
        ext = richardson_extrapolate([(1.0 / R, table[(h, R)]) for R in R_seq], model_order=R_order)
        inner.append(ext)
    outer = richardson_extrapolate([(h, e.limit) for h, e in zip(h_seq, inner)], model_order=h_order)
    err = float(np.hypot(outer.error, inner[-1].error))
    flagged = outer.flagged or any(e.flagged for e in inner)
    res = ExtrapolationResult(outer.params, outer.values, float(np.real(outer.limit)), outer.order,
                              err, flagged, outer.note)
    return res, inner


def compute_mk(k, h_seq=(1 / 16, 1 / 32), R_seq=(4, 8, 16), R_order=1, h_order=1,
               offset=0.0, method="direct", jobs=1):
    """Extrapolated m_k: first R -> infinity at each h (in 1/R), then h -> 0.

    Both leading corrections are first order: the truncation error behaves
    like 1/R and the lattice error like h, because of the singular data at
    the origin and the slit tip.
    """
    h_seq = sorted(h_seq, reverse=True)
    R_seq = sorted(R_seq)
    if len(h_seq) < 2 or len(R_seq) < 2:
        raise ValueError("need at least two values of h and of R")
    tasks = [(k, R, h, offset, method) for h in h_seq for R in R_seq]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            rows = list(ex.map(_solve_row, tasks))
    else:
        rows = [_solve_row(t) for t in tasks]
    e, inner_e = _double(rows, "m_energy", h_seq, R_seq, R_order, h_order)
    b, inner_b = _double(rows, "m_boundary", h_seq, R_seq, R_order, h_order)
    per_h = {h: (ie.limit, ib.limit) for h, ie, ib in zip(h_seq, inner_e, inner_b)}
    return MkResult(k, e, b, rows, per_h)
