"""Lattice operators: the AB Laplacian with Peierls links and the mixed
Dirichlet/Neumann Laplacian of the slit half-plane problem.

The lattice is ``anchor + h*(i + 1/2, j + 1/2)``; ``anchor`` is therefore a
plaquette centre. With the default anchor ``(h/2, h/2)`` the nodes are the
points of ``h Z^2``.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .geom_gauge import half_angle_gauge, peierls_phase

_DIRS = ((1, 0), (-1, 0), (0, 1), (0, -1))


@dataclass(frozen=True)
class Segment:
    p: tuple
    q: tuple
    tag: str = "dirichlet"


@dataclass(frozen=True)
class DomainSpec:
    """Disk, axis-aligned rectangle, or upper half-disk, plus optional cuts.

    For ``half_disk`` the flat side lies on the x1-axis and carries Neumann
    conditions except where a Dirichlet cut is placed on it.
    """

    shape: str
    center: tuple = (0.0, 0.0)
    radius: float = 1.0
    corners: tuple = ((0.0, 0.0), (1.0, 1.0))
    extra_cuts: tuple = ()

    def __post_init__(self):
        if self.shape not in ("disk", "rectangle", "half_disk"):
            raise ValueError(f"unknown shape {self.shape!r}")
        if self.shape in ("disk", "half_disk") and not self.radius > 0:
            raise ValueError("radius must be positive")
        if self.shape == "rectangle":
            (x0, y0), (x1, y1) = self.corners
            if not (x1 > x0 and y1 > y0):
                raise ValueError("empty rectangle")
        for c in self.extra_cuts:
            if c.tag not in ("dirichlet", "neumann"):
                raise ValueError(f"unknown cut tag {c.tag!r}")
            for pt in (c.p, c.q):
                if not self.contains(np.array([pt[0]]), np.array([pt[1]]), closed=True)[0]:
                    raise ValueError("cut leaves the domain")

    @classmethod
    def disk(cls, center=(0.0, 0.0), radius=1.0):
        return cls("disk", center=tuple(center), radius=float(radius))

    @classmethod
    def rectangle(cls, lo=(0.0, 0.0), hi=(1.0, 1.0)):
        return cls("rectangle", corners=(tuple(lo), tuple(hi)))

    @classmethod
    def half_disk(cls, radius, slit=True):
        cuts = (Segment((1.0, 0.0), (float(radius), 0.0), "dirichlet"),) if slit else ()
        return cls("half_disk", radius=float(radius), extra_cuts=cuts)

    def bbox(self):
        if self.shape == "rectangle":
            return self.corners
        c, r = self.center, self.radius
        lo_y = 0.0 if self.shape == "half_disk" else c[1] - r
        return (c[0] - r, lo_y), (c[0] + r, c[1] + r)

    def contains(self, x, y, closed=False, tol=0.0):
        """Open (or closed) membership test; ``tol`` shrinks the open set."""
        if self.shape == "rectangle":
            (x0, y0), (x1, y1) = self.corners
            d = np.minimum.reduce([x - x0, x1 - x, y - y0, y1 - y])
        else:
            c = self.center
            d = self.radius - np.hypot(x - c[0], y - c[1])
            if self.shape == "half_disk":
                # the flat side itself belongs to the computational domain
                d = np.where(y >= -max(tol, 1e-12), d, -np.inf)
        return d >= -tol if closed else d > tol

    def crossing(self, px, py, dx, dy):
        """Fraction ``s`` in (0, 1] of the step (dx, dy) from an inside point to the outer boundary."""
        if self.shape == "rectangle":
            (x0, y0), (x1, y1) = self.corners
            with np.errstate(divide="ignore", invalid="ignore"):
                sx = np.where(dx > 0, (x1 - px) / dx, np.where(dx < 0, (x0 - px) / dx, np.inf))
                sy = np.where(dy > 0, (y1 - py) / dy, np.where(dy < 0, (y0 - py) / dy, np.inf))
            s = np.minimum(sx, sy)
        else:
            qx, qy = px - self.center[0], py - self.center[1]
            A = dx * dx + dy * dy
            B = 2 * (qx * dx + qy * dy)
            C = qx * qx + qy * qy - self.radius ** 2
            s = (-B + np.sqrt(np.maximum(B * B - 4 * A * C, 0.0))) / (2 * A)
        return np.clip(s, 0.0, 1.0)


@dataclass
class Grid:
    """Node lattice restricted to a domain.

    ``inside`` marks the unknowns, ``dirichlet`` marks lattice nodes inside
    the closed domain whose value is prescribed (outer boundary nodes and
    Dirichlet cuts). ``index`` maps lattice positions to unknown numbers.
    """

    spec: DomainSpec
    h: float
    anchor: tuple
    x: np.ndarray
    y: np.ndarray
    inside: np.ndarray
    dirichlet: np.ndarray
    index: np.ndarray = field(repr=False)

    @property
    def n(self):
        return int(self.inside.sum())

    @property
    def shape(self):
        return self.inside.shape

    def mesh(self):
        return np.meshgrid(self.x, self.y, indexing="ij")

    def coords(self):
        X, Y = self.mesh()
        return np.stack([X[self.inside], Y[self.inside]], axis=-1)

    def embed(self, u, fill=0.0):
        """Scatter an unknown vector into a full lattice array."""
        out = np.full(self.shape, fill, dtype=np.result_type(u, fill))
        out[self.inside] = u
        return out

    def locate_plaquette(self, p):
        """Lattice offsets of ``p`` in units of h, relative to node (0, 0)."""
        return ((p[0] - self.x[0]) / self.h, (p[1] - self.y[0]) / self.h)

    def boundary_links(self, fitted=True):
        """Links from unknowns to prescribed values.

        Returns (rows, J1, I2, J2, s, bx, by): unknown number, lattice row of
        the unknown, lattice position of the outside neighbour, crossing
        fraction and the crossing point.
        The downward links of a half-disk's bottom row are Neumann and are
        not included.
        """
        I, J = np.nonzero(self.inside)
        X, Y = self.x[I], self.y[J]
        out = []
        for di, dj in _DIRS:
            I2, J2 = I + di, J + dj
            o = ~self.inside[I2, J2]
            if self.spec.shape == "half_disk" and dj == -1:
                o &= self.y[J] > 0.5 * self.h
            if not o.any():
                continue
            px, py = X[o], Y[o]
            dx, dy = di * self.h, dj * self.h
            if fitted:
                on_cut = self.dirichlet[I2[o], J2[o]] & self.spec.contains(
                    self.x[I2[o]], self.y[J2[o]], tol=1e-9 * self.h)
                s = np.where(on_cut, 1.0, self.spec.crossing(px, py, dx, dy))
                s = np.maximum(s, 1e-3)
            else:
                s = np.ones(o.sum())
            out.append((self.index[I[o], J[o]], J[o], I2[o], J2[o], s, px + s * dx, py + s * dy))
        if not out:
            e = np.zeros(0)
            z = e.astype(int)
            return z, z, z, z, e, e, e
        return tuple(np.concatenate(c) for c in zip(*out))


def _on_segment(X, Y, seg, tol):
    (px, py), (qx, qy) = seg.p, seg.q
    dx, dy = qx - px, qy - py
    L2 = dx * dx + dy * dy
    t = np.clip(((X - px) * dx + (Y - py) * dy) / L2, 0.0, 1.0)
    return np.hypot(X - (px + t * dx), Y - (py + t * dy)) <= tol


def build_grid(spec, h, anchor=None):
    """Classify lattice nodes for ``spec`` at spacing ``h``.

    Nodes closer than 1e-9*h to the outer boundary, and nodes on Dirichlet
    cuts, are prescribed; the remaining nodes strictly inside are unknowns.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    if anchor is None:
        anchor = (0.5 * h, 0.5 * h)
    (x0, y0), (x1, y1) = spec.bbox()
    tol = 1e-9 * h

    def axis(a, lo, hi):
        i0 = int(np.floor((lo - a) / h - 0.5)) - 1
        i1 = int(np.ceil((hi - a) / h - 0.5)) + 1
        return a + h * (np.arange(i0, i1 + 1) + 0.5)

    x = axis(anchor[0], x0, x1)
    y = axis(anchor[1], y0, y1)
    X, Y = np.meshgrid(x, y, indexing="ij")
    inside = spec.contains(X, Y, tol=tol)
    closed = spec.contains(X, Y, closed=True, tol=tol)
    if spec.shape == "half_disk":
        if np.min(np.abs(y)) > tol:
            raise ValueError("half-disk lattice must have a node row on the x1-axis")
        inside &= Y > -tol
    dirichlet = closed & ~inside
    for seg in spec.extra_cuts:
        if seg.tag == "dirichlet":
            hit = _on_segment(X, Y, seg, tol) & closed
            dirichlet |= hit
            inside &= ~hit
    if inside.sum() == 0:
        raise ValueError("grid too coarse: no interior nodes")
    # keep a ring of non-unknown nodes so every unknown has four neighbours
    if inside[0].any() or inside[-1].any() or inside[:, 0].any() or inside[:, -1].any():
        raise RuntimeError("lattice margin violated")
    index = -np.ones(X.shape, dtype=np.int64)
    index[inside] = np.arange(inside.sum())
    return Grid(spec, float(h), tuple(anchor), x, y, inside, dirichlet, index)


@dataclass
class SparseOperator:
    """Assembled lattice operator.

    ``node_phase`` is set for real gauge-transformed operators: a vector v in
    the operator's gauge corresponds to ``node_phase * v`` in the Peierls
    gauge. ``lift`` stores (rows, coefficient, bx, by) so that inhomogeneous
    Dirichlet data g contributes ``coefficient * g(bx, by)`` to the load.
    """

    matrix: sp.csr_matrix
    tag: str
    grid: Grid
    weight: float
    pole: Optional[tuple] = None
    node_phase: Optional[np.ndarray] = None
    lift: Optional[tuple] = None

    @property
    def n(self):
        return self.matrix.shape[0]

    def to_peierls(self, v):
        """Map vectors (or columns of a matrix) into the Peierls gauge."""
        if self.node_phase is None:
            return v
        return self.node_phase.reshape((-1,) + (1,) * (np.ndim(v) - 1)) * v


def _check_pole(grid, pole, allow_outside):
    u, v = grid.locate_plaquette(pole)
    for c in (u, v):
        if abs(c - np.rint(c)) < 1e-9:
            raise ValueError("pole lies on a lattice edge or node")
    if not grid.spec.contains(np.array([pole[0]]), np.array([pole[1]]))[0] and not allow_outside:
        raise ValueError("pole outside the domain; pass allow_outside=True")


def assemble_ab_laplacian(grid, pole=None, gauge="peierls", boundary="fitted",
                          allow_outside=False, cut=np.pi):
    """Five-point AB Laplacian ``(i grad + A_pole)^2`` with Dirichlet conditions.

    Hopping entries are ``-U/h^2`` with U the exact Peierls link, the diagonal
    is ``4/h^2``. ``boundary="fitted"`` uses the symmetric ghost-point
    correction at cut cells (diagonal ``+= (1-s)/(s h^2)``); ``"staircase"``
    places the boundary at the first outside node.

    ``gauge="cut"`` returns the equivalent real symmetric matrix obtained by
    conjugating with ``exp(i theta_c/2)``, theta_c the angle around the pole
    with the branch cut along direction ``cut``. Its eigenvectors map back to
    the Peierls gauge through ``node_phase``.
    """
    if grid.spec.shape == "half_disk":
        raise ValueError("the AB operator is defined on disk and rectangle domains")
    if gauge not in ("peierls", "cut"):
        raise ValueError("gauge must be 'peierls' or 'cut'")
    if pole is not None:
        _check_pole(grid, pole, allow_outside)
    h = grid.h
    I, J = np.nonzero(grid.inside)
    P = np.stack([grid.x[I], grid.y[J]], axis=-1)
    n = grid.n
    rows, cols, vals = [], [], []
    for di, dj in _DIRS:
        I2, J2 = I + di, J + dj
        nb = grid.inside[I2, J2]
        Q = np.stack([grid.x[I2[nb]], grid.y[J2[nb]]], axis=-1)
        U = np.ones(nb.sum(), complex) if pole is None else peierls_phase(Q, P[nb], pole)
        rows.append(grid.index[I[nb], J[nb]])
        cols.append(grid.index[I2[nb], J2[nb]])
        vals.append(-U / h ** 2)
    rows, cols, vals = map(np.concatenate, (rows, cols, vals))

    brow, _, _, _, s, bx, by = grid.boundary_links(fitted=(boundary == "fitted"))
    diag = np.full(n, 4.0 / h ** 2)
    np.add.at(diag, brow, (1.0 - s) / (s * h ** 2))
    B = np.stack([bx, by], axis=-1)
    Ub = np.ones(len(brow), complex) if pole is None else peierls_phase(B, P[brow], pole)
    lift = (brow, Ub / (s * h ** 2), bx, by)

    node_phase = None
    if gauge == "cut" and pole is not None:
        node_phase = half_angle_gauge(P, pole, cut)
        vals = np.conj(node_phase[rows]) * vals * node_phase[cols]
        vals = np.rint(vals.real * h ** 2) / h ** 2
        lift = (brow, np.conj(node_phase[brow]) * lift[1], bx, by)
    elif pole is None:
        vals = vals.real
        lift = (brow, lift[1].real, bx, by)

    M = sp.csr_matrix((vals, (rows, cols)), shape=(n, n)) + sp.diags(diag)
    real = np.isrealobj(vals)
    return SparseOperator(M.tocsr(), "symmetric" if real else "hermitian", grid,
                          h * h, None if pole is None else tuple(pole), node_phase, lift)


@dataclass(frozen=True)
class NeumannData:
    """Flux data on the flat side of a half-disk, supported on [lo, hi].

    ``G`` and ``G2`` are antiderivatives of g(x) and x*g(x); when given, hat
    function integrals are evaluated in closed form.
    """

    g: Callable
    lo: float = 0.0
    hi: float = 1.0
    G: Optional[Callable] = None
    G2: Optional[Callable] = None

    @classmethod
    def psi_k(cls, k):
        """Data ``(k/2) x^{k/2-1}`` on (0, 1), zero on the negative axis."""
        q = 0.5 * k
        return cls(lambda x: q * np.abs(x) ** (q - 1), 0.0, 1.0,
                   lambda x: np.abs(x) ** q, lambda x: q / (q + 1) * np.abs(x) ** (q + 1))

    @classmethod
    def zero(cls):
        return cls(lambda x: 0.0 * x, 0.0, 0.0, lambda x: 0.0 * x, lambda x: 0.0 * x)


def _hat_integrals(xi, h, data):
    lo, hi = data.lo, data.hi
    a, b = np.clip(xi - h, lo, hi), np.clip(xi, lo, hi)
    c, d = b, np.clip(xi + h, lo, hi)
    if data.G is not None:
        G, G2 = data.G, data.G2
        left = (G2(b) - G2(a) - (xi - h) * (G(b) - G(a))) / h
        right = ((xi + h) * (G(d) - G(c)) - (G2(d) - G2(c))) / h
        return left + right
    t, w = np.polynomial.legendre.leggauss(8)
    out = np.zeros_like(xi)
    for u, v, f in ((a, b, lambda x: (x - xi + h) / h), (c, d, lambda x: (xi + h - x) / h)):
        m, r = 0.5 * (u + v), 0.5 * (v - u)
        xs = m[:, None] + r[:, None] * t
        out += r * np.sum(w * f(xs.T).T * data.g(xs), axis=1)
    return out


def assemble_mixed_laplacian(grid, neumann_data, boundary="fitted"):
    """Stiffness matrix of -Laplace on a half-disk lattice and its Neumann load.

    The matrix is the P1 stiffness on the right-triangle mesh (five-point
    weights, halved along the flat side). Dirichlet nodes, i.e. the arc and
    any Dirichlet cut, are eliminated with homogeneous data. Load entries are
    the exact integrals of the data against the boundary hat functions.
    """
    if grid.spec.shape != "half_disk":
        raise ValueError("mixed problems live on half-disk grids")
    h = grid.h
    I, J = np.nonzero(grid.inside)
    bottom = np.abs(grid.y[J]) < 1e-9 * h
    n = grid.n
    rows, cols, vals = [], [], []
    diag = np.zeros(n)
    for di, dj in _DIRS:
        w = np.where(bottom, 0.5, 1.0) if dj == 0 else np.ones(n)
        if dj == -1:
            w = np.where(bottom, 0.0, w)
        I2, J2 = I + di, J + dj
        nb = grid.inside[I2, J2] & (w > 0)
        rows.append(grid.index[I[nb], J[nb]])
        cols.append(grid.index[I2[nb], J2[nb]])
        vals.append(-w[nb])
        diag[nb] += w[nb]
    brow, J1, _, J2, s, _, _ = grid.boundary_links(fitted=(boundary == "fitted"))
    # links running along the flat side carry weight 1/2
    flat = (J1 == J2) & (np.abs(grid.y[J1]) < 1e-9 * h)
    wb = np.where(flat, 0.5, 1.0)
    np.add.at(diag, brow, wb / s)
    M = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n)) + sp.diags(diag)
    load = np.zeros(n)
    load[grid.index[I[bottom], J[bottom]]] = _hat_integrals(grid.x[I[bottom]], h, neumann_data)
    op = SparseOperator(M.tocsr(), "symmetric", grid, 1.0)
    return op, load


def dirichlet_lift(grid, op, boundary_values):
    """Load vector carrying inhomogeneous Dirichlet data by elimination.

    ``boundary_values(x1, x2)`` is evaluated where the lattice links meet the
    boundary (fitted) or at the outside nodes (staircase).
    """
    if op.lift is None:
        raise ValueError("operator carries no lift information")
    rows, coef, bx, by = op.lift
    g = np.asarray(boundary_values(bx, by))
    out = np.zeros(op.n, dtype=np.result_type(coef, g))
    np.add.at(out, rows, coef * g)
    return out


def dump_matrix(op, path):
    """Write the operator as 'row col real imag' lines (0-based)."""
    C = op.matrix.tocoo()
    order = np.lexsort((C.col, C.row))
    data = np.asarray(C.data, dtype=complex)[order]
    with open(path, "w") as fh:
        fh.write(f"% {op.n} {op.n} {C.nnz} {op.tag}\n")
        for r, c, v in zip(C.row[order], C.col[order], data):
            fh.write(f"{r} {c} {v.real:.17g} {v.imag:.17g}\n")
