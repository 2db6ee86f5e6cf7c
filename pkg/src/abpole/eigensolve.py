"""Lowest eigenpairs, positive-definite solves and Richardson extrapolation."""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import brentq


class EigenSolveError(RuntimeError):
    def __init__(self, msg, best_residual=np.inf):
        super().__init__(f"{msg} (best residual {best_residual:.3e})")
        self.best_residual = best_residual


class LinearSolveError(RuntimeError):
    def __init__(self, msg, history=()):
        super().__init__(msg)
        self.history = list(history)


@dataclass
class EigenPair:
    """Eigenvalue with its eigenvector in the Peierls gauge.

    The vector is normalised so that ``weight * sum |v|^2 = 1``, the lattice
    version of unit L2 norm.
    """

    value: float
    vector: np.ndarray = field(repr=False)
    residual_norm: float


@dataclass
class ExtrapolationResult:
    params: np.ndarray
    values: np.ndarray
    limit: complex
    order: Optional[float]
    error: float
    flagged: bool = False
    note: str = ""


def _factor(A):
    return spla.splu(sp.csc_matrix(A))


def smallest_eigenpairs(op, count=1, tol=1e-8, sigma=0.0, block=3, reference=None,
                        seed=0, maxiter=2000):
    """Lowest ``count`` eigenpairs by shift-invert Lanczos around ``sigma``.

    One sparse LU factorisation of ``op - sigma`` is reused by the iteration.
    At least ``block`` (>= 3) eigenpairs are computed so that near-degenerate
    pairs are resolved together; the lowest ``count`` are returned in
    ascending order.

    ``reference=(phi0, phase_field)`` rotates each vector so that
    ``sum(phase_field * v * conj(phi0))`` is real and positive. Without a
    reference the entry of largest modulus is made real and positive.
    """
    A = op.matrix
    n = A.shape[0]
    nev = min(max(count, block, 3), n - 1)
    if n <= 40 or nev < 1:
        dense = A.toarray()
        w, V = np.linalg.eigh(dense)
        w, V = w[:count], V[:, :count]
    else:
        lu = _factor(A - sigma * sp.identity(n, dtype=A.dtype, format="csc"))
        OPinv = spla.LinearOperator((n, n), matvec=lu.solve, dtype=A.dtype)
        v0 = np.random.default_rng(seed).standard_normal(n).astype(A.dtype)
        try:
            w, V = spla.eigsh(A, k=nev, sigma=sigma, which="LM", OPinv=OPinv,
                              tol=tol * 1e-2, v0=v0, maxiter=maxiter)
        except spla.ArpackNoConvergence as exc:
            best = np.inf
            if len(exc.eigenvalues):
                R = A @ exc.eigenvectors - exc.eigenvectors * exc.eigenvalues
                best = float(np.min(np.linalg.norm(R, axis=0)))
            raise EigenSolveError("shift-invert iteration did not converge", best) from exc
        order = np.argsort(w)[:count]
        w, V = w[order], V[:, order]

    pairs = []
    for lam, v in zip(w, V.T):
        res = np.linalg.norm(A @ v - lam * v) / np.linalg.norm(v)
        if res > tol * max(1.0, abs(lam)):
            raise EigenSolveError("residual above tolerance", res)
        u = op.to_peierls(v).astype(complex)
        u /= np.sqrt(op.weight * np.vdot(u, u).real)
        if reference is not None:
            phi0, phase = reference
            ov = np.sum(phase * u * np.conj(phi0))
        else:
            ov = np.conj(u[np.argmax(np.abs(u))])
        if abs(ov) > 0:
            u *= np.conj(ov) / abs(ov)
        pairs.append(EigenPair(float(lam), u, float(res)))
    return pairs


def clusters(pairs, rtol=1e-6):
    """Group eigenvalues closer than ``rtol * lambda`` into clusters of indices."""
    groups = []
    for i, p in enumerate(pairs):
        if groups and abs(p.value - pairs[groups[-1][-1]].value) <= rtol * abs(p.value):
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups


def solve_pd(op, load, method="direct", tol=1e-10, maxiter=500):
    """Solve ``op x = load`` for a positive definite operator.

    ``method="direct"`` uses a sparse LU factorisation; ``"cg"`` runs
    conjugate gradients preconditioned by smoothed-aggregation AMG (real
    symmetric operators only).
    """
    A = op.matrix if hasattr(op, "matrix") else sp.csr_matrix(op)
    b = np.asarray(load)
    nb = np.linalg.norm(b)
    if nb == 0:
        return np.zeros_like(b)
    if method == "direct":
        lu = _factor(A)
        if np.isrealobj(A) and np.iscomplexobj(b):
            x = lu.solve(b.real.copy()) + 1j * lu.solve(b.imag.copy())
        else:
            x = lu.solve(b.astype(np.result_type(A.dtype, b.dtype)))
        history = [np.linalg.norm(A @ x - b) / nb]
    elif method == "cg":
        import pyamg

        if np.iscomplexobj(A) or np.iscomplexobj(b):
            raise ValueError("cg path expects a real symmetric system")
        ml = pyamg.smoothed_aggregation_solver(sp.csr_matrix(A), symmetry="symmetric")
        history = []
        x = ml.solve(b, tol=tol * 0.1, accel="cg", maxiter=maxiter, residuals=history)
        history = [r / nb for r in history] + [np.linalg.norm(A @ x - b) / nb]
    else:
        raise ValueError(f"unknown method {method!r}")
    if not history[-1] <= tol:
        raise LinearSolveError(f"relative residual {history[-1]:.3e} above {tol:.1e}", history)
    return x


def _observed_order(p, v):
    d1, d2 = v[-3] - v[-2], v[-2] - v[-1]
    if d2 == 0 or d1 == 0:
        return None
    if np.iscomplexobj(d1):
        ratio = abs(d1) / abs(d2)
    else:
        ratio = d1 / d2
        if ratio <= 0:
            return None
    p1, p2, p3 = p[-3], p[-2], p[-1]

    def g(q):
        return (p1 ** q - p2 ** q) / (p2 ** q - p3 ** q) - ratio

    lo, hi = 1e-3, 12.0
    if g(lo) * g(hi) > 0:
        return None
    return brentq(g, lo, hi)


def richardson_extrapolate(samples, model_order=None):
    """Eliminate the leading ``C p^q`` term from values sampled at decreasing p.

    With ``model_order`` the order q is fixed; otherwise it is estimated from
    the last three samples. The observed order is reported whenever three or
    more samples are available. The error estimate is ``|last - limit|``.
    """
    p = np.array([s[0] for s in samples], dtype=float)
    v = np.array([s[1] for s in samples])
    if len(p) < 2:
        raise ValueError("need at least two samples")
    observed = _observed_order(p, v) if len(p) >= 3 else None
    if np.any(np.diff(p) >= 0):
        return ExtrapolationResult(p, v, v[-1], observed, 0.0, True, "parameters not decreasing")
    if np.all(v == v[0]):
        return ExtrapolationResult(p, v, v[-1], observed, 0.0)
    q = model_order if model_order is not None else observed
    if q is None:
        if len(p) < 3:
            raise ValueError("two samples need a model_order")
        err = abs(v[-1] - v[-2])
        return ExtrapolationResult(p, v, v[-1], None, err, True, "no consistent convergence order")
    t = (p[-2] / p[-1]) ** q
    limit = v[-1] + (v[-1] - v[-2]) / (t - 1.0)
    flagged = False
    note = ""
    if len(p) >= 3:
        d = np.diff(v)
        if np.iscomplexobj(d):
            flagged = not abs(d[-1]) < abs(d[-2])
        else:
            flagged = not (d[-1] * d[-2] > 0 and abs(d[-1]) < abs(d[-2]))
        note = "non-monotone convergence" if flagged else ""
    return ExtrapolationResult(p, v, limit, observed, float(abs(v[-1] - limit)), flagged, note)
