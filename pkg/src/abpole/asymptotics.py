"""Pole sweeps, polynomial fits of the eigenvalue variation and the
end-to-end check ``lambda_0 - lambda_a ~ C0 |a|^k cos(k(alpha - alpha0))``.

The lattice eigenvalue only depends on which plaquette holds the pole, so
target poles are snapped to plaquette centres. Displacements are snapped to
the lattice of the coarsest spacing in the sweep; with dyadic spacings they
are then lattice vectors at every level, and each row is extrapolated in h
at a fixed, exactly known displacement.
"""

import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .discrete_operator import DomainSpec, assemble_ab_laplacian, build_grid
from .eigensolve import clusters, richardson_extrapolate, smallest_eigenpairs
from .local_expansion import LocalExpansion, alpha0_from_betas, extract_expansion


class ClusteredEigenvalueError(RuntimeError):
    pass


@dataclass(frozen=True)
class SweepConfig:
    domain: DomainSpec = DomainSpec.disk()
    b: tuple = (0.3, 0.0)
    n0: int = 1
    radii: tuple = (0.02, 0.03, 0.045, 0.0675)
    angles: tuple = tuple(2 * np.pi * np.arange(16) / 16)
    h_seq: tuple = (1 / 128, 1 / 256)
    boundary: str = "fitted"
    h_order: float = 1.0
    snap_h: float = None
    jobs: int = 1
    keep_base: bool = True
    seed: int = 0


@dataclass
class SweepRow:
    alpha: float
    rho: float
    target_alpha: float
    target_rho: float
    lam_by_h: dict
    diff: float
    diff_error: float
    lam: float
    ok: bool = True
    note: str = ""


@dataclass
class SweepResult:
    config: SweepConfig
    lam0: float
    lam0_error: float
    lam0_by_h: dict
    gap: float
    rows: list
    base: dict = field(default_factory=dict, repr=False)
    timings: dict = field(default_factory=dict)


@lru_cache(maxsize=4)
def _grid(domain, h, b):
    return build_grid(domain, h, anchor=b)


def _eigs(domain, h, b, pole, count, boundary, seed=0):
    grid = _grid(domain, h, b)
    op = assemble_ab_laplacian(grid, pole, gauge="cut", boundary=boundary)
    return grid, smallest_eigenpairs(op, count, seed=seed)


def _pole_task(args):
    domain, h, b, disp, n0, boundary, seed = args
    pole = (b[0] + disp[0], b[1] + disp[1])
    try:
        _, pairs = _eigs(domain, h, b, pole, n0, boundary, seed)
        return pairs[n0 - 1].value, ""
    except Exception as exc:  # recorded per row, not fatal
        return np.nan, f"{type(exc).__name__}: {exc}"


def snapped_displacements(radii, angles, snap_h):
    """Distinct lattice displacements nearest to the targets, with their targets."""
    out, seen = [], set()
    for rho in radii:
        for a in angles:
            m = np.rint(np.array([np.cos(a), np.sin(a)]) * rho / snap_h).astype(int)
            key = (int(m[0]), int(m[1]))
            if key == (0, 0) or key in seen:
                continue
            seen.add(key)
            out.append((key, float(a), float(rho)))
    return out


def _map(fn, tasks, jobs):
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            return list(ex.map(fn, tasks))
    return [fn(t) for t in tasks]


def run_sweep(config):
    """Eigenvalue n0 at the base pole and at displaced poles, extrapolated in h.

    Differences ``lambda_0 - lambda_a`` are formed at equal h and then
    extrapolated. A clustered base eigenvalue aborts the sweep.
    """
    h_seq = sorted(config.h_seq, reverse=True)
    snap = config.snap_h or h_seq[0]
    for h in h_seq:
        if abs(snap / h - round(snap / h)) > 1e-9:
            raise ValueError("snap spacing must be an integer multiple of every h")
    if config.radii and min(config.radii) < 4 * h_seq[-1]:
        warnings.warn("some radii are below 4h at the finest spacing")
    b = tuple(map(float, config.b))
    t0 = time.time()
    lam0_by_h, base, gap = {}, {}, np.inf
    for h in h_seq:
        grid, pairs = _eigs(config.domain, h, b, b, config.n0 + 2, config.boundary, config.seed)
        groups = clusters(pairs)
        target = [g for g in groups if config.n0 - 1 in g][0]
        if len(target) > 1:
            raise ClusteredEigenvalueError(
                f"eigenvalue {config.n0} at the base pole is clustered at h={h:g}")
        lam0_by_h[h] = pairs[config.n0 - 1].value
        nb = [p.value for p in pairs if p is not pairs[config.n0 - 1]]
        gap = min(gap, min(abs(np.array(nb) - lam0_by_h[h])))
        if config.keep_base:
            base[h] = (grid, pairs[config.n0 - 1])
    t_base = time.time() - t0

    targets = snapped_displacements(config.radii, config.angles, snap)
    tasks = [(config.domain, h, b, (m[0] * snap, m[1] * snap), config.n0, config.boundary, config.seed)
             for m, _, _ in targets for h in h_seq]
    results = _map(_pole_task, tasks, config.jobs)

    if len(h_seq) > 1:
        lam0_ext = richardson_extrapolate([(h, lam0_by_h[h]) for h in h_seq], config.h_order)
        lam0, lam0_err = float(lam0_ext.limit), lam0_ext.error
    else:
        lam0, lam0_err = lam0_by_h[h_seq[0]], 0.0
    rows = []
    for i, (m, ta, tr) in enumerate(targets):
        res = results[i * len(h_seq):(i + 1) * len(h_seq)]
        lam_by_h = {h: r[0] for h, r in zip(h_seq, res)}
        notes = "; ".join(r[1] for r in res if r[1])
        d = np.array([m[0] * snap, m[1] * snap])
        diffs = [(h, lam0_by_h[h] - lam_by_h[h]) for h in h_seq]
        ok = not notes and np.all(np.isfinite([v for _, v in diffs]))
        if ok and len(h_seq) > 1:
            ext = richardson_extrapolate(diffs, config.h_order)
            diff, err = float(ext.limit), ext.error
        else:
            diff, err = diffs[-1][1], 0.0
        rows.append(SweepRow(float(np.mod(np.arctan2(d[1], d[0]), 2 * np.pi)), float(np.hypot(*d)),
                             ta, tr, lam_by_h, diff, err, lam0 - diff, bool(ok), notes))
    return SweepResult(config, lam0, lam0_err, lam0_by_h, float(gap), rows, base,
                       {"base": t_base, "total": time.time() - t0})


def _angdist(a, b, period=2 * np.pi):
    return abs(np.mod(a - b + 0.5 * period, period) - 0.5 * period)


def directional_limit(result, alpha, k, tol=0.02):
    """Limit of ``(lambda_0 - lambda_a)/|a|^k`` as |a| -> 0 along direction alpha.

    Rows within ``tol`` radians of alpha are used; the correction is taken
    to be first order in |a|. Returns an ExtrapolationResult whose ``limit``
    is the directional limit.
    """
    sel = [r for r in result.rows if r.ok and _angdist(r.alpha, alpha) < tol]
    sel.sort(key=lambda r: -r.rho)
    rhos = []
    samples = []
    for r in sel:
        if rhos and abs(r.rho - rhos[-1]) < 1e-12:
            continue
        rhos.append(r.rho)
        samples.append((r.rho, r.diff / r.rho ** k))
    if len(samples) < 3:
        raise ValueError(f"need at least three radii along alpha={alpha:g}, found {len(samples)}")
    return richardson_extrapolate(samples, model_order=1)


def monomials(a1, a2, d):
    """Columns a1^{d-j} a2^j, j = 0..d."""
    return np.stack([a1 ** (d - j) * a2 ** j for j in range(d + 1)], axis=-1)


@dataclass
class PolyFit:
    k: int
    coeffs: np.ndarray
    C0: float
    alpha0_fit: float
    rms: float
    harmonicity_defect: float
    other: dict = field(default_factory=dict)
    other_err: dict = field(default_factory=dict)
    other_se: dict = field(default_factory=dict)
    n_points: int = 0

    def g(self, alpha):
        return monomials(np.cos(alpha), np.sin(alpha), self.k) @ self.coeffs


def laplacian_coeffs(c):
    """Coefficients of the Laplacian of sum_j c_j x1^{d-j} x2^j (degree d-2)."""
    d = len(c) - 1
    if d < 2:
        return np.zeros(0)
    out = np.zeros(d - 1)
    for j, cj in enumerate(c):
        if d - j >= 2:
            out[j] += cj * (d - j) * (d - j - 1)
        if j >= 2:
            out[j - 2] += cj * j * (j - 1)
    return out


def cosine_form(coeffs, k, n=4096):
    """C0 >= 0 and alpha0 in [0, 2 pi/k) with ``P(cos a, sin a) ~ C0 cos(k(a - alpha0))``."""
    t = 2 * np.pi * np.arange(n) / n
    g = monomials(np.cos(t), np.sin(t), k) @ coeffs
    ac = 2 * np.mean(g * np.cos(k * t))
    as_ = 2 * np.mean(g * np.sin(k * t))
    return float(np.hypot(ac, as_)), float(np.mod(np.arctan2(as_, ac) / k, 2 * np.pi / k))


def fit_polynomial(result, k, lower=False, nuisance=1):
    """Least-squares fit of ``lambda_0 - lambda_a`` by a degree-k homogeneous polynomial.

    ``nuisance`` extra degrees k+1, ..., k+nuisance absorb the o(|a|^k)
    remainder; ``lower=True`` also fits all degrees below k, whose
    coefficients and error bars are reported in ``other``/``other_err``.
    Error bars propagate the per-row extrapolation errors through the
    least-squares solution; ``other_se`` holds the regression standard errors.
    """
    rows = [r for r in result.rows if r.ok]
    a1 = np.array([r.rho * np.cos(r.alpha) for r in rows])
    a2 = np.array([r.rho * np.sin(r.alpha) for r in rows])
    y = np.array([r.diff for r in rows])
    e = np.array([r.diff_error for r in rows])
    degrees = (list(range(k)) if lower else []) + [k] + list(range(k + 1, k + 1 + nuisance))
    blocks = [monomials(a1, a2, d) for d in degrees]
    X = np.concatenate(blocks, axis=1)
    if len(y) < 2 * (k + 1) or np.linalg.matrix_rank(X) < X.shape[1]:
        raise np.linalg.LinAlgError("rank-deficient design")
    pinv = np.linalg.pinv(X)
    c = pinv @ y
    resid = y - X @ c
    dof = max(len(y) - X.shape[1], 1)
    s2 = resid @ resid / dof
    cov = s2 * pinv @ pinv.T
    prop = np.sqrt((pinv ** 2) @ (e ** 2))
    se = np.sqrt(np.diag(cov))
    pos, parts, perr, pse = 0, {}, {}, {}
    for d, B in zip(degrees, blocks):
        w = B.shape[1]
        parts[d], perr[d], pse[d] = c[pos:pos + w], prop[pos:pos + w], se[pos:pos + w]
        pos += w
    P = parts[k]
    C0, a0 = cosine_form(P, k)
    lap = laplacian_coeffs(P)
    hd = float(np.linalg.norm(lap) / np.linalg.norm(P)) if len(lap) else 0.0
    other = {d: parts[d] for d in degrees if d != k}
    return PolyFit(k, P, C0, a0, float(np.sqrt(np.mean(resid ** 2))), hd, other,
                   {d: perr[d] for d in other}, {d: pse[d] for d in other}, len(y))


def cosine_poly_coeffs(C0, alpha0, k):
    """Coefficients of ``C0 Re(exp(-i k alpha0) (a1 + i a2)^k)``."""
    from math import comb

    z = np.array([comb(k, j) * (1j) ** j for j in range(k + 1)])
    return C0 * (np.exp(-1j * k * alpha0) * z).real


def check_theorem(fit, expansion, mk, mk_error=0.0, lower_fit=None, c0_tol=0.1,
                  alpha_tol=0.05, harm_tol=0.05, zero_factor=3.0):
    """Compare the fitted variation with ``C0 = -4(|b1|^2 + |b2|^2) m_k / pi``.

    ``lower_fit`` (a fit with ``lower=True``) supplies the lower-degree parts
    that must be statistically zero.
    """
    if fit.k != expansion.k:
        raise ValueError("fit and expansion disagree on k")
    k = fit.k
    pred = -4 * expansion.beta_sq * mk / np.pi
    rel = abs(fit.C0 - pred) / abs(pred)
    da = float(_angdist(fit.alpha0_fit, expansion.alpha0, 2 * np.pi / k))
    recon = cosine_poly_coeffs(fit.C0, fit.alpha0_fit, k)
    report = {
        "k": k,
        "C0_fit": fit.C0,
        "C0_pred": float(pred),
        "C0_rel_error": float(rel),
        "beta_sq": expansion.beta_sq,
        "m_k": float(mk),
        "m_k_error": float(mk_error),
        "alpha0_fit": fit.alpha0_fit,
        "alpha0_expansion": expansion.alpha0,
        "alpha0_diff": da,
        "harmonicity_defect": fit.harmonicity_defect,
        "reconstruction_max_diff": float(np.max(np.abs(recon - fit.coeffs))),
        "fit_rms": fit.rms,
        "pass_C0": bool(rel <= c0_tol),
        "pass_alpha0": bool(da <= alpha_tol),
        "pass_harmonic": bool(fit.harmonicity_defect <= harm_tol),
    }
    if lower_fit is not None:
        zero = True
        for d, c in lower_fit.other.items():
            if d >= k:
                continue
            err = lower_fit.other_err[d]
            report[f"degree{d}_coeffs"] = [float(x) for x in c]
            report[f"degree{d}_errbar"] = [float(x) for x in err]
            zero &= bool(np.all(np.abs(c) <= zero_factor * err))
        report["pass_lower_zero"] = zero
    report["pass"] = all(v for key, v in report.items() if key.startswith("pass_"))
    return report


def expansion_from_sweep(result, radii=(0.0625, 0.09375, 0.125), order=1.0):
    """Local expansion at the base pole with |beta|^2 extrapolated in h.

    At each h the coefficients are read off circles with the Bessel radial
    factor divided out; |beta|^2 is then extrapolated, and the finest-h
    coefficients are rescaled to it.
    """
    hs = sorted(result.base, reverse=True)
    exps = [extract_expansion(g, p.vector, result.config.b, radii, lam=p.value)
            for g, p in (result.base[h] for h in hs)]
    fine = exps[-1]
    if len(hs) > 1:
        ext = richardson_extrapolate([(h, e.beta_sq) for h, e in zip(hs, exps)], order)
        bsq, err = float(ext.limit), ext.error
    else:
        bsq, err = fine.beta_sq, 0.0
    s = np.sqrt(bsq / fine.beta_sq)
    out = LocalExpansion(fine.k, fine.beta1 * s, fine.beta2 * s,
                         alpha0_from_betas(fine.beta1, fine.beta2, fine.k),
                         fine.reality_defect, fine.fit_residual,
                         {"beta_sq_by_h": {h: e.beta_sq for h, e in zip(hs, exps)},
                          "beta_sq_error": err})
    return out
