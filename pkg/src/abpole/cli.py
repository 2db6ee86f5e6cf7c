"""Command line entry point.

    abpole COMMAND [--config PATH] [--out DIR] [--jobs N] [--seed N]

Commands: eig, sweep, mk, profile, falpha, fit, identities, report. Each
reads its own table of a TOML config (all keys optional) and writes CSV
tables, two-column plot files and ``manifest.json`` into the output
directory.

Exit status: 0 success, 2 configuration error, 3 solver failure,
4 acceptance failure.
"""

import argparse
import csv
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np
import tomli

from . import __version__
from .asymptotics import (SweepConfig, SweepRow, SweepResult, check_theorem, cosine_form,
                          directional_limit, expansion_from_sweep, fit_polynomial, run_sweep)
from .discrete_operator import DomainSpec, assemble_ab_laplacian, build_grid
from .eigensolve import (EigenSolveError, LinearSolveError, clusters, richardson_extrapolate,
                         smallest_eigenpairs)
from .identities import HomogeneousPoly, direction_rank, factor_roots, sin_product
from .limit_profile import (ProfileProblem, blowup_sequence, compute_upsilon, kappa_tilde,
                            solve_wR, xi_and_f)
from .slit_halfplane import compute_mk

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_ACCEPT = 0, 2, 3, 4
COMMANDS = ("eig", "sweep", "mk", "profile", "falpha", "fit", "identities", "report")

DEFAULTS = {
    "domain": {"shape": "disk", "center": [0.0, 0.0], "radius": 1.0,
               "lo": [0.0, 0.0], "hi": [1.0, 1.0]},
    "eig": {"pole": [0.0, 0.0], "h": [1 / 64, 1 / 128], "count": 3, "order": 1.0},
    "sweep": {"b": [0.3, 0.0], "n0": 1, "radii": [0.02, 0.03, 0.045, 0.0675],
              "n_angles": 16, "h": [1 / 128, 1 / 256], "boundary": "fitted"},
    "mk": {"k": [1, 3], "h": [1 / 16, 1 / 32], "R": [4.0, 8.0, 16.0]},
    "profile": {"k": 1, "alpha": 0.0, "R": 8.0, "h": 1 / 16, "n_r": 15},
    "falpha": {"k": 1, "n_angles": 12, "R": [4.0, 8.0], "h": [1 / 8, 1 / 16, 1 / 32]},
    "fit": {"k": 1, "sweep_csv": "sweep.csv", "b": [0.3, 0.0]},
    "report": {"k": 1, "beta_radii": [0.0625, 0.09375, 0.125],
               "blowup_steps": [32, 16, 8, 4], "blowup_R": 8.0},
}


class ConfigError(ValueError):
    pass


class AcceptanceFailure(RuntimeError):
    pass


def load_config(path):
    cfg = json.loads(json.dumps(DEFAULTS))
    raw = b""
    if path is not None:
        try:
            raw = Path(path).read_bytes()
            user = tomli.loads(raw.decode())
        except (OSError, tomli.TOMLDecodeError, UnicodeDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        for section, table in user.items():
            if section not in cfg or not isinstance(table, dict):
                raise ConfigError(f"unknown config section [{section}]")
            for key, val in table.items():
                if key not in cfg[section]:
                    raise ConfigError(f"unknown key {section}.{key}")
                cfg[section][key] = val
    return cfg


def domain_from(cfg):
    d = cfg["domain"]
    try:
        if d["shape"] == "disk":
            return DomainSpec.disk(tuple(d["center"]), float(d["radius"]))
        if d["shape"] == "rectangle":
            return DomainSpec.rectangle(tuple(d["lo"]), tuple(d["hi"]))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    raise ConfigError(f"unsupported domain shape {d['shape']!r}")


def fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".12g")
    return str(v)


class Emitter:
    """Collects output files and the run manifest."""

    def __init__(self, out, command, cfg, seed, jobs):
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.files = []
        canon = json.dumps(cfg, sort_keys=True).encode()
        self.manifest = {
            "command": command, "version": __version__, "seed": seed, "jobs": jobs,
            "config": cfg, "config_sha256": hashlib.sha256(canon).hexdigest(),
            "grids": {}, "timings": {}, "started": time.strftime("%Y-%m-%dT%H:%M:%S"),
        }

    def csv(self, name, header, rows):
        path = self.out / name
        try:
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(header)
                for r in rows:
                    w.writerow([fmt(v) for v in r])
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc}") from exc
        self.files.append(name)
        return path

    def plot(self, name, x, y):
        path = self.out / name
        with open(path, "w") as fh:
            for a, b in zip(x, y):
                fh.write(f"{fmt(a)} {fmt(b)}\n")
        self.files.append(name)
        return path

    def text(self, name, content):
        (self.out / name).write_text(content)
        self.files.append(name)

    def finish(self, status):
        self.manifest["status"] = status
        self.manifest["files"] = {
            f: hashlib.sha256((self.out / f).read_bytes()).hexdigest() for f in self.files}
        (self.out / "manifest.json").write_text(json.dumps(self.manifest, indent=2, sort_keys=True))


def cmd_eig(cfg, em, args):
    c = cfg["eig"]
    dom = domain_from(cfg)
    pole = tuple(c["pole"])
    hs = sorted(map(float, c["h"]), reverse=True)
    rows, by_idx = [], {}
    for h in hs:
        t = time.time()
        grid = build_grid(dom, h, anchor=pole)
        op = assemble_ab_laplacian(grid, pole, gauge="cut", allow_outside=True)
        pairs = smallest_eigenpairs(op, int(c["count"]), seed=args.seed)
        mult = {i: len(g) for g in clusters(pairs, 1e-6) for i in g}
        for i, p in enumerate(pairs):
            rows.append((h, i + 1, p.value, mult[i], p.residual_norm))
            by_idx.setdefault(i + 1, []).append((h, p.value))
        em.manifest["grids"][f"h={h:g}"] = grid.n
        em.manifest["timings"][f"h={h:g}"] = round(time.time() - t, 3)
    em.csv("eig.csv", ["h", "index", "eigenvalue", "multiplicity", "residual"], rows)
    ext = []
    if len(hs) > 1:
        for i, s in by_idx.items():
            r = richardson_extrapolate(s, model_order=float(c["order"]))
            ext.append((i, float(np.real(r.limit)), r.error, r.flagged))
    em.csv("eig_extrapolated.csv", ["index", "limit", "error", "flagged"], ext)
    return EXIT_OK


def sweep_config(cfg, args):
    c = cfg["sweep"]
    n = int(c["n_angles"])
    return SweepConfig(domain_from(cfg), tuple(map(float, c["b"])), int(c["n0"]),
                       tuple(map(float, c["radii"])), tuple(2 * np.pi * np.arange(n) / n),
                       tuple(map(float, c["h"])), c["boundary"], jobs=args.jobs, seed=args.seed)


SWEEP_HEADER = ["alpha", "rho", "target_alpha", "target_rho", "h_coarse", "lam_coarse",
                "h_fine", "lam_fine", "diff", "diff_error", "lam", "ok"]


def emit_sweep(em, res):
    hs = sorted(res.lam0_by_h, reverse=True)
    rows = [(r.alpha, r.rho, r.target_alpha, r.target_rho, hs[0], r.lam_by_h[hs[0]], hs[-1],
             r.lam_by_h[hs[-1]], r.diff, r.diff_error, r.lam, r.ok) for r in res.rows]
    em.csv("sweep.csv", SWEEP_HEADER, rows)
    em.csv("sweep_base.csv", ["h", "lambda0"], [(h, res.lam0_by_h[h]) for h in hs]
           + [(0.0, res.lam0)])
    em.manifest["timings"]["sweep"] = round(res.timings.get("total", 0.0), 3)


def read_sweep(path, b):
    rows, base = [], {}
    try:
        with open(path, newline="") as fh:
            for d in csv.DictReader(fh):
                rows.append(SweepRow(float(d["alpha"]), float(d["rho"]), float(d["target_alpha"]),
                                     float(d["target_rho"]), {}, float(d["diff"]),
                                     float(d["diff_error"]), float(d["lam"]), d["ok"] == "1"))
    except OSError as exc:
        raise ConfigError(f"cannot read sweep table {path}: {exc}") from exc
    return SweepResult(SweepConfig(b=tuple(b)), np.nan, 0.0, base, np.nan, rows)


def cmd_sweep(cfg, em, args):
    res = run_sweep(sweep_config(cfg, args))
    emit_sweep(em, res)
    return EXIT_OK


def cmd_mk(cfg, em, args):
    c = cfg["mk"]
    ks = [args.k] if args.k is not None else [int(k) for k in np.atleast_1d(c["k"])]
    raw, ext = [], []
    for k in ks:
        t = time.time()
        r = compute_mk(k, tuple(map(float, c["h"])), tuple(map(float, c["R"])), jobs=args.jobs)
        em.manifest["timings"][f"mk k={k}"] = round(time.time() - t, 3)
        raw += [(x["k"], x["h"], x["R"], x["m_energy"], x["m_boundary"]) for x in r.rows]
        for route, e in (("energy", r.energy), ("boundary", r.boundary)):
            ext.append((k, route, float(np.real(e.limit)), e.error, e.flagged))
    em.csv("mk.csv", ["k", "h", "R", "m_energy", "m_boundary"], raw)
    em.csv("mk_extrapolated.csv", ["k", "route", "m_k", "error", "flagged"], ext)
    return EXIT_OK


def cmd_profile(cfg, em, args):
    c = cfg["profile"]
    k = args.k if args.k is not None else int(c["k"])
    prob = ProfileProblem(k, float(c["alpha"]), float(c["R"]), float(c["h"]))
    t = time.time()
    sol = solve_wR(prob)
    em.manifest["grids"]["profile"] = sol.grid.n
    em.manifest["timings"]["profile"] = round(time.time() - t, 3)
    r = np.linspace(1.0, prob.R, int(c["n_r"]))
    u = compute_upsilon(sol, r)
    A, B = sol.closed_form()
    cf = A * r ** (0.5 * k) + B * r ** (-0.5 * k)
    em.csv("upsilon.csv", ["r", "re_upsilon", "im_upsilon", "re_closed_form", "im_closed_form"],
           [(a, b.real, b.imag, c_.real, c_.imag) for a, b, c_ in zip(r, u, cf)])
    kap = kappa_tilde(sol)
    xi = sol.xi_estimate()
    em.csv("profile.csv", ["k", "alpha", "R", "h", "re_upsilon1", "im_upsilon1", "re_xi_est",
                           "im_xi_est", "re_kappa", "im_kappa"],
           [(k, prob.alpha, prob.R, prob.h, sol.upsilon1.real, sol.upsilon1.imag,
             xi.real, xi.imag, kap.real, kap.imag)])
    em.plot("upsilon_plot.txt", r, u.real)
    return EXIT_OK


def cmd_falpha(cfg, em, args):
    c = cfg["falpha"]
    k = args.k if args.k is not None else int(c["k"])
    n = int(c["n_angles"])
    alphas = 2 * np.pi * np.arange(n) / n
    rows, fin = [], []
    t = time.time()
    for a in alphas:
        fa = xi_and_f(k, a, tuple(map(float, c["R"])), tuple(map(float, c["h"])), jobs=args.jobs)
        for R, e in fa.by_R.items():
            for h, v in zip(e.params, e.values):
                rows.append((k, a, R, h, v.real, v.imag, v.real - fa.sqrt_pi))
        fin.append((k, a, "inf", 0.0, fa.xi.real, fa.xi.imag, fa.value))
    em.manifest["timings"]["falpha"] = round(time.time() - t, 3)
    em.csv("falpha.csv", ["k", "alpha", "R", "h", "re_xi", "im_xi", "f"], rows + fin)
    f = np.array([r[-1] for r in fin])
    amp = 2 * np.mean(f * np.cos(k * alphas))
    em.plot("falpha_plot.txt", alphas, f)
    fine = np.linspace(0, 2 * np.pi, 361)
    em.plot("falpha_fit.txt", fine, amp * np.cos(k * fine))
    return EXIT_OK


def emit_fit(em, fit, low, k):
    rows = [(k, j, c) for j, c in enumerate(fit.coeffs)]
    em.csv("fit.csv", ["degree", "j", "coeff"], rows
           + [(d, j, c) for d, cs in sorted(low.other.items()) if d < k for j, c in enumerate(cs)])
    em.csv("fit_summary.csv", ["k", "C0", "alpha0_fit", "rms", "harmonicity_defect", "n_points"],
           [(k, fit.C0, fit.alpha0_fit, fit.rms, fit.harmonicity_defect, fit.n_points)])
    t = np.linspace(0, 2 * np.pi, 361)
    em.plot("fit_overlay.txt", t, fit.C0 * np.cos(k * (t - fit.alpha0_fit)))


def cmd_fit(cfg, em, args):
    c = cfg["fit"]
    k = int(c["k"])
    path = Path(c["sweep_csv"])
    if not path.is_absolute():
        path = em.out / path
    res = read_sweep(path, c["b"])
    fit = fit_polynomial(res, k)
    low = fit_polynomial(res, k, lower=True)
    emit_fit(em, fit, low, k)
    sel = sorted({round(r.alpha, 12) for r in res.rows})
    lims = []
    for a in sel:
        try:
            lims.append((a, float(np.real(directional_limit(res, a, k).limit))))
        except ValueError:
            pass
    if lims:
        em.plot("directional_limits.txt", *zip(*lims))
    return EXIT_OK


def cmd_identities(cfg, em, args):
    rng = np.random.default_rng(args.seed)
    rows, ok = [], True
    alphas = rng.uniform(0, 2 * np.pi, 1000)
    for k in (1, 3, 5, 7, 9):
        err = float(np.max(np.abs(sin_product(k, alphas) - 2.0 ** (1 - k) * np.cos(k * alphas))))
        rows.append((f"sin_product k={k}", err, err <= 1e-12))
    thetas = rng.uniform(0, 2 * np.pi, 20)
    bad = 0
    for k in (1, 3, 5, 7, 9):
        for hdeg in range(k):
            bad += sum(direction_rank(hdeg, k, t) != hdeg + 1 for t in thetas)
    rows.append(("direction_rank h<k<=9", float(bad), bad == 0))
    worst = 0.0
    for k in (1, 3, 5, 7, 9):
        a0 = rng.uniform(0, 2 * np.pi / k)
        from .asymptotics import cosine_poly_coeffs

        res = factor_roots(HomogeneousPoly(k, tuple(cosine_poly_coeffs(1.7, a0, k))))
        want = np.sort(np.mod(a0 + np.pi * (2 * np.arange(1, k + 1) - 1) / (2 * k), np.pi))
        worst = max(worst, float(np.max(np.abs(res.roots - want))) if res.consistent else np.inf)
    rows.append(("factor_roots", worst, worst <= 1e-9))
    ok = all(r[2] for r in rows)
    em.csv("identities.csv", ["check", "max_error", "pass"], rows)
    return EXIT_OK if ok else EXIT_ACCEPT


def cmd_report(cfg, em, args):
    k = int(cfg["report"]["k"])
    sc = sweep_config(cfg, args)
    res = run_sweep(sc)
    emit_sweep(em, res)
    exp = expansion_from_sweep(res, tuple(cfg["report"]["beta_radii"]))
    mk = compute_mk(k, tuple(map(float, cfg["mk"]["h"])), tuple(map(float, cfg["mk"]["R"])),
                    jobs=args.jobs)
    fit = fit_polynomial(res, k)
    low = fit_polynomial(res, k, lower=True)
    emit_fit(em, fit, low, k)
    rep = check_theorem(fit, exp, mk.value, mk.energy.error, lower_fit=low)
    for name, off in (("alpha0", 0.0), ("alpha0_plus_quarter", np.pi / (2 * k)),
                      ("alpha0_plus_half", np.pi / k)):
        rep[f"directional_{name}"] = float(np.real(
            directional_limit(res, exp.alpha0 + off, k).limit))
    roots = factor_roots(HomogeneousPoly(k, tuple(fit.coeffs)))
    rep["g_roots"] = [float(x) for x in roots.roots]
    rep["lambda0"] = res.lam0
    rep["gap"] = res.gap
    steps = [int(s) for s in cfg["report"]["blowup_steps"]]
    h_fine = min(sc.h_seq)
    blow = blowup_sequence(exp, sc.domain, sc.b, h_fine, steps, float(cfg["report"]["blowup_R"]))
    rep["blowup"] = [[m, r, d] for m, r, d in blow]
    em.csv("blowup.csv", ["m", "rho", "discrepancy"], blow)
    em.csv("theorem.csv", ["quantity", "value"],
           [(key, json.dumps(v) if isinstance(v, list) else v) for key, v in rep.items()])
    lines = [f"{key}: {v}" for key, v in rep.items()]
    em.text("report.txt", "\n".join(lines) + "\n")
    if not rep["pass"]:
        raise AcceptanceFailure("theorem check failed")
    return EXIT_OK


HANDLERS = {"eig": cmd_eig, "sweep": cmd_sweep, "mk": cmd_mk, "profile": cmd_profile,
            "falpha": cmd_falpha, "fit": cmd_fit, "identities": cmd_identities,
            "report": cmd_report}


def build_parser():
    p = argparse.ArgumentParser(prog="abpole", description=__doc__.split("\n")[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", default=None, help="TOML configuration file")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--jobs", type=int, default=1, help="parallel solves")
    p.add_argument("--seed", type=int, default=0, help="seed for start vectors and sampling")
    p.add_argument("--k", type=int, default=None, help="override k for mk/profile/falpha")
    return p


def run(command, config_path=None, out="out", jobs=1, seed=0, k=None):
    args = argparse.Namespace(command=command, config=config_path, out=out, jobs=jobs,
                              seed=seed, k=k)
    try:
        cfg = load_config(config_path)
        if jobs < 1:
            raise ConfigError("--jobs must be positive")
        em = Emitter(out, command, cfg, seed, jobs)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    t = time.time()
    try:
        status = HANDLERS[command](cfg, em, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        status = EXIT_CONFIG
    except (EigenSolveError, LinearSolveError, np.linalg.LinAlgError, RuntimeError) as exc:
        if isinstance(exc, AcceptanceFailure):
            print(f"acceptance failure: {exc}", file=sys.stderr)
            status = EXIT_ACCEPT
        else:
            print(f"solver failure: {exc}", file=sys.stderr)
            status = EXIT_SOLVER
    em.manifest["timings"]["total"] = round(time.time() - t, 3)
    em.finish(status)
    return status


def main(argv=None):
    a = build_parser().parse_args(argv)
    return run(a.command, a.config, a.out, a.jobs, a.seed, a.k)


if __name__ == "__main__":
    sys.exit(main())
