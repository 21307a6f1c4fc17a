"""Batch front-end: ground-state / evolve / sweep / fit / validate.

Exit codes: 0 ok, 1 validation failure, 2 config error, 3 solver
non-convergence, 4 perturbation breakdown.
"""

from __future__ import annotations

import argparse
import hashlib
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, analytic
from .config import (ScaledConfig, config_from_dict, parse_key_values,
                     to_internal, with_N, _NUMERIC_KEYS, _PHYS_KEYS)
from .deviation import fit_parameter, sweep_deviations
from .errors import (BmlabError, ConfigError, ConvergenceError,
                     PerturbationBreakdownError)
from .grids import default_box, default_box_1d, density_to_csv, save_field
from .grids import marginal_longitudinal, marginal_transverse_x
from .solver import ground_state_3d, propagate_coupled
from .analytic import (build_model, eta_T_gaussian, gamma_T_cigar,
                       gamma_T_series, eta_L_tf, radial_grid, thomas_fermi,
                       xi_n0)
from .deviation import period_tau


def _load_settings(args):
    values = {}
    if args.config:
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                values = parse_key_values(fh, source=args.config)
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
    for item in args.override or []:
        if "=" not in item:
            raise ConfigError(f"--override expects key=value, got {item!r}")
        values.update(parse_key_values([item], source="--override"))
    if args.seed is not None:
        values["seed"] = args.seed
    cfg, numeric = config_from_dict(values)
    return cfg, numeric, values


def _resolved_lines(cfg, numeric):
    lines = []
    from .constants import AMU, A_BOHR
    phys = {
        "mass_amu": cfg.mass / AMU,
        "omega_T_hz": cfg.omega_T / (2 * math.pi),
        "omega_L_hz": cfg.omega_L / (2 * math.pi),
        "a12_bohr": cfg.a12 / A_BOHR,
        "ratio_a11": cfg.a11 / cfg.a12,
        "ratio_a22": cfg.a22 / cfg.a12,
        "N": cfg.N,
    }
    for k in sorted({**phys, **numeric}):
        v = phys.get(k, numeric.get(k))
        lines.append(f"{k}={v!r}")
    return lines


def _config_hash(lines):
    return hashlib.sha256("\n".join(lines).encode()).hexdigest()[:16]


def _header(numeric, lines):
    return [f"bmlab {__version__}",
            f"config_sha256={_config_hash(lines)}",
            f"seed={numeric['seed']}",
            "units: t_si [s], lengths [lT], times [1/omega_T], "
            "energies [hbar*omega_T]"]


def _grids(s: ScaledConfig, numeric):
    eta_T = eta_T_gaussian(s.rho0)
    geff = (s.N - 1) * s.g11 * eta_T
    z_tf = (1.5 * geff / s.lam**2) ** (1.0 / 3.0)
    g3 = default_box(s.lam, z_tf,
                     (numeric["grid_nx"], numeric["grid_ny"],
                      numeric["grid_nz"]))
    g1 = default_box_1d(s.lam, z_tf, numeric["grid_n1d"])
    return g3, g1


def _write_manifest(outdir: Path, artifacts, lines, numeric):
    with open(outdir / "manifest.txt", "w", encoding="utf-8") as fh:
        fh.write(f"# bmlab {__version__} manifest\n")
        fh.write(f"# config_sha256={_config_hash(lines)}\n")
        fh.write(f"# seed={numeric['seed']}\n")
        fh.write("[config]\n")
        for line in lines:
            fh.write(line + "\n")
        fh.write("[artifacts]\n")
        for a in artifacts:
            fh.write(str(a) + "\n")


def cmd_ground_state(args):
    cfg, numeric, _ = _load_settings(args)
    s = to_internal(cfg)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    grid3, _ = _grids(s, numeric)
    gs = ground_state_3d(s, grid3, dt=numeric["dt_imag"], tol=numeric["tol"])
    lines = _resolved_lines(cfg, numeric)
    hdr = _header(numeric, lines)
    arts = []
    fpath = outdir / "ground_state_3d.bmlf"
    save_field(fpath, gs.field)
    arts.append(fpath)
    gz, qz = marginal_longitudinal(gs.field)
    gx, qx = marginal_transverse_x(gs.field)
    for name, (g, q) in (("marginal_z.csv", (gz, qz)),
                         ("marginal_x.csv", (gx, qx))):
        p = outdir / name
        density_to_csv(p, g, q, header_lines=hdr)
        arts.append(p)
    print(f"mu = {gs.mu!r} (internal), residual = {gs.residual:.3e}, "
          f"iterations = {gs.iterations}")
    _write_manifest(outdir, arts, lines, numeric)
    return 0


def cmd_evolve(args):
    cfg, numeric, _ = _load_settings(args)
    s = to_internal(cfg)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    grid3, grid1 = _grids(s, numeric)
    model1 = build_model("T1", s, grid1)
    t_end = numeric["t_end"] or 1.05 * period_tau(model1)
    gs = ground_state_3d(s, grid3, dt=numeric["dt_imag"], tol=numeric["tol"])
    traj = propagate_coupled(gs.field, s, t_end, dt=numeric["dt_real"],
                             sample_every=numeric["sample_every"])
    if numeric["noise_amp"] > 0:
        rng = np.random.default_rng(numeric["seed"])
        noisy = traj.overlap + 1j * rng.normal(
            0.0, numeric["noise_amp"], size=traj.overlap.size)
        im = np.clip(np.imag(noisy), -1.0, 1.0)
        from .solver import Trajectory
        traj = Trajectory(times=traj.times, overlap=noisy,
                          p1=0.5 * (1 + im), p2=0.5 * (1 - im))
    lines = _resolved_lines(cfg, numeric)
    path = outdir / "trajectory.csv"
    traj.to_csv(path, s.omega_T, header_lines=_header(numeric, lines))
    _write_manifest(outdir, [path], lines, numeric)
    print(f"wrote {path} ({traj.times.size} samples, "
          f"t_end = {t_end!r} internal)")
    return 0


def cmd_sweep(args):
    cfg, numeric, _ = _load_settings(args)
    s = to_internal(cfg)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    N_list = args.N or [cfg.N]
    rows, errors = sweep_deviations(
        s, N_list,
        n3d=(numeric["grid_nx"], numeric["grid_ny"], numeric["grid_nz"]),
        dt_imag=numeric["dt_imag"], tol=numeric["tol"],
        dt_real=numeric["dt_real"], sample_every=numeric["sample_every"],
        t_end=numeric["t_end"] or None)
    lines = _resolved_lines(cfg, numeric)
    path = outdir / "deviations.csv"
    with open(path, "w", encoding="utf-8") as fh:
        for line in _header(numeric, lines):
            fh.write(f"# {line}\n")
        fh.write("N,D1,D2,D3,tau,eta_T,eta_L,eta_L_corr\n")
        for r in rows:
            fh.write(f"{r.N},{r.D1!r},{r.D2!r},{r.D3!r},{r.tau!r},"
                     f"{r.eta_T!r},{r.eta_L!r},{r.eta_L_corr!r}\n")
    _write_manifest(outdir, [path], lines, numeric)
    for N, exc in errors:
        print(f"N={N}: {type(exc).__name__}: {exc}", file=sys.stderr)
    if not rows:
        raise errors[0][1] if errors else ConfigError("empty sweep")
    return 0


def cmd_fit(args):
    cfg, numeric, _ = _load_settings(args)
    s = to_internal(cfg)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    times, o_imag = [], []
    with open(args.data, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#") or line.startswith("t_si"):
                continue
            parts = line.strip().split(",")
            if len(parts) < 4:
                continue
            times.append(float(parts[1]))
            o_imag.append(float(parts[3]))
    _, grid1 = _grids(s, numeric)
    res = fit_parameter(np.asarray(times), np.asarray(o_imag),
                        args.model, s, grid1)
    lines = _resolved_lines(cfg, numeric)
    path = outdir / "fit_report.txt"
    from .constants import A_BOHR
    with open(path, "w", encoding="utf-8") as fh:
        for line in _header(numeric, lines):
            fh.write(f"# {line}\n")
        fh.write(f"model={args.model}\n")
        fh.write(f"a22_hat_m={res.a22_hat!r}\n")
        fh.write(f"a22_hat_bohr={res.a22_hat / A_BOHR!r}\n")
        fh.write(f"gamma1_hat_si={res.gamma1_hat!r}\n")
        fh.write(f"sse={res.sse!r}\n")
        fh.write(f"iterations={res.iterations}\n")
        fh.write(f"converged={res.converged}\n")
        fh.write(f"at_boundary={res.at_boundary}\n")
    _write_manifest(outdir, [path], lines, numeric)
    print(f"a22_hat = {res.a22_hat / A_BOHR:.6f} a_Bohr, sse = {res.sse:.3e}")
    return 0


def cmd_validate(args):
    cfg, numeric, _ = _load_settings(args)
    s = to_internal(cfg)
    checks = []

    eta_T = eta_T_gaussian(s.rho0)
    closed = gamma_T_cigar(eta_T)
    series = gamma_T_series(eta_T, n_terms=40)
    checks.append(("GammaT series vs ln(4/3) closed form",
                   abs(series - closed) / closed, 1e-10))

    rho, w = radial_grid(10.0, 400)
    xi0 = xi_n0(0, rho)
    ok = 0.0
    for n in range(1, 11):
        quad = float(np.sum(xi_n0(n, rho) * xi0**3 * 2 * math.pi * rho * w))
        ok = max(ok, abs(quad - eta_T / 2.0**n) / (eta_T / 2.0**n))
    checks.append(("<xi_n|xi_0^3> = eta_T/2^n (n=1..10)", ok, 1e-10))

    # self-test uses its own fixed resolution; user grid overrides only
    # affect the production commands
    geff_box = (s.N - 1) * s.g11 * eta_T
    z_tf_box = (1.5 * geff_box / s.lam**2) ** (1.0 / 3.0)
    grid1 = default_box_1d(s.lam, z_tf_box, 8192)
    tf = thomas_fermi(s, eta_T, grid1)
    geff = (s.N - 1) * s.g11 * eta_T
    norm_closed = (2.0 * tf.mu_L * tf.z_N - s.lam**2 * tf.z_N**3 / 3.0) / geff
    checks.append(("TF norm (closed form)", abs(norm_closed - 1.0), 1e-12))
    checks.append(("TF norm (quadrature)",
                   abs(np.sum(tf.q0) * grid1.dz - 1.0), 1e-6))
    checks.append(("TF q0(0) z_N = 3/4",
                   abs(tf.q0[grid1.n // 2] * tf.z_N - 0.75), 1e-10))
    checks.append(("TF eta_L z_N = 3/5",
                   abs(eta_L_tf(tf) * tf.z_N - 0.6), 1e-10))
    checks.append(("TF mu_L identity",
                   abs(tf.mu_L - 0.5 * s.lam**2 * tf.z_N**2), 1e-12))
    printed = analytic.eta_L_printed_form(s)
    print(f"# diagnostic: eta_L self-consistent = {eta_L_tf(tf)!r}, "
          f"literature coefficient form = {printed!r} "
          f"(ratio {eta_L_tf(tf) / printed!r})")

    from .grids import Grid1D
    from .solver import ground_state_reduced_1d
    import dataclasses
    s_lin = dataclasses.replace(s, lam=0.1)
    g_small = Grid1D(n=512, z_half=40.0)
    gs = ground_state_reduced_1d(s_lin, eta_T, g_small, dt=2e-3, tol=1e-12,
                                 g_override=0.0)
    gauss = (s_lin.lam / math.pi) ** 0.25 * np.exp(
        -0.5 * s_lin.lam * g_small.z**2)
    l2 = math.sqrt(float(np.sum(np.abs(gs.field.values - gauss) ** 2))
                   * g_small.dz)
    checks.append(("g=0 1D ground state vs Gaussian (L2)", l2, 1e-6))
    checks.append(("g=0 1D chemical potential = omega_L/2",
                   abs(gs.mu - 0.5 * s_lin.lam), 1e-8))

    failed = 0
    for name, err, tol in checks:
        status = "PASS" if err <= tol else "FAIL"
        if status == "FAIL":
            failed += 1
        print(f"{status}  {name}: err={err:.3e} tol={tol:g}")
    return 1 if failed else 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="bmlab",
        description="Two-mode BEC metrology toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="keyed text configuration file")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--override", action="append", metavar="KEY=VALUE",
                       help="override a config key (repeatable)")

    p = sub.add_parser("ground-state", help="solve the 3D GP ground state")
    common(p)
    p.set_defaults(func=cmd_ground_state)

    p = sub.add_parser("evolve", help="simulate the two-mode overlap signal")
    common(p)
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("sweep", help="deviation metrics over an N list")
    common(p)
    p.add_argument("--N", type=int, nargs="+", help="atom numbers")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("fit", help="one-parameter a22 fit of a trajectory")
    common(p)
    p.add_argument("--data", required=True, help="trajectory CSV")
    p.add_argument("--model", default="T3", choices=["T1", "T2", "T3"])
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("validate", help="run the analytic invariant suite")
    common(p)
    p.set_defaults(func=cmd_validate)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ConvergenceError as exc:
        print(f"solver non-convergence: {exc}", file=sys.stderr)
        return 3
    except PerturbationBreakdownError as exc:
        print(f"perturbation breakdown: {exc}", file=sys.stderr)
        return 4
    except BmlabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
