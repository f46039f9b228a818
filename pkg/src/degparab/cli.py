"""Command-line entry point ``degparab``.

Exit codes: 0 success, 1 invalid input or usage, 2 failed mathematical
check, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from .config import RunConfig, load_config
from .exceptions import CheckFailed, DegparabError, NumericalError, ValidationError
from .fields import torus_grid, uniform_grid
from .geometry import ModelGeometry
from .maxreg import MRExperiment, forcing_ensemble, mr_sweep
from .norms import NormSpec, RENORMING_SUITE, renorming_gap
from .operators import (
    check_anisotropic_ellipticity,
    check_bc_regularity,
    make_operator,
    transform,
)
from .singfun import is_strong_singularity, make_singularity
from .solver import SolveConfig, convergence_study, manufactured_forcing, model_manufactured, solve

__all__ = ["main", "run", "SUBCOMMANDS"]

SUBCOMMANDS = ("check-singularity", "check-ellipticity", "check-bc", "transform", "norms", "solve",
               "convergence", "mr-sweep")

EXIT_OK, EXIT_INVALID, EXIT_CHECK, EXIT_NUMERICAL = 0, 1, 2, 3


class _Usage(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _Usage(f"{self.format_usage()}{self.prog}: error: {message}")


# flag name -> config key; every flag defaults to None so the file value survives
_FLAGS = {
    "--m": ("m", int), "--eps": ("eps", float), "--far-boundary": ("far_boundary", str),
    "--b": ("b", str), "--b0": ("b0", float),
    "--family": ("family", str), "--s": ("s", float), "--beta": ("beta", float), "--gamma": ("gamma", float),
    "--operator": ("operator", str), "--amplitude": ("amplitude", float), "--drift": ("drift", str),
    "--chart": ("chart", str), "--t-trunc": ("t_trunc", float), "--n-t": ("n_t", int), "--n-z": ("n_z", int),
    "--dt": ("dt", float), "--theta": ("theta", float), "--horizon": ("horizon", float), "--tol": ("tol", float),
    "--p": ("p", float), "--k": ("k", int), "--form": ("form", str), "--grids": ("grids", str),
    "--kind": ("kind", str), "--mode": ("mode", str),
    "--s-values": ("s_values", str), "--p-values": ("p_values", str), "--n-seeds": ("n_seeds", int),
    "--output": ("output", str), "--seed": ("seed", int), "--forcing": ("forcing", str),
}


def _parser():
    common = _Parser(add_help=False)
    common.add_argument("--config", help="configuration file ([section] key = value)")
    for flag, (key, typ) in _FLAGS.items():
        common.add_argument(flag, dest=key, type=typ, default=None)
    common.add_argument("--no-enforce", dest="enforce", action="store_const", const=False, default=None,
                        help="skip the ellipticity refusal in transform-based commands")
    parser = _Parser(prog="degparab", description="Degenerate parabolic problems on singular manifolds.")
    sub = parser.add_subparsers(dest="subcommand", parser_class=_Parser)
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def build_config(argv):
    ns = _parser().parse_args(argv)
    if ns.subcommand is None:
        raise _Usage(_parser().format_usage() + "degparab: error: a subcommand is required")
    cfg = RunConfig(subcommand=ns.subcommand)
    if ns.config:
        load_config(ns.config, cfg)
    for key, val in vars(ns).items():
        if key in ("subcommand", "config") or val is None:
            continue
        cfg.set(key, val)
    return cfg.validate()


# -- helpers -------------------------------------------------------------------


def _R(cfg):
    params = {"s": cfg.s} if cfg.family == "power" else {"beta": cfg.beta, "gamma": cfg.gamma}
    return make_singularity(cfg.family, cfg.eps, **params)


def _bvp(cfg, R):
    b = cfg.b if cfg.far_boundary == "robin" else None
    return make_operator(cfg.operator, R, cfg.m, cfg.far_boundary, b, cfg.b0,
                         drift=cfg.drift or None, amplitude=cfg.amplitude)


def _geom(cfg):
    return ModelGeometry(cfg.m, cfg.eps, cfg.far_boundary)


def _write_csv(path, header, rows):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.17g}" if isinstance(v, (float, np.floating)) else v for v in row])


def _require_strong(R):
    rep = is_strong_singularity(R)
    if not rep.diverges:
        raise CheckFailed(f"{rep.message}; int_0^eps dy/R(y) converges")


# -- subcommands ---------------------------------------------------------------


def cmd_check_singularity(cfg, out):
    R = _R(cfg)
    rep = is_strong_singularity(R)
    _write_csv(out / "singularity.csv", ["shell", "shell_integral", "partial_sum"],
               [(i, s, p) for i, (s, p) in enumerate(zip(rep.shell_sums, rep.partial_sums))])
    print(f"{R!r}: {rep.summary()}")
    if not rep.diverges:
        raise CheckFailed(f"not a strong singularity function: {rep.message} (int_0^eps dy/R must diverge)")
    return EXIT_OK


def cmd_check_ellipticity(cfg, out):
    R = _R(cfg)
    bvp = _bvp(cfg, R)
    geom = _geom(cfg)
    s = cfg.s if cfg.family == "power" else None
    rep = check_anisotropic_ellipticity(bvp, geom, R, mode=cfg.mode, s=s)
    names = ["y"] + [f"z{i + 2}" for i in range(cfg.m - 1)]
    _write_csv(out / "ellipticity.csv", names + ["min_eig", "max_eig"], rep.rows())
    lines = [rep.summary()]
    if s is not None:
        other = "uniform" if cfg.mode == "anisotropic" else "anisotropic"
        alt = check_anisotropic_ellipticity(bvp, geom, R, mode=other, s=s)
        lines.append(alt.summary())
        _write_csv(out / "ellipticity_modes.csv", ["mode", "alpha_lower", "alpha_upper", "passed"],
                   [(r.mode, r.alpha_lower, r.alpha_upper, int(r.passed)) for r in (rep, alt)])
    print("\n".join(lines))
    if not rep.passed:
        raise CheckFailed(f"ellipticity check failed: alpha_lower={rep.alpha_lower:.6g} at "
                          f"{np.round(rep.worst_point, 12).tolist()}")
    return EXIT_OK


def cmd_check_bc(cfg, out):
    R = _R(cfg)
    _require_strong(R)
    rep = check_bc_regularity(_bvp(cfg, R), _geom(cfg), R, chart=cfg.chart, t_max=cfg.t_trunc)
    _write_csv(out / "bc_modulus.csv", ["h", "omega"], rep.modulus)
    _write_csv(out / "bc_sup.csv", ["coefficient", "sup_norm"], rep.sup_norms.items())
    print(rep.summary())
    if not rep.passed:
        raise CheckFailed("coefficients are not bc-regular")
    return EXIT_OK


def cmd_transform(cfg, out):
    R = _R(cfg)
    problem = transform(_bvp(cfg, R), _geom(cfg), R, chart=cfg.chart, t_trunc=cfg.t_trunc,
                        enforce=cfg.enforce)
    t = uniform_grid(problem.t_far, problem.t_trunc, cfg.n_t)
    axes = [t] + [torus_grid(cfg.n_z) for _ in range(cfg.m - 1)]
    mesh = np.meshgrid(*axes, indexing="ij")
    T = np.stack([g.ravel() for g in mesh], axis=-1)
    a2, a1, a0 = problem.coefficients(T)
    m = cfg.m
    names = ["t"] + [f"z{i + 2}" for i in range(m - 1)]
    names += [f"a2_{i}{j}" for i in range(m) for j in range(i, m)] + [f"a1_{i}" for i in range(m)] + ["a0"]
    rows = []
    iu = np.triu_indices(m)
    for k in range(T.shape[0]):
        rows.append(list(T[k]) + list(a2[k][iu]) + list(a1[k]) + [a0[k]])
    _write_csv(out / "transformed.csv", names, rows)
    desc = problem.describe()
    if problem.ellipticity is not None:
        desc["alpha_lower"] = problem.ellipticity.alpha_lower
    print(" ".join(f"{k}={v}" for k, v in desc.items()))
    return EXIT_OK


def cmd_norms(cfg, out):
    spec = NormSpec(cfg.k, cfg.p, form=cfg.form)
    rows = []
    for case in RENORMING_SUITE:
        d, t, gap = renorming_gap(case, cfg.n_t, spec, t_trunc=cfg.t_trunc, n_z=cfg.n_z)
        rows.append(list(case) + [d, t, gap])
        print(f"s={case[0]} a={case[1]} c={case[2]} k={case[3]}: direct={d:.12g} transformed={t:.12g} gap={gap:.3e}")
    _write_csv(out / "norms.csv", ["s", "a", "c", "k", "direct", "transformed", "relative_gap"], rows)
    return EXIT_OK


def _solve_cfg(cfg, n_t=None, dt=None):
    return SolveConfig(cfg.horizon, dt or cfg.dt, cfg.theta, n_t or cfg.n_t, cfg.n_z, cfg.p, cfg.tol)


def cmd_solve(cfg, out):
    R = _R(cfg)
    problem = transform(_bvp(cfg, R), _geom(cfg), R, chart=cfg.chart, t_trunc=cfg.t_trunc, enforce=cfg.enforce)
    scfg = _solve_cfg(cfg)
    u0 = None
    if cfg.forcing == "ensemble":
        f = forcing_ensemble(1, (cfg.seed,), cfg.m, cfg.n_t, cfg.n_z, problem.t_far, problem.t_trunc,
                             cfg.horizon)[0]
    elif cfg.forcing == "manufactured":
        ms = model_manufactured(problem.t_far, problem.t_trunc, cfg.m)
        f = manufactured_forcing(problem, ms)
        t = uniform_grid(problem.t_far, problem.t_trunc, cfg.n_t)
        mesh = np.meshgrid(t, *[torus_grid(cfg.n_z)] * (cfg.m - 1), indexing="ij")
        u0 = ms.u(0.0, *mesh)
    else:
        f = None
    rep = solve(problem, f, u0, scfg)
    rep.write(out)
    solver_lines = (out / "config.txt").read_text().splitlines()
    (out / "config.txt").write_text(cfg.echo() + "\n# solver\n" + "".join(f"# {ln}\n" for ln in solver_lines))
    print(" ".join(f"{k}={v:.6g}" for k, v in rep.norms().items()))
    return EXIT_OK


def cmd_convergence(cfg, out):
    R = _R(cfg)
    problem = transform(_bvp(cfg, R), _geom(cfg), R, chart=cfg.chart, t_trunc=cfg.t_trunc, enforce=cfg.enforce)
    ms = model_manufactured(problem.t_far, problem.t_trunc, cfg.m)
    if cfg.kind == "space":
        ladder = [SolveConfig(cfg.horizon, cfg.dt, cfg.theta, n, max(3, n // 4), cfg.p, cfg.tol) for n in cfg.grids]
        table = convergence_study(problem, ms, ladder, "space")
    else:
        ladder = [_solve_cfg(cfg, dt=cfg.dt * 2.0**-i) for i in range(len(cfg.grids))]
        table = convergence_study(problem, ms, ladder, "time", reference="fine-dt")
    table.write(out / "convergence.csv")
    for r in table.rows:
        print(f"h={r['h']:.4g} dt={r['dt']:.4g} error={r['error']:.4e} order={r['order']:.3f}")
    print(f"least-squares order={table.order:.3f} flagged={table.flagged}")
    if table.flagged:
        raise CheckFailed(f"observed order {table.order:.3f} below the scheme's nominal order")
    return EXIT_OK


def cmd_mr_sweep(cfg, out):
    exp = MRExperiment(family=cfg.operator, s_values=cfg.s_values, p_values=cfg.p_values, grids=cfg.grids,
                       m=cfg.m, n_seeds=cfg.n_seeds, master_seed=cfg.seed, horizon=cfg.horizon,
                       theta=cfg.theta, t_trunc=cfg.t_trunc, enforce=cfg.enforce, eps=cfg.eps)
    table = mr_sweep(exp)
    table.write(out / "mr_table.csv")
    for r in table.rows:
        print(f"s={r['s']} p={r['p']} n={r['n_grid']} max_q={r['max_q']:.6g} median_q={r['median_q']:.6g} "
              f"stable={r['stable_flag']} {r['status']}")
    refused = [r for r in table.rows if r["status"] == "refused"]
    if refused:
        raise CheckFailed(refused[0]["error"])
    if any(r["status"] == "failed" for r in table.rows):
        raise NumericalError("one or more sweep cells failed")
    if table.any_unstable:
        raise CheckFailed("maximal-regularity quotient grows under refinement")
    return EXIT_OK


_COMMANDS = {
    "check-singularity": cmd_check_singularity,
    "check-ellipticity": cmd_check_ellipticity,
    "check-bc": cmd_check_bc,
    "transform": cmd_transform,
    "norms": cmd_norms,
    "solve": cmd_solve,
    "convergence": cmd_convergence,
    "mr-sweep": cmd_mr_sweep,
}


def run(argv=None):
    """Execute one subcommand; returns the exit code."""
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cfg = build_config(argv)
    except _Usage as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_INVALID
    except ValidationError as exc:
        print(f"degparab: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    out = Path(cfg.output)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.txt").write_text(cfg.echo())
        return _COMMANDS[cfg.subcommand](cfg, out)
    except ValidationError as exc:
        print(f"degparab: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except CheckFailed as exc:
        print(f"degparab: check failed: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"degparab: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except DegparabError as exc:
        print(f"degparab: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
