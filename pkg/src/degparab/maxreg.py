"""Discrete maximal-regularity quotients and refinement sweeps.

For ``u(0) = 0`` the quotient is

    q(f) = (|d_tau u|_{L_p(J, L_p)} + |u|_{L_p(J, W^2_p)}) / |f|_{L_p(J, L_p)}

with all norms taken on the strip grid.  A bounded family of quotients
under grid refinement is the observable counterpart of maximal
regularity; a growing one points at a defect in the operator (or in the
discretization).

The forcing ensemble is a random cosine series whose frequency band
widens with the grid, so finer levels probe rougher data.  Seeds depend
only on the master seed, the (s, p) cell index and the sample index, so
every grid level of a cell sees the same draws.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import CheckFailed, DegparabError, UndefinedQuotientError, ValidationError
from .geometry import ModelGeometry
from .operators import make_operator, transform
from .singfun import Power
from .solver import SolveConfig, assemble, solve

__all__ = [
    "Forcing",
    "forcing_ensemble",
    "mr_quotient",
    "MRExperiment",
    "MRTable",
    "mr_sweep",
    "worker_count",
]

N_MODES = 8


def _bump(x):
    """Smooth bump on ``(0, 1)`` with peak value 1."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inside = (x > 0.0) & (x < 1.0)
    xi = x[inside]
    out[inside] = np.exp(4.0 - 1.0 / (xi * (1.0 - xi)))
    return out


@dataclass
class Forcing:
    """``f = psi(t) sum_j c_j cos(k_j pi s) cos(n_j . z) cos(l_j pi tau / T)``
    with ``s`` the relative position in the support of the envelope ``psi``."""

    coeffs: np.ndarray
    k: np.ndarray
    n: np.ndarray
    l: np.ndarray
    t0: float
    length: float
    horizon: float
    scale: float = 1.0

    def __call__(self, tau, t, *zs):
        s = (t - self.t0) / self.length
        env = _bump(s)
        out = np.zeros(np.broadcast(t, *zs).shape if zs else np.shape(t))
        for c, k, n, l in zip(self.coeffs, self.k, self.n, self.l):
            term = c * np.cos(k * np.pi * s) * math.cos(l * np.pi * tau / self.horizon)
            for na, z in zip(n, zs):
                term = term * np.cos(na * z)
            out = out + term
        return self.scale * env * out

    def scaled(self, alpha):
        return Forcing(self.coeffs, self.k, self.n, self.l, self.t0, self.length, self.horizon,
                       self.scale * alpha)


def forcing_ensemble(n_samples, seed_key, m, n_t, n_z, t_far, t_trunc, horizon):
    """``n_samples`` forcings of ``N_MODES`` modes each.  Normal frequencies
    range up to ``n_t/32`` and tangential ones up to ``n_z/8``."""
    if n_samples < 1:
        raise ValidationError("the forcing ensemble is empty")
    k_max = max(1, n_t // 32)
    n_max = max(1, n_z // 8)
    out = []
    for j in range(n_samples):
        rng = np.random.default_rng(np.random.SeedSequence(list(seed_key) + [j]))
        k = rng.integers(0, k_max + 1, N_MODES)
        n = rng.integers(0, n_max + 1, (N_MODES, m - 1))
        l = rng.integers(0, 3, N_MODES)
        signs = rng.choice([-1.0, 1.0], N_MODES)
        coeffs = signs / (1.0 + k**2 + np.sum(n**2, axis=1))
        out.append(Forcing(coeffs, k, n, l, t_far, 0.25 * (t_trunc - t_far), horizon))
    return out


def mr_quotient(problem, f, cfg, op=None):
    """Discrete maximal-regularity quotient for ``u(0) = 0``."""
    op = op or assemble(problem, cfg.n_t, cfg.n_z)
    mesh = np.meshgrid(*op.axes, indexing="ij")
    taus = np.linspace(0.0, cfg.horizon, cfg.n_steps + 1)
    if f is None or all(not np.any(np.asarray(f(tau, *mesh))) for tau in taus):
        raise UndefinedQuotientError("zero forcing: the maximal-regularity quotient is undefined")
    rep = solve(problem, f, None, cfg, op)
    if rep.norm_f == 0.0:
        raise UndefinedQuotientError("zero forcing: the maximal-regularity quotient is undefined")
    return rep.mr_quotient


@dataclass
class MRExperiment:
    """Sweep description.  ``grids`` lists strip interval counts ``n_t``;
    the tangential resolution is ``n_t / nz_ratio`` and the step count
    ``n_t / steps_ratio``."""

    family: str = "model"
    s_values: tuple = (1.0, 2.0)
    p_values: tuple = (2.0,)
    grids: tuple = (64, 128)
    m: int = 2
    n_seeds: int = 20
    master_seed: int = 0
    horizon: float = 1.0
    theta: float = 0.5
    t_trunc: float = 10.0
    nz_ratio: int = 4
    steps_ratio: int = 2
    growth_tol: float = 0.25
    enforce: bool = True
    eps: float = 1.0

    def __post_init__(self):
        if self.n_seeds < 1:
            raise ValidationError("the forcing ensemble is empty")
        if not self.s_values or not self.p_values or not self.grids:
            raise ValidationError("sweep needs at least one s, one p and one grid")
        if any(s < 1.0 for s in self.s_values):
            raise ValidationError("power exponents must be >= 1 (strong singularity)")
        if list(self.grids) != sorted(self.grids):
            raise ValidationError("grids must be listed coarse to fine")

    def config(self, n_t, p):
        return SolveConfig(self.horizon, self.horizon / max(1, n_t // self.steps_ratio), self.theta,
                           n_t, max(3, n_t // self.nz_ratio), p)


@dataclass
class MRTable:
    rows: list = field(default_factory=list)

    COLUMNS = ("s", "p", "n_grid", "seed_count", "max_q", "median_q", "stable_flag", "status")

    @property
    def all_stable(self):
        return all(r["stable_flag"] == 1 for r in self.rows)

    @property
    def any_unstable(self):
        return any(r["stable_flag"] == 0 for r in self.rows)

    def write(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w") as fh:
            fh.write(",".join(self.COLUMNS) + "\n")
            for r in self.rows:
                vals = []
                for c in self.COLUMNS:
                    v = r[c]
                    vals.append(f"{v:.17g}" if isinstance(v, float) else str(v))
                fh.write(",".join(vals) + "\n")
        return path


def worker_count(n_tasks):
    cap = os.environ.get("DEGPARAB_THREADS")
    limit = os.cpu_count() or 1
    if cap:
        try:
            limit = max(1, int(cap))
        except ValueError as exc:
            raise ValidationError(f"DEGPARAB_THREADS must be an integer, got {cap!r}") from exc
    return max(1, min(limit, n_tasks))


def _run_cell(exp, cell_index, s, p):
    R = Power(s, eps=exp.eps)
    geom = ModelGeometry(exp.m, exp.eps)
    rows = []
    prev = None
    try:
        bvp = make_operator(exp.family, R, exp.m)
        problem = transform(bvp, geom, R, t_trunc=exp.t_trunc, enforce=exp.enforce)
    except CheckFailed as exc:
        return [_failed_row(s, p, n, exp.n_seeds, str(exc), "refused") for n in exp.grids]
    for n_t in exp.grids:
        cfg = exp.config(n_t, p)
        try:
            op = assemble(problem, cfg.n_t, cfg.n_z)
            ens = forcing_ensemble(exp.n_seeds, (exp.master_seed, cell_index), exp.m, cfg.n_t, cfg.n_z,
                                   problem.t_far, problem.t_trunc, exp.horizon)
            qs = np.array([mr_quotient(problem, f, cfg, op) for f in ens])
        except DegparabError as exc:
            rows.append(_failed_row(s, p, n_t, exp.n_seeds, str(exc)))
            prev = None
            continue
        max_q = float(np.max(qs))
        stable = 1 if prev is None or max_q <= (1.0 + exp.growth_tol) * prev else 0
        rows.append({"s": float(s), "p": float(p), "n_grid": n_t, "seed_count": len(qs), "max_q": max_q,
                     "median_q": float(np.median(qs)), "stable_flag": stable, "status": "ok",
                     "quotients": qs})
        prev = max_q
    return rows


def _failed_row(s, p, n_t, count, msg, status="failed"):
    return {"s": float(s), "p": float(p), "n_grid": n_t, "seed_count": count, "max_q": math.nan,
            "median_q": math.nan, "stable_flag": 0, "status": status, "error": msg}


def mr_sweep(exp):
    """Quotient statistics for every (s, p, grid) cell of ``exp``."""
    cells = [(i * len(exp.p_values) + j, s, p)
             for i, s in enumerate(exp.s_values) for j, p in enumerate(exp.p_values)]
    workers = worker_count(len(cells))
    if workers == 1:
        results = [_run_cell(exp, *c) for c in cells]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda c: _run_cell(exp, *c), cells))
    table = MRTable()
    for rows in results:
        table.rows.extend(rows)
    return table
