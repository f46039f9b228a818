"""Theta-scheme solver for ``d_tau u + A u = f`` on the transformed strip.

The strip ``[t_far, t_trunc] x T^(m-1)`` is discretized by second-order
central differences on a uniform grid.  Homogeneous Dirichlet conditions
are imposed at ``t_trunc`` and, for a Dirichlet far boundary, at
``t_far``; a first-order far boundary is handled with a ghost layer that
is eliminated through the discrete boundary row.  The operator does not
depend on time, so the step matrix is factorized once.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .exceptions import NumericalError, SolverError, ValidationError
from .fields import Field, integrate_normal, integrate_tangential, torus_grid, uniform_grid, write_field_csv
from .norms import NormSpec, _integrand
from .operators import TransformedProblem

__all__ = [
    "SolveConfig",
    "SolveReport",
    "DiscreteOperator",
    "ManufacturedSolution",
    "assemble",
    "solve",
    "manufactured_forcing",
    "model_manufactured",
    "convergence_study",
    "ConvergenceTable",
    "pull_back",
]


@dataclass
class SolveConfig:
    """Discretization and run parameters.

    ``horizon`` is the final time ``T`` of ``J = [0, T]``; ``n_t`` counts
    intervals along the strip and ``n_z`` nodes per tangential axis.
    """

    horizon: float = 1.0
    dt: float = 0.01
    theta: float = 0.5
    n_t: int = 128
    n_z: int = 16
    p: float = 2.0
    tol: float = 1e-10
    store_every: int | None = None
    keep_all: bool = False

    def __post_init__(self):
        if not self.horizon > 0.0:
            raise ValidationError("time horizon must be positive")
        if not self.dt > 0.0:
            raise ValidationError("dt must be positive")
        if not 0.5 <= self.theta <= 1.0:
            raise ValidationError("theta must lie in [1/2, 1]")
        if self.n_t < 4:
            raise ValidationError("n_t must be at least 4")
        if self.n_z < 3:
            raise ValidationError("n_z must be at least 3")
        if not self.p > 1.0:
            raise ValidationError("p must exceed 1")

    @property
    def n_steps(self):
        return max(1, int(round(self.horizon / self.dt)))

    @property
    def stride(self):
        return self.store_every or math.ceil(self.n_steps / 50)


@dataclass
class DiscreteOperator:
    """Sparse strip operator restricted to the unknown nodes."""

    A: sp.csr_matrix
    axes: tuple
    unknown: np.ndarray  # boolean mask over t-nodes
    boundary_rows: sp.csr_matrix | None  # discrete B row acting on the extended vector
    extend: sp.csr_matrix  # unknowns -> full grid incl. ghost layer

    @property
    def shape(self):
        return tuple(a.size for a in self.axes)

    def to_grid(self, x):
        """Unknown vector -> nodal array on the full (ghost-free) grid."""
        full = (self.extend @ x).reshape((-1,) + self.shape[1:])
        return full[1:]

    def from_grid(self, values):
        return values[self.unknown].reshape(-1)


def _d1(n, h):
    main = sp.diags([-0.5 / h, 0.5 / h], [-1, 1], shape=(n, n), format="lil")
    return main.tocsr()


def _d2(n, h):
    return sp.diags([1.0 / h**2, -2.0 / h**2, 1.0 / h**2], [-1, 0, 1], shape=(n, n), format="csr")


def _p1(n, h):
    D = sp.diags([-0.5 / h, 0.5 / h], [-1, 1], shape=(n, n), format="lil")
    D[0, n - 1] = -0.5 / h
    D[n - 1, 0] = 0.5 / h
    return D.tocsr()


def _p2(n, h):
    D = sp.diags([1.0 / h**2, -2.0 / h**2, 1.0 / h**2], [-1, 0, 1], shape=(n, n), format="lil")
    D[0, n - 1] = 1.0 / h**2
    D[n - 1, 0] = 1.0 / h**2
    return D.tocsr()


def _kron_all(mats):
    out = mats[0]
    for M in mats[1:]:
        out = sp.kron(out, M, format="csr")
    return out


def assemble(problem, n_t, n_z):
    """Discrete operator of ``problem`` on ``n_t`` strip intervals and
    ``n_z`` nodes per tangential axis."""
    if not isinstance(problem, TransformedProblem):
        raise ValidationError("assemble needs a TransformedProblem")
    m = problem.m
    t = uniform_grid(problem.t_far, problem.t_trunc, n_t)
    h = t[1] - t[0]
    zs = [torus_grid(n_z) for _ in range(m - 1)]
    axes = (t,) + tuple(zs)
    hz = zs[0][1] - zs[0][0] if zs else None
    n_ext = t.size + 1  # ghost node before t_far
    nz_tot = n_z ** (m - 1)
    Iz = sp.identity(nz_tot, format="csr")

    # coefficients on the physical nodes, zero on the ghost row
    mesh = np.meshgrid(t, *zs, indexing="ij")
    T = np.stack([g.ravel() for g in mesh], axis=-1)
    y_nodes = problem.y_of_t(t)
    Y = np.repeat(y_nodes, nz_tot)
    a2, a1, a0 = problem.coefficients(T, Y)
    pad = lambda c: np.concatenate([np.zeros((nz_tot,) + c.shape[1:]), c])  # noqa: E731
    a2, a1, a0 = pad(a2), pad(a1), pad(a0)

    def normal(M1):
        return sp.kron(M1, Iz, format="csr")

    def tangential(k, M1):
        mats = [sp.identity(n_ext, format="csr")] + [sp.identity(n_z, format="csr")] * (m - 1)
        mats[k] = M1
        return _kron_all(mats)

    first = [normal(_d1(n_ext, h))] + [tangential(k, _p1(n_z, hz)) for k in range(1, m)]
    second = {}
    for i in range(m):
        for j in range(i, m):
            if i == j:
                second[i, j] = normal(_d2(n_ext, h)) if i == 0 else tangential(i, _p2(n_z, hz))
            else:
                second[i, j] = first[i] @ first[j]
    L = sp.diags(a0)
    for i in range(m):
        L = L + sp.diags(a1[:, i]) @ first[i]
        for j in range(i, m):
            w = 1.0 if i == j else 2.0
            L = L - sp.diags(w * a2[:, i, j]) @ second[i, j]

    # unknown nodes and the extension map (ghost elimination)
    unknown = np.ones(t.size, dtype=bool)
    unknown[-1] = False
    robin = problem.bvp.far_boundary == "robin"
    if not robin:
        unknown[0] = False
    idx = np.flatnonzero(unknown)
    n_unk = idx.size * nz_tot
    sel = sp.lil_matrix((n_ext, idx.size))
    for col, i in enumerate(idx):
        sel[i + 1, col] = 1.0
    E = sp.kron(sel.tocsr(), Iz, format="csr")
    brow = None
    if robin:
        b_t, b_z, b0 = problem.boundary_coefficients()
        # b_t (u_1 - u_ghost)/(2h) + b_z . grad_z u_0 + b0 u_0 = 0
        Bz = b0 * Iz
        for k in range(1, m):
            mats = [sp.identity(n_z, format="csr")] * (m - 1)
            mats[k - 1] = _p1(n_z, hz)
            Bz = Bz + b_z[k - 1] * _kron_all(mats)
        # rows of E for the ghost: u_ghost = u_1 + (2h/b_t) (b_z . grad_z + b0) u_0
        G = sp.lil_matrix((nz_tot, n_unk))
        G[:, nz_tot:2 * nz_tot] = sp.identity(nz_tot)
        G[:, 0:nz_tot] = (2.0 * h / b_t) * Bz
        E = E.tolil()
        E[0:nz_tot, :] = G
        E = E.tocsr()
        ghost = sp.lil_matrix((nz_tot, n_ext * nz_tot))
        ghost[:, 0:nz_tot] = -b_t / (2.0 * h) * sp.identity(nz_tot)
        ghost[:, 2 * nz_tot:3 * nz_tot] = b_t / (2.0 * h) * sp.identity(nz_tot)
        ghost[:, nz_tot:2 * nz_tot] = Bz
        brow = ghost.tocsr()
    rows = sp.kron(sel.tocsr(), Iz, format="csr").T
    A = (rows @ L @ E).tocsr()
    return DiscreteOperator(A, axes, unknown, brow, E)


@dataclass
class SolveReport:
    """Trajectory slices and the discrete norms of a run."""

    slices: list
    times: np.ndarray
    norm_dtau: float
    norm_u: float
    norm_f: float
    p: float
    final: Field
    boundary_residual: float
    config: SolveConfig
    meta: dict = field(default_factory=dict)
    all_states: list | None = None

    @property
    def mr_quotient(self):
        if self.norm_f == 0.0:
            return math.nan
        return (self.norm_dtau + self.norm_u) / self.norm_f

    def norms(self):
        return {
            "norm_dtau_u": self.norm_dtau,
            "norm_u_W2": self.norm_u,
            "norm_f": self.norm_f,
            "mr_quotient": self.mr_quotient,
            "boundary_residual": self.boundary_residual,
        }

    def write(self, outdir):
        out = Path(outdir)
        (out / "slices").mkdir(parents=True, exist_ok=True)
        with (out / "report.csv").open("w") as fh:
            fh.write("quantity,value\n")
            for k, v in self.norms().items():
                fh.write(f"{k},{v:.17g}\n")
            fh.write(f"p,{self.p:.17g}\n")
        for f in self.slices:
            write_field_csv(out / "slices" / f"tau={f.time:.6f}.csv", f)
        with (out / "config.txt").open("w") as fh:
            for k, v in {**asdict(self.config), **self.meta}.items():
                fh.write(f"{k} = {v}\n")
        return out


def _lp_space(values, axes, p):
    dens = np.abs(values) ** p
    if len(axes) > 1:
        dens = integrate_tangential(dens, axes[1:])
    return float(integrate_normal(dens, axes[0]))


def _w2_power(values, axes, p):
    spec = NormSpec(k=2, p=p, representation="transformed", form="sobolev")
    return float(integrate_normal(_integrand(values, axes[0], axes[1:], spec), axes[0]))


def _eval_forcing(f, tau, axes):
    if f is None:
        return np.zeros(tuple(a.size for a in axes))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.broadcast_to(np.asarray(f(tau, *mesh), dtype=float), mesh[0].shape)


def solve(problem, f, u0, cfg, op=None):
    """Advance ``(I + theta dt A) u^{n+1} = (I - (1-theta) dt A) u^n + dt f^theta``.

    ``f`` is a vectorized callable ``f(tau, t, z...)`` (or ``None``) and
    ``u0`` a nodal array or ``Field`` on the strip grid (``None`` for zero).
    """
    op = op or assemble(problem, cfg.n_t, cfg.n_z)
    axes = op.axes
    shape = op.shape
    if u0 is None:
        u = np.zeros(shape)
    else:
        u = np.asarray(u0.values if isinstance(u0, Field) else u0, dtype=float)
        if u.shape != shape:
            raise ValidationError(f"initial value has shape {u.shape}, grid is {shape}")
    scale = max(1.0, float(np.max(np.abs(u))))
    dirichlet_nodes = ~op.unknown
    if np.max(np.abs(u[dirichlet_nodes]), initial=0.0) > 1e-8 * scale:
        raise ValidationError("initial value violates the discrete Dirichlet boundary rows by more than 1e-8")

    th, dt, n_steps = cfg.theta, cfg.dt, cfg.n_steps
    dt = cfg.horizon / n_steps
    n = op.A.shape[0]
    I = sp.identity(n, format="csc")
    M = (I + th * dt * op.A).tocsc()
    N = (I - (1.0 - th) * dt * op.A).tocsr()
    try:
        lu = splu(M)
    except RuntimeError as exc:  # singular factor
        raise SolverError(f"step matrix factorization failed: {exc}") from exc

    p = cfg.p
    x = op.from_grid(u)
    f_prev = _eval_forcing(f, 0.0, axes)
    sum_f = 0.5 * dt * _lp_space(f_prev, axes, p)
    sum_u = 0.5 * dt * _w2_power(u, axes, p)
    sum_dtau = 0.0
    slices = [Field(axes, u.copy(), coordinate="t", time=0.0)]
    times = [0.0]
    states = [u.copy()] if cfg.keep_all else None
    bres = 0.0
    for k in range(1, n_steps + 1):
        tau = k * dt
        f_next = _eval_forcing(f, tau, axes)
        rhs = N @ x + dt * op.from_grid(th * f_next + (1.0 - th) * f_prev)
        x_new = lu.solve(rhs)
        res = float(np.max(np.abs(M @ x_new - rhs), initial=0.0))
        rscale = max(1.0, float(np.max(np.abs(rhs), initial=0.0)))
        if res > cfg.tol * rscale:
            x_new = x_new + lu.solve(rhs - M @ x_new)
            res = float(np.max(np.abs(M @ x_new - rhs), initial=0.0))
            if res > cfg.tol * rscale:
                raise SolverError(f"linear solve residual {res:.3e} exceeds tolerance at step {k}")
        if not np.all(np.isfinite(x_new)):
            raise NumericalError(f"non-finite solution at step {k}")
        if op.boundary_rows is not None:
            ext = op.extend @ x_new
            bres = max(bres, float(np.max(np.abs(op.boundary_rows @ ext))))
        u_new = op.to_grid(x_new)
        sum_dtau += dt * _lp_space((u_new - u) / dt, axes, p)
        w = 0.5 if k == n_steps else 1.0
        sum_u += w * dt * _w2_power(u_new, axes, p)
        sum_f += w * dt * _lp_space(f_next, axes, p)
        x, u, f_prev = x_new, u_new, f_next
        if cfg.keep_all:
            states.append(u.copy())
        if k % cfg.stride == 0 or k == n_steps:
            slices.append(Field(axes, u.copy(), coordinate="t", time=tau))
            times.append(tau)
    final = Field(axes, u, coordinate="t", time=n_steps * dt)
    meta = problem.describe()
    return SolveReport(slices, np.array(times), sum_dtau ** (1 / p), sum_u ** (1 / p), sum_f ** (1 / p),
                       p, final, bres, cfg, meta, states)


# -- manufactured solutions ------------------------------------------------------


@dataclass
class ManufacturedSolution:
    """Exact solution with analytic derivatives, all vectorized callables of
    ``(tau, t, z...)``.  ``grad`` returns a list of ``m`` arrays and ``hess``
    a nested ``m x m`` list."""

    u: object
    dtau: object
    grad: object
    hess: object
    name: str = "manufactured"


def manufactured_forcing(problem, ms):
    """``f = d_tau u* + A u*`` with the strip coefficients of ``problem``."""
    m = problem.m
    cache = {}

    def coeffs(t, zs):
        key = (t.shape, t.ravel()[:3].tobytes(), t.ravel()[-3:].tobytes())
        if key not in cache:
            T = np.stack([t.ravel()] + [z.ravel() for z in zs], axis=-1)
            cache.clear()
            cache[key] = problem.coefficients(T)
        return cache[key]

    def f(tau, t, *zs):
        a2, a1, a0 = coeffs(t, zs)
        shape = t.shape
        g = ms.grad(tau, t, *zs)
        H = ms.hess(tau, t, *zs)
        out = ms.dtau(tau, t, *zs).ravel() + a0 * ms.u(tau, t, *zs).ravel()
        for i in range(m):
            out = out + a1[:, i] * np.ravel(g[i])
            for j in range(m):
                out = out - a2[:, i, j] * np.ravel(H[i][j])
        return out.reshape(shape)

    return f


def model_manufactured(t_far, t_trunc, m):
    """``u* = e^-tau (t - t_far)(t_trunc - t) e^-(t - t_far) cos z``: smooth
    and zero at both strip ends (``cos z`` factors are dropped for m = 1)."""
    L = t_trunc

    def prof(t):
        s = t - t_far
        e = np.exp(-s)
        g = s * (L - t) * e
        g1 = ((L - t) - s) * e - g
        g2 = -2.0 * e - 2.0 * ((L - t) - s) * e + g
        return g, g1, g2

    def ang(zs):
        if m == 1:
            return 1.0, 0.0, 0.0
        return np.cos(zs[0]), -np.sin(zs[0]), -np.cos(zs[0])

    def u(tau, t, *zs):
        return np.exp(-tau) * prof(t)[0] * ang(zs)[0]

    def dtau(tau, t, *zs):
        return -u(tau, t, *zs)

    def grad(tau, t, *zs):
        g, g1, _ = prof(t)
        c, c1, _ = ang(zs)
        e = np.exp(-tau)
        out = [e * g1 * c]
        for k in range(1, m):
            out.append(e * g * c1 if k == 1 else np.zeros_like(t))
        return out

    def hess(tau, t, *zs):
        g, g1, g2 = prof(t)
        c, c1, c2 = ang(zs)
        e = np.exp(-tau)
        H = [[np.zeros_like(t) for _ in range(m)] for _ in range(m)]
        H[0][0] = e * g2 * c
        if m > 1:
            H[0][1] = H[1][0] = e * g1 * c1
            H[1][1] = e * g * c2
        return H

    return ManufacturedSolution(u, dtau, grad, hess, name="model")


def _max_error(report, ms):
    f = report.final
    mesh = f.mesh()
    return float(np.max(np.abs(f.values - ms.u(f.time, *mesh))))


@dataclass
class ConvergenceTable:
    rows: list
    order: float
    flagged: bool
    kind: str

    def write(self, path):
        with Path(path).open("w") as fh:
            fh.write("h,dt,error,observed_order\n")
            for r in self.rows:
                fh.write(",".join(f"{r[k]:.17g}" for k in ("h", "dt", "error", "order")) + "\n")
        return path


def convergence_study(problem, ms, ladder, kind="space", reference="exact"):
    """Errors and observed orders over a ladder of ``SolveConfig`` objects.

    ``reference="exact"`` measures the max nodal error against ``ms`` at
    the final time; ``reference="fine-dt"`` compares each run with one on
    the same grid at a sixteenth of the smallest step, isolating the
    temporal error.  The least-squares order is fitted in the refined
    variable (``h`` for ``kind="space"``, ``dt`` otherwise).
    """
    if len(ladder) < 3:
        raise ValidationError("a convergence ladder needs at least 3 levels")
    f = manufactured_forcing(problem, ms)
    ref = None
    if reference == "fine-dt":
        grids = {(c.n_t, c.n_z) for c in ladder}
        if len(grids) != 1:
            raise ValidationError("fine-dt reference needs a fixed grid")
        base = ladder[-1]
        fine = SolveConfig(base.horizon, min(c.dt for c in ladder) / 16, base.theta, base.n_t, base.n_z, base.p, base.tol)
        ref = solve(problem, f, _initial(problem, ms, fine), fine).final.values
    elif reference != "exact":
        raise ValidationError("reference must be 'exact' or 'fine-dt'")
    rows = []
    for cfg in ladder:
        rep = solve(problem, f, _initial(problem, ms, cfg), cfg)
        err = _max_error(rep, ms) if ref is None else float(np.max(np.abs(rep.final.values - ref)))
        h = (problem.t_trunc - problem.t_far) / cfg.n_t
        rows.append({"h": h, "dt": cfg.horizon / cfg.n_steps, "error": err, "order": math.nan})
    var = "h" if kind == "space" else "dt"
    for a, b in zip(rows[:-1], rows[1:]):
        b["order"] = math.log(a["error"] / b["error"]) / math.log(a[var] / b[var])
    x = np.log([r[var] for r in rows])
    y = np.log([r["error"] for r in rows])
    order = float(np.polyfit(x, y, 1)[0])
    theta = ladder[0].theta
    threshold = 1.9 if theta == 0.5 else 0.9
    return ConvergenceTable(rows, order, bool(order < threshold), kind)


def _initial(problem, ms, cfg):
    t = uniform_grid(problem.t_far, problem.t_trunc, cfg.n_t)
    axes = [t] + [torus_grid(cfg.n_z) for _ in range(problem.m - 1)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.asarray(ms.u(0.0, *mesh), dtype=float)


def pull_back(v, chart):
    """Field on a ``t``-grid -> field on the matching ``y``-grid
    (axis reversed so that ``y`` increases)."""
    if v.coordinate != "t":
        raise ValidationError("pull_back needs a t-grid field")
    y = chart.y_of_t(v.axes[0])[::-1]
    return Field((y,) + tuple(v.axes[1:]), v.values[::-1].copy(), coordinate="y", time=v.time)
