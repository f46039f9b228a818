"""Weighted Sobolev norms on the collar and their transformed equivalents.

On the collar the norm of order ``k`` is

    ( sum_j int int |(R d_y)^j u|^p + |grad_h^j u|^p  dz dy/R )^(1/p)

with the ``j = 0`` term counted once.  Under ``t = sigma(y)`` the measure
``dy/R`` becomes ``dt`` and ``R d_y`` becomes ``-d_t``, so the same quantity
is a standard unweighted Sobolev norm on the half-line strip.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .exceptions import DomainError, ValidationError
from .fields import (
    Field,
    diff2_periodic,
    diff_normal,
    diff_periodic,
    integrate_normal,
    integrate_tangential,
    torus_grid,
    uniform_grid,
)
from .singfun import Power

__all__ = [
    "NormSpec",
    "NormResult",
    "TruncationWarning",
    "weighted_norm",
    "transformed_norm",
    "classical_norm",
    "full_norm",
    "weighted_integral",
    "transformed_integral",
    "sample_transformed",
    "write_norm_rows",
]

REPRESENTATIONS = ("direct", "transformed")


class TruncationWarning(UserWarning):
    """The tail of a truncated half-line integral is not negligible."""


@dataclass(frozen=True)
class NormSpec:
    """Order ``k``, exponent ``p`` and representation of a norm.

    ``form="semilocal"`` uses pure normal and pure tangential derivatives;
    ``form="sobolev"`` also includes the mixed terms
    ``|grad_h^l (R d_y)^i u|`` with ``i + l <= k``.
    """

    k: int = 0
    p: float = 2.0
    representation: str = "direct"
    form: str = "semilocal"

    def __post_init__(self):
        if self.k not in (0, 1, 2):
            raise ValidationError(f"norm order k must be 0, 1 or 2, got {self.k}")
        if not (1.0 < self.p < np.inf):
            raise ValidationError(f"exponent p must satisfy 1 < p < inf, got {self.p}")
        if self.representation not in REPRESENTATIONS:
            raise ValidationError(f"representation must be one of {REPRESENTATIONS}")
        if self.form not in ("semilocal", "sobolev"):
            raise ValidationError("form must be 'semilocal' or 'sobolev'")

    def label(self):
        return f"W^{self.k}_{self.p:g}"


@dataclass
class NormResult:
    value: float
    divergent: bool = False
    tail: float = 0.0
    trace: np.ndarray = field(default_factory=lambda: np.empty(0))
    truncated: bool = False

    def __float__(self):
        return float(self.value)


# -- derivative stacks ---------------------------------------------------------


def _tangential_steps(axes):
    return [z[1] - z[0] for z in axes]


def _tangential_powers(u, steps, order, p):
    """``|grad_h^order u|^p`` for the flat torus metric."""
    nt = len(steps)
    ax0 = u.ndim - nt
    if order == 0:
        return np.abs(u) ** p
    if order == 1:
        sq = sum(diff_periodic(u, h, ax0 + a) ** 2 for a, h in enumerate(steps))
        return sq ** (p / 2.0)
    sq = np.zeros_like(u)
    for a, ha in enumerate(steps):
        for b, hb in enumerate(steps):
            if a == b:
                d = diff2_periodic(u, ha, ax0 + a)
            else:
                d = diff_periodic(diff_periodic(u, ha, ax0 + a), hb, ax0 + b)
            sq = sq + d * d
    return sq ** (p / 2.0)


def _normal_stack(u, x, k, scale=None):
    """``[(s d_x)^j u for j = 0..k]`` with ``s`` the optional scale array."""
    out = [u]
    for _ in range(k):
        d = diff_normal(out[-1], x, axis=0)
        if scale is not None:
            d = d * scale.reshape((-1,) + (1,) * (u.ndim - 1))
        out.append(d)
    return out


def _integrand(u, x, tang_axes, spec, scale=None):
    """Tangentially integrated p-th power density as a function of the
    normal coordinate."""
    steps = _tangential_steps(tang_axes)
    normal = _normal_stack(u, x, spec.k, scale)
    p = spec.p
    dens = np.zeros_like(u)
    if spec.form == "semilocal":
        for j in range(spec.k + 1):
            dens = dens + np.abs(normal[j]) ** p
            if j >= 1 and steps:
                dens = dens + _tangential_powers(u, steps, j, p)
    else:
        for i in range(spec.k + 1):
            for order in range(spec.k - i + 1):
                if order > 0 and not steps:
                    continue
                dens = dens + _tangential_powers(normal[i], steps, order, p)
    if steps:
        dens = integrate_tangential(dens, tang_axes)
    return dens


# -- direct representation -----------------------------------------------------


def _dyadic_trace(density, y, eps):
    """Partial integrals ``int_{eps 2^-k}^{eps} density dy`` at dyadic edges
    inside the grid, and the corresponding shell sums."""
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (density[1:] + density[:-1]) * np.diff(y))])
    from_top = cum[-1] - cum  # int_{y_i}^{y_max}
    n = int(np.floor(np.log2(eps / y[0])))
    edges = eps * 2.0 ** (-np.arange(n + 1, dtype=float))
    edges = edges[edges >= y[0]]
    partial = np.interp(np.log(edges), np.log(y), from_top)
    return partial, np.diff(partial)


def weighted_norm(u, R, spec, cauchy_tol=1e-3):
    """Collar norm by quadrature in ``y`` against ``dy/R``.

    ``u`` is a ``Field`` on a ``y``-grid inside ``(0, eps]``.  The refinement
    trace holds the partial integrals over ``[eps 2^-k, eps]``; when the
    extrapolated contribution of ``(0, y_min)`` is not below ``cauchy_tol``
    relative to the total (shells fail to decay geometrically), the result
    carries ``divergent=True`` and ``value=inf``.
    """
    if spec.representation != "direct":
        raise ValidationError("weighted_norm needs a 'direct' NormSpec")
    if u.coordinate != "y":
        raise ValidationError("weighted_norm needs a field on a y-grid")
    y = u.axes[0]
    if y[0] <= 0.0 or y[-1] > R.eps * (1.0 + 1e-14):
        raise DomainError(f"collar grid must lie in (0, eps={R.eps}]")
    r = R(y)
    dens = _integrand(u.values, y, u.axes[1:], spec, scale=r) / r
    total = float(integrate_normal(dens, y))
    partial, shells = _dyadic_trace(dens, y, y[-1])
    tail_est = _tail_estimate(shells)
    if total == 0.0:
        return NormResult(0.0, False, 0.0, partial)
    rel_tail = tail_est / total
    if not np.isfinite(total) or rel_tail > cauchy_tol:
        return NormResult(np.inf, True, rel_tail, partial)
    return NormResult(total ** (1.0 / spec.p), False, rel_tail, partial)


def _tail_estimate(shells, n_last=4):
    """Geometric extrapolation of the shells beyond the last one."""
    s = np.abs(shells[-(n_last + 1):])
    if s.size < 2 or s[-1] == 0.0:
        return 0.0
    prev = s[:-1]
    nz = prev > 0.0
    if not np.any(nz):
        return np.inf
    ratio = float(np.exp(np.mean(np.log(s[1:][nz] / prev[nz]))))
    if ratio >= 1.0:
        return np.inf
    return float(s[-1] * ratio / (1.0 - ratio))


# -- transformed representation ------------------------------------------------


def transformed_norm(v, spec, t_trunc=None, tail_fraction=0.1, warn_above=0.01):
    """Standard Sobolev norm on the uniform strip grid ``[t0, t_trunc]``.

    The tail estimate is the share of the p-th power integral carried by
    the last ``tail_fraction`` of the interval; above ``warn_above`` a
    ``TruncationWarning`` is emitted and ``truncated`` is set.
    """
    if v.coordinate != "t":
        raise ValidationError("transformed_norm needs a field on a t-grid")
    t = v.axes[0]
    if t_trunc is not None and not np.isclose(t[-1], t_trunc):
        raise ValidationError(f"grid ends at {t[-1]}, expected T_trunc={t_trunc}")
    dens = _integrand(v.values, t, v.axes[1:], spec)
    total = float(integrate_normal(dens, t))
    if total == 0.0:
        return NormResult(0.0, False, 0.0)
    cut = t[-1] - tail_fraction * (t[-1] - t[0])
    mask = t >= cut
    tail = float(integrate_normal(dens[mask], t[mask])) / total if mask.sum() > 1 else 0.0
    truncated = tail > warn_above
    if truncated:
        warnings.warn(
            f"last {tail_fraction:.0%} of the truncated strip carries {tail:.2%} of the norm",
            TruncationWarning,
            stacklevel=2,
        )
    return NormResult(total ** (1.0 / spec.p), False, tail, truncated=truncated)


# -- interior and full norms ---------------------------------------------------


def classical_norm(u, spec):
    """Unweighted ``W^k_p`` norm of a field over its grid."""
    x = u.axes[0]
    steps = _tangential_steps(u.axes[1:])
    p = spec.p
    vals = u.values
    dens = np.abs(vals) ** p
    if spec.k >= 1:
        dx = diff_normal(vals, x)
        sq = dx * dx
        for a, h in enumerate(steps):
            sq = sq + diff_periodic(vals, h, 1 + a) ** 2
        dens = dens + sq ** (p / 2.0)
    if spec.k >= 2:
        dxx = diff_normal(dx, x)
        sq = dxx * dxx
        for a, h in enumerate(steps):
            sq = sq + 2.0 * diff_periodic(dx, h, 1 + a) ** 2
        tang = _tangential_powers(vals, steps, 2, 2.0) if steps else 0.0
        dens = dens + (sq + tang) ** (p / 2.0)
    if steps:
        dens = integrate_tangential(dens, u.axes[1:])
    return float(integrate_normal(dens, x)) ** (1.0 / p)


def full_norm(u_collar, u_interior, R, spec, interior_patch=None):
    """Collar norm on ``(0, eps]`` plus classical norm on the interior patch.

    ``u_interior`` must be sampled on a grid spanning the patch
    ``(eps/3, 1]`` (or ``interior_patch`` when given).
    """
    lo, hi = interior_patch if interior_patch is not None else (R.eps / 3.0, 1.0)
    x = u_interior.axes[0]
    if not (np.isclose(x[0], lo) and np.isclose(x[-1], hi)):
        raise ValidationError(f"interior grid must span [{lo}, {hi}]")
    collar = weighted_norm(u_collar, R, spec)
    interior = classical_norm(u_interior, spec)
    if collar.divergent:
        return NormResult(np.inf, True, collar.tail, collar.trace)
    return NormResult(collar.value + interior, False, collar.tail, collar.trace)


# -- function-level integrals ----------------------------------------------------


def weighted_integral(f, R, y_min=None):
    """``int_0^eps f(y) dy/R(y)`` by adaptive quadrature."""
    lo = 0.0 if y_min is None else y_min
    val, _ = integrate.quad(lambda y: f(y) / R(y), lo, R.eps, epsabs=1e-14, epsrel=1e-12, limit=400)
    return val


def transformed_integral(f, R, t_max=np.inf):
    """``int_0^inf f(sigma^-1(t)) dt``, the same integral after the change
    of variables."""
    val, _ = integrate.quad(lambda t: f(R.sigma_inv(t)), 0.0, t_max, epsabs=1e-14, epsrel=1e-12, limit=400)
    return val


def sample_transformed(fn, R, t_axis, tangential_axes=(), time=None):
    """Sample ``fn(y, z...)`` at ``y = sigma^-1(t)`` on a strip grid."""
    y = R.sigma_inv(np.asarray(t_axis, dtype=float))
    mesh = np.meshgrid(y, *tangential_axes, indexing="ij")
    vals = np.broadcast_to(np.asarray(fn(*mesh), dtype=float), mesh[0].shape)
    return Field((t_axis,) + tuple(tangential_axes), np.array(vals), coordinate="t", time=time)


def write_norm_rows(path, rows):
    """Write ``(spec, representation, value, tail-estimate)`` rows."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["spec", "representation", "value", "tail_estimate"])
        for spec, res in rows:
            w.writerow([spec.label(), spec.representation, f"{res.value:.17g}", f"{res.tail:.17g}"])
    return path


# -- renorming comparison ------------------------------------------------------

# (s, a, c, k): u = y^a exp(-c/y) cos(k z), R = y^s
RENORMING_SUITE = (
    (1.0, 1.0, 0.0, 0),
    (1.0, 2.0, 0.5, 1),
    (1.0, 1.0, 1.0, 2),
    (2.0, 1.0, 1.0, 0),
    (2.0, 2.0, 0.5, 1),
    (2.0, 1.5, 2.0, 3),
)


def renorming_gap(case, n, spec=None, t_trunc=30.0, n_z=32):
    """Direct and transformed norms of a suite function on matching grids.

    The y-grid is geometric on ``[sigma^-1(t_trunc), 1]`` with ``n``
    intervals; the strip grid is uniform with ``n`` intervals.  Returns
    ``(direct, transformed, relative_gap)``.
    """
    s, a, c, k = case
    spec = spec or NormSpec(2, 2.0)
    R = Power(s)

    def fn(y, *z):
        base = y**a * np.exp(-c / y)
        return base * np.cos(k * z[0]) if z else base

    z = (torus_grid(n_z),) if k else ()
    y = np.geomspace(float(R.sigma_inv(t_trunc)), 1.0, int(n) + 1)
    y[-1] = 1.0
    direct = weighted_norm(Field.from_function(fn, (y,) + z), R, NormSpec(spec.k, spec.p, "direct", spec.form))
    t = uniform_grid(0.0, t_trunc, int(n))
    trans = transformed_norm(sample_transformed(fn, R, t, z), NormSpec(spec.k, spec.p, "transformed", spec.form))
    return direct.value, trans.value, abs(direct.value - trans.value) / direct.value
