"""Degenerate boundary value problems, their verifiers and the transform to
a uniformly parabolic problem on the half-line strip.

Sign convention: the strip coordinate ``t`` increases toward ``Gamma``
(``y`` decreasing) and ``d_t = -w(y) d_y`` with ``w = R`` on the collar
for the sigma chart (``w = delta`` for the blended chart).  Expanding the
degenerate operator in ``t`` gives, for ``x = (y, z)``,

    a2_hat = [[a_yy / w^2, -a_yz / w], [-a_zy / w, a_zz]]
    a1_hat = (-a_yy w' / w^2 - a1_y / w, a1_z)
    a0_hat = a0

where the ``a_yy w'/w^2`` term is the remainder of
``d_y^2 = w^-2 ((w d_y)^2 - w' (w d_y))``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, ndimage, optimize

from .exceptions import DomainError, EllipticityRefusal, ValidationError, CheckFailed
from .fields import diff2_normal, diff2_periodic, diff_normal, diff_periodic, torus_grid
from .geometry import ModelGeometry, normal_frame
from .singfun import SIGMA_CAP, Blend, is_strong_singularity

__all__ = [
    "DegenerateBVP",
    "EllipticityReport",
    "BCRegularityReport",
    "TransformedProblem",
    "SigmaChart",
    "BlendedChart",
    "model_operator",
    "comparison_operator",
    "laplacian_operator",
    "perturbed_operator",
    "random_operator",
    "make_operator",
    "OPERATOR_FAMILIES",
    "check_anisotropic_ellipticity",
    "check_bc_regularity",
    "check_transformed_definiteness",
    "transform",
    "apply_operator",
]


@dataclass
class DegenerateBVP:
    """Pair ``(A, B)`` with ``A u = -a : grad^2 u + a1 . grad u + a0 u``.

    Coefficients are vectorized callables of an ``(n, m)`` array of points
    ``(y, z...)`` returning arrays of shape ``(n, m, m)``, ``(n, m)`` and
    ``(n,)``.  On a first-order far boundary ``B u = b . grad u + b0 u``.
    """

    m: int
    a: object
    a1: object
    a0: object
    far_boundary: str = "dirichlet"
    b: np.ndarray | None = None
    b0: float = 0.0
    name: str = "custom"
    eta0: float = 1e-8
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.far_boundary not in ("dirichlet", "robin"):
            raise ValidationError("far_boundary must be 'dirichlet' or 'robin'")
        if self.far_boundary == "robin":
            if self.b is None:
                raise ValidationError("robin far boundary needs the vector b")
            self.b = np.asarray(self.b, dtype=float).reshape(-1)
            if self.b.size != self.m:
                raise ValidationError(f"b must have {self.m} components")
            # normality: |(b | nu)| > 0 with nu = e_y at y = 1
            if abs(self.b[0]) < self.eta0:
                raise ValidationError(
                    f"boundary operator is not normal: |(b|nu)| = {abs(self.b[0]):g} < {self.eta0:g}"
                )

    @property
    def boundary_flag(self):
        return 0 if self.far_boundary == "dirichlet" else 1

    def coefficients(self, X, symmetry_tol=1e-12):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[-1] != self.m:
            raise ValidationError(f"points must have {self.m} coordinates")
        n = X.shape[0]
        a = np.broadcast_to(np.asarray(self.a(X), dtype=float), (n, self.m, self.m))
        a1 = np.broadcast_to(np.asarray(self.a1(X), dtype=float), (n, self.m))
        a0 = np.broadcast_to(np.asarray(self.a0(X), dtype=float), (n,))
        asym = np.abs(a - np.swapaxes(a, -1, -2))
        bad = asym > symmetry_tol * (1.0 + np.abs(a))
        if np.any(bad):
            i = int(np.argwhere(bad.any(axis=(-1, -2)))[0, 0])
            raise ValidationError(f"diffusion matrix is not symmetric at point {X[i].tolist()}")
        return a, a1, a0

    def check_geometry(self, geom):
        if geom.m != self.m:
            raise ValidationError(f"operator dimension {self.m} differs from geometry m={geom.m}")
        if geom.far_boundary != self.far_boundary:
            raise ValidationError(
                f"operator far boundary {self.far_boundary!r} differs from geometry {geom.far_boundary!r}"
            )


# -- built-in coefficient families ------------------------------------------------


def _yz(X):
    return X[:, 0], X[:, 1:]


def model_operator(R, m, far_boundary="dirichlet", b=None, b0=0.0):
    """``-(R d_y (R d_y) + Laplace_z)``; for ``R = y^s`` the model operator
    ``-(y^{2s} d_y^2 + Laplace_z) - s y^{2s-1} d_y``."""

    def a(X):
        y = X[:, 0]
        out = np.zeros((X.shape[0], m, m))
        out[:, 0, 0] = R(y) ** 2
        for i in range(1, m):
            out[:, i, i] = 1.0
        return out

    def a1(X):
        y = X[:, 0]
        out = np.zeros((X.shape[0], m))
        out[:, 0] = -R(y) * R.derivative(y)
        return out

    return DegenerateBVP(m, a, a1, lambda X: np.zeros(X.shape[0]), far_boundary, b, b0,
                         name="model", params={"R": repr(R)})


def comparison_operator(R, m, drift=None, far_boundary="dirichlet", b=None, b0=0.0):
    """Uniformly degenerate ``-R^2 Laplace + R c . grad`` with a constant
    vector ``c``; for ``R = y^s`` this is ``-y^{2s} Laplace_m + y^s c . grad``."""
    c = np.ones(m) if drift is None else np.asarray(drift, dtype=float).reshape(m)

    def a(X):
        r2 = R(X[:, 0]) ** 2
        return r2[:, None, None] * np.eye(m)[None]

    def a1(X):
        return R(X[:, 0])[:, None] * c[None, :]

    return DegenerateBVP(m, a, a1, lambda X: np.zeros(X.shape[0]), far_boundary, b, b0,
                         name="comparison", params={"drift": c.tolist()})


def laplacian_operator(m, far_boundary="dirichlet", b=None, b0=0.0):
    return DegenerateBVP(
        m,
        lambda X: np.broadcast_to(np.eye(m), (X.shape[0], m, m)),
        lambda X: np.zeros((X.shape[0], m)),
        lambda X: np.zeros(X.shape[0]),
        far_boundary, b, b0, name="laplacian",
    )


def _scaled(R, core):
    """Diffusion ``D B D`` with ``D = diag(R(y), 1, ...)``."""

    def a(X):
        B = core(X)
        d = np.ones(B.shape[:2])
        d[:, 0] = R(X[:, 0])
        return d[:, :, None] * B * d[:, None, :]

    return a


def perturbed_operator(R, m, amplitude=0.2, far_boundary="dirichlet", b=None, b0=0.0):
    """Smooth perturbation of the model operator that stays R-degenerate
    elliptic for ``amplitude < 0.5``."""
    amp = float(amplitude)

    def core(X):
        y, z = _yz(X)
        n = X.shape[0]
        B = np.broadcast_to(np.eye(m), (n, m, m)).copy()
        B[:, 0, 0] += amp * y * np.cos(z[:, 0]) if m > 1 else amp * y
        for i in range(1, m):
            B[:, 0, i] = B[:, i, 0] = 0.5 * amp * np.sin(z[:, i - 1])
            B[:, i, i] += 0.5 * amp * np.cos(2.0 * z[:, i - 1])
        return B

    def a1(X):
        y, z = _yz(X)
        out = np.zeros((X.shape[0], m))
        out[:, 0] = -R(y) * R.derivative(y) + amp * R(y) * np.sin(y)
        for i in range(1, m):
            out[:, i] = amp * np.cos(z[:, i - 1])
        return out

    def a0(X):
        return amp * (1.0 + X[:, 0])

    return DegenerateBVP(m, _scaled(R, core), a1, a0, far_boundary, b, b0,
                         name="perturbed", params={"amplitude": amp})


def random_operator(R, m, seed, offdiag=0.2):
    """Random field ``D (S + cos(z) P + y Q) D`` with ``S`` diagonal plus small
    off-diagonal part; definite or indefinite depending on the draw."""
    rng = np.random.default_rng(seed)

    def sym(scale, diag_scale):
        A = rng.normal(0.0, scale, (m, m))
        A = 0.5 * (A + A.T)
        np.fill_diagonal(A, rng.normal(0.0, diag_scale, m))
        return A

    S = sym(offdiag, 0.0) + np.diag(rng.uniform(-0.5, 1.5, m))
    P = sym(offdiag, 0.0) if m > 1 else np.zeros((m, m))
    Q = sym(0.0, offdiag)

    def core(X):
        y, z = _yz(X)
        cz = np.cos(z[:, 0]) if m > 1 else np.zeros_like(y)
        return S[None] + cz[:, None, None] * P[None] + y[:, None, None] * Q[None]

    return DegenerateBVP(m, _scaled(R, core), lambda X: np.zeros((X.shape[0], m)),
                         lambda X: np.zeros(X.shape[0]), name="random",
                         params={"seed": seed, "S": S, "P": P, "Q": Q})


OPERATOR_FAMILIES = ("model", "comparison", "laplacian", "perturbed")


def make_operator(name, R, m, far_boundary="dirichlet", b=None, b0=0.0, **kw):
    if name == "model":
        return model_operator(R, m, far_boundary, b, b0)
    if name == "comparison":
        return comparison_operator(R, m, kw.get("drift"), far_boundary, b, b0)
    if name == "laplacian":
        return laplacian_operator(m, far_boundary, b, b0)
    if name == "perturbed":
        return perturbed_operator(R, m, kw.get("amplitude", 0.2), far_boundary, b, b0)
    raise ValidationError(f"unknown operator family {name!r}; choose from {OPERATOR_FAMILIES}")


# -- ellipticity -------------------------------------------------------------------


@dataclass
class EllipticityReport:
    """Result of an ellipticity check.

    ``alpha_lower``/``alpha_upper`` are the infimum of the smallest and the
    supremum of the largest eigenvalue of the scaled matrix over all
    samples.  ``passed`` is the lower bound condition; ``equivalent`` also
    asks for a bounded upper constant (two-sided equivalence).
    """

    alpha_lower: float
    alpha_upper: float
    worst_point: np.ndarray
    mode: str
    passed: bool
    equivalent: bool
    pointwise_elliptic: bool
    random_direction_min: float
    points: np.ndarray = field(repr=False, default=None)
    min_eig: np.ndarray = field(repr=False, default=None)
    max_eig: np.ndarray = field(repr=False, default=None)

    def summary(self):
        return (
            f"mode={self.mode} alpha_lower={self.alpha_lower:.17g} "
            f"alpha_upper={self.alpha_upper:.17g} passed={self.passed} "
            f"equivalent={self.equivalent} worst_point={np.round(self.worst_point, 12).tolist()}"
        )

    def rows(self):
        for pt, lo, hi in zip(self.points, self.min_eig, self.max_eig):
            yield list(pt) + [lo, hi]


def _sample_points(geom, R, n_y, n_z, y_min=None):
    eps = geom.eps
    if y_min is None:
        floor = float(R.sigma_inv(SIGMA_CAP)) if _is_strong(R) else 0.0
        y_min = max(1e-8 * eps, floor)
    ys = np.geomspace(y_min, eps, n_y)
    if eps < 1.0:
        ys = np.concatenate([ys, np.linspace(eps, 1.0, max(n_y // 4, 4))[1:]])
    axes = [ys] + [torus_grid(n_z) for _ in range(geom.m - 1)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=-1)


def _is_strong(R):
    try:
        return is_strong_singularity(R).diverges
    except ValidationError:
        return False


def check_anisotropic_ellipticity(bvp, geom, R, n_y=400, n_z=64, n_dirs=64, mode="anisotropic",
                                  s=None, alpha_min=1e-6, upper_cap=1e6, seed=0, y_min=None):
    """Best constants in ``(a xi|xi) >= alpha (r^2 eta^2 + |zeta|^2)``.

    At every sample the diffusion matrix is rotated into the (normal,
    tangent) frame and scaled by ``D^-1 = diag(1/r, 1, ..., 1)`` on the
    collar (identity beyond); the extreme eigenvalues of the result give
    the two constants.  ``mode="uniform"`` instead tests
    ``(a xi|xi) >= alpha rho^(2s) |xi|^2``.  Random directions
    cross-check the eigenvalue bound.
    """
    bvp.check_geometry(geom)
    geom.check_singularity(R)
    X = _sample_points(geom, R, n_y, n_z, y_min)
    a, _, _ = bvp.coefficients(X)
    m = geom.m
    y = X[:, 0]
    collar = y <= geom.eps

    nu, tangents = normal_frame(geom, np.r_[min(geom.eps, 0.5 * geom.eps), np.zeros(m - 1)])
    Q = np.vstack([nu, tangents]) if m > 1 else nu.reshape(1, 1)
    a_frame = Q[None] @ a @ Q.T[None]

    pointwise = np.linalg.eigvalsh(a)[:, 0]
    if mode == "anisotropic":
        dinv = np.ones((X.shape[0], m))
        dinv[collar, 0] = 1.0 / R(y[collar])
        scaled = dinv[:, :, None] * a_frame * dinv[:, None, :]
    elif mode == "uniform":
        if s is None:
            raise ValidationError("uniform mode needs the exponent s")
        rho = np.minimum(y, geom.eps)
        scaled = a_frame / rho[:, None, None] ** (2.0 * s)
    else:
        raise ValidationError("mode must be 'anisotropic' or 'uniform'")
    eig = np.linalg.eigvalsh(scaled)
    lo, hi = eig[:, 0], eig[:, -1]
    iw = int(np.argmin(lo))
    alpha_lower = float(lo[iw])
    alpha_upper = float(np.max(hi))

    rng = np.random.default_rng(seed)
    xi = rng.normal(size=(n_dirs, m))
    quad = np.einsum("di,nij,dj->nd", xi, a_frame, xi)
    if mode == "anisotropic":
        r2 = np.where(collar, R(np.minimum(y, geom.eps)) ** 2, 1.0)
        denom = r2[:, None] * xi[None, :, 0] ** 2 + np.sum(xi[None, :, 1:] ** 2, axis=-1)
    else:
        denom = (np.minimum(y, geom.eps) ** (2.0 * s))[:, None] * np.sum(xi**2, axis=-1)[None]
    rand_min = float(np.min(quad / denom))

    pointwise_ok = bool(np.all(pointwise > 0.0))
    passed = bool(pointwise_ok and alpha_lower >= alpha_min)
    return EllipticityReport(
        alpha_lower, alpha_upper, X[iw], mode, passed,
        bool(passed and alpha_upper <= upper_cap), pointwise_ok, rand_min,
        points=X, min_eig=lo, max_eig=hi,
    )


# -- charts -------------------------------------------------------------------------


class SigmaChart:
    """``t = sigma(y)`` on the collar, continued affinely with slope
    ``-1/R(eps)`` beyond it."""

    name = "sigma"

    def __init__(self, R):
        self.R = R
        self.eps = R.eps
        self._r_eps = float(R(R.eps))

    def t_of_y(self, y):
        y = np.asarray(y, dtype=float)
        inside = y <= self.eps
        t_in = self.R.sigma(np.where(inside, y, self.eps))
        return np.where(inside, t_in, -(y - self.eps) / self._r_eps) + 0.0

    def y_of_t(self, t):
        t = np.asarray(t, dtype=float)
        pos = t >= 0.0
        y_in = self.R.sigma_inv(np.where(pos, t, 0.0))
        return np.where(pos, y_in, self.eps - t * self._r_eps)

    def scale(self, y):
        return self.R(np.minimum(y, self.eps))

    def dscale(self, y):
        y = np.asarray(y, dtype=float)
        return np.where(y <= self.eps, self.R.derivative(np.minimum(y, self.eps)), 0.0)


class BlendedChart:
    """Arc length of ``dy^2/delta^2`` measured from ``y = eps``; coincides
    with ``eps - y`` where ``delta = 1`` and with ``sigma`` up to a shift
    where ``delta = R``."""

    name = "blended"

    def __init__(self, R):
        self.R = R
        self.blend = Blend(R)
        self.eps = R.eps
        self._third = self.eps / 3.0
        self._offset = self._blend_length(self._third)
        self._sig_third = float(R.sigma(self._third))

    def _blend_length(self, y):
        val, _ = integrate.quad(lambda v: 1.0 / float(self.blend.delta(v)), y, self.eps,
                                epsabs=1e-15, epsrel=1e-13, limit=200)
        return val

    def t_of_y(self, y):
        y = np.asarray(y, dtype=float)
        out = np.empty_like(y)
        for i, v in np.ndenumerate(y):
            if v > self.eps:
                out[i] = -(v - self.eps)
            elif v <= self._third:
                out[i] = float(self.R.sigma(v)) - self._sig_third + self._offset
            else:
                out[i] = self._blend_length(v)
        return out

    def y_of_t(self, t):
        t = np.asarray(t, dtype=float)
        out = np.empty_like(t)
        for i, v in np.ndenumerate(t):
            if v <= 0.0:
                out[i] = self.eps - v
            elif v >= self._offset:
                out[i] = float(self.R.sigma_inv(v - self._offset + self._sig_third))
            else:
                out[i] = optimize.brentq(lambda yy: self._blend_length(yy) - v, self._third, self.eps,
                                         xtol=1e-15, rtol=4 * np.finfo(float).eps)
        return out

    def scale(self, y):
        y = np.asarray(y, dtype=float)
        return np.where(y <= self.eps, self.blend.delta(np.minimum(y, self.eps)), 1.0)

    def dscale(self, y):
        y = np.asarray(y, dtype=float)
        return np.where(y <= self.eps, self.blend.ddelta(np.minimum(y, self.eps)), 0.0)


def make_chart(R, chart):
    if chart == "sigma":
        return SigmaChart(R)
    if chart == "blended":
        return BlendedChart(R)
    raise ValidationError(f"unknown chart {chart!r}; use 'sigma' or 'blended'")


# -- transformed problem ---------------------------------------------------------------


@dataclass
class TransformedProblem:
    """Uniformly parabolic problem on the strip ``[t_far, t_trunc] x T^(m-1)``.

    ``t_far`` is the image of the far boundary ``y = 1`` (zero when the
    collar is the whole domain); the truncation end carries a homogeneous
    Dirichlet condition.
    """

    bvp: DegenerateBVP
    geom: ModelGeometry
    R: object
    chart: object
    t_trunc: float
    ellipticity: EllipticityReport | None = None

    def __post_init__(self):
        self.t_far = float(self.chart.t_of_y(1.0))
        if not self.t_trunc > self.t_far:
            raise ValidationError("t_trunc must exceed the image of the far boundary")

    @property
    def m(self):
        return self.geom.m

    def y_of_t(self, t):
        return self.chart.y_of_t(t)

    def _pieces(self, T, Y=None):
        T = np.atleast_2d(np.asarray(T, dtype=float))
        y = self.chart.y_of_t(T[:, 0]) if Y is None else np.asarray(Y, dtype=float)
        X = np.column_stack([y, T[:, 1:]])
        a, a1, a0 = self.bvp.coefficients(X)
        w = self.chart.scale(y)
        dw = self.chart.dscale(y)
        return a, a1, a0, w, dw

    def coefficients(self, T, Y=None):
        """``(a2_hat, a1_hat, a0_hat)`` at strip points ``(t, z...)``."""
        a, a1, a0, w, dw = self._pieces(T, Y)
        a2h = a.copy()
        a2h[:, 0, 0] = a[:, 0, 0] / w**2
        a2h[:, 0, 1:] = -a[:, 0, 1:] / w[:, None]
        a2h[:, 1:, 0] = -a[:, 1:, 0] / w[:, None]
        a1h = a1.copy()
        a1h[:, 0] = -a[:, 0, 0] * dw / w**2 - a1[:, 0] / w
        return a2h, a1h, a0.copy()

    def frame_coefficients(self, T, Y=None):
        """Coefficients of the local representation in powers of ``w d_y``
        and ``d_z``: ``(abar2, abar1, abar0)``."""
        a, a1, a0, w, dw = self._pieces(T, Y)
        ab2 = a.copy()
        ab2[:, 0, 0] = a[:, 0, 0] / w**2
        ab2[:, 0, 1:] = a[:, 0, 1:] / w[:, None]
        ab2[:, 1:, 0] = a[:, 1:, 0] / w[:, None]
        ab1 = a1.copy()
        ab1[:, 0] = a1[:, 0] / w + a[:, 0, 0] * dw / w**2
        return ab2, ab1, a0.copy()

    def boundary_coefficients(self):
        """Far-boundary operator in strip form: ``(b_t, b_z, b0)`` with
        ``B u = b_t d_t u + b_z . grad_z u + b0 u``."""
        if self.bvp.far_boundary != "robin":
            return None
        w = float(self.chart.scale(1.0))
        b = self.bvp.b
        return -b[0] / w, b[1:].copy(), float(self.bvp.b0)

    def describe(self):
        return {
            "operator": self.bvp.name,
            "m": self.m,
            "chart": self.chart.name,
            "t_far": self.t_far,
            "t_trunc": self.t_trunc,
            "far_boundary": self.bvp.far_boundary,
        }


def transform(bvp, geom, R, chart="sigma", t_trunc=30.0, enforce=True, **check_kwargs):
    """Push the degenerate problem forward to the strip.

    Refuses (``EllipticityRefusal``) when the anisotropic ellipticity check
    fails, unless ``enforce=False``.
    """
    bvp.check_geometry(geom)
    geom.check_singularity(R)
    if not _is_strong(R):
        raise CheckFailed(f"{R!r} is not a strong singularity function; the collar does not map onto a half-line")
    report = None
    if enforce:
        report = check_anisotropic_ellipticity(bvp, geom, R, **check_kwargs)
        if not report.passed:
            raise EllipticityRefusal(
                "operator is not R-degenerate uniformly strongly elliptic "
                f"(alpha_lower={report.alpha_lower:.3e} at {np.round(report.worst_point, 12).tolist()}); "
                "the transformed problem would not be uniformly parabolic",
                worst_point=report.worst_point,
                alpha_lower=report.alpha_lower,
            )
    return TransformedProblem(bvp, geom, R, make_chart(R, chart), float(t_trunc), report)


# -- bc-regularity --------------------------------------------------------------------


@dataclass
class BCRegularityReport:
    sup_norms: dict
    modulus: list
    bc_ok: bool
    buc_ok: bool
    passed: bool
    abar_min_eig: float

    def summary(self):
        sups = " ".join(f"{k}={v:.6g}" for k, v in self.sup_norms.items())
        om = " ".join(f"w({h:.4g})={w:.3g}" for h, w in self.modulus)
        return f"bc_ok={self.bc_ok} buc_ok={self.buc_ok} passed={self.passed} {sups} {om}"


def _strip_samples(problem, n_t, n_z, t_max):
    t = np.linspace(problem.t_far, t_max, n_t)
    axes = [t] + [torus_grid(n_z) for _ in range(problem.m - 1)]
    mesh = np.meshgrid(*axes, indexing="ij")
    y = problem.y_of_t(t)
    ymesh = np.meshgrid(y, *axes[1:], indexing="ij")[0]
    T = np.stack([g.ravel() for g in mesh], axis=-1)
    return axes, T, ymesh.ravel()


def _modulus(values, axes, h):
    """``max |f(x) - f(x')|`` over sample pairs with ``|x - x'| <= h``."""
    steps = [a[1] - a[0] for a in axes]
    radii = [int(np.floor(h / s + 1e-12)) for s in steps]
    grids = np.meshgrid(*[np.arange(-r, r + 1) * s for r, s in zip(radii, steps)], indexing="ij")
    footprint = sum(g**2 for g in grids) <= h * h * (1 + 1e-12)
    padded = np.pad(values, [(radii[0], radii[0])], mode="edge") if len(axes) == 1 else values
    if len(axes) > 1:
        padded = np.pad(values, [(radii[0], radii[0])] + [(0, 0)] * (len(axes) - 1), mode="edge")
        padded = np.pad(padded, [(0, 0)] + [(r, r) for r in radii[1:]], mode="wrap")
    hi = ndimage.maximum_filter(padded, footprint=footprint, mode="nearest")
    lo = ndimage.minimum_filter(padded, footprint=footprint, mode="nearest")
    core = tuple(slice(r, r + n) for r, n in zip(radii, values.shape))
    hi, lo = hi[core], lo[core]
    return float(max(np.max(hi - values), np.max(values - lo)))


def check_bc_regularity(bvp, geom, R, chart="sigma", t_max=30.0, n_t=2048, n_z=32,
                        h_schedule=None, tol=0.1, sup_cap=1e8):
    """Boundedness of all local coefficients and a discrete modulus of
    continuity of the principal ones on a strip grid.

    Only the principal coefficients need to be uniformly continuous; lower
    order ones only need to be bounded.
    """
    bvp.check_geometry(geom)
    problem = TransformedProblem(bvp, geom, R, make_chart(R, chart), float(t_max))
    axes, T, Y = _strip_samples(problem, n_t, n_z, t_max)
    ab2, ab1, ab0 = problem.frame_coefficients(T, Y)
    m = geom.m
    shape = tuple(a.size for a in axes)
    sup = {
        "abar2": float(np.max(np.abs(ab2))),
        "abar1": float(np.max(np.abs(ab1))),
        "abar0": float(np.max(np.abs(ab0))),
    }
    bc_ok = all(np.isfinite(v) and v <= sup_cap for v in sup.values())
    if h_schedule is None:
        dt = axes[0][1] - axes[0][0]
        h_schedule = [2.0**-j for j in range(0, 30) if 2.0**-j >= 2.0 * dt]
    modulus = []
    for h in h_schedule:
        w = 0.0
        if bc_ok:
            for i in range(m):
                for j in range(i, m):
                    w = max(w, _modulus(ab2[:, i, j].reshape(shape), axes, h))
        else:
            w = np.inf
        modulus.append((float(h), w))
    oms = [w for _, w in modulus]
    monotone = all(b <= a * (1 + 1e-12) + 1e-15 for a, b in zip(oms[:-1], oms[1:]))
    buc_ok = bool(bc_ok and monotone and oms[-1] <= tol)
    min_eig = float(np.min(np.linalg.eigvalsh(ab2)[:, 0]))
    return BCRegularityReport(sup, modulus, bool(bc_ok), buc_ok, bool(bc_ok and buc_ok), min_eig)


def check_transformed_definiteness(bvp, geom, R, chart="sigma", t_max=30.0, n_t=512, n_z=64,
                                   alpha_min=1e-6):
    """Uniform positive definiteness of the principal local coefficients
    on strip samples; returns ``(passed, min_eig)``."""
    bvp.check_geometry(geom)
    problem = TransformedProblem(bvp, geom, R, make_chart(R, chart), float(t_max))
    _, T, Y = _strip_samples(problem, n_t, n_z, t_max)
    ab2, _, _ = problem.frame_coefficients(T, Y)
    asym = np.max(np.abs(ab2 - np.swapaxes(ab2, -1, -2)))
    if asym > 1e-12 * (1.0 + np.max(np.abs(ab2))):
        return False, -np.inf
    min_eig = float(np.min(np.linalg.eigvalsh(ab2)[:, 0]))
    return bool(min_eig >= alpha_min), min_eig


# -- operator application ---------------------------------------------------------------


def _grid_points(u, first=None):
    mesh = np.meshgrid(first if first is not None else u.axes[0], *u.axes[1:], indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=-1)


def _apply(values, axes, a2, a1, a0):
    """``-a2 : grad^2 u + a1 . grad u + a0 u`` by second-order differences."""
    m = len(axes)
    x = axes[0]
    steps = [None] + [z[1] - z[0] for z in axes[1:]]
    first = [diff_normal(values, x, axis=0)] + [diff_periodic(values, steps[i], i) for i in range(1, m)]
    out = a0 * values
    for i in range(m):
        out = out + a1[..., i] * first[i]
        for j in range(m):
            if i == j:
                d2 = diff2_normal(values, x, axis=0) if i == 0 else diff2_periodic(values, steps[i], i)
            elif j > i:
                d2 = diff_periodic(first[i], steps[j], j)
            else:
                continue
            weight = 1.0 if i == j else 2.0
            out = out - weight * a2[..., i, j] * d2
    return out


def apply_operator(problem, u):
    """Nodal values of the operator applied to ``u``.

    ``problem`` is either a ``TransformedProblem`` (``u`` on a ``t``-grid)
    or a ``DegenerateBVP`` (``u`` on a ``y``-grid).
    """
    if isinstance(problem, TransformedProblem):
        if u.coordinate != "t" or u.ndim != problem.m:
            raise ValidationError("grid mismatch: expected a t-grid field of matching dimension")
        T = _grid_points(u)
        a2, a1, a0 = problem.coefficients(T)
    elif isinstance(problem, DegenerateBVP):
        if u.coordinate != "y" or u.ndim != problem.m:
            raise ValidationError("grid mismatch: expected a y-grid field of matching dimension")
        if u.axes[0][0] <= 0.0 or u.axes[0][-1] > 1.0:
            raise DomainError("y-grid must lie in (0, 1]")
        a2, a1, a0 = problem.coefficients(_grid_points(u))
    else:
        raise ValidationError("problem must be a TransformedProblem or DegenerateBVP")
    shape = u.shape
    m = u.ndim
    out = _apply(u.values, u.axes, a2.reshape(shape + (m, m)), a1.reshape(shape + (m,)), a0.reshape(shape))
    return u.with_values(out)
