"""Singularity functions, the collar coordinate and the blended factor.

A singularity function ``R`` is smooth and positive on ``(0, 1]`` with
``int_0^1 dy / R(y) = inf``.  The collar coordinate

    sigma(y) = int_y^eps dtau / R(tau)

maps ``(0, eps]`` diffeomorphically onto ``[0, inf)`` with
``sigma'(y) = -1/R(y)``, so ``R d/dy = -d/dt`` in the new variable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize, special

from .exceptions import DomainError, InvalidFunctionError, ValidationError

__all__ = [
    "SIGMA_CAP",
    "SingularityFunction",
    "Power",
    "Exponential",
    "Tabulated",
    "DivergenceReport",
    "Blend",
    "is_strong_singularity",
    "sigma",
    "sigma_inv",
    "delta_eval",
    "make_singularity",
]

#: Collar coordinates beyond this value are reported as saturated.
SIGMA_CAP = 1.0e3

# exp overflows beyond this argument
_EXP_MAX = 709.0


def _as_array(y):
    arr = np.asarray(y, dtype=float)
    return arr, arr.ndim == 0


def _powint(x, k):
    """int_1^x u^(-k) du, stable for k near 1."""
    lx = np.log(x)
    one_minus_k = 1.0 - k
    with np.errstate(over="ignore"):
        out = np.where(
            one_minus_k == 0.0,
            lx,
            np.expm1(one_minus_k * lx) / np.where(one_minus_k == 0.0, 1.0, one_minus_k),
        )
    return out


def _powint_inv(v, k):
    """Inverse of ``x -> _powint(x, k)``; NaN where no preimage exists."""
    one_minus_k = 1.0 - k
    with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
        arg = one_minus_k * v
        lx = np.where(
            one_minus_k == 0.0,
            v,
            np.log1p(arg) / np.where(one_minus_k == 0.0, 1.0, one_minus_k),
        )
        lx = np.where((one_minus_k != 0.0) & (arg <= -1.0), np.nan, lx)
    return np.exp(lx)


class SingularityFunction:
    """Base class; subclasses implement ``__call__``, ``derivative``,
    ``_sigma`` and ``_sigma_inv`` on validated float arrays."""

    family = "abstract"

    def __init__(self, eps=1.0):
        eps = float(eps)
        if not (0.0 < eps <= 1.0):
            raise ValidationError(f"collar depth eps must lie in (0, 1], got {eps}")
        self.eps = eps

    # -- evaluation -------------------------------------------------------
    def __call__(self, y):
        raise NotImplementedError

    def derivative(self, y):
        raise NotImplementedError

    @property
    def params(self):
        return {}

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params.items())
        return f"{type(self).__name__}({args}, eps={self.eps!r})"

    # -- collar coordinate -------------------------------------------------
    def _check_collar(self, y):
        y, scalar = _as_array(y)
        if np.any(~np.isfinite(y)) or np.any(y <= 0.0) or np.any(y > self.eps):
            raise DomainError(f"y must lie in (0, eps={self.eps}]")
        return y, scalar

    def sigma(self, y):
        """Collar coordinate ``sigma(y)``; ``inf`` where it overflows."""
        y, scalar = self._check_collar(y)
        out = self._sigma(y)
        return float(out) if scalar else out

    def sigma_inv(self, t):
        t, scalar = _as_array(t)
        if np.any(~np.isfinite(t)) or np.any(t < 0.0):
            raise DomainError("t must be finite and >= 0")
        out = self._sigma_inv(t)
        if np.any(np.isnan(out)):
            raise DomainError(
                f"t exceeds the range of sigma for {self!r}; "
                "int_0^eps dy/R is finite"
            )
        return float(out) if scalar else out

    def sigma_saturated(self, y):
        """True where ``sigma(y)`` exceeds ``SIGMA_CAP``."""
        return np.asarray(self.sigma(y)) > SIGMA_CAP

    def _sigma(self, y):
        raise NotImplementedError

    def _sigma_inv(self, t):
        # generic monotone bracketing root find, used where no closed form
        out = np.empty_like(t)
        for i, ti in np.ndenumerate(t):
            out[i] = self._invert_scalar(float(ti))
        return out

    def _invert_scalar(self, t):
        if t == 0.0:
            return self.eps
        hi = self.eps
        lo = 0.5 * self.eps
        while self._sigma(np.asarray(lo)) < t:
            hi = lo
            lo *= 0.5
            if lo < 1e-300:
                return np.nan
        return optimize.brentq(
            lambda v: float(self._sigma(np.asarray(v))) - t,
            lo,
            hi,
            xtol=1e-300,
            rtol=4 * np.finfo(float).eps,
            maxiter=500,
        )

    def weak_integral(self):
        """``int_0^eps dy/R`` (``inf`` for strong singularity functions)."""
        return float(self._sigma(np.asarray(np.finfo(float).tiny)))


class Power(SingularityFunction):
    """``R(y) = y**s``; a strong singularity function iff ``s >= 1``."""

    family = "power"

    def __init__(self, s, eps=1.0):
        super().__init__(eps)
        self.s = float(s)
        if not np.isfinite(self.s):
            raise ValidationError("exponent s must be finite")

    @property
    def params(self):
        return {"s": self.s}

    def __call__(self, y):
        return np.power(y, self.s)

    def derivative(self, y):
        return self.s * np.power(y, self.s - 1.0)

    def _sigma(self, y):
        s, eps = self.s, self.eps
        lr = np.log(y / eps)
        if s == 1.0:
            return 0.0 - lr
        with np.errstate(over="ignore"):
            return eps ** (1.0 - s) * np.expm1((1.0 - s) * lr) / (s - 1.0)

    def _sigma_inv(self, t):
        s, eps = self.s, self.eps
        if s == 1.0:
            return eps * np.exp(-t)
        arg = t * (s - 1.0) * eps ** (s - 1.0)
        with np.errstate(invalid="ignore", divide="ignore"):
            lr = np.log1p(arg) / (1.0 - s)
            out = eps * np.exp(lr)
        return np.where(arg <= -1.0, np.nan, out)


class Exponential(SingularityFunction):
    """``R(y) = exp(-beta * y**(-gamma))`` with ``beta, gamma > 0``."""

    family = "exponential"

    def __init__(self, beta, gamma, eps=1.0):
        super().__init__(eps)
        self.beta = float(beta)
        self.gamma = float(gamma)
        if not (self.beta > 0.0 and self.gamma > 0.0):
            raise ValidationError("Exponential family needs beta > 0 and gamma > 0")

    @property
    def params(self):
        return {"beta": self.beta, "gamma": self.gamma}

    def __call__(self, y):
        return np.exp(-self.beta * np.power(y, -self.gamma))

    def derivative(self, y):
        y = np.asarray(y, dtype=float)
        return self(y) * self.beta * self.gamma * np.power(y, -self.gamma - 1.0)

    def _sigma(self, y):
        y = np.asarray(y, dtype=float)
        out = np.empty_like(y)
        for i, yi in np.ndenumerate(y):
            out[i] = self._sigma_scalar(float(yi))
        return out

    def _sigma_scalar(self, y):
        beta, gamma, eps = self.beta, self.gamma, self.eps
        if y >= eps:
            return 0.0
        top = beta * y ** (-gamma)
        if top > _EXP_MAX:
            return np.inf
        if gamma == 1.0:
            # beta * int e^u / u^2 du with antiderivative Ei(u) - e^u/u
            def prim(u):
                return special.expi(u) - np.exp(u) / u

            return beta * (prim(top) - prim(beta / eps))
        # integrand peaks at tau = y; scale it out and split geometrically
        edges = [y]
        while edges[-1] * 2.0 < eps:
            edges.append(edges[-1] * 2.0)
        edges.append(eps)
        val = 0.0
        for lo, hi in zip(edges[:-1], edges[1:]):
            part, _ = integrate.quad(
                lambda tau: np.exp(beta * tau ** (-gamma) - top),
                lo,
                hi,
                epsabs=0.0,
                epsrel=1e-12,
                limit=200,
            )
            val += part
        return val * np.exp(top)


class Tabulated(SingularityFunction):
    """Singularity function given by samples ``R(y_i)``.

    Between samples ``log R`` is linear in ``log y`` (piecewise power law);
    below the first sample the first segment is continued.  Integrals of
    ``1/R`` are evaluated exactly for this interpolant.
    """

    family = "tabulated"

    def __init__(self, y, values, eps=1.0):
        super().__init__(eps)
        y = np.asarray(y, dtype=float)
        values = np.asarray(values, dtype=float)
        if y.ndim != 1 or y.shape != values.shape or y.size < 2:
            raise InvalidFunctionError("need matching 1-d sample arrays with >= 2 points")
        if np.any(~np.isfinite(values)) or np.any(values <= 0.0):
            raise InvalidFunctionError("tabulated R must be strictly positive and finite")
        if np.any(y <= 0.0) or np.any(y > 1.0) or np.any(np.diff(y) <= 0.0):
            raise InvalidFunctionError("sample nodes must be strictly increasing in (0, 1]")
        if y[-1] < self.eps:
            raise InvalidFunctionError("samples must cover the collar (0, eps]")
        self.y = y
        self.values = values
        self._ly = np.log(y)
        self._lr = np.log(values)
        self._k = np.diff(self._lr) / np.diff(self._ly)
        # cumulative int_{y_0}^{y_j} dy/R at the knots
        seg = (y[:-1] / values[:-1]) * _powint(y[1:] / y[:-1], self._k)
        self._cum = np.concatenate([[0.0], np.cumsum(seg)])
        self._phi_eps = float(self._phi(np.asarray(self.eps)))

    @property
    def params(self):
        return {"n_samples": int(self.y.size)}

    def _segment(self, y):
        j = np.searchsorted(self.y, y, side="right") - 1
        return np.clip(j, 0, self.y.size - 2)

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        j = self._segment(y)
        return np.exp(self._lr[j] + self._k[j] * (np.log(y) - self._ly[j]))

    def derivative(self, y):
        y = np.asarray(y, dtype=float)
        return self(y) * self._k[self._segment(y)] / y

    def _phi(self, y):
        # int_{y_0}^{y} dy/R for the interpolant
        j = self._segment(y)
        return self._cum[j] + (self.y[j] / self.values[j]) * _powint(y / self.y[j], self._k[j])

    def _sigma(self, y):
        return self._phi_eps - self._phi(np.asarray(y, dtype=float))

    def _sigma_inv(self, t):
        target = self._phi_eps - t
        j = np.clip(np.searchsorted(self._cum, target, side="right") - 1, 0, self.y.size - 2)
        v = (target - self._cum[j]) * self.values[j] / self.y[j]
        return self.y[j] * _powint_inv(v, self._k[j])


# -- divergence test ----------------------------------------------------------


@dataclass
class DivergenceReport:
    """Outcome of the divergence test for ``int_0^eps dy/R``.

    ``shell_sums[k]`` is the integral over ``[eps 2^(-k-1), eps 2^(-k)]``
    and ``partial_sums[k]`` the integral over ``[eps 2^(-k-1), eps]``.
    """

    diverges: bool
    method: str
    shell_sums: np.ndarray
    partial_sums: np.ndarray
    tail_ratio: float
    message: str = ""

    def summary(self):
        verdict = "strong (int dy/R diverges)" if self.diverges else "weak (int dy/R converges)"
        return f"{verdict}; method={self.method}; tail shell ratio={self.tail_ratio:.6g}"


def _shells(R, n_shells):
    edges = R.eps * 2.0 ** (-np.arange(n_shells + 1, dtype=float))
    with np.errstate(invalid="ignore", over="ignore"):
        sig = R._sigma(edges)
        shells = sig[1:] - sig[:-1]
    return shells, sig[1:]


def _tail_ratio(shells):
    finite = shells[np.isfinite(shells) & (shells > 0)]
    if finite.size < 2:
        return np.inf
    ratios = finite[1:] / finite[:-1]
    tail = ratios[ratios.size // 2:]
    return float(np.exp(np.mean(np.log(tail))))


def is_strong_singularity(R, n_shells=16, ratio_tol=0.02):
    """Decide whether ``int_0^eps dy/R(y)`` diverges.

    Power and exponential families are decided analytically (``s >= 1``;
    any ``beta, gamma > 0``).  Tabulated functions use the dyadic-shell
    test: shells are confined to the sampled range and the integral is
    declared divergent when the geometric mean of the trailing shell ratios
    is at least ``1 - ratio_tol``, i.e. the partial sums keep growing
    without saturating.  The shell sums are reported in every case.
    """
    if isinstance(R, Power):
        shells, partial = _shells(R, n_shells)
        diverges = R.s >= 1.0
        return DivergenceReport(
            diverges, "analytic", shells, partial, _tail_ratio(shells),
            f"R(y)=y^{R.s:g}: strong iff s >= 1",
        )
    if isinstance(R, Exponential):
        shells, partial = _shells(R, n_shells)
        return DivergenceReport(
            True, "analytic", shells, partial, _tail_ratio(shells),
            "R(y)=exp(-beta y^-gamma): strong for all beta, gamma > 0",
        )
    if isinstance(R, Tabulated):
        n = int(np.floor(np.log2(R.eps / R.y[0])))
        if n < 4:
            raise InvalidFunctionError(
                "tabulated samples span fewer than 4 dyadic shells; divergence undecidable"
            )
        shells, partial = _shells(R, min(n, 64))
        ratio = _tail_ratio(shells)
        diverges = bool(ratio >= 1.0 - ratio_tol)
        return DivergenceReport(
            diverges, "dyadic-shells", shells, partial, ratio,
            f"geometric-mean trailing shell ratio {ratio:.6g} vs threshold {1.0 - ratio_tol:g}",
        )
    raise ValidationError(f"unsupported singularity function {R!r}")


def sigma(R, y):
    return R.sigma(y)


def sigma_inv(R, t):
    return R.sigma_inv(t)


# -- blend ---------------------------------------------------------------------


def _smooth_step(x):
    """C-infinity step: 0 for x <= 0, 1 for x >= 1."""
    x = np.asarray(x, dtype=float)
    inner = (x > 0.0) & (x < 1.0)
    xi = np.where(inner, x, 0.5)
    with np.errstate(divide="ignore", over="ignore"):
        h = special.expit(1.0 / (1.0 - xi) - 1.0 / xi)
    return np.where(x >= 1.0, 1.0, np.where(x <= 0.0, 0.0, h))


def _smooth_step_deriv(x):
    x = np.asarray(x, dtype=float)
    inner = (x > 0.0) & (x < 1.0)
    xi = np.where(inner, x, 0.5)
    h = _smooth_step(xi)
    with np.errstate(over="ignore", invalid="ignore"):
        d = h * (1.0 - h) * (1.0 / (1.0 - xi) ** 2 + 1.0 / xi**2)
    return np.where(inner, np.nan_to_num(d, nan=0.0, posinf=0.0), 0.0)


@dataclass(frozen=True)
class Blend:
    """Cut-off ``chi`` and blended factor ``delta`` for a singularity function.

    ``chi`` is 1 on ``(0, eps/3]``, 0 on ``[2 eps/3, eps]`` and
    ``1/delta^2 = 1 - chi + chi/R^2``; hence ``delta = R`` near the end
    carrying the singularity and ``delta = 1`` away from it.
    """

    R: SingularityFunction
    eps: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "eps", self.R.eps)

    def _arg(self, y):
        return 2.0 - 3.0 * np.asarray(y, dtype=float) / self.eps

    def chi(self, y):
        return _smooth_step(self._arg(y))

    def dchi(self, y):
        return -3.0 / self.eps * _smooth_step_deriv(self._arg(y))

    def delta(self, y):
        y = np.asarray(y, dtype=float)
        chi = self.chi(y)
        r = self.R(y)
        # R^2/delta^2 = chi + R^2 (1 - chi); avoids 1/R^2 overflow
        with np.errstate(invalid="ignore", divide="ignore"):
            mid = r / np.sqrt(chi + r * r * (1.0 - chi))
        return np.where(chi == 1.0, r, np.where(chi == 0.0, 1.0, mid))

    def ddelta(self, y):
        y = np.asarray(y, dtype=float)
        chi = self.chi(y)
        dchi = self.dchi(y)
        r = self.R(y)
        dr = self.R.derivative(y)
        with np.errstate(invalid="ignore", divide="ignore"):
            F = chi + r * r * (1.0 - chi)
            dF = dchi * (1.0 - r * r) + 2.0 * r * dr * (1.0 - chi)
            mid = dr / np.sqrt(F) - 0.5 * r * dF / F**1.5
        return np.where(chi == 1.0, dr, np.where(chi == 0.0, 0.0, mid))

    def christoffel(self, y):
        """Christoffel symbol ``-delta'/delta`` of ``dy^2/delta^2``."""
        return -self.ddelta(y) / self.delta(y)


def delta_eval(R, blend, y):
    """``delta(y) = (1 - chi + chi/R^2)^(-1/2)`` for ``y`` in the collar."""
    y, scalar = R._check_collar(y)
    if blend.R is not R:
        raise ValidationError("blend was built for a different singularity function")
    out = blend.delta(y)
    return float(out) if scalar else out


def make_singularity(family, eps=1.0, **params):
    """Build a singularity function from a family name and parameters."""
    family = family.lower()
    if family == "power":
        return Power(params["s"], eps=eps)
    if family in ("exponential", "exp"):
        return Exponential(params["beta"], params["gamma"], eps=eps)
    if family == "tabulated":
        return Tabulated(params["y"], params["values"], eps=eps)
    raise ValidationError(f"unknown singularity family {family!r}")
