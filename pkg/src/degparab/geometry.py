"""Model geometry ``M = (0, 1] x T^(m-1)`` and the blended collar metric.

Points are arrays ``(y, z^2, ..., z^m)`` where ``y`` is the distance to the
singular end ``Gamma = {y = 0}`` and ``z`` runs over the flat torus of
period ``2 pi`` per axis.  The far end ``y = 1`` carries either a
Dirichlet (``Gamma_0``) or a first-order (``Gamma_1``) boundary condition.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError, ValidationError
from .singfun import Blend, SingularityFunction

__all__ = [
    "ModelGeometry",
    "CollarMetric",
    "normal_frame",
    "degeneration_weight",
    "metric_coeffs",
    "TANGENTIAL_PERIOD",
    "collar_metric",
]

TANGENTIAL_PERIOD = 2.0 * np.pi
FAR_BOUNDARY_TYPES = ("dirichlet", "robin")


@dataclass(frozen=True)
class ModelGeometry:
    """Strip ``(0, 1] x T^(m-1)`` with collar depth ``eps``.

    Parameters
    ----------
    m : int
        Spatial dimension, ``m >= 1``.
    eps : float
        Collar depth in ``(0, 1]``.
    far_boundary : {"dirichlet", "robin"}
        Type of the boundary piece at ``y = 1``.
    """

    m: int = 1
    eps: float = 1.0
    far_boundary: str = "dirichlet"

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ValidationError(f"dimension m must be an integer >= 1, got {self.m}")
        if not (0.0 < self.eps <= 1.0):
            raise ValidationError(f"eps must lie in (0, 1], got {self.eps}")
        if self.far_boundary not in FAR_BOUNDARY_TYPES:
            raise ValidationError(
                f"far_boundary must be one of {FAR_BOUNDARY_TYPES}, got {self.far_boundary!r}"
            )

    @property
    def n_tangential(self):
        return self.m - 1

    @property
    def boundary_flag(self):
        """0 for a Dirichlet far end, 1 for a first-order far end."""
        return 0 if self.far_boundary == "dirichlet" else 1

    @property
    def interior_patch(self):
        """Normal extent ``(eps/3, 1]`` of the interior patch ``U``; with
        the collar ``(0, eps]`` it covers ``M``."""
        return (self.eps / 3.0, 1.0)

    def rho(self, p):
        """Distance to ``Gamma`` continued as the constant ``eps`` beyond
        the collar."""
        y = self._y(p)
        return np.minimum(y, self.eps)

    def in_collar(self, p):
        y = self._y(p)
        return (y > 0.0) & (y <= self.eps)

    def _y(self, p):
        p = np.asarray(p, dtype=float)
        if p.ndim == 0:
            if self.m != 1:
                raise ValidationError("scalar point given for m > 1")
            return p
        if p.shape[-1] != self.m:
            raise ValidationError(f"points must have {self.m} coordinates")
        return p[..., 0]

    def check_singularity(self, R):
        if not np.isclose(R.eps, self.eps, rtol=0.0, atol=1e-15):
            raise ValidationError(
                f"singularity function collar depth {R.eps} differs from geometry eps {self.eps}"
            )


def normal_frame(geom, p):
    """Unit normal and tangent basis at a collar point.

    The normal points from ``Gamma`` into ``M`` (increasing ``y``); the
    tangent basis consists of the tangential coordinate axes.
    """
    p = np.asarray(p, dtype=float).reshape(-1)
    if p.size != geom.m:
        raise ValidationError(f"point must have {geom.m} coordinates")
    y = p[0]
    if not (0.0 < y <= geom.eps):
        raise DomainError(f"point with y={y} lies outside the collar (0, {geom.eps}]")
    eye = np.eye(geom.m)
    return eye[0], eye[1:]


def degeneration_weight(geom, R, p):
    """``r(p) = R(rho(p))``: ``R(y)`` in the collar, ``R(eps)`` beyond."""
    geom.check_singularity(R)
    y = geom._y(p)
    if np.any(y <= 0.0) or np.any(y > 1.0):
        raise DomainError("points must satisfy 0 < y <= 1")
    out = R(np.minimum(y, geom.eps))
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class CollarMetric:
    """Metric ``dy^2/delta^2 + h`` on the collar with ``h`` the flat
    tangential metric."""

    blend: Blend
    m: int = 1

    @property
    def eps(self):
        return self.blend.eps

    def gR_normal(self, y):
        return 1.0 / self.blend.delta(y) ** 2

    def christoffel_normal(self, y):
        return self.blend.christoffel(y)


def metric_coeffs(cm, y):
    """Return ``(g_yy, g_tangential, sqrt_det)`` of the blended metric.

    ``g_tangential`` is the identity block of size ``m - 1``.
    """
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0.0) or np.any(y > cm.eps):
        raise DomainError(f"y must lie in (0, {cm.eps}]")
    d = cm.blend.delta(y)
    g_yy = 1.0 / d**2
    sqrt_det = 1.0 / d
    if y.ndim == 0:
        g_yy, sqrt_det = float(g_yy), float(sqrt_det)
    return g_yy, np.eye(cm.m - 1), sqrt_det


def collar_metric(R, m=1):
    if not isinstance(R, SingularityFunction):
        raise ValidationError("collar_metric needs a SingularityFunction")
    return CollarMetric(Blend(R), m)
