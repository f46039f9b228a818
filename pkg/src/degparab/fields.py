"""Nodal fields on tensor-product grids, finite differences and quadrature.

Axis 0 is always the normal coordinate (``y`` on the collar, ``t`` on the
transformed strip); the remaining axes are tangential, uniform and periodic
with period ``2 pi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import ValidationError
from .geometry import TANGENTIAL_PERIOD

__all__ = [
    "Field",
    "graded_y_grid",
    "uniform_grid",
    "torus_grid",
    "diff_normal",
    "diff2_normal",
    "diff_periodic",
    "diff2_periodic",
    "integrate_normal",
    "integrate_tangential",
    "write_field_csv",
    "read_field_csv",
    "check_field",
]

FIELD_MAGIC = "# degparab-field v1"


@dataclass
class Field:
    """Nodal values on a tensor-product grid.

    ``axes[0]`` is the strictly increasing normal axis; ``axes[1:]`` are
    uniform periodic tangential axes without the duplicated endpoint.
    """

    axes: tuple
    values: np.ndarray
    coordinate: str = "y"
    time: float | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.axes = tuple(np.asarray(a, dtype=float) for a in self.axes)
        self.values = np.asarray(self.values, dtype=float)
        check_field(self)

    @property
    def ndim(self):
        return len(self.axes)

    @property
    def shape(self):
        return tuple(a.size for a in self.axes)

    @classmethod
    def from_function(cls, fn, axes, coordinate="y", time=None):
        """Sample ``fn(x0, x1, ...)`` on the grid spanned by ``axes``."""
        axes = tuple(np.asarray(a, dtype=float) for a in axes)
        mesh = np.meshgrid(*axes, indexing="ij")
        values = np.broadcast_to(np.asarray(fn(*mesh), dtype=float), mesh[0].shape)
        return cls(axes, np.array(values), coordinate=coordinate, time=time)

    def mesh(self):
        return np.meshgrid(*self.axes, indexing="ij")

    def with_values(self, values):
        return Field(self.axes, values, coordinate=self.coordinate, time=self.time)


def check_field(f):
    if f.coordinate not in ("y", "t"):
        raise ValidationError(f"field coordinate must be 'y' or 't', got {f.coordinate!r}")
    if f.values.shape != tuple(a.size for a in f.axes):
        raise ValidationError(
            f"value array shape {f.values.shape} does not match grid {tuple(a.size for a in f.axes)}"
        )
    for i, a in enumerate(f.axes):
        if a.ndim != 1 or a.size < 3:
            raise ValidationError(f"axis {i} must be 1-d with at least 3 nodes")
        if np.any(np.diff(a) <= 0.0):
            raise ValidationError(f"axis {i} is not strictly increasing")
    return f


# -- grids ---------------------------------------------------------------------


def graded_y_grid(eps=1.0, y_min=1e-12, ratio=0.9):
    """Geometric nodes ``eps * ratio**k`` from ``<= y_min`` up to ``eps``."""
    if not (0.0 < ratio < 1.0):
        raise ValidationError("grading ratio must lie in (0, 1)")
    if not (0.0 < y_min < eps):
        raise ValidationError("need 0 < y_min < eps")
    n = math.ceil(math.log(y_min / eps) / math.log(ratio))
    k = np.arange(n, -1, -1, dtype=float)
    return eps * ratio**k


def uniform_grid(a, b, n):
    """``n`` intervals on ``[a, b]``."""
    if n < 2:
        raise ValidationError("need at least 2 intervals")
    return np.linspace(a, b, int(n) + 1)


def torus_grid(n):
    if n < 3:
        raise ValidationError("tangential grid needs at least 3 nodes")
    return np.arange(int(n)) * (TANGENTIAL_PERIOD / n)


# -- finite differences --------------------------------------------------------


def diff_normal(u, x, axis=0):
    """Second-order first derivative on a (possibly graded) grid; one-sided
    second-order formulas at both ends."""
    return np.gradient(u, x, axis=axis, edge_order=2)


def diff2_normal(u, x, axis=0):
    """Second derivative: three-point formula inside, four-point one-sided
    formulas at the ends."""
    u = np.moveaxis(np.asarray(u, dtype=float), axis, 0)
    hm = np.diff(x)[:-1]
    hp = np.diff(x)[1:]
    shp = (-1,) + (1,) * (u.ndim - 1)
    hm = hm.reshape(shp)
    hp = hp.reshape(shp)
    out = np.empty_like(u)
    out[1:-1] = 2.0 * (
        u[:-2] / (hm * (hm + hp)) - u[1:-1] / (hm * hp) + u[2:] / (hp * (hm + hp))
    )
    if x.size >= 4:
        w0 = _second_derivative_weights(x[:4], x[0])
        w1 = _second_derivative_weights(x[-4:], x[-1])
        out[0] = np.tensordot(w0, u[:4], axes=1)
        out[-1] = np.tensordot(w1, u[-4:], axes=1)
    else:
        out[0] = out[1]
        out[-1] = out[-2]
    return np.moveaxis(out, 0, axis)


def _second_derivative_weights(nodes, x0):
    """Weights of the cubic-interpolation second derivative at ``x0``
    (second order at a grid end)."""
    d = nodes - x0
    V = np.vander(d, 4, increasing=True).T
    rhs = np.array([0.0, 0.0, 2.0, 0.0])
    return np.linalg.solve(V, rhs)


def diff_periodic(u, h, axis):
    return (np.roll(u, -1, axis=axis) - np.roll(u, 1, axis=axis)) / (2.0 * h)


def diff2_periodic(u, h, axis):
    return (np.roll(u, -1, axis=axis) - 2.0 * u + np.roll(u, 1, axis=axis)) / (h * h)


# -- quadrature ----------------------------------------------------------------


def integrate_normal(values, x, axis=0):
    return np.trapezoid(values, x, axis=axis)


def integrate_tangential(values, axes):
    """Rectangle rule over all periodic axes (exact for trigonometric
    polynomials below the Nyquist limit)."""
    out = values
    for z in reversed(axes):
        h = z[1] - z[0]
        out = out.sum(axis=-1) * h
    return out


# -- CSV -----------------------------------------------------------------------


def _axis_names(f):
    first = f.coordinate
    return [first] + [f"z{i + 2}" for i in range(f.ndim - 1)]


def write_field_csv(path, f):
    """Write a field as CSV with an 8-line header (7 comment lines and the
    column header); numbers carry 17 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = _axis_names(f)
    time = "nan" if f.time is None else f"{f.time:.17g}"
    header = [
        FIELD_MAGIC,
        f"# coordinate: {f.coordinate}",
        f"# time: {time}",
        f"# ndim: {f.ndim}",
        "# shape: " + "x".join(str(n) for n in f.shape),
        "# periodic: " + ",".join("0" if i == 0 else "1" for i in range(f.ndim)),
        "# format: %.17g, C order (last axis fastest)",
        ",".join(names + ["value"]),
    ]
    mesh = f.mesh()
    cols = np.column_stack([m.ravel() for m in mesh] + [f.values.ravel()])
    with path.open("w") as fh:
        fh.write("\n".join(header) + "\n")
        np.savetxt(fh, cols, fmt="%.17g", delimiter=",")
    return path


def read_field_csv(path):
    path = Path(path)
    with path.open() as fh:
        lines = [fh.readline().rstrip("\n") for _ in range(8)]
    if lines[0] != FIELD_MAGIC:
        raise ValidationError(f"{path} is not a degparab field file")
    meta = {}
    for line in lines[1:7]:
        key, _, val = line[2:].partition(":")
        meta[key.strip()] = val.strip()
    shape = tuple(int(n) for n in meta["shape"].split("x"))
    data = np.loadtxt(path, delimiter=",", skiprows=8, ndmin=2)
    values = data[:, -1].reshape(shape)
    axes = []
    for i, n in enumerate(shape):
        stride = int(np.prod(shape[i + 1:], dtype=int))
        axes.append(data[: n * stride : stride, i])
    time = float(meta["time"])
    return Field(tuple(axes), values, coordinate=meta["coordinate"],
                 time=None if math.isnan(time) else time)
