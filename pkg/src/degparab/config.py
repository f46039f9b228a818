"""Run configuration: ``[section]`` / ``key = value`` files plus flag overrides."""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields
from pathlib import Path

from .exceptions import ValidationError
from .operators import OPERATOR_FAMILIES

__all__ = ["RunConfig", "load_config", "SECTIONS"]

SECTIONS = {
    "geometry": ("m", "eps", "far_boundary", "b", "b0"),
    "singularity": ("family", "s", "beta", "gamma"),
    "operator": ("operator", "amplitude", "drift", "enforce"),
    "discretization": ("chart", "t_trunc", "n_t", "n_z", "dt", "theta", "horizon", "tol", "p", "k",
                       "form", "grids", "kind", "mode"),
    "sweep": ("s_values", "p_values", "n_seeds"),
    "run": ("output", "seed", "forcing"),
}


def _floats(text):
    if isinstance(text, (list, tuple)):
        return tuple(float(v) for v in text)
    return tuple(float(v) for v in str(text).replace(",", " ").split())


def _ints(text):
    return tuple(int(float(v)) for v in _floats(text))


def _bool(text):
    if isinstance(text, bool):
        return text
    val = str(text).strip().lower()
    if val in ("1", "true", "yes", "on"):
        return True
    if val in ("0", "false", "no", "off"):
        return False
    raise ValidationError(f"not a boolean: {text!r}")


@dataclass
class RunConfig:
    subcommand: str = ""
    # geometry
    m: int = 2
    eps: float = 1.0
    far_boundary: str = "dirichlet"
    b: tuple = ()
    b0: float = 0.0
    # singularity
    family: str = "power"
    s: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    # operator
    operator: str = "model"
    amplitude: float = 0.2
    drift: tuple = ()
    enforce: bool = True
    # discretization
    chart: str = "sigma"
    t_trunc: float = 30.0
    n_t: int = 128
    n_z: int = 16
    dt: float = 0.01
    theta: float = 0.5
    horizon: float = 1.0
    tol: float = 1e-10
    p: float = 2.0
    k: int = 2
    form: str = "semilocal"
    grids: tuple = (64, 128, 256)
    kind: str = "space"
    mode: str = "anisotropic"
    # sweep
    s_values: tuple = (1.0, 2.0)
    p_values: tuple = (2.0,)
    n_seeds: int = 20
    # run
    output: str = "degparab-out"
    seed: int = 0
    forcing: str = "ensemble"
    source: str = ""
    extra: dict = field(default_factory=dict)

    _CONVERT = {
        "m": int, "n_t": int, "n_z": int, "k": int, "n_seeds": int, "seed": int,
        "eps": float, "b0": float, "s": float, "beta": float, "gamma": float, "amplitude": float,
        "t_trunc": float, "dt": float, "theta": float, "horizon": float, "tol": float, "p": float,
        "b": _floats, "drift": _floats, "s_values": _floats, "p_values": _floats, "grids": _ints,
        "enforce": _bool,
    }

    def set(self, key, value):
        names = {f.name for f in fields(self)}
        if key not in names:
            raise ValidationError(f"unknown configuration key {key!r}")
        conv = self._CONVERT.get(key, str)
        try:
            setattr(self, key, conv(value))
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"bad value for {key}: {value!r}") from exc

    def validate(self):
        if self.m < 1:
            raise ValidationError("m must be >= 1")
        if not 0.0 < self.eps <= 1.0:
            raise ValidationError("eps must lie in (0, 1]")
        if self.far_boundary not in ("dirichlet", "robin"):
            raise ValidationError("far_boundary must be 'dirichlet' or 'robin'")
        if self.far_boundary == "robin" and len(self.b) != self.m:
            raise ValidationError(f"robin far boundary needs b with {self.m} components")
        if self.family not in ("power", "exponential"):
            raise ValidationError("family must be 'power' or 'exponential'")
        if self.family == "power" and not self.s > 0.0:
            raise ValidationError("power exponent s must be positive")
        if self.family == "exponential" and not (self.beta > 0.0 and self.gamma > 0.0):
            raise ValidationError("exponential parameters beta, gamma must be positive")
        if self.operator not in OPERATOR_FAMILIES:
            raise ValidationError(f"unknown operator {self.operator!r}; choose from {OPERATOR_FAMILIES}")
        if self.drift and len(self.drift) != self.m:
            raise ValidationError(f"drift needs {self.m} components")
        if self.chart not in ("sigma", "blended"):
            raise ValidationError("chart must be 'sigma' or 'blended'")
        for name in ("t_trunc", "dt", "horizon", "tol"):
            if not getattr(self, name) > 0.0:
                raise ValidationError(f"{name} must be positive")
        if not 0.5 <= self.theta <= 1.0:
            raise ValidationError("theta must lie in [1/2, 1]")
        if self.n_t < 4 or self.n_z < 3:
            raise ValidationError("need n_t >= 4 and n_z >= 3")
        if not self.p > 1.0 or self.k not in (0, 1, 2):
            raise ValidationError("need p > 1 and k in {0, 1, 2}")
        if self.form not in ("semilocal", "sobolev"):
            raise ValidationError("form must be 'semilocal' or 'sobolev'")
        if self.kind not in ("space", "time"):
            raise ValidationError("kind must be 'space' or 'time'")
        if self.mode not in ("anisotropic", "uniform"):
            raise ValidationError("mode must be 'anisotropic' or 'uniform'")
        if self.forcing not in ("ensemble", "manufactured", "zero"):
            raise ValidationError("forcing must be 'ensemble', 'manufactured' or 'zero'")
        if self.n_seeds < 1:
            raise ValidationError("the forcing ensemble is empty")
        return self

    def echo(self):
        """``[section] key = value`` text that reproduces this run."""
        lines = [f"# subcommand: {self.subcommand}"]
        for section, keys in SECTIONS.items():
            lines.append(f"[{section}]")
            for key in keys:
                val = getattr(self, key)
                if isinstance(val, tuple):
                    val = ", ".join(repr(v) for v in val)
                elif isinstance(val, float):
                    val = repr(val)
                lines.append(f"{key} = {val}")
            lines.append("")
        return "\n".join(lines)


def load_config(path, cfg=None):
    """Read a config file into ``cfg`` (a fresh ``RunConfig`` by default)."""
    cfg = cfg or RunConfig()
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"config file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ValidationError(f"cannot parse {path}: {exc}") from exc
    for section in parser.sections():
        if section not in SECTIONS:
            raise ValidationError(f"unknown config section [{section}]")
        for key, value in parser.items(section):
            if key not in SECTIONS[section]:
                raise ValidationError(f"key {key!r} does not belong to section [{section}]")
            cfg.set(key, value)
    cfg.source = str(path)
    return cfg
