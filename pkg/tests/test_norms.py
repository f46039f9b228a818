import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from degparab.exceptions import DomainError, ValidationError
from degparab.fields import Field, diff_normal, torus_grid, uniform_grid
from degparab.norms import (
    RENORMING_SUITE,
    NormSpec,
    TruncationWarning,
    classical_norm,
    full_norm,
    renorming_gap,
    sample_transformed,
    transformed_integral,
    transformed_norm,
    weighted_integral,
    weighted_norm,
    write_norm_rows,
)
from degparab.singfun import Power

R1 = Power(1.0)


def ygrid(n=4000, y_min=1e-14):
    return np.geomspace(y_min, 1.0, n)


@pytest.mark.parametrize("k, expected", [(0, math.sqrt(0.5)), (1, 1.0), (2, math.sqrt(1.5))])
def test_direct_norm_of_y(k, expected):
    u = Field.from_function(lambda y: y, (ygrid(),))
    res = weighted_norm(u, R1, NormSpec(k, 2.0))
    assert not res.divergent
    assert res.value == pytest.approx(expected, rel=1e-5)


def test_constant_diverges():
    u = Field.from_function(lambda y: np.ones_like(y), (ygrid(),))
    res = weighted_norm(u, R1, NormSpec(0, 2.0))
    assert res.divergent and res.value == math.inf
    assert res.trace.size > 10


def test_zero_field():
    u = Field((ygrid(100),), np.zeros(100))
    assert weighted_norm(u, R1, NormSpec(2, 3.0)).value == 0.0
    v = Field((uniform_grid(0, 30, 99),), np.zeros(100), coordinate="t")
    assert transformed_norm(v, NormSpec(2, 3.0, "transformed")).value == 0.0


@pytest.mark.parametrize("k, expected", [(0, math.sqrt(0.5)), (1, 1.0), (2, math.sqrt(1.5))])
def test_transformed_norm_of_exp(k, expected):
    t = uniform_grid(0.0, 30.0, 3000)
    v = Field((t,), np.exp(-t), coordinate="t")
    assert transformed_norm(v, NormSpec(k, 2.0, "transformed")).value == pytest.approx(expected, rel=5e-5)


def test_truncation_warning():
    t = uniform_grid(0.0, 5.0, 500)
    v = Field((t,), np.exp(-0.1 * t), coordinate="t")
    with pytest.warns(TruncationWarning):
        res = transformed_norm(v, NormSpec(0, 2.0, "transformed"))
    assert res.truncated


def test_representation_mismatch():
    u = Field.from_function(lambda y: y, (ygrid(50),))
    with pytest.raises(ValidationError):
        weighted_norm(u, R1, NormSpec(0, 2.0, "transformed"))
    with pytest.raises(ValidationError):
        transformed_norm(u, NormSpec(0, 2.0, "transformed"))
    with pytest.raises(DomainError):
        weighted_norm(Field.from_function(lambda y: y, (np.linspace(0.1, 2.0, 20),)), R1, NormSpec())
    with pytest.raises(ValidationError):
        NormSpec(3, 2.0)
    with pytest.raises(ValidationError):
        NormSpec(1, 1.0)


def test_change_of_variables_oracle():
    f = lambda y: float(R1(y))  # noqa: E731
    assert abs(weighted_integral(f, R1) - 1.0) <= 1e-10
    assert abs(transformed_integral(f, R1) - 1.0) <= 1e-10


def test_full_norm_pieces():
    y = ygrid()
    x = np.linspace(1 / 3, 1.0, 2001)
    uc = Field.from_function(lambda v: v, (y,))
    ui = Field.from_function(lambda v: v, (x,))
    spec = NormSpec(0, 2.0)
    expected = math.sqrt(0.5) + math.sqrt((1 - 1 / 27) / 3)
    res = full_norm(uc, ui, R1, spec)
    assert res.value == pytest.approx(expected, rel=1e-5)
    with pytest.raises(ValidationError):
        full_norm(uc, Field.from_function(lambda v: v, (np.linspace(0.5, 1, 10),)), R1, spec)


def test_full_norm_zero():
    y, x = ygrid(50), np.linspace(1 / 3, 1, 20)
    assert full_norm(Field((y,), np.zeros(50)), Field((x,), np.zeros(20)), R1, NormSpec(1, 2.0)).value == 0.0


def _bump(v):
    out = np.zeros_like(v)
    inside = (v > 0.55) & (v < 0.95)
    w = v[inside]
    out[inside] = np.exp(25.0 - 1.0 / ((w - 0.55) * (0.95 - w)))
    return out


def test_full_norm_equals_classical_away_from_collar():
    # eps = 1/2: u vanishes on the collar, so only the interior patch counts
    R = Power(1.0, eps=0.5)
    spec = NormSpec(2, 2.0)
    uc = Field.from_function(_bump, (np.geomspace(1e-8, 0.5, 500),))
    ui = Field.from_function(_bump, (np.linspace(1 / 6, 1.0, 8001),))
    x = np.linspace(0.5, 1.0, 4801)
    ref = classical_norm(Field.from_function(_bump, (x,)), spec)
    res = full_norm(uc, ui, R, spec)
    assert not res.divergent
    assert res.value == pytest.approx(ref, rel=1e-6)
    d1 = diff_normal(ui.values, ui.axes[0])
    d2 = diff_normal(d1, ui.axes[0])
    direct = math.sqrt(np.trapezoid(ui.values**2 + d1**2 + d2**2, ui.axes[0]))
    assert res.value == pytest.approx(direct, rel=1e-12)


def test_derivative_consistency_under_refinement():
    R = Power(2.0)
    errs = []
    for n in (400, 800, 1600):
        y = np.geomspace(R.sigma_inv(20.0), 1.0, n)
        u = y**2 * np.exp(-0.5 / y)
        Ru = R(y) * diff_normal(u, y)
        t = R.sigma(y)[::-1]
        v = u[::-1]
        back = -diff_normal(v, t)[::-1]
        errs.append(np.max(np.abs(Ru - back)[3:-3]) / np.max(np.abs(Ru)))
    assert errs[-1] < 1e-4
    assert errs[0] > errs[1] > errs[2]


def test_norm_monotone_in_k():
    u = Field.from_function(lambda y, z: y**1.5 * np.cos(2 * z), (ygrid(2000, 1e-10), torus_grid(16)))
    vals = [weighted_norm(u, R1, NormSpec(k, 2.0)).value for k in (0, 1, 2)]
    assert vals[0] <= vals[1] <= vals[2]


@settings(max_examples=20, deadline=None)
@given(alpha=st.floats(-5, 5).filter(lambda a: abs(a) > 1e-3), seed=st.integers(0, 1000))
def test_norm_axioms(alpha, seed):
    rng = np.random.default_rng(seed)
    t = uniform_grid(0.0, 10.0, 200)
    c = rng.normal(size=(2, 3))
    f = lambda cc: np.exp(-t) * (cc[0] + cc[1] * np.sin(t) + cc[2] * np.cos(2 * t))  # noqa: E731
    u, v = Field((t,), f(c[0]), coordinate="t"), Field((t,), f(c[1]), coordinate="t")
    spec = NormSpec(2, 2.5, "transformed")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        nu, nv = transformed_norm(u, spec).value, transformed_norm(v, spec).value
        nsum = transformed_norm(u.with_values(u.values + v.values), spec).value
        nscaled = transformed_norm(u.with_values(alpha * u.values), spec).value
    assert nscaled == pytest.approx(abs(alpha) * nu, rel=1e-12)
    assert nsum <= nu + nv + 1e-12


def test_sobolev_form_dominates_semilocal():
    t = uniform_grid(0.0, 20.0, 400)
    z = torus_grid(16)
    v = sample_transformed(lambda y, zz: y * np.cos(zz), R1, t, (z,))
    a = transformed_norm(v, NormSpec(2, 2.0, "transformed", "semilocal")).value
    b = transformed_norm(v, NormSpec(2, 2.0, "transformed", "sobolev")).value
    assert b > a


def test_renorming_gap_decreases():
    gaps = [renorming_gap(RENORMING_SUITE[1], n)[2] for n in (500, 1000, 2000)]
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[1] / gaps[2] == pytest.approx(4.0, rel=0.1)


def test_write_norm_rows(tmp_path):
    spec = NormSpec(1, 2.0)
    u = Field.from_function(lambda y: y, (ygrid(500),))
    p = write_norm_rows(tmp_path / "n.csv", [(spec, weighted_norm(u, R1, spec))])
    lines = p.read_text().splitlines()
    assert lines[0] == "spec,representation,value,tail_estimate"
    assert lines[1].startswith("W^1_2,direct,")
