import numpy as np
import pytest

from degparab.exceptions import CheckFailed, DomainError, EllipticityRefusal, ValidationError
from degparab.fields import Field, torus_grid, uniform_grid
from degparab.geometry import ModelGeometry
from degparab.operators import (
    BlendedChart,
    DegenerateBVP,
    SigmaChart,
    TransformedProblem,
    apply_operator,
    check_anisotropic_ellipticity,
    check_bc_regularity,
    check_transformed_definiteness,
    comparison_operator,
    laplacian_operator,
    make_operator,
    model_operator,
    perturbed_operator,
    random_operator,
    transform,
)
from degparab.singfun import Exponential, Power


def _scalar_bvp(a_fn, a0_fn=None):
    return DegenerateBVP(
        1,
        lambda X: a_fn(X[:, 0])[:, None, None],
        lambda X: np.zeros((X.shape[0], 1)),
        (lambda X: a0_fn(X[:, 0])) if a0_fn else (lambda X: np.zeros(X.shape[0])),
    )


@pytest.mark.parametrize("s", [1.0, 1.5, 2.0, 3.0])
def test_model_alpha_is_one(s):
    R = Power(s)
    rep = check_anisotropic_ellipticity(model_operator(R, 2), ModelGeometry(2), R)
    assert rep.alpha_lower == pytest.approx(1.0, abs=1e-12)
    assert rep.alpha_upper == pytest.approx(1.0, abs=1e-12)
    assert rep.passed and rep.equivalent
    assert rep.random_direction_min >= rep.alpha_lower * (1 - 1e-9)
    assert rep.alpha_lower <= rep.min_eig.min() + 1e-15


def test_identity_passes_anisotropic():
    R = Power(2.0)
    rep = check_anisotropic_ellipticity(laplacian_operator(2), ModelGeometry(2), R)
    assert rep.alpha_lower >= 1.0 - 1e-12
    assert not rep.equivalent  # upper constant blows up like 1/R^2


def test_uniform_mode_comparison_table():
    R = Power(2.0)
    bvp, g = model_operator(R, 2), ModelGeometry(2)
    aniso = check_anisotropic_ellipticity(bvp, g, R, mode="anisotropic")
    unif = check_anisotropic_ellipticity(bvp, g, R, mode="uniform", s=2.0)
    assert unif.alpha_lower == pytest.approx(1.0, abs=1e-12)  # normal direction
    assert unif.alpha_upper > 1e6  # tangential ratio 1/y^(2s) is unbounded
    assert aniso.equivalent and not unif.equivalent
    with pytest.raises(ValidationError):
        check_anisotropic_ellipticity(bvp, g, R, mode="uniform")


def test_non_symmetric_rejected():
    bad = DegenerateBVP(2, lambda X: np.broadcast_to(np.array([[1.0, 0.5], [0.0, 1.0]]), (X.shape[0], 2, 2)),
                        lambda X: np.zeros((X.shape[0], 2)), lambda X: np.zeros(X.shape[0]))
    with pytest.raises(ValidationError, match="symmetric"):
        check_anisotropic_ellipticity(bad, ModelGeometry(2), Power(1.0))


def test_robin_normality():
    with pytest.raises(ValidationError, match="normal"):
        model_operator(Power(1.0), 2, "robin", b=[0.0, 1.0])
    with pytest.raises(ValidationError):
        model_operator(Power(1.0), 2, "robin")
    ok = model_operator(Power(1.0), 2, "robin", b=[2.0, 1.0], b0=0.5)
    assert ok.boundary_flag == 1


@pytest.mark.parametrize("s", [1.0, 2.0])
def test_model_transform_exact(s):
    R = Power(s)
    p = transform(model_operator(R, 2), ModelGeometry(2), R)
    t = np.linspace(0.0, 30.0, 301)
    T = np.column_stack([t, np.linspace(0, 2 * np.pi, 301)])
    a2, a1, a0 = p.coefficients(T)
    np.testing.assert_allclose(a2, np.broadcast_to(np.eye(2), a2.shape), atol=1e-12, rtol=0)
    np.testing.assert_allclose(a1, 0.0, atol=1e-12)
    np.testing.assert_allclose(a0, 0.0, atol=1e-12)


def test_model_transform_exponential_family():
    R = Exponential(1.0, 1.0)
    p = transform(model_operator(R, 1), ModelGeometry(1), R, t_trunc=50.0)
    t = np.linspace(0.0, 50.0, 101)[:, None]
    a2, a1, _ = p.coefficients(t)
    np.testing.assert_allclose(a2[:, 0, 0], 1.0, atol=1e-12)
    np.testing.assert_allclose(a1, 0.0, atol=1e-10)


def test_laplacian_glues_to_identity_beyond_collar():
    R = Power(1.0, eps=0.5)
    g = ModelGeometry(2, eps=0.5)
    p = transform(laplacian_operator(2), g, R, chart="blended")
    y = np.linspace(2 * 0.5 / 3, 1.0, 40)
    T = np.column_stack([p.chart.t_of_y(y), np.zeros_like(y)])
    a2, a1, a0 = p.coefficients(T, Y=y)
    np.testing.assert_allclose(a2, np.broadcast_to(np.eye(2), a2.shape), atol=1e-13)
    np.testing.assert_allclose(a1, 0.0, atol=1e-13)


def test_comparison_refused():
    R = Power(1.0)
    with pytest.raises(EllipticityRefusal) as info:
        transform(comparison_operator(R, 2), ModelGeometry(2), R)
    assert info.value.alpha_lower < 1e-6
    assert info.value.worst_point[0] < 1e-6
    p = transform(comparison_operator(R, 2), ModelGeometry(2), R, enforce=False)
    a2, _, _ = p.coefficients(np.array([[20.0, 0.0]]))
    assert a2[0, 0, 0] == pytest.approx(1.0)
    assert a2[0, 1, 1] == pytest.approx(np.exp(-40.0))


def test_weak_singularity_refused():
    R = Power(0.5)
    with pytest.raises(CheckFailed):
        transform(model_operator(R, 1), ModelGeometry(1), R)


def test_geometry_mismatch():
    with pytest.raises(ValidationError):
        transform(model_operator(Power(1.0), 2), ModelGeometry(3), Power(1.0))
    with pytest.raises(ValidationError):
        transform(model_operator(Power(1.0), 2), ModelGeometry(2), Power(1.0, eps=0.5))


@pytest.mark.parametrize("chart_cls", [SigmaChart, BlendedChart])
def test_chart_round_trip(chart_cls):
    R = Power(2.0, eps=0.6)
    c = chart_cls(R)
    y = np.concatenate([np.geomspace(1e-3, 0.6, 30), np.linspace(0.61, 1.0, 10)])
    t = c.t_of_y(y)
    assert np.all(np.diff(t) < 0)
    np.testing.assert_allclose(c.y_of_t(t), y, rtol=1e-12)
    # d_t = -w d_y
    h = 1e-6
    for v in (0.05, 0.3, 0.5, 0.8):
        dt = (c.t_of_y(v + h) - c.t_of_y(v - h)) / (2 * h)
        assert dt == pytest.approx(-1.0 / float(c.scale(v)), rel=1e-6)


def test_bc_regularity_examples():
    R = Power(2.0)
    g1 = ModelGeometry(1)
    rep = check_bc_regularity(model_operator(R, 2), ModelGeometry(2), R)
    assert rep.passed and all(w == 0.0 for _, w in rep.modulus)
    assert rep.sup_norms["abar2"] == pytest.approx(1.0)
    assert rep.sup_norms["abar1"] < 1e-12

    # lower order coefficient only needs to be bounded
    osc = _scalar_bvp(lambda y: R(y) ** 2, lambda y: np.sin(1.0 / y))
    assert check_bc_regularity(osc, g1, R).passed

    smooth = _scalar_bvp(lambda y: R(y) ** 2 * (2.0 + np.sin(R.sigma(y))))
    rep = check_bc_regularity(smooth, g1, R)
    assert rep.passed
    oms = [w for _, w in rep.modulus]
    assert all(b <= a for a, b in zip(oms, oms[1:]))

    rough = _scalar_bvp(lambda y: R(y) ** 2 * (2.0 + np.sin(np.exp(R.sigma(y)))))
    rep = check_bc_regularity(rough, g1, R)
    assert rep.bc_ok and not rep.buc_ok and not rep.passed

    assert not check_bc_regularity(laplacian_operator(1), g1, Power(1.0)).passed


def test_transformed_definiteness_model():
    R = Power(1.0)
    ok, lam = check_transformed_definiteness(model_operator(R, 2), ModelGeometry(2), R)
    assert ok and lam == pytest.approx(1.0)


@pytest.mark.parametrize("seed", range(6))
def test_verifiers_agree_on_random_fields(seed):
    R = Power(1.0)
    g = ModelGeometry(2)
    bvp = random_operator(R, 2, seed)
    a = check_anisotropic_ellipticity(bvp, g, R, n_y=100, n_z=32).passed
    b = check_transformed_definiteness(bvp, g, R, n_t=200, n_z=32)[0]
    assert a == b


def test_symmetry_preserved():
    R = Power(1.5)
    p = transform(perturbed_operator(R, 2, 0.3), ModelGeometry(2), R)
    t = np.linspace(0, 20, 50)
    T = np.column_stack([t, np.linspace(0, 6, 50)])
    a2, _, _ = p.coefficients(T)
    np.testing.assert_array_equal(a2, np.swapaxes(a2, 1, 2))
    assert np.min(np.linalg.eigvalsh(a2)[:, 0]) > 0.3


def test_apply_transformed_model_eigenfunction():
    R = Power(1.0)
    p = transform(model_operator(R, 2), ModelGeometry(2), R, t_trunc=10.0)
    errs = []
    for n in (64, 128, 256):
        u = Field.from_function(lambda t, z: np.cos(3 * z) * np.exp(-t), (uniform_grid(0, 10, n), torus_grid(n)),
                                coordinate="t")
        Au = apply_operator(p, u)
        errs.append(np.max(np.abs(Au.values - 8.0 * u.values)))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 1.8)


def test_apply_constant_gives_zero():
    R = Power(2.0)
    p = transform(model_operator(R, 2), ModelGeometry(2), R, t_trunc=10.0)
    u = Field((uniform_grid(0, 10, 20), torus_grid(8)), np.full((21, 8), 3.0), coordinate="t")
    np.testing.assert_allclose(apply_operator(p, u).values, 0.0, atol=1e-12)


def test_apply_grid_mismatch():
    R = Power(1.0)
    p = transform(model_operator(R, 2), ModelGeometry(2), R, t_trunc=10.0)
    u_y = Field((np.geomspace(0.01, 1, 10), torus_grid(4)), np.zeros((10, 4)))
    with pytest.raises(ValidationError):
        apply_operator(p, u_y)
    with pytest.raises(ValidationError):
        apply_operator(model_operator(R, 2), Field((uniform_grid(0, 1, 9), torus_grid(4)), np.zeros((10, 4)),
                                                   coordinate="t"))
    with pytest.raises(DomainError):
        apply_operator(model_operator(R, 2), Field((np.linspace(0.5, 2, 10), torus_grid(4)), np.zeros((10, 4))))


@pytest.mark.parametrize("name", ["model", "perturbed"])
def test_transform_apply_commutation(name):
    R = Power(2.0)
    bvp = make_operator(name, R, 2, amplitude=0.2)
    uf = lambda y, z: np.exp(-(np.log(y) + 2.0) ** 2) * np.cos(z)  # noqa: E731
    errs = []
    for n in (200, 400, 800):
        y = np.geomspace(1e-3, 1.0, n)
        z = torus_grid(32)
        Ay = apply_operator(bvp, Field.from_function(uf, (y, z)))
        p = TransformedProblem(bvp, ModelGeometry(2), R, SigmaChart(R), float(R.sigma(1e-3)))
        t = R.sigma(y)[::-1]
        v = Field.from_function(lambda tt, zz: uf(R.sigma_inv(tt), zz), (t, z), coordinate="t")
        At = apply_operator(p, v)
        errs.append(np.max(np.abs(At.values[::-1] - Ay.values)) / np.max(np.abs(Ay.values)))
    assert errs[0] > errs[1] > errs[2]
    assert errs[1] / errs[2] > 3.5


def test_robin_boundary_coefficients():
    R = Power(1.0, eps=0.5)
    g = ModelGeometry(2, 0.5, "robin")
    p = transform(model_operator(R, 2, "robin", b=[2.0, 1.0], b0=0.5), g, R)
    bt, bz, b0 = p.boundary_coefficients()
    # d_y = -(1/w) d_t with w = R(eps) beyond the collar
    assert bt == pytest.approx(-2.0 / 0.5)
    assert bz.tolist() == [1.0] and b0 == 0.5
    assert p.t_far == pytest.approx(-1.0)
