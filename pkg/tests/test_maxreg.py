import numpy as np
import pytest

from degparab.exceptions import UndefinedQuotientError, ValidationError
from degparab.geometry import ModelGeometry
from degparab.maxreg import MRExperiment, forcing_ensemble, mr_quotient, mr_sweep, worker_count
from degparab.operators import model_operator, transform
from degparab.singfun import Power
from degparab.solver import SolveConfig, assemble


@pytest.fixture(scope="module")
def problem():
    R = Power(1.0)
    return transform(model_operator(R, 2), ModelGeometry(2), R, t_trunc=10.0)


def _cfg(n=64, theta=0.5):
    return SolveConfig(1.0, 1.0 / (n // 2), theta, n, n // 4)


def test_zero_forcing_is_undefined(problem):
    with pytest.raises(UndefinedQuotientError):
        mr_quotient(problem, lambda tau, t, z: np.zeros_like(t), _cfg())
    with pytest.raises(UndefinedQuotientError):
        mr_quotient(problem, None, _cfg())


def test_quotient_is_scale_invariant(problem):
    f = forcing_ensemble(1, (0, 0), 2, 64, 16, problem.t_far, problem.t_trunc, 1.0)[0]
    cfg = _cfg()
    op = assemble(problem, cfg.n_t, cfg.n_z)
    q = mr_quotient(problem, f, cfg, op)
    for alpha in (-3.0, 1e-3, 250.0):
        assert mr_quotient(problem, f.scaled(alpha), cfg, op) == pytest.approx(q, rel=1e-10)


def test_ensemble_is_deterministic():
    a = forcing_ensemble(3, (7, 1), 2, 64, 16, 0.0, 10.0, 1.0)
    b = forcing_ensemble(3, (7, 1), 2, 64, 16, 0.0, 10.0, 1.0)
    c = forcing_ensemble(3, (7, 2), 2, 64, 16, 0.0, 10.0, 1.0)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x.coeffs, y.coeffs)
        np.testing.assert_array_equal(x.k, y.k)
    assert any(not np.array_equal(x.coeffs, y.coeffs) or not np.array_equal(x.k, y.k) for x, y in zip(a, c))
    t = np.linspace(0, 10, 201)
    f = a[0](0.3, t, np.zeros_like(t))
    assert np.all(f[t >= 2.5] == 0.0)  # supported in the first quarter of the strip


def test_frequency_band_widens_with_grid():
    coarse = forcing_ensemble(40, (0, 0), 2, 64, 16, 0.0, 10.0, 1.0)
    fine = forcing_ensemble(40, (0, 0), 2, 256, 64, 0.0, 10.0, 1.0)
    assert max(int(f.k.max()) for f in coarse) <= 2
    assert max(int(f.k.max()) for f in fine) > 2


def test_empty_ensemble_rejected():
    with pytest.raises(ValidationError, match="empty"):
        forcing_ensemble(0, (0, 0), 2, 64, 16, 0.0, 10.0, 1.0)
    with pytest.raises(ValidationError, match="empty"):
        MRExperiment(n_seeds=0)
    with pytest.raises(ValidationError):
        MRExperiment(s_values=(0.5,))
    with pytest.raises(ValidationError):
        MRExperiment(grids=(128, 64))


def test_theta_variants_agree(problem):
    f = forcing_ensemble(1, (3, 0), 2, 64, 16, problem.t_far, problem.t_trunc, 1.0)[0]
    q_cn = mr_quotient(problem, f, SolveConfig(1.0, 1 / 64, 0.5, 64, 16))
    q_be = mr_quotient(problem, f, SolveConfig(1.0, 1 / 64, 1.0, 64, 16))
    assert abs(q_cn - q_be) <= 0.1 * q_cn


def test_single_mode_stable_over_two_refinements(problem):
    f = lambda tau, t, z: np.exp(-((t - 2.0) ** 2)) * np.cos(z)  # noqa: E731
    qs = [mr_quotient(problem, f, _cfg(n)) for n in (32, 64, 128)]
    assert max(qs) <= 1.1 * min(qs)


def test_sweep_m1_stable(tmp_path):
    exp = MRExperiment(s_values=(1.0,), grids=(32, 64), m=1, n_seeds=4)
    table = mr_sweep(exp)
    assert [r["n_grid"] for r in table.rows] == [32, 64]
    assert table.all_stable and not table.any_unstable
    assert all(r["status"] == "ok" and r["seed_count"] == 4 for r in table.rows)
    path = table.write(tmp_path / "mr.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "s,p,n_grid,seed_count,max_q,median_q,stable_flag,status"
    assert len(lines) == 3


def test_sweep_refuses_comparison_operator():
    table = mr_sweep(MRExperiment(family="comparison", s_values=(1.0,), grids=(32, 64), n_seeds=2))
    assert all(r["status"] == "refused" for r in table.rows)
    assert not table.all_stable


def test_sweep_is_reproducible():
    exp = MRExperiment(s_values=(1.0,), grids=(32, 64), m=1, n_seeds=3, master_seed=11)
    a, b = mr_sweep(exp), mr_sweep(exp)
    assert [r["max_q"] for r in a.rows] == [r["max_q"] for r in b.rows]


def test_worker_count(monkeypatch):
    monkeypatch.setenv("DEGPARAB_THREADS", "1")
    assert worker_count(5) == 1
    monkeypatch.setenv("DEGPARAB_THREADS", "many")
    with pytest.raises(ValidationError):
        worker_count(2)
    monkeypatch.delenv("DEGPARAB_THREADS")
    assert 1 <= worker_count(3) <= 3
