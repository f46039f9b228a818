"""scikit-learn style wrappers.

``CollarTransformer`` maps collar distances ``y`` to strip coordinates
``t`` and back.  ``DegenerateParabolicSolver`` bundles transform, assembly
and time stepping: ``fit`` builds the discrete problem, ``predict`` maps a
forcing to the final state.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import CheckFailed
from .geometry import ModelGeometry
from .maxreg import mr_quotient
from .operators import make_chart, make_operator, transform
from .singfun import is_strong_singularity, make_singularity
from .solver import SolveConfig, assemble, solve

__all__ = ["CollarTransformer", "DegenerateParabolicSolver"]


def _singularity(est):
    params = {"s": est.s} if est.family == "power" else {"beta": est.beta, "gamma": est.gamma}
    return make_singularity(est.family, est.eps, **params)


class CollarTransformer(TransformerMixin, BaseEstimator):
    def __init__(self, family="power", s=1.0, beta=1.0, gamma=1.0, eps=1.0, chart="sigma"):
        self.family = family
        self.s = s
        self.beta = beta
        self.gamma = gamma
        self.eps = eps
        self.chart = chart

    def fit(self, X=None, y=None):
        self.R_ = _singularity(self)
        report = is_strong_singularity(self.R_)
        if not report.diverges:
            raise CheckFailed(report.message)
        self.chart_ = make_chart(self.R_, self.chart)
        return self

    def transform(self, X):
        check_is_fitted(self, "chart_")
        return self.chart_.t_of_y(np.asarray(X, dtype=float))

    def inverse_transform(self, X):
        check_is_fitted(self, "chart_")
        return self.chart_.y_of_t(np.asarray(X, dtype=float))


class DegenerateParabolicSolver(BaseEstimator):
    """``predict(f)`` returns the state at ``horizon`` for zero initial
    data; ``f`` is a vectorized callable of ``(tau, t, z...)``."""

    def __init__(self, operator="model", family="power", s=1.0, beta=1.0, gamma=1.0, m=2, eps=1.0,
                 chart="sigma", t_trunc=30.0, n_t=128, n_z=16, dt=0.01, theta=0.5, horizon=1.0, p=2.0,
                 enforce=True):
        self.operator = operator
        self.family = family
        self.s = s
        self.beta = beta
        self.gamma = gamma
        self.m = m
        self.eps = eps
        self.chart = chart
        self.t_trunc = t_trunc
        self.n_t = n_t
        self.n_z = n_z
        self.dt = dt
        self.theta = theta
        self.horizon = horizon
        self.p = p
        self.enforce = enforce

    def fit(self, X=None, y=None):
        R = _singularity(self)
        geom = ModelGeometry(self.m, self.eps)
        bvp = make_operator(self.operator, R, self.m)
        self.problem_ = transform(bvp, geom, R, chart=self.chart, t_trunc=self.t_trunc, enforce=self.enforce)
        self.config_ = SolveConfig(self.horizon, self.dt, self.theta, self.n_t, self.n_z, self.p)
        self.operator_ = assemble(self.problem_, self.n_t, self.n_z)
        return self

    def solve(self, f, u0=None):
        check_is_fitted(self, "operator_")
        return solve(self.problem_, f, u0, self.config_, self.operator_)

    def predict(self, f):
        return self.solve(f).final.values

    def mr_quotient(self, f):
        check_is_fitted(self, "operator_")
        return mr_quotient(self.problem_, f, self.config_, self.operator_)
