"""Estimator-style wrappers around the pipeline.

Ball families are passed as arrays of shape ``(n, 2)`` holding centres and
radii, row ``k`` being the ball of index ``k + 1``.  Hyperparameters live in
``__init__`` and fitted state in trailing-underscore attributes, so the
objects work with ``get_params``/``set_params`` and ``clone``.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .cantortree import build_tree, dimension_bisect, mass_distribution_bound, _bracket
from .covering import greedy_select
from .dimfn import DimensionFunction, check_dimension_function
from .geometry import Ball, Balls, make_space
from .localmeasure import build_local_measure
from .oracle import box_count
from .sequences import ExplicitSequence, RationalSequence


def check_balls(X, name: str = "X") -> Balls:
    """Validate an ``(n, 2)`` array of ``(centre, radius)`` rows."""
    X = check_array(X, dtype=float, ensure_2d=True, input_name=name)
    if X.shape[1] != 2:
        raise ValueError(f"{name} must have two columns (centre, radius), got {X.shape[1]}")
    if np.any(X[:, 1] <= 0):
        raise ValueError(f"{name} radii must be positive")
    return Balls(X[:, 0], X[:, 1], np.arange(1, X.shape[0] + 1))


def check_dimension(kappa: float, s: float, t: float, delta: float) -> DimensionFunction:
    f = DimensionFunction(kappa=kappa, s=s, t=t)
    v = check_dimension_function(f, delta)
    if not v.valid:
        raise ValueError(f"{f} is not admissible for delta={delta}: " + "; ".join(v.failures()))
    return f


class _FMixin:
    def _f(self):
        return check_dimension(self.kappa, self.s, self.t, self._space().delta)

    def _space(self):
        return make_space(self.space, self.cantor_depth)

    def _b0(self):
        return Ball(*self.B0)


class GreedyCoverSelector(_FMixin, TransformerMixin, BaseEstimator):
    """Greedy disjoint selection of rescaled balls; ``transform`` keeps the selected rows."""

    def __init__(self, s=2 / 3, t=0.0, kappa=1.0, C=1.0, B0=(0.5, 0.5), N=1, space="interval", cantor_depth=20):
        self.s = s
        self.t = t
        self.kappa = kappa
        self.C = C
        self.B0 = B0
        self.N = N
        self.space = space
        self.cantor_depth = cantor_depth

    def fit(self, X, y=None):
        balls = check_balls(X)
        sp = self._space()
        self.result_ = greedy_select(balls, self._f(), sp.delta, self.C, self._b0(), self.N, sp)
        self.indices_ = self.result_.indices
        self.fraction_ = self.result_.fraction
        self.success_ = self.result_.success
        return self

    def transform(self, X):
        check_is_fitted(self, "result_")
        X = check_array(X, dtype=float)
        return X[self.indices_ - 1]


class LocalMeasure(_FMixin, BaseEstimator):
    """Fits the local measure on a ball family; ``predict`` gives masses of query balls."""

    def __init__(self, s=2 / 3, t=0.0, kappa=1.0, C=1.0, B0=(0.5, 0.5), N=1, theta=1.0, space="interval", cantor_depth=20):
        self.s = s
        self.t = t
        self.kappa = kappa
        self.C = C
        self.B0 = B0
        self.N = N
        self.theta = theta
        self.space = space
        self.cantor_depth = cantor_depth

    def fit(self, X, y=None):
        balls = check_balls(X)
        sp = self._space()
        self.measure_ = build_local_measure(balls, self._f(), sp.delta, self.C, self._b0(), self.N, sp, theta=self.theta)
        self.K_ = self.measure_.K
        self.n_atoms_ = len(self.measure_)
        return self

    def predict(self, X):
        check_is_fitted(self, "measure_")
        q = check_balls(X)
        return self.measure_.mass(q.lo, q.hi)


class CantorTreeMeasure(_FMixin, BaseEstimator):
    """Builds the tree measure on a ball family.

    ``predict`` returns the upper bracket of the measure of each query ball;
    ``lower_bound_`` is the mass-distribution lower bound.
    """

    def __init__(self, s=2 / 3, t=0.0, kappa=1.0, C=1.0, B0=(0.5, 0.5), depth=1, n_samples=2000, random_state=0, max_nodes=200_000, space="interval", cantor_depth=20):
        self.s = s
        self.t = t
        self.kappa = kappa
        self.C = C
        self.B0 = B0
        self.depth = depth
        self.n_samples = n_samples
        self.random_state = random_state
        self.max_nodes = max_nodes
        self.space = space
        self.cantor_depth = cantor_depth

    def fit(self, X, y=None):
        balls = check_balls(X)
        sp = self._space()
        seq = ExplicitSequence(tuple(balls))
        f = self._f()
        self.tree_ = build_tree(seq, f, sp.delta, self.C, self.depth, self._b0(), len(balls), sp, max_nodes=self.max_nodes)
        mdp = mass_distribution_bound(self.tree_, f, self.C, self.n_samples, int(self.random_state))
        self.c_hat_ = mdp.c_hat
        self.lower_bound_ = mdp.lower_bound
        return self

    def predict(self, X):
        check_is_fitted(self, "tree_")
        q = check_balls(X)
        return _bracket(self.tree_.leaves, q.lo, q.hi)[1]


class BoxCountingDimension(BaseEstimator):
    """Dyadic box-counting slope of the union of the given balls."""

    def __init__(self, k_min=1, k_max=12, closed=False):
        self.k_min = k_min
        self.k_max = k_max
        self.closed = closed

    def fit(self, X, y=None):
        balls = check_balls(X)
        if self.k_max < self.k_min:
            raise ValueError("k_max must be >= k_min")
        self.estimate_ = box_count(balls, range(self.k_min, self.k_max + 1), self.closed)
        self.slope_ = self.estimate_.slope
        self.r2_ = self.estimate_.r2
        return self


class RationalDimensionEstimator(BaseEstimator):
    """Transition exponent ``s*`` for the rational family of exponent ``tau``."""

    def __init__(self, tau=3.0, C=10.0, Q=2000, depth=0, tol=0.01, s_range=None):
        self.tau = tau
        self.C = C
        self.Q = Q
        self.depth = depth
        self.tol = tol
        self.s_range = s_range

    def fit(self, X=None, y=None):
        seq = RationalSequence(float(self.tau))
        rng = self.s_range or (1.5 / self.tau, 2.6 / self.tau)
        self.result_ = dimension_bisect(seq, 1.0, self.C, self.depth, tuple(rng), self.tol, i_max=seq.count(self.Q))
        self.s_star_ = self.result_.s_star
        return self
