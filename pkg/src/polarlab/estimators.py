"""scikit-learn style front ends.

Each estimator is fitted on a compact set (a :class:`~polarlab.geometry.CompactSet`
or its dict descriptor) and afterwards evaluates potentials at arbitrary
points through ``transform``. Hyper-parameters follow the usual
``get_params``/``set_params`` contract, so the estimators can be cloned and
grid-searched like any other.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import energy as _energy
from . import measures as _measures
from . import polarization as _pol
from ._validation import check_compact_set, check_count, check_kernel, check_points, check_seed

__all__ = [
    "EquilibriumMeasureEstimator",
    "PolarizationMaximizer",
    "EnergyMinimizer",
    "GreedyEnergyPoints",
]


class _PotentialMixin:
    """``transform(X)`` returns the fitted potential at each row of ``X``, shape (n, 1)."""

    def _potential(self, X):
        raise NotImplementedError

    def transform(self, X):
        check_is_fitted(self)
        X = check_points(X, self.set_.ambient_dim)
        return self._potential(X)[:, None]


class EquilibriumMeasureEstimator(_PotentialMixin, BaseEstimator):
    """Equilibrium measure of ``kernel`` on the fitted set.

    Attributes
    ----------
    measure_ : EquilibriumMeasure
    W_K_ : float
    assumption_report_ : AssumptionReport or None
    """

    def __init__(self, kernel=None, n_nodes=None, resolution=None, tol=1e-3, check_assumptions=True):
        self.kernel = kernel
        self.n_nodes = n_nodes
        self.resolution = resolution
        self.tol = tol
        self.check_assumptions = check_assumptions

    def fit(self, X, y=None):
        A = check_compact_set(X)
        k = check_kernel(self.kernel if self.kernel is not None else {"kind": "riesz", "s": 0.5}, A)
        em = _measures.equilibrium_measure(
            A, k, n_nodes=self.n_nodes, resolution=self.resolution, tol=self.tol,
            check=self.check_assumptions,
        )
        self.set_ = A
        self.kernel_ = k
        self.measure_ = em
        self.W_K_ = em.W_K
        self.assumption_report_ = em.assumption_report
        return self

    def _potential(self, X):
        return _measures.potential(self.measure_.base, self.kernel_, X)

    def sample(self, n, random_state=0):
        check_is_fitted(self)
        return _measures.sample(self.measure_, check_count(n, "n"), check_seed(random_state))

    def score(self, X, y=None):
        """Negative max deviation of the potential from ``W_K`` at ``X`` (higher is flatter)."""
        U = self.transform(X)[:, 0]
        return -float(np.max(np.abs(U - self.W_K_)))


class PolarizationMaximizer(_PotentialMixin, BaseEstimator):
    """Searches for an ``n_points`` configuration with large polarization."""

    def __init__(self, kernel=None, n_points=8, n_restarts=2, budget=200, tol=1e-7, random_state=0):
        self.kernel = kernel
        self.n_points = n_points
        self.n_restarts = n_restarts
        self.budget = budget
        self.tol = tol
        self.random_state = random_state

    def fit(self, X, y=None):
        A = check_compact_set(X)
        k = check_kernel(self.kernel if self.kernel is not None else {"kind": "riesz", "s": 0.5}, A)
        N = check_count(self.n_points, "n_points")
        cfg, rep = _pol.maximin_solve(
            A, k, N, seed=check_seed(self.random_state), budget=check_count(self.budget, "budget"),
            n_restarts=check_count(self.n_restarts, "n_restarts"), pol_kwargs={"tol": self.tol},
        )
        self.set_ = A
        self.kernel_ = k
        self.configuration_ = cfg
        self.report_ = rep
        self.polarization_ = rep.value
        self.budget_exhausted_ = cfg.budget_exhausted
        return self

    def _potential(self, X):
        return _pol.discrete_potential(self.configuration_.sorted_points(), self.kernel_, X)

    def score(self, X=None, y=None):
        check_is_fitted(self)
        return self.polarization_


class EnergyMinimizer(_PotentialMixin, BaseEstimator):
    """Low discrete-energy ``n_points`` configuration by projected descent."""

    def __init__(self, kernel=None, n_points=8, n_restarts=1, budget=2000, random_state=0):
        self.kernel = kernel
        self.n_points = n_points
        self.n_restarts = n_restarts
        self.budget = budget
        self.random_state = random_state

    def fit(self, X, y=None):
        A = check_compact_set(X)
        k = check_kernel(self.kernel if self.kernel is not None else {"kind": "riesz", "s": 0.5}, A)
        cfg = _energy.minimize_energy(
            A, k, check_count(self.n_points, "n_points", 2), seed=check_seed(self.random_state),
            budget=check_count(self.budget, "budget"), n_restarts=check_count(self.n_restarts, "n_restarts"),
        )
        self.set_ = A
        self.kernel_ = k
        self.configuration_ = cfg
        self.energy_ = _energy.discrete_energy(cfg, k)
        self.budget_exhausted_ = cfg.budget_exhausted
        return self

    def _potential(self, X):
        return _pol.discrete_potential(self.configuration_.sorted_points(), self.kernel_, X)

    def score(self, X=None, y=None):
        check_is_fitted(self)
        return -self.energy_


class GreedyEnergyPoints(_PotentialMixin, BaseEstimator):
    """Greedy (Leja-type) energy points on the fitted set."""

    def __init__(self, kernel=None, n_points=50, a1=None, tol=1e-9):
        self.kernel = kernel
        self.n_points = n_points
        self.a1 = a1
        self.tol = tol

    def fit(self, X, y=None):
        A = check_compact_set(X)
        k = check_kernel(self.kernel if self.kernel is not None else {"kind": "riesz", "s": 0.5}, A)
        seq = _energy.greedy_points(A, k, check_count(self.n_points, "n_points"), a1=self.a1, tol=self.tol)
        self.set_ = A
        self.kernel_ = k
        self.sequence_ = seq
        self.points_ = seq.points
        self.values_ = seq.values
        return self

    def _potential(self, X):
        pts = _pol.Configuration(self.points_).sorted_points()
        return _pol.discrete_potential(pts, self.kernel_, X)
