"""scikit-learn style wrappers.

Each row of ``X`` is one parameter set: three columns (c, delta, N) in
reduced units or five columns (epsilon, J, U, V, N) in physical units.
The energy estimators have nothing to learn; ``fit`` only validates and
records the column layout, ``predict`` returns one energy per row.
:class:`PowerLawError` is a genuine fit of |xi| = A N^-alpha.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.metrics import r2_score
from sklearn.utils.validation import check_array, check_is_fitted

from . import approx
from .analysis import fit_power_law
from .bethe import SolverOptions, solve_first_excited, solve_ground
from .exact import physical_spectrum, reduced_spectrum
from .model import PhysicalParams, ReducedParams, map_energy_to_physical, reduce

__all__ = ["ExactEnergy", "ClosedFormEnergy", "BetheEnergy", "PowerLawError", "rows_to_params"]


def rows_to_params(X) -> list:
    """Validate a parameter table and turn each row into a parameter object."""
    X = check_array(X, dtype=float)
    if X.shape[1] == 3:
        return [ReducedParams(c, delta, N) for c, delta, N in X]
    if X.shape[1] == 5:
        return [PhysicalParams(eps, J, U, V, N) for eps, J, U, V, N in X]
    raise ValueError(f"X needs 3 (c, delta, N) or 5 (epsilon, J, U, V, N) columns, got {X.shape[1]}")


class _EnergyEstimator(RegressorMixin, BaseEstimator):
    def fit(self, X, y=None):
        X = check_array(X, dtype=float)
        rows_to_params(X)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "n_features_in_")
        params = rows_to_params(X)
        if len(params) and (5 if isinstance(params[0], PhysicalParams) else 3) != self.n_features_in_:
            raise ValueError(f"X has a different column layout than during fit ({self.n_features_in_} columns)")
        return np.array([self._energy(p) for p in params])

    def _check_level(self):
        if self.level not in (0, 1):
            raise ValueError(f"level must be 0 or 1, got {self.level!r}")


class ExactEnergy(_EnergyEstimator):
    """Energy of level ``level`` (0 = ground) from exact diagonalization."""

    def __init__(self, level: int = 0):
        self.level = level

    def _energy(self, p):
        if isinstance(p, PhysicalParams):
            return float(physical_spectrum(p)[self.level])
        return float(reduced_spectrum(p).energies[self.level])


class ClosedFormEnergy(_EnergyEstimator):
    """Closed-form estimate; ``formula="auto"`` picks by level and regime."""

    def __init__(self, level: int = 0, formula: str = "auto"):
        self.level = level
        self.formula = formula

    def _energy(self, p):
        self._check_level()
        if self.formula == "auto":
            return float(approx.estimate(p, self.level).value)
        if self.formula not in approx.FORMULAS:
            raise ValueError(f"unknown formula {self.formula!r}")
        physical_formula = "_PHYS" in self.formula
        if physical_formula and not isinstance(p, PhysicalParams):
            raise ValueError(f"{self.formula} needs physical parameters")
        arg = p if physical_formula or not isinstance(p, PhysicalParams) else reduce(p)
        return float(approx.FORMULAS[self.formula](arg).value)


class BetheEnergy(_EnergyEstimator):
    """Energy from a numerical solution of the Bethe equations (levels 0 and 1)."""

    def __init__(self, level: int = 0, tol: float = 1e-10, max_iter: int = 200):
        self.level = level
        self.tol = tol
        self.max_iter = max_iter

    def _energy(self, p):
        self._check_level()
        r = reduce(p) if isinstance(p, PhysicalParams) else p
        opts = SolverOptions(tol=self.tol, max_iter=self.max_iter)
        state = solve_ground(r, opts) if self.level == 0 else solve_first_excited(r, opts)
        E = state.energy
        return float(map_energy_to_physical(E, p)) if isinstance(p, PhysicalParams) else E


class PowerLawError(RegressorMixin, BaseEstimator):
    """Fit |xi(N)| = amplitude * N^-alpha by least squares in log-log space.

    ``X`` is a single column of particle numbers, ``y`` the relative errors
    (their sign is ignored).
    """

    def fit(self, X, y):
        X = check_array(X, dtype=float)
        y = np.asarray(y, dtype=float).ravel()
        if X.shape[1] != 1:
            raise ValueError("X must have exactly one column (N)")
        if y.size != X.shape[0]:
            raise ValueError("X and y differ in length")
        self.alpha_, self.amplitude_, self.residual_ = fit_power_law(X[:, 0], y)
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, "alpha_")
        X = check_array(X, dtype=float)
        return self.amplitude_ * X[:, 0] ** (-self.alpha_)

    def score(self, X, y, sample_weight=None):
        """R^2 of log|xi| (the quantity actually fitted)."""
        return r2_score(np.log(np.abs(y)), np.log(self.predict(X)), sample_weight=sample_weight)
