"""Estimator-style wrapper over the fit pipeline and the stationary law.

ThresholdIncomeModel follows the familiar fit / score_samples / sample
density-estimator surface so the pipeline drops into the usual tooling
(get_params, clone, grid search over the guard fraction, and so on).
"""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator, DensityMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .distribution import model_ccdf, model_quantile, sample as _draw
from .empirical import build_ccdf
from .errors import PreconditionError
from .fitting import GUARD_FRACTION, fit_pipeline
from .model import stationary_pdf

__all__ = ["ThresholdIncomeModel"]


class ThresholdIncomeModel(DensityMixin, BaseEstimator):
    """Two-crossover income density estimator.

    Fits the exponential temperature below m0 and the two weak-Pareto
    exponents around the threshold m1, then exposes the resulting
    stationary density.

    Parameters
    ----------
    m0, m1 : float, optional
        Manual crossover overrides. Supply both to skip detection.
    guard : float, default 0.10
        Relative clearance excluded on the crossover side of each
        Pareto regression window.

    Attributes
    ----------
    params_ : EffectiveParams
        Fitted parameter set (T1 = T imposed).
    temperature_, m0_, m1_, alpha_, alpha1_, m_init_ : float
        Individual fitted parameters.
    report_ : FitReport
        Windows, r^2, standard errors, and variance-class flags.
    """

    def __init__(self, m0=None, m1=None, guard=GUARD_FRACTION):
        self.m0 = m0
        self.m1 = m1
        self.guard = guard

    def _validate_incomes(self, X, reset=False):
        arr = check_array(X, ensure_2d=False, dtype=float)
        if arr.ndim == 2:
            if arr.shape[1] != 1:
                raise PreconditionError("income data must be a single column")
            arr = arr.ravel()
        elif arr.ndim != 1:
            raise PreconditionError("income data must be one-dimensional")
        if reset:
            self.n_features_in_ = 1
        return arr

    def fit(self, X, y=None):
        """Fit the three-step pipeline on income values X."""
        incomes = self._validate_incomes(X, reset=True)
        if (self.m0 is None) != (self.m1 is None):
            raise PreconditionError("supply both m0 and m1 or neither")
        overrides = None if self.m0 is None else (self.m0, self.m1)
        ecdf = build_ccdf(incomes)
        self.report_ = fit_pipeline(ecdf, overrides=overrides, guard=self.guard)
        self.params_ = self.report_.params
        self.temperature_ = self.params_.T
        self.m0_ = self.params_.m0
        self.m1_ = self.params_.m1
        self.alpha_ = self.params_.alpha
        self.alpha1_ = self.params_.alpha1
        self.m_init_ = self.params_.m_init
        return self

    def score_samples(self, X):
        """Log density at X; -inf below the fitted m_init."""
        check_is_fitted(self, "params_")
        incomes = self._validate_incomes(X)
        out = np.full(incomes.shape, -math.inf)
        valid = incomes >= self.m_init_
        if valid.any():
            with np.errstate(divide="ignore"):
                out[valid] = np.log(stationary_pdf(incomes[valid], self.params_))
        return out

    def score(self, X, y=None):
        """Total log-likelihood of X under the fitted density."""
        return float(np.sum(self.score_samples(X)))

    def pdf(self, X):
        check_is_fitted(self, "params_")
        return stationary_pdf(self._validate_incomes(X), self.params_)

    def ccdf(self, X):
        check_is_fitted(self, "params_")
        return model_ccdf(self._validate_incomes(X), self.params_)

    def quantile(self, u):
        check_is_fitted(self, "params_")
        return model_quantile(u, self.params_)

    def sample(self, n_samples: int = 1, random_state=None):
        """Draw incomes from the fitted law by inverse-CCDF sampling."""
        check_is_fitted(self, "params_")
        return _draw(int(n_samples), self.params_, seed=random_state)
