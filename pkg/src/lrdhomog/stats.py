"""Regression and two-sample statistics used by the experiments."""

from __future__ import annotations

import numpy as np
from scipy import stats as sps
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .rng import as_generator

__all__ = [
    "fit_loglog_slope",
    "LogLogSlope",
    "ks_statistic",
    "energy_distance",
    "self_ks_threshold",
    "skewness",
    "mean_with_stderr",
]


def fit_loglog_slope(xs, ys):
    """Ordinary least squares of log ys on log xs.

    Returns
    -------
    slope, stderr : float
        Fitted slope and its standard error (zero for an exact power law).
    """
    xs = np.asarray(xs, dtype=float).ravel()
    ys = np.asarray(ys, dtype=float).ravel()
    if xs.shape != ys.shape:
        raise ValueError("xs and ys must have the same length")
    if xs.size < 4:
        raise ValueError("at least 4 points are needed")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise ValueError("log-log fit needs strictly positive xs and ys")
    if np.unique(xs).size != xs.size:
        raise ValueError("xs must be distinct")
    lx, ly = np.log(xs), np.log(ys)
    res = sps.linregress(lx, ly)
    return float(res.slope), float(res.stderr)


class LogLogSlope(BaseEstimator, RegressorMixin):
    """Power-law fit y = C x^slope as an estimator (``fit``/``predict``)."""

    def fit(self, X, y):
        x = np.asarray(X, dtype=float).ravel()
        y = np.asarray(y, dtype=float).ravel()
        self.slope_, self.stderr_ = fit_loglog_slope(x, y)
        self.intercept_ = float(np.mean(np.log(y)) - self.slope_ * np.mean(np.log(x)))
        return self

    def predict(self, X):
        check_is_fitted(self, "slope_")
        x = np.asarray(X, dtype=float).ravel()
        return np.exp(self.intercept_) * x**self.slope_


def ks_statistic(a, b):
    """Two-sample Kolmogorov-Smirnov statistic (0 for two identical degenerate samples)."""
    return float(sps.ks_2samp(np.asarray(a, float), np.asarray(b, float)).statistic)


def energy_distance(a, b):
    return float(sps.energy_distance(np.asarray(a, float), np.asarray(b, float)))


def self_ks_threshold(oracle, *, factor=1.5, splits=25, seed=0):
    """``factor`` times the median KS statistic between random halves of ``oracle``.

    Returns (threshold, median self-KS).
    """
    oracle = np.asarray(oracle, dtype=float)
    rng = as_generator(seed)
    half = oracle.size // 2
    values = []
    for _ in range(splits):
        perm = rng.permutation(oracle.size)
        values.append(ks_statistic(oracle[perm[:half]], oracle[perm[half : 2 * half]]))
    med = float(np.median(values))
    return factor * med, med


def skewness(x):
    return float(sps.skew(np.asarray(x, dtype=float), bias=False))


def mean_with_stderr(values, axis=0):
    values = np.asarray(values, dtype=float)
    n = values.shape[axis]
    return values.mean(axis=axis), values.std(axis=axis, ddof=1) / np.sqrt(n)
