"""Distance estimation from leaf sequence lengths.

Under TKF91 the conditional mean of one leaf length given the other is
linear, ``E[N2 | N1] = L + (N1 - L) * exp(-theta)`` with ``L`` the
stationary mean length and ``theta = mu * t * (1 - lam/mu)`` for leaves
separated by time ``t``.  :class:`LengthDistanceEstimator` fits this line to
many pairs; its ``transform`` inverts it from a single pair.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .analytics import pair_law_tv
from .exceptions import DegenerateError, InvalidSlope

__all__ = [
    "DistanceEstimate",
    "BayesError",
    "LengthDistanceEstimator",
    "check_pairs",
    "read_pairs_csv",
    "fit_many_samples",
    "estimate_single_pair",
    "single_pair_thetas",
    "bayes_error",
]


@dataclass(frozen=True)
class DistanceEstimate:
    theta_hat: float
    lambda_ratio_hat: float
    slope_hat: float
    mean_length_hat: float
    theta_se: float = math.nan
    lambda_ratio_se: float = math.nan
    slope_se: float = math.nan
    n_pairs: int = 1

    def to_dict(self) -> dict:
        return asdict(self)


def check_pairs(X, min_samples: int = 1) -> np.ndarray:
    """Validate an ``(n, 2)`` array of non-negative integer lengths."""
    X = check_array(X, dtype=np.float64, ensure_min_samples=min_samples)
    if X.shape[1] != 2:
        raise ValueError(f"expected 2 columns (n1, n2), got {X.shape[1]}")
    if np.any(X < 0) or np.any(X != np.round(X)):
        raise ValueError("lengths must be non-negative integers")
    return X


def read_pairs_csv(path_or_text) -> np.ndarray:
    """Read ``n1,n2`` rows, or a ``replicate,leaf,length`` table from the simulator."""
    if isinstance(path_or_text, (str, Path)) and Path(path_or_text).exists():
        text = Path(path_or_text).read_text()
    else:
        text = str(path_or_text)
    rows = list(csv.DictReader(io.StringIO(text)))
    if not rows:
        raise ValueError("no rows in pairs CSV")
    cols = set(rows[0])
    if {"n1", "n2"} <= cols:
        return np.array([[int(r["n1"]), int(r["n2"])] for r in rows], dtype=np.int64)
    if {"replicate", "leaf", "length"} <= cols:
        by_rep: dict[str, list[int]] = {}
        for r in rows:
            by_rep.setdefault(r["replicate"], []).append(int(r["length"]))
        if any(len(v) != 2 for v in by_rep.values()):
            raise ValueError("every replicate needs exactly two leaves")
        return np.array(list(by_rep.values()), dtype=np.int64)
    raise ValueError(f"unrecognized CSV columns {sorted(cols)}")


class LengthDistanceEstimator(TransformerMixin, BaseEstimator):
    """Moment estimator of the normalized distance between two leaves.

    Parameters
    ----------
    mean_length : float, optional
        Known stationary mean length. Used by ``transform`` in place of
        the fitted pooled mean when given.

    Attributes
    ----------
    mean_length_ : float
        Pooled mean of both coordinates.
    lambda_ratio_ : float
        ``mean_length_ / (1 + mean_length_)``, the implied ``lam/mu``.
    slope_ : float
        Least-squares slope of ``n2`` on ``n1``.
    theta_ : float
        ``-log(slope_)``.
    """

    def __init__(self, mean_length: float | None = None):
        self.mean_length = mean_length

    def fit(self, X, y=None):
        X = check_pairs(X, min_samples=2)
        n = X.shape[0]
        x1, x2 = X[:, 0], X[:, 1]
        m1, m2 = x1.mean(), x2.mean()
        d1 = x1 - m1
        sxx = float(np.dot(d1, d1))
        if sxx == 0.0:
            raise DegenerateError("n1 has zero sample variance")
        slope = float(np.dot(d1, x2 - m2)) / sxx
        if not slope > 0:
            raise InvalidSlope(f"fitted slope {slope:.4g} is not positive")
        resid = x2 - m2 - slope * d1
        s2 = float(np.dot(resid, resid)) / max(n - 2, 1)
        slope_se = math.sqrt(s2 / sxx)

        L = float(X.mean())
        cov = np.cov(x1, x2)
        L_se = math.sqrt(max(float(cov.sum()), 0.0) / (4 * n))
        self.mean_length_ = L
        self.lambda_ratio_ = L / (1.0 + L)
        self.slope_ = slope
        self.theta_ = -math.log(slope)
        self.slope_se_ = slope_se
        self.theta_se_ = slope_se / slope
        self.lambda_ratio_se_ = L_se / (1.0 + L) ** 2
        self.n_pairs_ = n
        return self

    @property
    def estimate_(self) -> DistanceEstimate:
        check_is_fitted(self, "slope_")
        return DistanceEstimate(self.theta_, self.lambda_ratio_, self.slope_,
                                self.mean_length_, self.theta_se_,
                                self.lambda_ratio_se_, self.slope_se_, self.n_pairs_)

    def _reference_mean(self) -> float:
        if self.mean_length is not None:
            return float(self.mean_length)
        check_is_fitted(self, "mean_length_")
        return self.mean_length_

    def transform(self, X):
        """Single-pair distance estimates, one per row; NaN where undefined."""
        X = check_pairs(X)
        return single_pair_thetas(X, self._reference_mean())[0][:, None]

    def predict(self, X):
        """Conditional mean of ``n2`` given ``n1`` (first column, or a 1-D array)."""
        check_is_fitted(self, "slope_")
        X = np.asarray(X, dtype=float)
        n1 = X[:, 0] if X.ndim == 2 else X
        return self.mean_length_ + (n1 - self.mean_length_) * self.slope_


def fit_many_samples(pairs) -> DistanceEstimate:
    return LengthDistanceEstimator().fit(pairs).estimate_


def estimate_single_pair(pair, L_bar: float) -> DistanceEstimate:
    """Invert the linear conditional mean from one observed pair."""
    if not L_bar > 0:
        raise ValueError("L_bar must be positive")
    n1, n2 = (pair.n1, pair.n2) if hasattr(pair, "n1") else pair
    if n1 == L_bar:
        raise InvalidSlope("n1 equals the mean length; slope undefined")
    slope = (n2 - L_bar) / (n1 - L_bar)
    if not slope > 0:
        raise InvalidSlope(f"slope {slope:.4g} is not positive")
    return DistanceEstimate(0.0 - math.log(slope) + 0.0, L_bar / (1.0 + L_bar), slope, L_bar)


def single_pair_thetas(pairs, L_bar: float) -> tuple[np.ndarray, int]:
    """Vectorized single-pair estimates; returns (thetas with NaN failures, failure count)."""
    X = np.asarray(pairs, dtype=float)
    num = X[:, 1] - L_bar
    den = X[:, 0] - L_bar
    with np.errstate(divide="ignore", invalid="ignore"):
        slope = num / den
        theta = np.where((den != 0) & (slope > 0), 0.0 - np.log(slope), np.nan) + 0.0
    return theta, int(np.count_nonzero(np.isnan(theta)))


@dataclass(frozen=True)
class BayesError:
    value: float
    lo: float
    hi: float


def bayes_error(params, h1: float, h2: float, eps: float = 1e-6) -> BayesError:
    """Error of the optimal equal-prior test between two star-tree heights from one length pair."""
    if not (h1 > 0 and h2 > 0):
        raise ValueError("heights must be positive")
    res = pair_law_tv(params, max(h1, h2), min(h1, h2), eps)
    return BayesError((1.0 - res.tv) / 2, (1.0 - res.tv_hi) / 2, (1.0 - res.tv_lo) / 2)
