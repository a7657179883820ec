"""Label-based estimators: raw moments, plug-in cumulants, power sums and norms.

Every estimator reads only the label vector ``y``. Power sums
``sum_i w_i^ell`` are recovered from the additivity of cumulants:
``kappa_ell(y) = kappa_ell(noise) + kappa_ell(X) * sum_i w_i^ell``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Sequence

import numpy as np
from scipy.special import logsumexp
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .cumulant_algebra import (
    MomentVector,
    convolve_moments,
    moments_to_cumulants,
    scale_moments,
    symmetrized_cumulants,
)
from .distributions import Distribution, symmetrize_labels
from .errors import DegenerateCumulant, DomainError, EmptyVector, NumericalError

_LOG_MAX = math.log(np.finfo(float).max)


class ClampedEstimateWarning(UserWarning):
    """An estimate fell outside its feasible range and was clamped."""


def _as_labels(y) -> np.ndarray:
    arr = np.asarray(y, dtype=float).reshape(-1)
    if arr.size == 0:
        raise EmptyVector("label vector is empty")
    if not np.all(np.isfinite(arr)):
        raise DomainError("labels must be finite")
    return arr


def _log_space_mean_power(y: np.ndarray, ell: int) -> float:
    with np.errstate(divide="ignore"):
        logs = ell * np.log(np.abs(y))
    if ell % 2 == 0:
        lp = logsumexp(logs)
        ln = -math.inf
    else:
        pos = y > 0
        neg = y < 0
        lp = logsumexp(logs[pos]) if pos.any() else -math.inf
        ln = logsumexp(logs[neg]) if neg.any() else -math.inf
    top = max(lp, ln)
    if top == -math.inf:
        return 0.0
    mag = top - math.log(y.size)
    if mag > _LOG_MAX:
        raise NumericalError(f"order-{ell} empirical moment overflows (log-magnitude {mag:.1f})")
    low = min(lp, ln)
    frac = -math.expm1(low - top) if low > -math.inf else 1.0
    sign = 1.0 if lp >= ln else -1.0
    return sign * math.exp(mag) * frac


def empirical_moments(y, max_order: int) -> np.ndarray:
    """Empirical raw moments of orders 1..max_order (pairwise summation)."""
    y = _as_labels(y)
    if max_order < 1:
        raise DomainError("max_order must be >= 1")
    peak = float(np.max(np.abs(y)))
    out = np.empty(max_order)
    if peak == 0.0:
        out[:] = 0.0
        return out
    safe = max_order * math.log(peak) < _LOG_MAX - 1
    power = np.ones_like(y)
    for ell in range(1, max_order + 1):
        if safe:
            power *= y
            out[ell - 1] = float(np.sum(power)) / y.size
        else:
            out[ell - 1] = _log_space_mean_power(y, ell)
    return out


def empirical_moment(y, ell: int) -> float:
    """Empirical raw moment sum(y_i^ell) / m."""
    y = _as_labels(y)
    if ell < 1:
        raise DomainError("order must be >= 1")
    peak = float(np.max(np.abs(y)))
    if peak == 0.0:
        return 0.0
    if ell * math.log(peak) < _LOG_MAX - 1:
        return float(np.sum(y**ell)) / y.size
    return _log_space_mean_power(y, ell)


def empirical_cumulant(y, ell: int, symmetric: bool) -> float:
    """Plug-in cumulant of order ``ell``.

    With ``symmetric`` set, odd empirical moments are replaced by exact zeros
    before the moment-to-cumulant transform (and odd orders return 0).
    """
    if ell < 1:
        raise DomainError("order must be >= 1")
    if symmetric and ell % 2:
        return 0.0
    m = empirical_moments(y, ell)
    if symmetric:
        m[0::2] = 0.0
    return float(moments_to_cumulants(list(m))[ell - 1])


def empirical_cumulants(y, max_order: int, symmetric: bool) -> np.ndarray:
    """All plug-in cumulants of orders 1..max_order from one moment pass."""
    m = empirical_moments(y, max_order)
    if symmetric:
        m[0::2] = 0.0
    return np.array(moments_to_cumulants(list(m)), dtype=float)


@dataclass(frozen=True)
class PowerSumEstimate:
    order: int
    value: float
    samples_used: int
    kappa_x: float
    kappa_eta: float

    def __post_init__(self):
        if self.order < 2 or self.order % 2:
            raise DomainError("power-sum order must be even and >= 2")


def power_sum_from_cumulant(kappa_y: float, ell: int, kappa_x: float, kappa_eta: float,
                            samples: int, floor: float = 0.0) -> PowerSumEstimate:
    if ell < 2 or ell % 2:
        raise DomainError(f"power-sum order must be even and >= 2, got {ell}")
    if kappa_x == 0 or abs(kappa_x) <= floor:
        raise DegenerateCumulant(f"kappa_{ell}(X) = {kappa_x} cannot be divided by")
    value = (kappa_y - float(kappa_eta)) / float(kappa_x)
    return PowerSumEstimate(ell, value, samples, float(kappa_x), float(kappa_eta))


def estimate_power_sum(y, ell: int, kappa_x: float, kappa_eta: float,
                       symmetric: bool = True) -> PowerSumEstimate:
    """Estimate sum_i w_i^ell as (kappa_ell(y) - kappa_ell(noise)) / kappa_ell(X).

    ``y`` should come from a symmetrized batch, and the two cumulants must be
    those of the symmetrized coordinate and noise laws.
    """
    if ell < 2 or ell % 2:
        raise DomainError(f"power-sum order must be even and >= 2, got {ell}")
    if kappa_x == 0:
        raise DegenerateCumulant(f"kappa_{ell}(X) = 0: the power sum is not identifiable")
    y = _as_labels(y)
    return power_sum_from_cumulant(empirical_cumulant(y, ell, symmetric), ell, kappa_x,
                                   kappa_eta, y.size)


def estimate_norm2(y, m2_eta: float) -> float:
    """Estimate ||w||_2^2 as the empirical second moment minus the noise's.

    A negative estimate is clamped to 0 and a :class:`ClampedEstimateWarning`
    is issued.
    """
    raw = empirical_moment(y, 2) - float(m2_eta)
    if raw < 0:
        warnings.warn(f"squared-norm estimate {raw:.3g} clamped to 0", ClampedEstimateWarning,
                      stacklevel=2)
        return 0.0
    return raw


def _log_rational(q) -> float:
    if isinstance(q, Rational):
        q = Fraction(q)
        return math.log(q.numerator) - math.log(q.denominator)
    return math.log(float(q))


def linf_extract(M_ell, ell: int) -> float:
    """min(1, max(0, M)^(1/ell)) evaluated through logarithms.

    Accepts floats as well as exact ``Fraction`` power sums of huge order.
    """
    if ell < 2 or ell % 2:
        raise DomainError(f"order must be even and >= 2, got {ell}")
    if M_ell <= 0:
        return 0.0
    return min(1.0, math.exp(_log_rational(M_ell) / ell))


def sample_size_power_sum(ell: int, eps: float, delta: float, tau: float, C: float,
                          m2l_x: float, m2l_eta: float, K: int = 64) -> int:
    """Heuristic sample size for a power-sum estimate of order ``ell``.

    m = ceil(K (2 ell)^(4 ell) (m_2ell(X) + m_2ell(noise)) C^(2 ell) / (delta eps^2 tau^2)),
    evaluated in exact rational arithmetic so the result is an exact integer.
    """
    if ell < 1:
        raise DomainError("order must be >= 1")
    for name, value in (("eps", eps), ("delta", delta), ("tau", tau)):
        if not value > 0:
            raise DomainError(f"{name} must be positive, got {value}")
    if C <= 0:
        raise DomainError("C must be positive")
    q = (Fraction(K) * Fraction(2 * ell) ** (4 * ell)
         * (Fraction(m2l_x) + Fraction(m2l_eta)) * Fraction(C) ** (2 * ell)
         / (Fraction(delta) * Fraction(eps) ** 2 * Fraction(tau) ** 2))
    return max(1, math.ceil(q))


def calibrate_noise_cumulants(noise_samples, max_order: int) -> np.ndarray:
    """Cumulants of the symmetrized noise estimated from noise-only samples.

    The result can stand in for the symmetrized closed-form noise cumulants
    when the noise law is not known in advance.
    """
    return empirical_cumulants(symmetrize_labels(_as_labels(noise_samples)), max_order,
                               symmetric=True)


def linear_form_moments(w: Sequence, marginal_moments: Sequence,
                        noise_moments: Sequence | None = None) -> MomentVector:
    """Exact moments of w.X + noise for iid coordinates, by moment convolution."""
    L = len(marginal_moments)
    acc = MomentVector([0] * L)
    for wi in w:
        acc = convolve_moments(acc, scale_moments(marginal_moments, wi))
    if noise_moments is not None:
        acc = convolve_moments(acc, noise_moments)
    return acc


class PowerSumEstimator(BaseEstimator):
    """Estimate ||w||_ell^ell from labels, in scikit-learn style.

    Parameters
    ----------
    order : even int
    marginal, noise : Distribution or str
        Coordinate and noise laws; strings are parsed with ``Distribution.parse``.
    symmetrize : bool
        Pair up labels first (required unless ``y`` is already symmetrized).
    """

    def __init__(self, order=4, marginal="rademacher", noise="zero", symmetrize=True):
        self.order = order
        self.marginal = marginal
        self.noise = noise
        self.symmetrize = symmetrize

    def fit(self, X, y=None):
        labels = y if y is not None else X
        labels = check_array(np.asarray(labels, dtype=float).reshape(-1, 1)).ravel()
        marginal = _model(self.marginal)
        noise = _model(self.noise)
        if self.symmetrize:
            labels = symmetrize_labels(labels)
        kx = symmetrized_cumulants(marginal.exact_cumulants(self.order))[self.order - 1]
        ke = symmetrized_cumulants(noise.known_cumulants(self.order))[self.order - 1]
        est = estimate_power_sum(labels, self.order, float(kx), float(ke), symmetric=True)
        self.estimate_ = est
        self.power_sum_ = est.value
        self.n_samples_ = est.samples_used
        return self

    def transform(self, X=None):
        check_is_fitted(self, "power_sum_")
        return np.array([[self.power_sum_]])


def _model(model) -> Distribution:
    return model if isinstance(model, Distribution) else Distribution.parse(str(model))


__all__ = [
    "ClampedEstimateWarning",
    "calibrate_noise_cumulants",
    "PowerSumEstimate",
    "PowerSumEstimator",
    "empirical_moment",
    "empirical_moments",
    "empirical_cumulant",
    "empirical_cumulants",
    "estimate_power_sum",
    "estimate_norm2",
    "linf_extract",
    "linear_form_moments",
    "power_sum_from_cumulant",
    "sample_size_power_sum",
]
