"""Sparsity testers, order schedules, the exact distance oracle and noiseless recovery."""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from numbers import Rational
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .cumulant_algebra import MAX_EXACT_ORDER, _first_nonzero_even, symmetrized_cumulants
from .distributions import Distribution, SampleBatch, symmetrize_labels
from .errors import (
    DegenerateCumulant,
    DomainError,
    GaussianObstruction,
    InsufficientSamples,
    PreconditionError,
    ResourceLimit,
)
from .estimation import (
    ClampedEstimateWarning,
    empirical_cumulants,
    linf_extract,
    power_sum_from_cumulant,
    sample_size_power_sum,
)

DEGENERATE_S2 = 1e-12
SCAN_MAX_ORDER = 24


class Decision(str, Enum):
    SPARSE = "sparse"
    FAR = "far"


def dist_to_k_sparse(w, k: int) -> float:
    """Fraction of Euclidean mass outside the k largest-magnitude coordinates."""
    arr = np.asarray(w, dtype=float).reshape(-1)
    if k < 0:
        raise DomainError("k must be nonnegative")
    norm = float(np.linalg.norm(arr))
    if norm == 0.0:
        raise DomainError("distance to sparsity is undefined for the zero vector")
    if k >= arr.size:
        return 0.0
    tail = np.sort(arr**2)[: arr.size - k]
    return min(1.0, math.sqrt(math.fsum(tail)) / norm)


@dataclass(frozen=True)
class Schedule:
    """Decreasing even orders used by the general tester, one per slot.

    ``orders[i]`` is ``None`` when the order is too large to represent;
    ``log_orders`` and ``log_deltas`` always hold natural logarithms.
    """

    k: int
    orders: tuple
    deltas: tuple
    tau: float | None
    mode: str
    log_orders: tuple = ()
    log_deltas: tuple = ()
    verified: bool = True

    def __post_init__(self):
        if len(self.orders) != self.k or len(self.deltas) != self.k:
            raise DomainError("schedule needs one order and one error parameter per slot")
        if self.mode not in ("worst_case", "practical"):
            raise DomainError(f"unknown schedule mode {self.mode!r}")
        known = [o for o in self.orders if o is not None]
        if any(o < 2 or o % 2 for o in known):
            raise DomainError(f"schedule orders must be even and >= 2, got {self.orders}")
        if any(a <= b for a, b in zip(self.orders, self.orders[1:])
               if a is not None and b is not None):
            raise DomainError(f"schedule orders must be strictly decreasing, got {self.orders}")
        if not self.log_orders:
            object.__setattr__(self, "log_orders", tuple(math.log(o) for o in self.orders))
        if not self.log_deltas:
            object.__setattr__(self, "log_deltas",
                               tuple(math.log(d) if d > 0 else -math.inf for d in self.deltas))

    @property
    def feasible(self) -> bool:
        """Whether every order is small enough to estimate."""
        return all(o is not None and o <= MAX_EXACT_ORDER for o in self.orders)


def _even_ceil(x: float) -> int:
    v = math.ceil(x - 1e-12)
    return v + (v % 2)


def _scan_order(model: Distribution) -> int:
    if model.kind == "custom":
        return min(SCAN_MAX_ORDER, len(model.param("moments")))
    return SCAN_MAX_ORDER


def _check_non_gaussian(model: Distribution, threshold: float) -> list:
    top = _scan_order(model)
    kappa = model.exact_cumulants(top)
    if _first_nonzero_even(kappa, 2, threshold) is None:
        raise GaussianObstruction(
            f"no even cumulant of order 4..{top} reaches {threshold}; "
            "power sums are not identifiable for a Gaussian-like marginal"
        )
    return list(kappa)


def default_practical_orders(model: Distribution, k: int, threshold: float = 1e-12) -> tuple:
    """The k smallest even orders >= 4 with a nonzero cumulant, largest first."""
    kappa = _check_non_gaussian(model, threshold)
    found = [j for j in range(4, len(kappa) + 1, 2) if abs(kappa[j - 1]) >= threshold]
    if len(found) < k:
        raise DegenerateCumulant(f"only {len(found)} nonzero even cumulants up to order "
                                 f"{len(kappa)}, {k} needed")
    return tuple(sorted(found[:k], reverse=True))


def build_schedule(k: int, eps: float, C: float, model: Distribution, mode: str = "practical",
                   orders: Sequence[int] | None = None, threshold: float = 1e-12) -> Schedule:
    """Order schedule for :func:`general_tester`.

    ``mode="worst_case"`` follows the worst-case recursion: delta_k = eps/(12k),
    each order is the smallest even integer >= 100/delta^3 with a nonzero
    cumulant, and delta_i = (delta_{i+1} / (5 l_{i+1}))^{l_{i+1}} / (2k).
    Such schedules are returned but are generally far too large to run
    (``Schedule.feasible`` is False). ``mode="practical"`` validates the
    user's ``orders`` (defaulting to :func:`default_practical_orders`).
    """
    if k < 1:
        raise DomainError("k must be >= 1")
    if C <= 0:
        raise DomainError("C must be positive")
    kappa = _check_non_gaussian(model, threshold)
    if mode == "practical":
        if orders is None:
            orders = default_practical_orders(model, k, threshold)
        orders = tuple(int(o) for o in orders)
        if len(orders) != k:
            raise DomainError(f"practical schedule needs {k} orders, got {len(orders)}")
        for o in orders:
            if o < 2 or o % 2:
                raise DomainError(f"schedule orders must be even and >= 2, got {o}")
        if orders[0] > len(kappa):
            kappa = list(model.exact_cumulants(orders[0]))
        taus = []
        for o in orders:
            if abs(kappa[o - 1]) < threshold:
                raise DegenerateCumulant(f"kappa_{o}(X) = {kappa[o - 1]} is below {threshold}")
            taus.append(abs(float(kappa[o - 1])))
        deltas = tuple((100.0 / o) ** (1 / 3) for o in orders)
        return Schedule(k, orders, deltas, min(taus), "practical")
    if mode != "worst_case":
        raise DomainError(f"unknown schedule mode {mode!r}")
    if not 0 < eps <= 1:
        raise DomainError("eps must lie in (0, 1]")

    log_deltas = [0.0] * k
    log_orders = [0.0] * k
    out_orders: list = [None] * k
    verified = True
    taus = []
    log_delta = math.log(eps / (12 * k))
    for i in range(k - 1, -1, -1):
        log_bound = math.log(100.0) - 3 * log_delta
        order = None
        if log_bound < math.log(1e15):
            order = _even_ceil(math.exp(log_bound))
            if order <= MAX_EXACT_ORDER:
                kap = list(model.exact_cumulants(MAX_EXACT_ORDER))
                order = _first_nonzero_even(kap, order - 1, threshold)
                if order is None:
                    raise DegenerateCumulant("no nonzero cumulant at the required orders")
                taus.append(abs(float(kap[order - 1])))
            else:
                verified = False
            log_order = math.log(order)
        else:
            verified = False
            log_order = log_bound
        out_orders[i] = order
        log_orders[i] = log_order
        log_deltas[i] = log_delta
        if i > 0:
            ell = math.exp(log_order) if log_order < 700 else math.inf
            log_delta = ell * (log_delta - math.log(5) - log_order) - math.log(2 * k)
    deltas = tuple(math.exp(d) for d in log_deltas)
    return Schedule(k, tuple(out_orders), deltas, min(taus) if taus and verified else None,
                    "worst_case", tuple(log_orders), tuple(log_deltas), verified)


@dataclass(frozen=True)
class TestVerdict:
    """Outcome of one tester run.

    All magnitudes (``w_tilde``, ``s2``, ``statistic``, ``threshold``) refer to
    the rescaled vector w / C used internally by the tester.
    """

    __test__ = False  # not a pytest class

    decision: Decision
    w_tilde: tuple
    s2: float
    statistic: float
    threshold: float
    distance_estimate: float | None = None
    tester: str = "general"
    flags: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        sparse = self.decision is Decision.SPARSE
        if "degenerate" in self.flags:
            return
        if self.tester == "general" and sparse != (self.statistic >= self.threshold):
            raise AssertionError("verdict disagrees with its statistic")
        if self.tester == "sympoly" and sparse != (self.statistic <= self.threshold):
            raise AssertionError("verdict disagrees with its statistic")

    @property
    def is_sparse(self) -> bool:
        return self.decision is Decision.SPARSE

    def to_record(self, seed=None, true_distance=None) -> dict:
        return {
            "decision": self.decision.value,
            "statistic": self.statistic,
            "threshold": self.threshold,
            "w_tilde": list(self.w_tilde),
            "s2": self.s2,
            "true_distance": true_distance,
            "seed": seed,
        }


def _tester_labels(batch) -> np.ndarray:
    """Symmetrized labels; batches already flagged as symmetrized are used as is."""
    if isinstance(batch, SampleBatch):
        if batch.symmetrized:
            return batch.y
        return symmetrize_labels(batch.y)
    return symmetrize_labels(np.asarray(batch, dtype=float))


def recommended_sample_size(orders: Sequence[int], eps: float, delta: float, C: float,
                            model: Distribution, noise: Distribution,
                            tau: float | None = None) -> int:
    """Largest per-order sample size from :func:`sample_size_power_sum`."""
    L = 2 * max(orders)
    mx = model.exact_moments(L)
    me = noise.exact_moments(L)
    kx = model.exact_cumulants(max(orders))
    if tau is None:
        tau = min(abs(float(kx[o - 1])) for o in orders)
    return max(
        sample_size_power_sum(o, eps, delta, tau, C, float(mx[2 * o - 1]), float(me[2 * o - 1]))
        for o in orders
    )


def _noise_terms(noise: Distribution, L: int, C: float) -> list[float]:
    ke = symmetrized_cumulants(noise.known_cumulants(max(L, 2)))
    return [float(v) / C ** (i + 1) for i, v in enumerate(ke)]


def general_tester(batch, k: int, c: float, s: float, C: float, model: Distribution,
                   noise: Distribution, schedule: Schedule | None = None,
                   delta: float = 0.1) -> TestVerdict:
    """Tolerant test of distance <= c versus distance >= s from k-sparsity.

    Labels are symmetrized and divided by C; for each slot j the power sum of
    order l_j is estimated and the j-th largest magnitude is read off as
    ``min(1, |M_lj - sum_{i<j} w_i^lj|^(1/lj))``. The answer is Sparse when the
    recovered mass sum w_j^2 is at least ``(1 - (s^2 - c^2)/2) * s2``.
    """
    if k < 1:
        raise DomainError("k must be >= 1")
    if not 0 <= c < s <= 1:
        raise DomainError(f"need 0 <= c < s <= 1, got c={c}, s={s}")
    if C <= 0:
        raise DomainError("C must be positive")
    if schedule is None:
        schedule = build_schedule(k, s, C, model, "practical")
    if schedule.k != k:
        raise DomainError(f"schedule built for k={schedule.k}, tester called with k={k}")
    if not schedule.feasible:
        raise ResourceLimit(f"schedule orders {schedule.orders} are too large to estimate")
    y = _tester_labels(batch) / C
    orders = schedule.orders
    L = max(orders)
    kx = symmetrized_cumulants(model.exact_cumulants(L))
    ke = _noise_terms(noise, L, C)
    kappa_y = empirical_cumulants(y, max(L, 2), symmetric=True)

    flags = set()
    gap = (s * s - c * c) / 2
    eps_scaled = gap / C**4
    s2_raw = float(kappa_y[1]) - ke[1]
    if s2_raw < 0:
        warnings.warn(f"squared-norm estimate {s2_raw:.3g} clamped to 0", ClampedEstimateWarning,
                      stacklevel=2)
        flags.add("s2_clamped")
    s2 = max(0.0, s2_raw)
    recommended = recommended_sample_size(orders, eps_scaled, delta / k, C, model, noise,
                                          schedule.tau)
    if 2 * y.size < recommended:
        flags.add("insufficient_samples")

    sums = [
        power_sum_from_cumulant(float(kappa_y[ell - 1]), ell, float(kx[ell - 1]),
                                ke[ell - 1], y.size).value
        for ell in orders
    ]
    w_tilde = peel_magnitudes(sums, orders)

    statistic = math.fsum(v * v for v in w_tilde)
    threshold = (1 - gap) * s2
    if s2 <= DEGENERATE_S2:
        flags.add("degenerate")
        return TestVerdict(Decision.SPARSE, tuple(w_tilde), s2, statistic, threshold, 0.0,
                           "general", frozenset(flags))
    decision = Decision.SPARSE if statistic >= threshold else Decision.FAR
    distance = math.sqrt(max(0.0, 1 - statistic / s2))
    return TestVerdict(decision, tuple(w_tilde), s2, statistic, threshold, distance, "general",
                       frozenset(flags))


def peel_magnitudes(power_sums: Sequence, orders: Sequence[int]) -> list[float]:
    """Read off the largest magnitudes one at a time from power sums.

    Slot j uses ``min(1, |M_j - sum_{i<j} w_i^l_j|^(1/l_j))``. Exact
    ``Fraction`` power sums are peeled in exact arithmetic (the earlier
    magnitudes are converted exactly from their float values).
    """
    w_tilde: list[float] = []
    for M, ell in zip(power_sums, orders):
        if isinstance(M, Rational):
            resid = Fraction(M) - sum((Fraction(v) ** ell for v in w_tilde), Fraction(0))
        else:
            resid = float(M) - math.fsum(v**ell for v in w_tilde)
        w_tilde.append(linf_extract(abs(resid), ell))
    return w_tilde


def newton_sym_from_power_sums(p: Sequence) -> tuple:
    """Elementary symmetric polynomials Sym_1..Sym_L from power sums p_1..p_L.

    l * Sym_l = sum_{i=1}^{l} (-1)^(i-1) Sym_{l-i} p_i, with Sym_0 = 1. Exact
    when every p_i is an int or Fraction.
    """
    vals = list(p)
    exact = all(isinstance(v, Rational) and not isinstance(v, bool) for v in vals)
    sym: list = [Fraction(1) if exact else 1.0]
    for ell in range(1, len(vals) + 1):
        terms = [(-1) ** (i - 1) * sym[ell - i] * vals[i - 1] for i in range(1, ell + 1)]
        if exact:
            sym.append(sum(terms, Fraction(0)) / ell)
        else:
            sym.append(math.fsum(terms) / ell)
    out = sym[1:]
    if exact:
        out = [int(v) if v.denominator == 1 else v for v in out]
    return tuple(out)


def sympoly_threshold(k: int, eps: float, C: float) -> float:
    return 0.5 * C ** (-(4 * k + 4)) * eps ** (2 * k) / math.factorial(k + 1)


def sympoly_sample_size(k: int, eps: float, C: float, model: Distribution, noise: Distribution,
                        delta: float = 0.1) -> int:
    """Calculator sample size for :func:`sym_poly_tester` at additive error eps'."""
    eps_prime = C ** (-(4 * k + 4)) * eps ** (2 * k) / math.factorial(k + 1) / (3 * (k + 1))
    orders = [2 * i for i in range(1, k + 2)]
    return recommended_sample_size(orders, eps_prime, delta / (k + 1), C, model, noise)


def sym_poly_tester(batch, k: int, eps: float, C: float, model: Distribution,
                    noise: Distribution, cumulant_floor: float = 1e-12) -> TestVerdict:
    """Test k-sparsity through the (k+1)-th elementary symmetric polynomial of w^2.

    Power sums of orders 2, 4, ..., 2k+2 of the rescaled vector are estimated,
    capped at 1, and turned into Sym_{k+1} by Newton's identities. The answer
    is FarFromSparse when Sym_{k+1} exceeds ``C^-(4k+4) eps^(2k) / (2 (k+1)!)``.
    """
    if k < 1:
        raise DomainError("k must be >= 1")
    if not 0 < eps <= 1:
        raise DomainError("eps must lie in (0, 1]")
    if C <= 0:
        raise DomainError("C must be positive")
    L = 2 * k + 2
    raw = model.exact_cumulants(L)
    for ell in range(4, L + 1, 2):
        if abs(raw[ell - 1]) < cumulant_floor:
            raise DegenerateCumulant(f"kappa_{ell}(X) = {raw[ell - 1]} is below {cumulant_floor}")
    kx = symmetrized_cumulants(raw)
    y = _tester_labels(batch) / C
    ke = _noise_terms(noise, L, C)
    kappa_y = empirical_cumulants(y, L, symmetric=True)
    M = []
    for ell in range(2, L + 1, 2):
        est = power_sum_from_cumulant(float(kappa_y[ell - 1]), ell, float(kx[ell - 1]),
                                      ke[ell - 1], y.size)
        M.append(min(est.value, 1.0))
    sym = newton_sym_from_power_sums(M)
    statistic = float(sym[k])
    threshold = sympoly_threshold(k, eps, C)
    flags = set()
    if 2 * y.size < sympoly_sample_size(k, eps, C, model, noise):
        flags.add("insufficient_samples")
    decision = Decision.FAR if statistic > threshold else Decision.SPARSE
    return TestVerdict(decision, (), max(0.0, M[0]), statistic, threshold, None, "sympoly",
                       frozenset(flags))


@dataclass(frozen=True)
class Recovery:
    support: tuple
    weights: np.ndarray


def noiseless_recover(batch: SampleBatch, k: int, tol: float = 1e-8,
                      max_supports: int = 10**6) -> Recovery | None:
    """Exact recovery of a k-sparse w from noiseless rows, or ``None`` if none fits.

    Every support of size at most k is tried: its weights are solved from the
    first k+1 rows and accepted when all rows are reproduced to ``tol`` and
    every solved weight is nonzero.
    """
    if k < 0:
        raise DomainError("k must be nonnegative")
    x, y = batch.x, batch.y
    m, n = x.shape
    if m < k + 1:
        raise InsufficientSamples(f"need at least k+1 = {k + 1} rows, got {m}")
    total = sum(math.comb(n, j) for j in range(min(k, n) + 1))
    if total > max_supports:
        raise ResourceLimit(f"{total} candidate supports exceed the limit of {max_supports}")
    scale = max(1.0, float(np.max(np.abs(y))) if y.size else 1.0)
    if np.all(np.abs(y) <= tol * scale):
        return Recovery((), np.zeros(0))
    head_x, head_y = x[: k + 1], y[: k + 1]
    matches = []
    for size in range(1, min(k, n) + 1):
        for support in itertools.combinations(range(n), size):
            cols = list(support)
            sol, *_ = np.linalg.lstsq(head_x[:, cols], head_y, rcond=None)
            if np.min(np.abs(sol)) <= tol * scale:
                continue
            if np.max(np.abs(x[:, cols] @ sol - y)) <= tol * scale:
                matches.append(Recovery(support, sol))
        if matches:
            break
    if not matches:
        return None
    if len(matches) > 1:
        raise PreconditionError("several supports fit the rows; the marginal is not continuous "
                                "or too few rows were supplied")
    return matches[0]


def _labels_from(X, y) -> np.ndarray:
    labels = y if y is not None else X
    return check_array(np.asarray(labels, dtype=float).reshape(-1, 1)).ravel()


def _model(model) -> Distribution:
    return model if isinstance(model, Distribution) else Distribution.parse(str(model))


class _VerdictMixin:
    def _store(self, verdict: TestVerdict):
        self.verdict_ = verdict
        self.decision_ = verdict.decision
        self.statistic_ = verdict.statistic
        self.threshold_ = verdict.threshold
        self.w_tilde_ = np.array(verdict.w_tilde)
        self.s2_ = verdict.s2
        self.distance_ = verdict.distance_estimate
        return self

    def predict(self, X=None):
        """1 for Sparse, 0 for FarFromSparse (a single verdict per fitted batch)."""
        check_is_fitted(self, "verdict_")
        return np.array([int(self.verdict_.is_sparse)])


class GeneralSparsityTester(_VerdictMixin, BaseEstimator):
    """Scikit-learn style wrapper around :func:`general_tester`.

    ``fit(X, y)`` reads only the labels ``y`` (``X`` may be ``None``).
    """

    def __init__(self, k=1, c=0.1, s=0.9, C=1.0, marginal="rademacher", noise="zero",
                 orders=None, schedule="practical"):
        self.k = k
        self.c = c
        self.s = s
        self.C = C
        self.marginal = marginal
        self.noise = noise
        self.orders = orders
        self.schedule = schedule

    def fit(self, X, y=None):
        labels = _labels_from(X, y)
        model, noise = _model(self.marginal), _model(self.noise)
        self.schedule_ = build_schedule(self.k, self.s, self.C, model, self.schedule,
                                        self.orders)
        return self._store(general_tester(labels, self.k, self.c, self.s, self.C, model,
                                          noise, self.schedule_))


class SymPolySparsityTester(_VerdictMixin, BaseEstimator):
    """Scikit-learn style wrapper around :func:`sym_poly_tester`."""

    def __init__(self, k=1, eps=0.5, C=1.0, marginal="rademacher", noise="zero",
                 cumulant_floor=1e-12):
        self.k = k
        self.eps = eps
        self.C = C
        self.marginal = marginal
        self.noise = noise
        self.cumulant_floor = cumulant_floor

    def fit(self, X, y=None):
        labels = _labels_from(X, y)
        return self._store(sym_poly_tester(labels, self.k, self.eps, self.C,
                                           _model(self.marginal), _model(self.noise),
                                           self.cumulant_floor))


__all__ = [
    "Decision",
    "Schedule",
    "TestVerdict",
    "Recovery",
    "GeneralSparsityTester",
    "SymPolySparsityTester",
    "build_schedule",
    "default_practical_orders",
    "dist_to_k_sparse",
    "general_tester",
    "newton_sym_from_power_sums",
    "noiseless_recover",
    "peel_magnitudes",
    "recommended_sample_size",
    "sym_poly_tester",
    "sympoly_sample_size",
    "sympoly_threshold",
]
