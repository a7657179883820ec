"""Moment and cumulant conversions through incomplete Bell polynomials.

Inputs made only of ``int`` and ``Fraction`` values are processed in exact
rational arithmetic and returned exactly. Finite float inputs are converted
to the rationals they represent, transformed exactly, and rounded once at the
end, since the conversions are alternating sums prone to cancellation.
Non-finite inputs fall back to double precision with ``math.fsum``.
"""

from __future__ import annotations

import math
from fractions import Fraction
from numbers import Rational
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, PreconditionError, RootNotFound

MAX_EXACT_ORDER = 64


class OrderedVector(tuple):
    """Tuple whose entry ``i`` holds the value at order ``i + 1``."""

    def at(self, order: int):
        if order < 1 or order > len(self):
            raise DomainError(f"order {order} outside 1..{len(self)}")
        return self[order - 1]

    @property
    def max_order(self) -> int:
        return len(self)

    def as_float(self) -> np.ndarray:
        return np.array([float(v) for v in self], dtype=float)

    def __repr__(self) -> str:
        return f"{type(self).__name__}({list(self)!r})"


class MomentVector(OrderedVector):
    """Raw moments m_1..m_L."""


class CumulantVector(OrderedVector):
    """Cumulants kappa_1..kappa_L."""


def _is_exact(values: Iterable) -> bool:
    return all(isinstance(v, Rational) and not isinstance(v, bool) for v in values)


def _normalize(values: Sequence) -> tuple[list, bool]:
    vals = list(values)
    exact = _is_exact(vals)
    if exact:
        return [Fraction(v) for v in vals], True
    return [float(v) for v in vals], False


def _rationalize(values: Sequence) -> tuple[list, str]:
    """Values as Fractions plus the output mode: "exact", "rounded" or "float"."""
    vals = list(values)
    if _is_exact(vals):
        return [Fraction(v) for v in vals], "exact"
    floats = [float(v) for v in vals]
    if all(math.isfinite(v) for v in floats):
        return [Fraction(v) for v in floats], "rounded"
    return floats, "float"


def _finish(values: list, mode: str) -> list:
    if mode == "rounded":
        return [float(v) for v in values]
    return [_simplify(v) for v in values]


def _sum(terms: list, exact: bool):
    if exact:
        return sum(terms, Fraction(0))
    return math.fsum(terms)


def _simplify(v):
    if isinstance(v, Fraction) and v.denominator == 1:
        return int(v.numerator)
    return v


def bell_table(x: Sequence, max_order: int) -> list[list]:
    """Table ``B[n][k]`` of incomplete Bell polynomials for ``0 <= k <= n <= max_order``.

    ``x[i - 1]`` holds the argument x_i; missing trailing arguments count as 0.
    """
    xs, exact = _normalize(x)
    zero = Fraction(0) if exact else 0.0
    one = Fraction(1) if exact else 1.0
    xs = xs + [zero] * max(0, max_order - len(xs))
    table = [[zero] * (max_order + 1) for _ in range(max_order + 1)]
    table[0][0] = one
    for n in range(1, max_order + 1):
        for k in range(1, n + 1):
            terms = [
                math.comb(n - 1, i - 1) * xs[i - 1] * table[n - i][k - 1]
                for i in range(1, n - k + 2)
            ]
            table[n][k] = _sum(terms, exact)
    return table


def bell_polynomial(ell: int, k: int, args: Sequence):
    """Incomplete Bell polynomial B_{ell,k}(x_1, ..., x_{ell-k+1})."""
    if not (1 <= k <= ell):
        raise DomainError(f"need 1 <= k <= ell, got k={k}, ell={ell}")
    needed = ell - k + 1
    if len(args) < needed:
        raise DomainError(f"B_{{{ell},{k}}} needs {needed} arguments, got {len(args)}")
    return _simplify(bell_table(list(args)[:needed], ell)[ell][k])


def moments_to_cumulants(m: Sequence) -> CumulantVector:
    """Cumulants kappa_1..kappa_L from raw moments m_1..m_L."""
    vals, mode = _rationalize(m)
    exact = mode != "float"
    L = len(vals)
    table = bell_table(vals, L)
    out = []
    for ell in range(1, L + 1):
        terms = [
            (-1) ** (k - 1) * math.factorial(k - 1) * table[ell][k]
            for k in range(1, ell + 1)
        ]
        out.append(_sum(terms, exact))
    return CumulantVector(_finish(out, mode))


def cumulants_to_moments(kappa: Sequence) -> MomentVector:
    """Raw moments m_1..m_L from cumulants kappa_1..kappa_L."""
    vals, mode = _rationalize(kappa)
    exact = mode != "float"
    L = len(vals)
    table = bell_table(vals, L)
    out = [_sum(table[ell][1 : ell + 1], exact) for ell in range(1, L + 1)]
    return MomentVector(_finish(out, mode))


def cumulant_recurrence(m: Sequence, tol: float = 1e-12) -> CumulantVector:
    """Cumulants of a mean-zero variable from the moment recurrence.

    kappa_l = m_l - sum_{j<l} C(l-1, j-1) kappa_j m_{l-j}
    """
    vals, mode = _rationalize(m)
    exact = mode != "float"
    if not vals:
        return CumulantVector([])
    if (vals[0] != 0) if mode == "exact" else abs(vals[0]) > tol:
        raise PreconditionError(f"recurrence requires m_1 = 0, got {vals[0]}")
    if mode == "rounded":
        vals[0] = Fraction(0)
    kappa: list = []
    for ell in range(1, len(vals) + 1):
        terms = [vals[ell - 1]] + [
            -math.comb(ell - 1, j - 1) * kappa[j - 1] * vals[ell - j - 1]
            for j in range(1, ell)
        ]
        kappa.append(_sum(terms, exact))
    return CumulantVector(_finish(kappa, mode))


def cumulant_upper_bound(ell: int, m_ell: float) -> float:
    """Magnitude bound m_ell * e^ell * ell! for the order-ell cumulant."""
    if ell < 2 or ell % 2:
        raise DomainError(f"bound is stated for even orders >= 2, got {ell}")
    return float(m_ell) * math.exp(ell) * math.factorial(ell)


def convolve_moments(ma: Sequence, mb: Sequence) -> MomentVector:
    """Moments of A + B for independent A, B (binomial convolution)."""
    L = min(len(ma), len(mb))
    a = [1] + list(ma[:L])
    b = [1] + list(mb[:L])
    exact = _is_exact(a + b)
    out = []
    for ell in range(1, L + 1):
        terms = [math.comb(ell, j) * a[j] * b[ell - j] for j in range(ell + 1)]
        out.append(_simplify(sum(terms, Fraction(0))) if exact else math.fsum(terms))
    return MomentVector(out)


def scale_moments(m: Sequence, c) -> MomentVector:
    """Moments of c * X given the moments of X."""
    out = []
    for i, v in enumerate(m):
        if _is_exact([v, c]):
            out.append(_simplify(Fraction(v) * Fraction(c) ** (i + 1)))
        else:
            out.append(float(v) * float(c) ** (i + 1))
    return MomentVector(out)


def symmetrized_cumulants(kappa: Sequence) -> CumulantVector:
    """Cumulants of (X - X') / sqrt(2) for an independent copy X'.

    Odd orders vanish; even order ell becomes 2 kappa_ell / 2^(ell/2).
    """
    out = []
    for i, v in enumerate(kappa):
        ell = i + 1
        if ell % 2:
            out.append(0)
        else:
            val = 2 * (Fraction(v) if _is_exact([v]) else float(v)) / 2 ** (ell // 2)
            out.append(_simplify(val))
    return CumulantVector(out)


def _first_nonzero_even(kappa: Sequence, ell_start: int, threshold: float) -> int | None:
    for j in range(ell_start + 1, len(kappa) + 1):
        if j % 2 == 0 and abs(kappa[j - 1]) >= threshold:
            return j
    return None


def find_nonzero_cumulant(model, ell_start: int, L_max: int, threshold: float) -> int | None:
    """Smallest even order j in (ell_start, L_max] with |kappa_j| >= threshold.

    ``model`` must be symmetric with mean 0 and variance 1. Returns ``None``
    when every even cumulant in range is below the threshold.
    """
    if threshold <= 0:
        raise DomainError("threshold must be positive")
    if L_max <= ell_start:
        return None
    m = model.exact_moments(L_max)
    if abs(m[0]) > 1e-12 or (L_max >= 2 and abs(m[1] - 1) > 1e-12):
        raise PreconditionError("gap search needs a standardized model (mean 0, variance 1)")
    if any(abs(m[i]) > 1e-12 for i in range(0, L_max, 2)):
        raise PreconditionError("gap search needs a symmetric model; symmetrize it first")
    return _first_nonzero_even(moments_to_cumulants(m), ell_start, threshold)


def _newton_refine(f: Callable[[complex], complex], z: complex, radius: float,
                   tol: float, max_iter: int = 60) -> tuple[complex | None, int]:
    """Damped Newton on an analytic ``f`` with a central-difference derivative."""
    evals = 0
    fz = f(z)
    evals += 1
    for _ in range(max_iter):
        if abs(fz) <= tol:
            return z, evals
        h = 1e-6 * max(1.0, abs(z))
        d = (f(z + h) - f(z - h)) / (2 * h)
        evals += 2
        if d == 0:
            return None, evals
        step = fz / d
        cap = 0.1 * max(1.0, abs(z))
        if abs(step) > cap:
            step *= cap / abs(step)
        lam = 1.0
        while lam > 1e-4:
            cand = z - lam * step
            fc = f(cand)
            evals += 1
            if abs(fc) < abs(fz):
                break
            lam /= 2
        else:
            return None, evals
        z, fz = cand, fc
        if abs(z) > radius * 1.05:
            return None, evals
    return (z if abs(fz) <= tol else None), evals


def mgf_root_search(model, radius: float | None = None, tol: float = 1e-8,
                    budget: int = 100_000) -> complex:
    """Locate z0 with |z0| <= radius and |E[exp(z0 X)]| <= tol.

    The imaginary axis is scanned first: for symmetric X the MGF there is the
    real function E[cos(a X)], so sign changes bracket roots. Failing that, the
    disc is sampled on concentric circles of 1024 points and the smallest
    values are polished by damped Newton steps. Raises :class:`RootNotFound`
    when the evaluation budget is exhausted.
    """
    bound = model.support_bound
    if not math.isfinite(bound):
        raise PreconditionError("MGF root search needs a bounded marginal")
    if not model.is_symmetric():
        raise PreconditionError("MGF root search needs a symmetric marginal")
    if bound == 0:
        raise PreconditionError("point mass at 0 has an MGF without zeros")
    if radius is None:
        radius = 200.0 * bound ** 3
    mgf = model.mgf
    evals = 0

    def f_axis(a):
        return float(np.real(mgf(np.asarray(1j * a))))

    step = 0.05 / bound
    chunk = 1024
    start = 0.0
    while start < radius and evals < budget // 2:
        grid = start + step * np.arange(1, chunk + 1)
        grid = grid[grid <= radius]
        if grid.size == 0:
            break
        vals = np.real(mgf(1j * grid))
        evals += grid.size
        prev = np.concatenate([[f_axis(start) if start > 0 else 1.0], vals[:-1]])
        left = np.concatenate([[start], grid[:-1]])
        sign_change = np.nonzero(np.sign(prev) * np.sign(vals) <= 0)[0]
        if sign_change.size:
            i = sign_change[0]
            a0, a1 = float(left[i]), float(grid[i])
            root = a1 if vals[i] == 0 else brentq(f_axis, a0, a1, xtol=1e-15)
            z = complex(0.0, root)
            if abs(complex(mgf(np.asarray(z)))) <= tol:
                return z
        # Tangential zeros do not change sign; polish near-zero local minima.
        mag = np.abs(vals)
        for i in range(1, mag.size - 1):
            if mag[i] < 1e-2 and mag[i] <= mag[i - 1] and mag[i] <= mag[i + 1]:
                z, used = _newton_refine(lambda u: complex(mgf(np.asarray(u))),
                                         complex(0.3 * step, grid[i]), radius, tol)
                evals += used
                if z is not None:
                    return z
        start = float(grid[-1])

    n_circles = max(1, min(64, (budget - evals) // 2048))
    theta = np.exp(2j * np.pi * np.arange(1024) / 1024)
    candidates = []
    for j in range(1, n_circles + 1):
        pts = radius * j / n_circles * theta
        vals = np.abs(mgf(pts))
        evals += pts.size
        best = np.argsort(vals)[:4]
        candidates.extend((float(vals[b]), complex(pts[b])) for b in best)
    candidates.sort(key=lambda c: c[0])
    for _, z0 in candidates:
        if evals >= budget:
            break
        z, used = _newton_refine(lambda u: complex(mgf(np.asarray(u))), z0, radius, tol)
        evals += used
        if z is not None and abs(z) <= radius:
            return z
    raise RootNotFound(f"no MGF zero with |z| <= {radius} found within {evals} evaluations")


__all__ = [
    "MomentVector",
    "CumulantVector",
    "bell_table",
    "bell_polynomial",
    "moments_to_cumulants",
    "cumulants_to_moments",
    "cumulant_recurrence",
    "cumulant_upper_bound",
    "convolve_moments",
    "scale_moments",
    "symmetrized_cumulants",
    "find_nonzero_cumulant",
    "mgf_root_search",
    "MAX_EXACT_ORDER",
]

