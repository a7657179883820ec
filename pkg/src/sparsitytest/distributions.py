"""Coordinate and noise distributions, weight vectors and sample batches.

A :class:`Distribution` describes a univariate law by ``kind`` and parameters,
plus an optional affine standardization (mean 0, variance 1) and a final
multiplicative ``scale``. The same type serves as marginal model for the
measurement coordinates and as noise model for the labels.

Exact moments are produced as ``int``/``Fraction`` whenever the parameters are
rational; parameters given as floats are read through their shortest decimal
representation (``0.01`` means 1/100).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Any, Mapping, Sequence

import numpy as np

from .cumulant_algebra import (
    CumulantVector,
    MomentVector,
    cumulants_to_moments,
    moments_to_cumulants,
)
from .errors import (
    ConfigError,
    DomainError,
    EmptyVector,
    InsufficientSamples,
    MomentTruncationError,
    UnsupportedSampler,
)
from .rng import block_generator, iter_blocks

KINDS = (
    "zero",
    "rademacher",
    "discrete_uniform",
    "uniform",
    "gaussian",
    "poisson",
    "gauss_bernoulli",
    "custom",
)

_PARAMS: dict[str, tuple[str, ...]] = {
    "zero": (),
    "rademacher": (),
    "discrete_uniform": ("support",),
    "uniform": ("a", "b"),
    "gaussian": ("mean", "var"),
    "poisson": ("lam",),
    "gauss_bernoulli": ("gamma",),
    "custom": ("moments",),
}

_DEFAULTS: dict[str, dict[str, Any]] = {
    "uniform": {"a": -1, "b": 1},
    "gaussian": {"mean": 0, "var": 1},
    "poisson": {"lam": 1},
}


def _rational(v) -> Fraction | float:
    """Exact rational reading of a parameter, or the float itself if irrational-looking."""
    if isinstance(v, bool):
        raise ConfigError("boolean is not a numeric parameter")
    if isinstance(v, Rational):
        return Fraction(v)
    if isinstance(v, str):
        return Fraction(v)
    f = float(v)
    if not math.isfinite(f):
        raise ConfigError(f"non-finite parameter {v!r}")
    return Fraction(repr(f))


def _simplify(v):
    if isinstance(v, Fraction) and v.denominator == 1:
        return int(v.numerator)
    return v


def _sqrt_exact(q: Fraction) -> Fraction | None:
    if q < 0:
        return None
    n, d = q.numerator, q.denominator
    rn, rd = math.isqrt(n), math.isqrt(d)
    if rn * rn == n and rd * rd == d:
        return Fraction(rn, rd)
    return None


def _touchard(ell: int, lam: Fraction) -> Fraction:
    # Stirling numbers of the second kind by the triangular recurrence.
    row = [1]
    for n in range(1, ell + 1):
        new = [0] * (n + 1)
        for k in range(1, n + 1):
            new[k] = k * (row[k] if k < len(row) else 0) + row[k - 1]
        row = new
    return sum((row[k] * lam**k for k in range(ell + 1)), Fraction(0))


@dataclass(frozen=True)
class Distribution:
    """Univariate distribution used for coordinates (marginal) or label noise.

    Use the classmethod constructors (``Distribution.rademacher()``,
    ``Distribution.gaussian(0, 0.25)``, ...) rather than the raw initializer.
    """

    kind: str
    params: tuple[tuple[str, Any], ...] = ()
    standardized: bool = False
    scale: Any = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown distribution kind {self.kind!r}; choose from {KINDS}")
        allowed = set(_PARAMS[self.kind])
        given = dict(self.params)
        unknown = set(given) - allowed
        if unknown:
            raise ConfigError(f"unknown parameters {sorted(unknown)} for kind {self.kind!r}")
        merged = {**_DEFAULTS.get(self.kind, {}), **given}
        missing = allowed - set(merged)
        if missing:
            raise ConfigError(f"missing parameters {sorted(missing)} for kind {self.kind!r}")
        object.__setattr__(self, "params", tuple(sorted(merged.items())))
        self._validate()

    # constructors -------------------------------------------------------
    @classmethod
    def zero(cls) -> "Distribution":
        return cls("zero")

    @classmethod
    def rademacher(cls, scale=1) -> "Distribution":
        return cls("rademacher", scale=scale)

    @classmethod
    def discrete_uniform(cls, support: Sequence, standardized: bool = False) -> "Distribution":
        return cls("discrete_uniform", (("support", tuple(support)),), standardized=standardized)

    @classmethod
    def uniform(cls, a=-1, b=1, standardized: bool = False) -> "Distribution":
        return cls("uniform", (("a", a), ("b", b)), standardized=standardized)

    @classmethod
    def gaussian(cls, mean=0, var=1, standardized: bool = False) -> "Distribution":
        return cls("gaussian", (("mean", mean), ("var", var)), standardized=standardized)

    @classmethod
    def poisson(cls, lam=1, standardized: bool = False) -> "Distribution":
        return cls("poisson", (("lam", lam),), standardized=standardized)

    @classmethod
    def gauss_bernoulli(cls, gamma) -> "Distribution":
        return cls("gauss_bernoulli", (("gamma", gamma),))

    @classmethod
    def custom(cls, moments: Sequence, standardized: bool = False) -> "Distribution":
        return cls("custom", (("moments", tuple(moments)),), standardized=standardized)

    # parameters ---------------------------------------------------------
    def param(self, name: str):
        return dict(self.params)[name]

    def _validate(self) -> None:
        k = self.kind
        if k == "discrete_uniform" and len(self.param("support")) == 0:
            raise ConfigError("discrete_uniform needs a nonempty support")
        if k == "uniform" and not _rational(self.param("a")) < _rational(self.param("b")):
            raise ConfigError("uniform needs a < b")
        if k == "gaussian" and _rational(self.param("var")) < 0:
            raise ConfigError("gaussian variance must be nonnegative")
        if k == "poisson" and _rational(self.param("lam")) <= 0:
            raise ConfigError("poisson rate must be positive")
        if k == "gauss_bernoulli" and not 0 <= _rational(self.param("gamma")) <= 1:
            raise ConfigError("gauss_bernoulli needs 0 <= gamma <= 1")
        if self.standardized and k == "zero":
            raise ConfigError("the zero distribution cannot be standardized")
        if self.standardized and k == "gaussian" and _rational(self.param("var")) == 0:
            raise ConfigError("a degenerate gaussian cannot be standardized")
        if not math.isfinite(float(self.scale)):
            raise ConfigError("scale must be finite")

    # exact moments ------------------------------------------------------
    def _raw_moments(self, L: int) -> list:
        k = self.kind
        if k == "zero":
            return [0] * L
        if k == "rademacher":
            return [1 if ell % 2 == 0 else 0 for ell in range(1, L + 1)]
        if k == "discrete_uniform":
            sup = [_rational(s) for s in self.param("support")]
            return [sum((s**ell for s in sup), Fraction(0)) / len(sup) for ell in range(1, L + 1)]
        if k == "uniform":
            a, b = _rational(self.param("a")), _rational(self.param("b"))
            return [(b ** (ell + 1) - a ** (ell + 1)) / ((ell + 1) * (b - a)) for ell in range(1, L + 1)]
        if k == "gaussian":
            kappa = [_rational(self.param("mean")), _rational(self.param("var"))] + [0] * (L - 2)
            return list(cumulants_to_moments(kappa[:L]))
        if k == "poisson":
            lam = _rational(self.param("lam"))
            return [_touchard(ell, lam) for ell in range(1, L + 1)]
        if k == "gauss_bernoulli":
            g = _rational(self.param("gamma"))
            gauss = cumulants_to_moments([0, 1] + [0] * max(0, L - 2))
            return [(1 - g) * gauss[i] + g * (1 if (i + 1) % 2 == 0 else 0) for i in range(L)]
        moments = list(self.param("moments"))
        if len(moments) < L:
            raise MomentTruncationError(len(moments), L)
        return [_rational(v) for v in moments[:L]]

    def _affine(self):
        """(mu, var) of the raw law when standardization applies, else None."""
        if not self.standardized:
            return None
        m = self._raw_moments(2)
        mu = Fraction(m[0])
        var = Fraction(m[1]) - mu * mu
        if var <= 0:
            raise DomainError("cannot standardize a distribution with zero variance")
        return mu, var

    def exact_moments(self, max_order: int) -> MomentVector:
        """Raw moments m_1..m_L of the distribution (after standardization and scale)."""
        L = int(max_order)
        if L < 1:
            raise DomainError("max_order must be >= 1")
        raw = self._raw_moments(L)
        aff = self._affine()
        if aff is None:
            out = [Fraction(v) for v in raw]
        else:
            mu, var = aff
            full = [Fraction(1)] + [Fraction(v) for v in raw]
            sd = _sqrt_exact(var)
            out = []
            for ell in range(1, L + 1):
                central = sum(
                    (math.comb(ell, j) * full[j] * (-mu) ** (ell - j) for j in range(ell + 1)),
                    Fraction(0),
                )
                if ell % 2 == 0:
                    out.append(central / var ** (ell // 2))
                elif central == 0:
                    out.append(Fraction(0))
                elif sd is not None:
                    out.append(central / sd**ell)
                else:
                    out.append(float(central) / float(var) ** (ell / 2))
        scale = self.scale
        if isinstance(scale, float):
            scale = _rational(scale)
        if scale != 1:
            out = [v * scale ** (i + 1) for i, v in enumerate(out)]
        return MomentVector([_simplify(v) for v in out])

    def exact_cumulants(self, max_order: int) -> CumulantVector:
        return moments_to_cumulants(self.exact_moments(max_order))

    def known_cumulants(self, max_order: int) -> CumulantVector:
        """Cumulants from closed forms where one exists, else through the moment transform."""
        L = int(max_order)
        if self.standardized or self.kind not in ("zero", "gaussian", "poisson"):
            return self.exact_cumulants(L)
        s = _rational(self.scale) if isinstance(self.scale, float) else Fraction(self.scale)
        if self.kind == "zero":
            base = [0] * L
        elif self.kind == "gaussian":
            base = ([_rational(self.param("mean")), _rational(self.param("var"))] + [0] * L)[:L]
        else:
            base = [_rational(self.param("lam"))] * L
        return CumulantVector([_simplify(Fraction(v) * s ** (i + 1)) for i, v in enumerate(base)])

    @property
    def mean(self) -> float:
        return float(self.exact_moments(1)[0])

    @property
    def variance(self) -> float:
        m1, m2 = self.exact_moments(2)
        return float(m2 - m1 * m1)

    # structure ----------------------------------------------------------
    def _raw_bound(self) -> tuple[float, float]:
        k = self.kind
        if k == "zero":
            return 0.0, 0.0
        if k == "rademacher":
            return -1.0, 1.0
        if k == "discrete_uniform":
            sup = [float(_rational(s)) for s in self.param("support")]
            return min(sup), max(sup)
        if k == "uniform":
            return float(_rational(self.param("a"))), float(_rational(self.param("b")))
        if k == "gaussian" and _rational(self.param("var")) == 0:
            m = float(_rational(self.param("mean")))
            return m, m
        return -math.inf, math.inf

    @property
    def support_bound(self) -> float:
        """Bound B with |X| <= B almost surely (``inf`` when unbounded)."""
        lo, hi = self._raw_bound()
        if not (math.isfinite(lo) and math.isfinite(hi)):
            return math.inf
        aff = self._affine()
        if aff is not None:
            mu, var = (float(v) for v in aff)
            sd = math.sqrt(var)
            lo, hi = (lo - mu) / sd, (hi - mu) / sd
        return max(abs(lo), abs(hi)) * abs(float(self.scale))

    def is_symmetric(self) -> bool:
        """Whether X and -X have the same law."""
        k = self.kind
        if k in ("zero", "rademacher", "gauss_bernoulli"):
            return True
        if k == "uniform":
            return self.standardized or _rational(self.param("a")) == -_rational(self.param("b"))
        if k == "gaussian":
            return self.standardized or _rational(self.param("mean")) == 0
        if k == "discrete_uniform":
            sup = sorted(_rational(s) for s in self.param("support"))
            center = Fraction(0)
            if self.standardized:
                center = sum(sup, Fraction(0)) / len(sup)
            return sorted(2 * center - s for s in sup) == sup
        if k == "custom":
            m = self.exact_moments(len(self.param("moments")))
            return all(abs(m[i]) <= 1e-15 for i in range(0, len(m), 2))
        return False

    def mgf(self, z):
        """E[exp(z X)] for complex ``z`` (bounded kinds only)."""
        z = np.asarray(z, dtype=complex)
        k = self.kind
        if not math.isfinite(self.support_bound):
            raise UnsupportedSampler(f"no closed-form MGF evaluation for kind {k!r}")
        a_coef, shift = float(self.scale), 0.0
        aff = self._affine()
        if aff is not None:
            mu, var = (float(v) for v in aff)
            a_coef = float(self.scale) / math.sqrt(var)
            shift = -mu * a_coef
        u = z * a_coef
        if k == "zero":
            base = np.ones_like(u)
        elif k == "rademacher":
            base = np.cosh(u)
        elif k == "discrete_uniform":
            sup = np.array([float(_rational(s)) for s in self.param("support")])
            base = np.exp(np.multiply.outer(u, sup)).mean(axis=-1)
        elif k == "uniform":
            a, b = float(_rational(self.param("a"))), float(_rational(self.param("b")))
            small = np.abs(u) < 1e-8
            safe = np.where(small, 1.0, u)
            base = np.where(small, np.exp(u * (a + b) / 2),
                            (np.exp(safe * b) - np.exp(safe * a)) / (safe * (b - a)))
        else:
            m = float(_rational(self.param("mean")))
            base = np.exp(u * m)
        return base * np.exp(z * shift)

    # sampling -----------------------------------------------------------
    def _sample_raw(self, rng: np.random.Generator, shape) -> np.ndarray:
        k = self.kind
        if k == "zero":
            return np.zeros(shape)
        if k == "rademacher":
            return rng.integers(0, 2, size=shape, dtype=np.int8).astype(float) * 2.0 - 1.0
        if k == "discrete_uniform":
            sup = np.array([float(_rational(s)) for s in self.param("support")])
            return sup[rng.integers(0, sup.size, size=shape)]
        if k == "uniform":
            a, b = float(_rational(self.param("a"))), float(_rational(self.param("b")))
            return rng.uniform(a, b, size=shape)
        if k == "gaussian":
            m, v = float(_rational(self.param("mean"))), float(_rational(self.param("var")))
            return m + math.sqrt(v) * rng.standard_normal(shape)
        if k == "poisson":
            return rng.poisson(float(_rational(self.param("lam"))), size=shape).astype(float)
        if k == "gauss_bernoulli":
            g = float(_rational(self.param("gamma")))
            gauss = rng.standard_normal(shape)
            signs = rng.integers(0, 2, size=shape, dtype=np.int8).astype(float) * 2.0 - 1.0
            pick = rng.random(shape) < g
            return np.where(pick, signs, gauss)
        raise UnsupportedSampler("custom-moment distributions have no sampler")

    def _affine_coefficients(self) -> tuple[float, float]:
        """(a, b) such that a sample equals a * raw + b."""
        a, b = float(self.scale), 0.0
        aff = self._affine()
        if aff is not None:
            mu, var = (float(v) for v in aff)
            a = float(self.scale) / math.sqrt(var)
            b = -mu * a
        return a, b

    def sample(self, rng: np.random.Generator, shape) -> np.ndarray:
        a, b = self._affine_coefficients()
        raw = self._sample_raw(rng, shape)
        if a == 1.0 and b == 0.0:
            return raw
        return a * raw + b

    def sample_sum(self, rng: np.random.Generator, g: int, rows: int) -> np.ndarray:
        """Sum of ``g`` independent draws, ``rows`` times, exact in distribution."""
        a, b = self._affine_coefficients()
        k = self.kind
        if k == "zero":
            raw = np.zeros(rows)
        elif k == "rademacher":
            if g <= 63:
                bits = rng.integers(0, 1 << g, size=rows, dtype=np.uint64)
                raw = 2.0 * np.bitwise_count(bits).astype(float) - g
            else:
                raw = 2.0 * rng.binomial(g, 0.5, size=rows) - g
        elif k == "gaussian":
            m, v = float(_rational(self.param("mean"))), float(_rational(self.param("var")))
            raw = g * m + math.sqrt(g * v) * rng.standard_normal(rows)
        elif k == "poisson":
            raw = rng.poisson(g * float(_rational(self.param("lam"))), size=rows).astype(float)
        else:
            raw = np.zeros(rows)
            step = max(1, (1 << 20) // max(g, 1))
            for start in range(0, rows, step):
                stop = min(rows, start + step)
                raw[start:stop] = self._sample_raw(rng, (stop - start, g)).sum(axis=1)
        return a * raw + g * b

    # serialization ------------------------------------------------------
    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind}
        for name, value in self.params:
            out[name] = list(value) if isinstance(value, tuple) else value
        if self.standardized:
            out["standardized"] = True
        if self.scale != 1:
            out["scale"] = self.scale
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Distribution":
        data = dict(data)
        try:
            kind = data.pop("kind")
        except KeyError:
            raise ConfigError("distribution config needs a 'kind' key") from None
        standardized = _parse_bool(data.pop("standardized", False))
        scale = data.pop("scale", 1)
        params = []
        for name, value in data.items():
            if isinstance(value, list):
                value = tuple(value)
            params.append((name, value))
        return cls(kind, tuple(params), standardized=standardized, scale=scale)

    def to_string(self) -> str:
        """Compact ``kind:key=value,...`` form (list values joined with ``;``)."""
        items = []
        for name, value in self.to_dict().items():
            if name == "kind":
                continue
            if isinstance(value, list):
                value = ";".join(_fmt(v) for v in value)
            elif isinstance(value, bool):
                value = "true" if value else "false"
            else:
                value = _fmt(value)
            items.append(f"{name}={value}")
        return self.kind + (":" + ",".join(items) if items else "")

    @classmethod
    def parse(cls, text: str) -> "Distribution":
        """Inverse of :meth:`to_string`."""
        text = text.strip()
        kind, _, rest = text.partition(":")
        data: dict[str, Any] = {"kind": kind.strip()}
        if rest.strip():
            for item in rest.split(","):
                key, sep, value = item.partition("=")
                if not sep:
                    raise ConfigError(f"malformed distribution parameter {item!r}")
                key = key.strip()
                value = value.strip()
                if key == "standardized":
                    data[key] = _parse_bool(value)
                elif key in ("support", "moments"):
                    data[key] = [_parse_number(v) for v in value.split(";") if v.strip()]
                else:
                    data[key] = _parse_number(value)
        return cls.from_dict(data)

    def __str__(self) -> str:
        return self.to_string()


MarginalModel = Distribution
NoiseModel = Distribution


def _fmt(v) -> str:
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse_number(text: str):
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        pass
    if "/" in text:
        try:
            return Fraction(text)
        except ValueError:
            pass
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"not a number: {text!r}") from None


def _parse_bool(value) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {value!r}")


@dataclass(frozen=True)
class WeightVector:
    """Finite weight vector with its cached Euclidean norm."""

    entries: np.ndarray
    norm2: float = field(init=False)

    def __post_init__(self):
        arr = np.array(self.entries, dtype=float).reshape(-1)
        if arr.size == 0:
            raise EmptyVector("weight vector must have at least one entry")
        if not np.all(np.isfinite(arr)):
            raise DomainError("weight vector entries must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)
        object.__setattr__(self, "norm2", float(np.linalg.norm(arr)))

    @property
    def n(self) -> int:
        return int(self.entries.size)

    def __len__(self) -> int:
        return self.n

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)


def as_weight_vector(w) -> WeightVector:
    return w if isinstance(w, WeightVector) else WeightVector(w)


@dataclass(frozen=True)
class BatchMeta:
    marginal: str
    noise: str
    seed: int | None
    n: int
    m: int
    extra: tuple[tuple[str, Any], ...] = ()

    def get(self, key: str, default=None):
        return dict(self.extra).get(key, default)


@dataclass(frozen=True)
class SampleBatch:
    """Measurement rows ``x`` (m by n) with labels ``y`` (length m)."""

    x: np.ndarray
    y: np.ndarray
    meta: BatchMeta
    symmetrized: bool = False

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float).reshape(-1)
        if x.ndim != 2:
            raise DomainError("x must be a 2-d array")
        if x.shape[0] != y.size:
            raise DomainError(f"x has {x.shape[0]} rows but y has {y.size} entries")
        if self.meta.n != x.shape[1]:
            raise DomainError("meta.n disagrees with the column count of x")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def m(self) -> int:
        return int(self.y.size)

    @property
    def n(self) -> int:
        return int(self.x.shape[1])

    def to_csv(self, path=None) -> str | None:
        """Write ``x1,...,xn,y`` rows; returns the text when ``path`` is None."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([f"x{j + 1}" for j in range(self.n)] + ["y"])
        for row, label in zip(self.x, self.y):
            writer.writerow([repr(float(v)) for v in row] + [repr(float(label))])
        text = buf.getvalue()
        if path is None:
            return text
        with open(path, "w", newline="") as fh:
            fh.write(text)
        return None

    @classmethod
    def from_csv(cls, source, marginal: str = "unknown", noise: str = "unknown",
                 symmetrized: bool = False) -> "SampleBatch":
        """Read a batch written by :meth:`to_csv` from a path or text stream."""
        if hasattr(source, "read"):
            rows = list(csv.reader(source))
        else:
            with open(source, newline="") as fh:
                rows = list(csv.reader(fh))
        if not rows:
            raise DomainError("empty CSV input")
        header = [h.strip() for h in rows[0]]
        n = len(header) - 1
        if header[-1] != "y" or header[:-1] != [f"x{j + 1}" for j in range(n)]:
            raise DomainError("CSV header must be x1,...,xn,y")
        data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float).reshape(-1, n + 1)
        meta = BatchMeta(marginal, noise, None, n, data.shape[0])
        return cls(data[:, :n], data[:, n], meta, symmetrized)


def sample_marginal(model: Distribution, count: int, seed: int) -> np.ndarray:
    """``count`` iid draws from ``model``; deterministic in ``(model, count, seed)``."""
    if count < 1:
        raise DomainError("count must be >= 1")
    if model.kind == "custom":
        raise UnsupportedSampler("custom-moment distributions have no sampler")
    out = np.empty(count)
    for b, start, stop in iter_blocks(count):
        out[start:stop] = model.sample(block_generator(seed, b), stop - start)
    return out


def exact_moments(model: Distribution, max_order: int) -> MomentVector:
    return model.exact_moments(max_order)


def sample_dataset(marginal: Distribution, noise: Distribution, w, m: int,
                   seed: int) -> SampleBatch:
    """Draw ``m`` rows x ~ marginal^n and labels y = w.x + noise."""
    w = np.asarray(w, dtype=float).reshape(-1) if not isinstance(w, WeightVector) else w.entries
    if w.size == 0:
        raise EmptyVector("weight vector must have at least one entry")
    if m < 1:
        raise DomainError("m must be >= 1")
    for model in (marginal, noise):
        if model.kind == "custom":
            raise UnsupportedSampler("custom-moment distributions have no sampler")
    n = w.size
    x = np.empty((m, n))
    y = np.empty(m)
    for b, start, stop in iter_blocks(m):
        rng = block_generator(seed, b)
        rows = stop - start
        xb = marginal.sample(rng, (rows, n))
        eta = noise.sample(rng, rows)
        x[start:stop] = xb
        y[start:stop] = xb @ w + eta
    meta = BatchMeta(str(marginal), str(noise), int(seed), n, m)
    return SampleBatch(x, y, meta)


def sample_labels(marginal: Distribution, noise: Distribution, w, m: int,
                  seed: int) -> np.ndarray:
    """Labels y = w.x + noise without materializing x.

    Coordinates sharing a weight are summed as a group (a Rademacher group sum
    is a shifted binomial, a Gaussian group sum a rescaled Gaussian), so the
    output has exactly the law of ``sample_dataset(...).y``. The random stream
    differs from :func:`sample_dataset`; values are not bit-identical to it.
    """
    w = np.asarray(w, dtype=float).reshape(-1) if not isinstance(w, WeightVector) else w.entries
    if w.size == 0:
        raise EmptyVector("weight vector must have at least one entry")
    if m < 1:
        raise DomainError("m must be >= 1")
    for model in (marginal, noise):
        if model.kind == "custom":
            raise UnsupportedSampler("custom-moment distributions have no sampler")
    values, counts = np.unique(w[w != 0], return_counts=True)
    y = np.empty(m)
    for b, start, stop in iter_blocks(m, block_rows=1 << 16):
        rng = block_generator(seed, b)
        rows = stop - start
        acc = np.zeros(rows)
        for v, g in zip(values, counts):
            acc += v * marginal.sample_sum(rng, int(g), rows)
        acc += noise.sample(rng, rows)
        y[start:stop] = acc
    return y


def symmetrize_batch(batch: SampleBatch) -> SampleBatch:
    """Pairwise differences of consecutive rows divided by sqrt(2).

    An odd trailing row is dropped.
    """
    if batch.m < 2:
        raise InsufficientSamples("symmetrization needs at least two rows")
    half = batch.m // 2
    r2 = math.sqrt(2.0)
    x = (batch.x[0 : 2 * half : 2] - batch.x[1 : 2 * half : 2]) / r2
    y = (batch.y[0 : 2 * half : 2] - batch.y[1 : 2 * half : 2]) / r2
    meta = BatchMeta(batch.meta.marginal, batch.meta.noise, batch.meta.seed, batch.n, half,
                     batch.meta.extra)
    return SampleBatch(x, y, meta, symmetrized=True)


def symmetrize_labels(y: np.ndarray) -> np.ndarray:
    """Label-only version of :func:`symmetrize_batch`."""
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.size < 2:
        raise InsufficientSamples("symmetrization needs at least two labels")
    half = y.size // 2
    return (y[0 : 2 * half : 2] - y[1 : 2 * half : 2]) / math.sqrt(2.0)


__all__ = [
    "Distribution",
    "MarginalModel",
    "NoiseModel",
    "WeightVector",
    "SampleBatch",
    "BatchMeta",
    "as_weight_vector",
    "sample_marginal",
    "exact_moments",
    "sample_dataset",
    "sample_labels",
    "symmetrize_batch",
    "symmetrize_labels",
]
