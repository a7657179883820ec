"""Yes/no instance generators for the indistinguishability constructions and
Bayes-classifier advantage experiments.

Three constructions are provided:

``poisson_noniid``
    Columns follow Poi(1) on the first half and Poi(r) on the second half.
    Yes: w = e_i for a uniform i in the second half. No: w is the sum of r
    basis vectors drawn uniformly with replacement from the first half.
``poisson_unknown_noise``
    Columns follow Poi(1). Yes: w = e_i with Poi(r) noise. No: w is a sum of r
    basis vectors with Poi(1) noise.
``gaussian_hidden``
    Columns follow N(0, 1). No: y ~ N(0, 1 + c^2) independently of x. Yes: a
    hidden block of k columns, y = (block sum) / sqrt(k) + N(0, c^2).

In all three, a single label y has the same law under both hypotheses.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Any, Mapping

import numpy as np
from scipy import stats
from scipy.special import logsumexp

from .distributions import BatchMeta, SampleBatch
from .errors import DomainError
from .rng import block_generator, derive_seed

CONSTRUCTIONS = ("poisson_noniid", "poisson_unknown_noise", "gaussian_hidden")
_LOG_2PI = math.log(2 * math.pi)
_COLUMN_BLOCK = 1 << 14


@dataclass(frozen=True)
class LBInstance:
    """One yes/no instance request; ``m`` is the row count (t for the Gaussian case).

    ``params`` holds extra keyword pairs: ``r`` for the Poisson constructions,
    ``c`` and ``k`` for the Gaussian one.
    """

    construction: str
    label: str
    n: int
    m: int
    seed: int
    params: tuple = ()

    def __post_init__(self):
        if self.construction not in CONSTRUCTIONS:
            raise DomainError(f"unknown construction {self.construction!r}; "
                              f"choose from {CONSTRUCTIONS}")
        _check_label(self.label)

    def generate(self) -> SampleBatch:
        p = dict(self.params)
        if self.construction == "poisson_noniid":
            return gen_poisson_noniid(self.n, self.m, self.seed, self.label, p.get("r", 2))
        if self.construction == "poisson_unknown_noise":
            return gen_poisson_unknown_noise(self.n, self.m, self.seed, self.label, p.get("r", 2))
        return gen_gaussian_hidden(self.n, self.m, p["c"], self.seed, self.label, p.get("k", 1))


def _check_label(label: str) -> str:
    if label not in ("yes", "no"):
        raise DomainError(f"label must be 'yes' or 'no', got {label!r}")
    return label


def _rng(seed: int) -> np.random.Generator:
    return block_generator(seed, 0)


def _meta(construction, label, n, m, seed, noise, **extra) -> BatchMeta:
    items = {"construction": construction, "label": label, **extra}
    return BatchMeta(construction, noise, int(seed), n, m, tuple(sorted(items.items())))


def gen_poisson_noniid(n: int, m: int, seed: int, label: str, r: int = 2) -> SampleBatch:
    """Non-identical Poisson columns; noiseless labels."""
    _check_label(label)
    if n < 2 or n % 2:
        raise DomainError("n must be even and >= 2")
    if r < 1 or m < 0:
        raise DomainError("need r >= 1 and m >= 0")
    rng = _rng(seed)
    half = n // 2
    if label == "yes":
        hidden = (half + int(rng.integers(half)),)
    else:
        hidden = tuple(int(i) for i in rng.integers(half, size=r))
    x = np.empty((m, n))
    x[:, :half] = rng.poisson(1.0, size=(m, half))
    x[:, half:] = rng.poisson(float(r), size=(m, half))
    y = x[:, list(hidden)].sum(axis=1)
    return SampleBatch(x, y, _meta("poisson_noniid", label, n, m, seed, "zero", r=r,
                                   hidden=hidden))


def gen_poisson_unknown_noise(n: int, m: int, seed: int, label: str, r: int = 2) -> SampleBatch:
    """Identical Poi(1) columns; the noise rate hides the sparsity."""
    _check_label(label)
    if n < 1 or r < 1 or m < 0:
        raise DomainError("need n >= 1, r >= 1 and m >= 0")
    rng = _rng(seed)
    if label == "yes":
        hidden = (int(rng.integers(n)),)
        rate = float(r)
    else:
        hidden = tuple(int(i) for i in rng.integers(n, size=r))
        rate = 1.0
    x = rng.poisson(1.0, size=(m, n)).astype(float)
    y = x[:, list(hidden)].sum(axis=1) + rng.poisson(rate, size=m)
    return SampleBatch(x, y, _meta("poisson_unknown_noise", label, n, m, seed,
                                   f"poisson:lam={rate}", r=r, hidden=hidden))


def gen_gaussian_hidden(n: int, t: int, c: float, seed: int, label: str,
                        k: int = 1) -> SampleBatch:
    """Gaussian columns with a hidden block (yes) or independent labels (no)."""
    _check_label(label)
    if n < 1 or t < 0:
        raise DomainError("need n >= 1 and t >= 0")
    if c <= 0:
        raise DomainError("c must be positive")
    if k < 1 or n % k:
        raise DomainError(f"block size k={k} must divide n={n}")
    rng = _rng(seed)
    x = rng.standard_normal((t, n))
    if label == "yes":
        block = int(rng.integers(n // k))
        y = x[:, block * k : (block + 1) * k].sum(axis=1) / math.sqrt(k)
        y = y + c * rng.standard_normal(t)
        extra = {"hidden": tuple(range(block * k, (block + 1) * k))}
    else:
        y = math.sqrt(1 + c * c) * rng.standard_normal(t)
        extra = {}
    return SampleBatch(x, y, _meta("gaussian_hidden", label, n, t, seed,
                                   f"gaussian:var={c * c!r}", c=c, k=k, **extra))


def gaussian_log_pdfs(x: np.ndarray, y: np.ndarray, c: float, k: int = 1) -> tuple[float, float]:
    """Log densities of (x, y) under the no and yes Gaussian hypotheses.

    The yes density averages over the n/k hidden blocks with a streamed
    log-sum-exp, so n may be large.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if x.ndim != 2 or x.shape[0] != y.size:
        raise DomainError("x must be t by n with t = len(y)")
    if c <= 0:
        raise DomainError("c must be positive")
    t, n = x.shape
    if n % k:
        raise DomainError(f"block size k={k} must divide n={n}")
    log_x = -0.5 * float(np.sum(x * x)) - 0.5 * t * n * _LOG_2PI
    v = 1 + c * c
    log_no = log_x - 0.5 * float(np.sum(y * y)) / v - 0.5 * t * (_LOG_2PI + math.log(v))
    blocks = n // k
    z = x.reshape(t, blocks, k).sum(axis=2) / math.sqrt(k) if k > 1 else x
    parts = []
    for start in range(0, blocks, _COLUMN_BLOCK):
        zb = z[:, start : start + _COLUMN_BLOCK]
        terms = -0.5 * np.sum((y[:, None] - zb) ** 2, axis=0) / (c * c)
        parts.append(logsumexp(terms))
    log_mix = logsumexp(parts) - math.log(blocks) if parts else 0.0
    log_yes = log_x + log_mix - 0.5 * t * (_LOG_2PI + 2 * math.log(c))
    return log_no, log_yes


def _box_pmf(cols: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Integer counts of columns inside the box [0, target] (componentwise)."""
    dims = tuple(int(v) + 1 for v in target)
    inside = np.all(cols <= target[:, None], axis=0)
    sub = cols[:, inside].astype(np.int64)
    counts = np.zeros(dims, dtype=np.int64)
    if sub.shape[1]:
        flat = np.ravel_multi_index(tuple(sub), dims)
        counts = np.bincount(flat, minlength=int(np.prod(dims))).reshape(dims)
    return counts


def _box_convolve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Convolution of two arrays on the same box, truncated to the box."""
    out = np.zeros(np.broadcast_shapes(a.shape, b.shape), dtype=np.result_type(a, b))
    dims = a.shape
    for idx in zip(*np.nonzero(b)):
        src = tuple(slice(0, d - i) for d, i in zip(dims, idx))
        dst = tuple(slice(i, d) for d, i in zip(dims, idx))
        out[dst] += b[idx] * a[src]
    return out


def _corner(arr: np.ndarray):
    return arr[tuple(d - 1 for d in arr.shape)]


def _poisson_box(rate: float, target: np.ndarray) -> np.ndarray:
    pmf = np.ones(())
    for v in target:
        pmf = np.multiply.outer(pmf, stats.poisson.pmf(np.arange(int(v) + 1), rate))
    return pmf


def poisson_noniid_likelihoods(batch: SampleBatch, r: int) -> tuple[int, int]:
    """Exact yes/no likelihoods of the labels given x, on a common integer scale.

    Returns ``(yes, no)`` proportional to Pr[y | x] with the same positive
    factor (half^r), so ties are exact.
    """
    x = np.rint(batch.x).astype(np.int64)
    target = np.rint(batch.y).astype(np.int64)
    half = batch.n // 2
    if target.size == 0:
        return 1, 1
    yes_counts = _box_pmf(x[:, half:], target)
    yes = int(_corner(yes_counts)) * half ** (r - 1)
    f = _box_pmf(x[:, :half], target)
    acc = f
    for _ in range(r - 1):
        acc = _box_convolve(acc, f)
    return yes, int(_corner(acc))


def poisson_unknown_noise_likelihoods(batch: SampleBatch, r: int) -> tuple[float, float]:
    """Yes/no likelihoods Pr[y | x] for the unknown-noise construction."""
    x = np.rint(batch.x).astype(np.int64)
    target = np.rint(batch.y).astype(np.int64)
    n = batch.n
    if target.size == 0:
        return 1.0, 1.0
    f = _box_pmf(x, target) / n
    yes = float(_corner(_box_convolve(_poisson_box(float(r), target), f)))
    acc = _poisson_box(1.0, target)
    for _ in range(r):
        acc = _box_convolve(acc, f)
    return yes, float(_corner(acc))


def _classify(log_yes, log_no, label: str) -> float:
    """1 if the Bayes rule picks ``label``, 0 if not, 1/2 on exact ties."""
    if log_yes == log_no:
        return 0.5
    picked = "yes" if log_yes > log_no else "no"
    return 1.0 if picked == label else 0.0


def _trial(construction: str, p: Mapping[str, Any], seed: int, label: str) -> float:
    if construction == "gaussian_hidden":
        batch = gen_gaussian_hidden(p["n"], p["t"], p["c"], seed, label, p.get("k", 1))
        c_eff = p["c"]
        if p.get("added_noise", 0.0):
            extra = block_generator(seed, 1).standard_normal(batch.m) * p["added_noise"]
            batch = SampleBatch(batch.x, batch.y + extra, batch.meta)
            c_eff = math.hypot(p["c"], p["added_noise"])
        log_no, log_yes = gaussian_log_pdfs(batch.x, batch.y, c_eff, p.get("k", 1))
        return _classify(log_yes, log_no, label)
    if construction == "poisson_noniid":
        batch = gen_poisson_noniid(p["n"], p["m"], seed, label, p.get("r", 2))
        yes, no = poisson_noniid_likelihoods(batch, p.get("r", 2))
        return _classify(yes, no, label)
    if construction == "poisson_unknown_noise":
        batch = gen_poisson_unknown_noise(p["n"], p["m"], seed, label, p.get("r", 2))
        yes, no = poisson_unknown_noise_likelihoods(batch, p.get("r", 2))
        return _classify(yes, no, label)
    raise DomainError(f"unknown construction {construction!r}; choose from {CONSTRUCTIONS}")


def trial_seed(master: int, label: str, index: int) -> int:
    return derive_seed(derive_seed(master, 0 if label == "no" else 1), index)


def distinguisher_advantage(construction: str, params: Mapping[str, Any], trials: int,
                            seed: int) -> dict:
    """Bayes-classifier advantage Pr[correct] - 1/2 with equal priors.

    ``trials`` instances are drawn under each label; the standard error is the
    binomial one over the 2 * trials classifications.
    """
    if construction not in CONSTRUCTIONS:
        raise DomainError(f"unknown construction {construction!r}; choose from {CONSTRUCTIONS}")
    if trials < 1:
        raise DomainError("trials must be >= 1")
    if trials < 100:
        warnings.warn("fewer than 100 trials: the standard error is unreliable", stacklevel=2)
    scores = [
        _trial(construction, params, trial_seed(seed, label, i), label)
        for label in ("no", "yes")
        for i in range(trials)
    ]
    acc = float(np.mean(scores))
    total = len(scores)
    stderr = math.sqrt(max(acc * (1 - acc), 1e-300) / total)
    return {"advantage": acc - 0.5, "stderr": stderr, "trials": trials}


def expect1_closed_form(z: float, c: float) -> float:
    """E_{x ~ N(0,1)}[(1/c) exp(-(z - x)^2 / (2 c^2))] in closed form."""
    if c <= 0:
        raise DomainError("c must be positive")
    v = 1 + c * c
    return math.exp(-z * z / (2 * v)) / math.sqrt(v)


def r_moment_closed_form(j: int, t: int, c: float, y_norm2: float) -> float:
    """j-th moment over w ~ N(0, I_t) of R(w, y) = prod_s phi_c(y_s - w_s).

    phi_c is the N(0, c^2) density; the result is
    (2 pi)^(-j t / 2) (c^(j-1) sqrt(j + c^2))^(-t) exp(-|y|^2 / (2 + 2 c^2 / j)).
    """
    if j < 1 or t < 0:
        raise DomainError("need j >= 1 and t >= 0")
    if c <= 0:
        raise DomainError("c must be positive")
    log_val = (-0.5 * j * t * _LOG_2PI
               - t * ((j - 1) * math.log(c) + 0.5 * math.log(j + c * c))
               - y_norm2 / (2 + 2 * c * c / j))
    return math.exp(log_val)


def construction_labels(construction: str, params: Mapping[str, Any], m: int, seed: int,
                        label: str) -> np.ndarray:
    """``m`` labels of one instance without materializing the full x matrix.

    Only the hidden columns are drawn, which leaves the law of y unchanged.
    """
    _check_label(label)
    rng = _rng(seed)
    r = params.get("r", 2)
    if construction == "poisson_noniid":
        half = params["n"] // 2
        if label == "yes":
            return rng.poisson(float(r), size=m).astype(float)
        hidden = rng.integers(half, size=r)
        uniq, mult = np.unique(hidden, return_counts=True)
        cols = rng.poisson(1.0, size=(m, uniq.size))
        return (cols * mult).sum(axis=1).astype(float)
    if construction == "poisson_unknown_noise":
        n = params["n"]
        if label == "yes":
            return (rng.poisson(1.0, size=m) + rng.poisson(float(r), size=m)).astype(float)
        hidden = rng.integers(n, size=r)
        uniq, mult = np.unique(hidden, return_counts=True)
        cols = rng.poisson(1.0, size=(m, uniq.size))
        return ((cols * mult).sum(axis=1) + rng.poisson(1.0, size=m)).astype(float)
    if construction == "gaussian_hidden":
        c, k = params["c"], params.get("k", 1)
        if label == "yes":
            return rng.standard_normal((m, k)).sum(axis=1) / math.sqrt(k) + c * rng.standard_normal(m)
        return math.sqrt(1 + c * c) * rng.standard_normal(m)
    raise DomainError(f"unknown construction {construction!r}")


def marginal_two_sample_pvalue(construction: str, params: Mapping[str, Any], m: int,
                               seed: int) -> float:
    """p-value of a two-sample test between yes and no label samples.

    Counts are compared with a chi-square contingency test (pooled tail bin
    for cells with small expectation); continuous labels with Kolmogorov-Smirnov.
    """
    y_yes = construction_labels(construction, params, m, derive_seed(seed, 1), "yes")
    y_no = construction_labels(construction, params, m, derive_seed(seed, 0), "no")
    if construction == "gaussian_hidden":
        return float(stats.ks_2samp(y_yes, y_no).pvalue)
    top = int(max(y_yes.max(), y_no.max()))
    table = np.vstack([np.bincount(y_yes.astype(int), minlength=top + 1),
                       np.bincount(y_no.astype(int), minlength=top + 1)])
    total = table.sum(axis=0)
    keep = np.nonzero(total >= 10)[0]
    cut = keep.max() if keep.size else top
    pooled = np.hstack([table[:, :cut], table[:, cut:].sum(axis=1, keepdims=True)])
    pooled = pooled[:, pooled.sum(axis=0) > 0]
    return float(stats.chi2_contingency(pooled)[1])


def refinement_coupling(n: int, t: int, c: float, gamma: float, trials: int, seed: int,
                        block: int = 100) -> dict:
    """Frequency with which mixing Bernoulli coordinates into Gaussian ones flips
    the Gaussian Bayes classifier.

    Each trial draws a Gaussian instance (yes: w = e_i; no: w = a normalized
    block of ``block`` coordinates), replaces every coordinate independently
    with a random sign with probability ``gamma``, and runs the classifier on
    the mixed rows with labels computed from the mixed rows versus labels kept
    from the Gaussian rows. Outcomes can only differ when a replaced coordinate
    lies in the support of w, so the frequency is at most ``block * gamma * t``.
    """
    if n % block:
        raise DomainError("block must divide n")
    if not 0 <= gamma <= 1:
        raise DomainError("gamma must lie in [0, 1]")
    flips = 0
    for i in range(trials):
        rng = _rng(derive_seed(seed, i))
        label = "yes" if i % 2 else "no"
        w = np.zeros(n)
        if label == "yes":
            w[int(rng.integers(n))] = 1.0
        else:
            b = int(rng.integers(n // block))
            w[b * block : (b + 1) * block] = 1 / math.sqrt(block)
        x = rng.standard_normal((t, n))
        noise = c * rng.standard_normal(t)
        swap = rng.random((t, n)) < gamma
        signs = rng.integers(0, 2, size=(t, n)) * 2.0 - 1.0
        x_mix = np.where(swap, signs, x)
        y_gauss = x @ w + noise
        y_mix = x_mix @ w + noise
        no_g, yes_g = gaussian_log_pdfs(x_mix, y_gauss, c)
        no_m, yes_m = gaussian_log_pdfs(x_mix, y_mix, c)
        flips += (yes_g > no_g) != (yes_m > no_m)
    freq = flips / trials
    return {"frequency": freq, "bound": block * gamma * t,
            "stderr": math.sqrt(max(freq * (1 - freq), 1e-300) / trials)}


__all__ = [
    "CONSTRUCTIONS",
    "LBInstance",
    "construction_labels",
    "distinguisher_advantage",
    "expect1_closed_form",
    "gaussian_log_pdfs",
    "gen_gaussian_hidden",
    "gen_poisson_noniid",
    "gen_poisson_unknown_noise",
    "marginal_two_sample_pvalue",
    "poisson_noniid_likelihoods",
    "poisson_unknown_noise_likelihoods",
    "r_moment_closed_form",
    "refinement_coupling",
    "trial_seed",
]

