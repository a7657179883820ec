"""Distribution models, exact moments, samplers and batch symmetrization."""

import io
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from sparsitytest.cumulant_algebra import moments_to_cumulants
from sparsitytest.distributions import (
    Distribution,
    SampleBatch,
    WeightVector,
    exact_moments,
    sample_dataset,
    sample_labels,
    sample_marginal,
    symmetrize_batch,
    symmetrize_labels,
)
from sparsitytest.errors import (
    ConfigError,
    DomainError,
    EmptyVector,
    InsufficientSamples,
    UnsupportedSampler,
)
from sparsitytest.rng import derive_seed

SAMPLEABLE = [
    Distribution.zero(),
    Distribution.rademacher(),
    Distribution.rademacher(scale=0.5),
    Distribution.discrete_uniform([-2, 0, 1]),
    Distribution.discrete_uniform([-1, 0, 1], standardized=True),
    Distribution.uniform(0, 3),
    Distribution.uniform(standardized=True),
    Distribution.gaussian(1, 4),
    Distribution.poisson(2),
    Distribution.poisson(1, standardized=True),
    Distribution.gauss_bernoulli(Fraction(1, 10)),
]


def series_moment_poisson(lam: float, ell: int) -> float:
    """E[N^ell] for N ~ Poisson(lam) by direct summation of the pmf."""
    return math.fsum(j**ell * math.exp(-lam) * lam**j / math.factorial(j) for j in range(120))


class TestExactMoments:
    def test_rademacher(self):
        assert list(exact_moments(Distribution.rademacher(), 6)) == [0, 1, 0, 1, 0, 1]

    def test_gaussian(self):
        assert list(exact_moments(Distribution.gaussian(), 6)) == [0, 1, 0, 3, 0, 15]

    @pytest.mark.parametrize("lam", [1, Fraction(1, 2), 3])
    def test_poisson_against_series(self, lam):
        m = exact_moments(Distribution.poisson(lam), 6)
        for ell in range(1, 7):
            assert float(m.at(ell)) == pytest.approx(series_moment_poisson(float(lam), ell),
                                                     rel=1e-12)

    def test_poisson_one_is_bell_numbers(self):
        assert list(exact_moments(Distribution.poisson(1), 4)) == [1, 2, 5, 15]

    def test_uniform_against_quadrature(self):
        from scipy.integrate import quad

        m = exact_moments(Distribution.uniform(-1, 2), 5)
        for ell in range(1, 6):
            val, _ = quad(lambda u: u**ell / 3, -1, 2)
            assert float(m.at(ell)) == pytest.approx(val, rel=1e-12)

    def test_mixture_kurtosis(self):
        for gamma in (Fraction(1, 100), Fraction(1, 1000)):
            kappa = moments_to_cumulants(exact_moments(Distribution.gauss_bernoulli(gamma), 4))
            assert kappa.at(4) == -2 * gamma

    def test_float_parameter_read_as_decimal(self):
        kappa = Distribution.gauss_bernoulli(0.01).exact_cumulants(4)
        assert kappa.at(4) == Fraction(-1, 50)

    @pytest.mark.parametrize("model", [m for m in SAMPLEABLE if m.standardized])
    def test_standardized(self, model):
        m = exact_moments(model, 2)
        assert abs(float(m.at(1))) <= 1e-15
        assert float(m.at(2)) == pytest.approx(1.0, abs=1e-15)

    def test_standardized_uniform_cumulants(self):
        kappa = Distribution.uniform(standardized=True).exact_cumulants(6)
        assert kappa.at(4) == Fraction(-6, 5)
        assert kappa.at(6) == Fraction(48, 7)

    @pytest.mark.parametrize("model", [Distribution.zero(), Distribution.gaussian(Fraction(1, 2), 3),
                                       Distribution.poisson(Fraction(3, 2)),
                                       Distribution.gaussian(0, 2), Distribution.rademacher(2)])
    def test_known_cumulants_match_transform(self, model):
        a = np.asarray(model.known_cumulants(10).as_float())
        b = np.asarray(model.exact_cumulants(10).as_float())
        np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-9)

    def test_custom_truncated(self):
        model = Distribution.custom([0, 1, 0, 2])
        assert list(model.exact_cumulants(4)) == [0, 1, 0, -1]


class TestSampling:
    def test_rademacher_support(self):
        draws = sample_marginal(Distribution.rademacher(), 10_000, seed=3)
        assert set(np.unique(draws)) == {-1.0, 1.0}

    def test_deterministic(self):
        model = Distribution.gaussian()
        np.testing.assert_array_equal(sample_marginal(model, 1000, 7), sample_marginal(model, 1000, 7))
        assert not np.array_equal(sample_marginal(model, 1000, 7), sample_marginal(model, 1000, 8))

    def test_poisson_mean(self):
        draws = sample_marginal(Distribution.poisson(1), 10**6, seed=11)
        assert abs(draws.mean() - 1.0) <= 0.01

    @pytest.mark.parametrize("model", SAMPLEABLE)
    def test_within_support_bound(self, model):
        draws = sample_marginal(model, 20_000, seed=5)
        assert np.all(np.abs(draws) <= model.support_bound + 1e-12)

    @pytest.mark.parametrize("model", SAMPLEABLE)
    def test_sample_moments_match_exact(self, model):
        draws = sample_marginal(model, 200_000, seed=derive_seed(1, 2))
        m = exact_moments(model, 2)
        sd = math.sqrt(max(model.variance, 1e-12))
        assert abs(draws.mean() - float(m.at(1))) <= 5 * sd / math.sqrt(draws.size)

    def test_custom_has_no_sampler(self):
        with pytest.raises(UnsupportedSampler):
            sample_marginal(Distribution.custom([0, 1]), 10, seed=0)


class TestDataset:
    def test_zero_weights_zero_noise(self):
        batch = sample_dataset(Distribution.rademacher(), Distribution.zero(), [0, 0, 0], 100, seed=1)
        assert np.all(batch.y == 0)

    def test_label_is_coordinate(self):
        batch = sample_dataset(Distribution.gaussian(), Distribution.zero(), [1, 0, 0], 100, seed=2)
        np.testing.assert_array_equal(batch.y, batch.x[:, 0])

    def test_label_variance(self):
        c = 0.5
        batch = sample_dataset(Distribution.rademacher(), Distribution.gaussian(0, c * c),
                               [1, 0], 10**6, seed=3)
        assert abs(batch.y.var() / (1 + c * c) - 1) <= 0.01

    def test_linear_relation_without_noise(self):
        w = [0.3, -1.2, 2.0]
        batch = sample_dataset(Distribution.uniform(-1, 1), Distribution.zero(), w, 500, seed=4)
        np.testing.assert_allclose(batch.y, batch.x @ np.array(w), rtol=0, atol=1e-12)

    def test_empty_weights(self):
        with pytest.raises(EmptyVector):
            sample_dataset(Distribution.rademacher(), Distribution.zero(), [], 10, seed=0)
        with pytest.raises(EmptyVector):
            WeightVector([])

    def test_deterministic_across_blocks(self):
        args = (Distribution.rademacher(), Distribution.gaussian(), [1, 2], 20_000)
        a = sample_dataset(*args, seed=9)
        b = sample_dataset(*args, seed=9)
        np.testing.assert_array_equal(a.x, b.x)
        np.testing.assert_array_equal(a.y, b.y)

    def test_csv_round_trip(self):
        batch = sample_dataset(Distribution.gaussian(), Distribution.gaussian(0, 0.1),
                               [1.5, -0.25], 20, seed=5)
        back = SampleBatch.from_csv(io.StringIO(batch.to_csv()))
        np.testing.assert_array_equal(back.x, batch.x)
        np.testing.assert_array_equal(back.y, batch.y)


class TestFastLabels:
    @pytest.mark.parametrize("marginal,noise,w", [
        (Distribution.rademacher(), Distribution.zero(), [0.5] * 4 + [1.0]),
        (Distribution.rademacher(), Distribution.rademacher(), [1.0, 1.0, 1.0]),
        (Distribution.uniform(standardized=True), Distribution.gaussian(0, 0.25), [0.7, 0.7, -0.2]),
    ])
    def test_same_law_as_dataset(self, marginal, noise, w):
        m = 40_000
        fast = sample_labels(marginal, noise, w, m, seed=21)
        slow = sample_dataset(marginal, noise, w, m, seed=22).y
        discrete = marginal.kind == "rademacher" and noise.kind in ("zero", "rademacher")
        if discrete:
            values = np.union1d(np.unique(fast), np.unique(slow))
            table = np.array([[np.sum(np.isclose(fast, v)) for v in values],
                              [np.sum(np.isclose(slow, v)) for v in values]])
            table = table[:, table.sum(axis=0) >= 10]
            p = stats.chi2_contingency(table)[1]
        else:
            p = stats.ks_2samp(fast, slow).pvalue
        assert p > 1e-3

    def test_deterministic(self):
        args = (Distribution.rademacher(), Distribution.zero(), [1.0] * 20, 100_000)
        np.testing.assert_array_equal(sample_labels(*args, seed=4), sample_labels(*args, seed=4))

    def test_zero_weights(self):
        y = sample_labels(Distribution.rademacher(), Distribution.zero(), [0.0, 0.0], 50, seed=0)
        assert np.all(y == 0)


class TestSymmetrize:
    def test_identical_rows_give_zero(self):
        x = np.ones((4, 2))
        y = np.full(4, 3.0)
        batch = SampleBatch(x, y, _meta(2, 4))
        sym = symmetrize_batch(batch)
        assert sym.m == 2 and sym.symmetrized
        assert np.all(sym.x == 0) and np.all(sym.y == 0)

    def test_pair_difference(self):
        batch = SampleBatch(np.array([[3.0], [1.0], [5.0]]), np.array([2.0, 0.0, 7.0]), _meta(1, 3))
        sym = symmetrize_batch(batch)
        np.testing.assert_allclose(sym.x[:, 0], [2 / math.sqrt(2)])
        np.testing.assert_allclose(sym.y, [2 / math.sqrt(2)])

    def test_needs_two_rows(self):
        with pytest.raises(InsufficientSamples):
            symmetrize_batch(SampleBatch(np.ones((1, 1)), np.ones(1), _meta(1, 1)))
        with pytest.raises(InsufficientSamples):
            symmetrize_labels(np.ones(1))

    def test_preserves_linear_relation(self):
        w = np.array([1.0, -2.0, 0.5])
        batch = sample_dataset(Distribution.poisson(1), Distribution.zero(), w, 1001, seed=8)
        sym = symmetrize_batch(batch)
        np.testing.assert_allclose(sym.y, sym.x @ w, atol=1e-12)

    def test_poisson_odd_moments_vanish(self):
        y = symmetrize_labels(sample_marginal(Distribution.poisson(1), 10**6, seed=12))
        for ell in (1, 3):
            assert abs(np.mean(y**ell)) <= 5 * math.sqrt(np.var(y**ell) / y.size)


class TestSerialization:
    @settings(max_examples=60, deadline=None)
    @given(st.sampled_from(SAMPLEABLE + [Distribution.custom([0, 1, 0, 3]),
                                         Distribution.gaussian(0.1, 0.25)]))
    def test_round_trip(self, model):
        assert Distribution.parse(model.to_string()) == model
        assert Distribution.from_dict(model.to_dict()) == model

    def test_parse_example(self):
        model = Distribution.parse("discrete_uniform:support=-1;0;1,standardized=true")
        assert model == Distribution.discrete_uniform([-1, 0, 1], standardized=True)

    @pytest.mark.parametrize("text", ["cauchy", "gaussian:sigma=2", "poisson:lam=-1",
                                      "uniform:a=2,b=1"])
    def test_rejects_bad_configs(self, text):
        with pytest.raises((ConfigError, DomainError)):
            Distribution.parse(text)


def _meta(n, m):
    from sparsitytest.distributions import BatchMeta

    return BatchMeta("test", "zero", None, n, m)
