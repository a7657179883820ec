"""Bell polynomials, moment/cumulant transforms, gap search and MGF roots."""

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sparsitytest.cumulant_algebra import (
    bell_polynomial,
    convolve_moments,
    cumulant_recurrence,
    cumulant_upper_bound,
    cumulants_to_moments,
    find_nonzero_cumulant,
    mgf_root_search,
    moments_to_cumulants,
    scale_moments,
    symmetrized_cumulants,
)
from sparsitytest.distributions import Distribution
from sparsitytest.errors import DomainError, PreconditionError

from oracles import bell_by_enumeration, cumulants_by_set_partitions

fractions = st.fractions(min_value=-50, max_value=50, max_denominator=20)


class TestBellPolynomial:
    def test_single_block(self):
        assert bell_polynomial(5, 1, [1, 1, 1, 1, 7]) == 7

    def test_two_blocks_of_one(self):
        assert bell_polynomial(2, 2, [3]) == 9

    def test_mixed_arguments(self):
        assert bell_polynomial(4, 2, [1, 2, 3]) == 24

    def test_all_ones_gives_stirling_numbers(self):
        # S(6, 3) = 90
        assert bell_polynomial(6, 3, [1] * 4) == 90

    @pytest.mark.parametrize("k", [0, 6])
    def test_bad_block_count(self, k):
        with pytest.raises(DomainError):
            bell_polynomial(5, k, [1] * 5)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 8).flatmap(
        lambda ell: st.tuples(st.just(ell), st.integers(1, ell),
                              st.lists(fractions, min_size=ell, max_size=ell))))
    def test_matches_enumeration(self, case):
        ell, k, x = case
        assert bell_polynomial(ell, k, x) == bell_by_enumeration(ell, k, x)


class TestTransforms:
    def test_rademacher(self):
        assert list(moments_to_cumulants([0, 1, 0, 1, 0, 1])) == [0, 1, 0, -2, 0, 16]

    def test_gaussian_higher_cumulants_vanish(self):
        m = [0, 1, 0, 3, 0, 15, 0, 105, 0, 945]
        assert list(moments_to_cumulants(m)) == [0, 1] + [0] * 8

    def test_poisson_one(self):
        assert list(moments_to_cumulants([1, 2, 5, 15])) == [1, 1, 1, 1]

    def test_matches_set_partition_formula(self):
        m = [Fraction(1, 3), Fraction(2), Fraction(-1, 7), Fraction(5), Fraction(11, 2)]
        assert list(moments_to_cumulants(m)) == cumulants_by_set_partitions(m)

    def test_recurrence_examples(self):
        assert list(cumulant_recurrence([0, 1, 0, 1, 0, 1])) == [0, 1, 0, -2, 0, 16]
        assert list(cumulant_recurrence([0, 1, 0, 3])) == [0, 1, 0, 0]

    def test_recurrence_needs_centered_input(self):
        with pytest.raises(PreconditionError):
            cumulant_recurrence([1, 2, 5, 15])

    @settings(max_examples=80, deadline=None)
    @given(st.lists(fractions, min_size=1, max_size=12))
    def test_exact_round_trip(self, m):
        assert list(cumulants_to_moments(moments_to_cumulants(m))) == m

    @settings(max_examples=80, deadline=None)
    @given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=12))
    def test_float_round_trip(self, m):
        back = np.asarray(cumulants_to_moments(moments_to_cumulants(m)), dtype=float)
        # Terms of order l reach about l! s^l, s the largest |m_j|^(1/j); float
        # cancellation error is relative to that size.
        s = max([1.0] + [abs(v) ** (1 / (j + 1)) for j, v in enumerate(m)])
        scale = np.array([math.factorial(ell) * s**ell for ell in range(1, len(m) + 1)])
        assert np.all(np.abs(back - m) <= 1e-9 * scale)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(fractions, min_size=2, max_size=10).map(lambda v: [Fraction(0)] + v[1:]))
    def test_recurrence_agrees_with_bell_form(self, m):
        assert list(cumulant_recurrence(m)) == list(moments_to_cumulants(m))


class TestCumulantLaws:
    def test_additivity(self):
        rad = Distribution.rademacher().exact_moments(8)
        gau = Distribution.gaussian(var=Fraction(1, 4)).exact_moments(8)
        joint = moments_to_cumulants(convolve_moments(rad, gau))
        separate = [a + b for a, b in zip(moments_to_cumulants(rad), moments_to_cumulants(gau))]
        assert list(joint) == separate

    @pytest.mark.parametrize("c", [Fraction(1, 2), 2, -1])
    @pytest.mark.parametrize("model", [Distribution.rademacher(), Distribution.poisson(1),
                                       Distribution.uniform(standardized=True)])
    def test_homogeneity(self, model, c):
        m = model.exact_moments(8)
        scaled = moments_to_cumulants(scale_moments(m, c))
        base = moments_to_cumulants(m)
        assert [scaled.at(j) for j in range(1, 9)] == [c**j * base.at(j) for j in range(1, 9)]

    @pytest.mark.parametrize("model", [Distribution.poisson(1), Distribution.uniform(0, 1),
                                       Distribution.discrete_uniform([0, 1, 5])])
    def test_symmetrization_of_pair_difference(self, model):
        m = model.exact_moments(8)
        inv_sqrt2 = 1 / math.sqrt(2)
        diff = convolve_moments(scale_moments(m, inv_sqrt2), scale_moments(m, -inv_sqrt2))
        expected = symmetrized_cumulants(moments_to_cumulants(m)).as_float()
        np.testing.assert_allclose(moments_to_cumulants(diff).as_float(), expected,
                                   rtol=1e-10, atol=1e-10)
        assert all(expected[j] == 0 for j in range(0, 8, 2))

    @pytest.mark.parametrize("model", [
        Distribution.rademacher(), Distribution.gaussian(), Distribution.uniform(standardized=True),
        Distribution.gauss_bernoulli(Fraction(1, 10)), Distribution.discrete_uniform([-2, 0, 2]),
    ])
    def test_upper_bound_holds(self, model):
        m = model.exact_moments(12)
        kappa = moments_to_cumulants(m)
        for ell in range(2, 13, 2):
            assert abs(kappa.at(ell)) <= cumulant_upper_bound(ell, m.at(ell))

    def test_upper_bound_example(self):
        assert cumulant_upper_bound(4, 1) == pytest.approx(math.e**4 * 24)

    def test_upper_bound_needs_even_order(self):
        with pytest.raises(DomainError):
            cumulant_upper_bound(3, 1.0)


class TestGapSearch:
    def test_rademacher(self):
        assert find_nonzero_cumulant(Distribution.rademacher(), 2, 20, 1) == 4

    def test_gaussian_has_none(self):
        assert find_nonzero_cumulant(Distribution.gaussian(), 2, 20, 1e-12) is None

    def test_standardized_uniform(self):
        assert find_nonzero_cumulant(Distribution.uniform(standardized=True), 2, 20, 1e-3) == 4

    def test_skips_small_cumulant(self):
        # kappa_4 = -2 gamma, below a threshold of 0.1 for gamma = 0.01
        model = Distribution.gauss_bernoulli(Fraction(1, 100))
        found = find_nonzero_cumulant(model, 2, 20, 0.1)
        assert found is not None and found > 4

    def test_requires_standardized_symmetric(self):
        with pytest.raises(PreconditionError):
            find_nonzero_cumulant(Distribution.poisson(1), 2, 10, 1e-3)


class TestMgfRoot:
    def test_rademacher(self):
        z = mgf_root_search(Distribution.rademacher())
        assert abs(abs(z) - math.pi / 2) <= 1e-6

    def test_three_point(self):
        model = Distribution.discrete_uniform([-1, 0, 1], standardized=True)
        z = mgf_root_search(model)
        assert abs(z) <= 200 * model.support_bound**3
        assert abs(model.mgf(np.asarray(z))) <= 1e-8

    def test_standardized_uniform(self):
        z = mgf_root_search(Distribution.uniform(standardized=True))
        assert abs(z) == pytest.approx(math.pi / math.sqrt(3), abs=1e-6)

    def test_gaussian_rejected(self):
        with pytest.raises(PreconditionError):
            mgf_root_search(Distribution.gaussian())
