import math

import numpy as np
import pytest
from hypothesis import given, settings as hyp_settings
from hypothesis import strategies as st

from ergo.exceptions import NonUniqueWarning, VacuousBoundWarning
from ergo.services.chain_core import total_variation, validate_chain
from ergo.services.ergodicity import (
    InvariantMethod,
    conditional_decay,
    contraction_report,
    convergence_envelope,
    decay_slope,
    has_positive_md,
    invariance_residual,
    invariant_measure,
    md_coefficient,
    md_coefficient_min_entry,
    pairwise_md,
    set_envelopes,
    sup_set_deviation,
)
from strategies import chains, probability_vectors


class TestCoefficients:
    def test_p2_values(self, p2):
        assert md_coefficient(p2) == pytest.approx(0.3, abs=1e-15)
        assert md_coefficient_min_entry(p2) == pytest.approx(0.1, abs=1e-15)

    def test_swap_has_zero_kappa(self, swap):
        assert md_coefficient(swap) == 0.0
        assert md_coefficient(swap, 2) == 0.0
        assert not has_positive_md(swap)

    def test_iid_has_unit_kappa(self, iid):
        assert md_coefficient(iid) == pytest.approx(1.0)

    def test_report(self, p2):
        report = contraction_report(p2, n0=2)
        assert report.kappa == pytest.approx(0.3)
        assert report.kappa0 == pytest.approx(0.1)
        # 𝒫² = [[0.83, 0.17], [0.34, 0.66]]
        assert report.kappa_n0 == pytest.approx(0.51)
        assert report.to_dict()["n0"] == 2

    def test_invalid_n0(self, p2):
        with pytest.raises(ValueError):
            md_coefficient(p2, 0)

    @hyp_settings(max_examples=40, deadline=None)
    @given(chains())
    def test_pairwise_symmetric(self, chain):
        pairwise = pairwise_md(chain)
        np.testing.assert_allclose(pairwise, pairwise.T, atol=0)
        np.testing.assert_array_equal(np.diag(pairwise), 1.0)
        assert pairwise.min() == pytest.approx(md_coefficient(chain))

    @hyp_settings(max_examples=40, deadline=None)
    @given(chains())
    def test_kappa0_below_kappa(self, chain):
        assert md_coefficient_min_entry(chain) * chain.size <= md_coefficient(chain) + 1e-12


class TestInvariantMeasure:
    def test_p2_linear(self, p2):
        np.testing.assert_allclose(invariant_measure(p2), [2 / 3, 1 / 3], atol=1e-12)

    def test_p2_cesaro(self, p2):
        mu = invariant_measure(p2, InvariantMethod.CESARO, start=1)
        np.testing.assert_allclose(mu, [2 / 3, 1 / 3], atol=1e-8)

    def test_corpus(self, corpus):
        for chain in corpus:
            mu = invariant_measure(chain)
            assert invariance_residual(chain, mu) <= 1e-12
            cesaro = invariant_measure(chain, "cesaro")
            assert np.abs(mu - cesaro).sum() <= 1e-8

    def test_swap_warns(self, swap):
        with pytest.warns(NonUniqueWarning):
            mu = invariant_measure(swap)
        np.testing.assert_allclose(mu, [0.5, 0.5], atol=1e-12)

    def test_swap_cesaro_from_either_start(self, swap):
        for start in (0, 1):
            with pytest.warns(NonUniqueWarning):
                mu = invariant_measure(swap, InvariantMethod.CESARO, start=start)
            np.testing.assert_allclose(mu, [0.5, 0.5], atol=1e-12)

    def test_reducible_chain_warns(self):
        chain = validate_chain([[1.0, 0.0], [0.0, 1.0]])
        with pytest.warns(NonUniqueWarning):
            mu = invariant_measure(chain, InvariantMethod.CESARO, start=1)
        np.testing.assert_allclose(mu, [0.0, 1.0])


class TestConvergenceEnvelope:
    def test_p2_first_step(self, p2):
        envelope = convergence_envelope(p2, 5)
        assert envelope.worst_tv[0] == pytest.approx(4 / 3)
        assert envelope.worst_tv[1] == pytest.approx(14 / 15)
        assert envelope.bound[1] == pytest.approx(1.4)
        assert envelope.bound_holds
        assert envelope.n_max == 5

    def test_corpus_bound(self, corpus):
        for chain in corpus:
            envelope = convergence_envelope(chain, 100)
            assert np.all(envelope.worst_tv <= envelope.bound + 1e-12)

    def test_swap_is_vacuous(self, swap):
        with pytest.warns(VacuousBoundWarning):
            envelope = convergence_envelope(swap, 4)
        assert envelope.vacuous
        np.testing.assert_array_equal(envelope.bound, 2.0)
        np.testing.assert_allclose(envelope.worst_tv, 1.0)

    def test_p2_slope_matches_second_eigenvalue(self, p2):
        envelope = convergence_envelope(p2, 60)
        assert decay_slope(envelope.worst_tv, 20, 60) == pytest.approx(math.log(0.7), abs=1e-4)


class TestSetEnvelopes:
    @hyp_settings(max_examples=30, deadline=None)
    @given(chains(), st.data())
    def test_monotone(self, chain, data):
        subset = data.draw(st.sets(st.integers(0, chain.size - 1), min_size=1))
        lower, upper = set_envelopes(chain, sorted(subset), 20)
        assert np.all(np.diff(lower) >= -1e-12)
        assert np.all(np.diff(upper) <= 1e-12)
        assert np.all(lower <= upper + 1e-12)
        kappa = md_coefficient(chain)
        assert np.all(upper - lower <= (1 - kappa) ** np.arange(21) + 1e-12)


class TestSupSetDeviation:
    @hyp_settings(max_examples=50, deadline=None)
    @given(st.integers(2, 8).flatmap(lambda n: st.tuples(probability_vectors(n), probability_vectors(n))))
    def test_matches_l1_identity(self, pair):
        p, q = pair
        assert 2 * sup_set_deviation(p, q) == pytest.approx(total_variation(p, q), abs=1e-12)

    def test_size_limit(self):
        with pytest.raises(ValueError):
            sup_set_deviation(np.full(13, 1 / 13), np.full(13, 1 / 13))


class TestConditionalDecay:
    def test_oscillation_constant(self, p2):
        # ‖f‖_∞(1−κ) = 0.7 不是上界；osc(f)(1−κ) = 1.4 是
        profile = conditional_decay(p2, np.array([1.0, -1.0]), 3)
        assert profile.deviation[1] == pytest.approx(14 / 15)
        assert profile.deviation[1] > 0.7
        assert profile.envelope[1] == pytest.approx(1.4)

    def test_corpus(self, corpus):
        rng = np.random.default_rng(7)
        for chain in corpus:
            f = rng.normal(size=chain.size)
            profile = conditional_decay(chain, f, 30)
            assert np.all(profile.deviation <= profile.envelope + 1e-12)


class TestDecaySlope:
    def test_geometric(self):
        values = 0.5 ** np.arange(10)
        assert decay_slope(values, 2, 9) == pytest.approx(math.log(0.5))

    def test_rejects_non_positive(self):
        with pytest.raises(ValueError):
            decay_slope([1.0, 0.0, 0.5], 0, 2)
