import numpy as np
import pytest

from bmadex.modelspace import enumerate_subsets, enumerate_two_factor_patterns, involvement
from bmadex.posterior import (cumulative_pe_fdr, inclusion_probability,
                              joint_inclusion_probability, pe_fdr,
                              posterior_model_probs, rank_genes)


class TestPosteriorModelProbs:
    def test_two_models_uniform_prior(self):
        probs = posterior_model_probs(np.log([1.0, 3.0]), np.array([0.5, 0.5]))
        np.testing.assert_allclose(probs, [0.25, 0.75], atol=1e-14)

    def test_degenerate_prior_dominates(self):
        prior = np.array([1.0 - 1e-12, 1e-12])
        probs = posterior_model_probs(np.array([0.0, 5.0]), prior)
        assert probs[0] > 0.999
        assert probs.sum() == pytest.approx(1.0, abs=1e-12)

    def test_matches_direct_arithmetic_oracle(self, rng):
        for _ in range(20):
            log_bf = rng.normal(0.0, 1.5, size=8)
            prior = rng.dirichlet(np.ones(8))
            probs = posterior_model_probs(log_bf, prior)
            direct = prior * np.exp(log_bf)
            direct = direct / direct.sum()
            np.testing.assert_allclose(probs, direct, atol=1e-12)

    def test_neg_inf_model_gets_zero(self):
        log_bf = np.array([0.0, -np.inf, 1.0])
        probs = posterior_model_probs(log_bf, np.full(3, 1 / 3))
        assert probs[1] == 0.0
        assert probs.sum() == pytest.approx(1.0, abs=1e-12)

    def test_all_neg_inf_raises(self):
        with pytest.raises(ValueError):
            posterior_model_probs(np.array([-np.inf, -np.inf]), np.array([0.5, 0.5]))

    def test_extreme_magnitudes_stay_normalized(self):
        log_bf = np.array([0.0, 700.0, 1400.0, -500.0])
        probs = posterior_model_probs(log_bf, np.full(4, 0.25))
        assert probs.sum() == pytest.approx(1.0, abs=1e-12)
        assert probs[2] > 0.999

    def test_matrix_form(self, rng):
        log_bf = rng.normal(size=(5, 3))
        prior = np.array([0.5, 0.25, 0.25])
        probs = posterior_model_probs(log_bf, prior)
        assert probs.shape == (5, 3)
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)


class TestInclusion:
    def test_two_model_space(self):
        space = enumerate_subsets(1)
        inv = involvement(space)
        p = inclusion_probability(np.array([0.3, 0.7]), inv, "x1")
        assert p[0] == pytest.approx(0.7)

    def test_uninvolved_covariate_is_zero(self):
        space = enumerate_two_factor_patterns(("s", "g"))
        inv = involvement(space)
        posteriors = np.zeros(16)
        posteriors[0] = 1.0  # all mass on the null pattern
        assert inclusion_probability(posteriors, inv, "s")[0] == 0.0

    def test_brute_force_k3(self, rng):
        space = enumerate_subsets(3)
        inv = involvement(space)
        posteriors = rng.dirichlet(np.ones(8))
        got = inclusion_probability(posteriors, inv, "x1")[0]
        brute = sum(p for p, m in zip(posteriors, space.models) if m.gamma[0])
        assert got == pytest.approx(brute, abs=1e-14)
        assert sum(1 for m in space.models if m.gamma[0]) == 4

    def test_unknown_covariate(self):
        inv = involvement(enumerate_subsets(2))
        with pytest.raises(KeyError):
            inclusion_probability(np.array([1.0, 0, 0, 0]), inv, "zz")


class TestJointInclusion:
    def test_singleton_equals_marginal(self, rng):
        space = enumerate_subsets(3)
        inv = involvement(space)
        posteriors = rng.dirichlet(np.ones(8))
        for mode in ("all", "any"):
            joint = joint_inclusion_probability(posteriors, inv, ["x2"], mode)
            single = inclusion_probability(posteriors, inv, "x2")
            np.testing.assert_allclose(joint, single, atol=1e-15)

    def test_all_with_disjoint_support(self):
        space = enumerate_subsets(2)
        inv = involvement(space)
        # mass only on {x1} and {x2}, never together
        posteriors = np.zeros(4)
        posteriors[1] = 0.6
        posteriors[2] = 0.4
        joint = joint_inclusion_probability(posteriors, inv, ["x1", "x2"], "all")
        assert joint[0] == 0.0
        any_ = joint_inclusion_probability(posteriors, inv, ["x1", "x2"], "any")
        assert any_[0] == pytest.approx(1.0)

    def test_pattern_space_structure(self, rng):
        """Any-mode inclusion over the factor and the interaction dominates
        both the main-only and the interaction-only masses."""
        space = enumerate_two_factor_patterns(("s", "g"))
        inv = involvement(space)
        posteriors = rng.dirichlet(np.ones(16), size=50)
        p_int = joint_inclusion_probability(posteriors, inv, ["s:g"], "all")
        p_any = joint_inclusion_probability(posteriors, inv, ["s", "s:g"], "any")
        main_only = inv.column("s") & ~inv.interaction
        p_main = posteriors[:, main_only].sum(axis=1)
        assert np.all(p_any >= np.maximum(p_main, p_int) - 1e-12)

    def test_empty_set_rejected(self):
        inv = involvement(enumerate_subsets(2))
        with pytest.raises(ValueError):
            joint_inclusion_probability(np.ones(4) / 4, inv, [], "all")

    def test_bad_mode_rejected(self):
        inv = involvement(enumerate_subsets(2))
        with pytest.raises(ValueError):
            joint_inclusion_probability(np.ones(4) / 4, inv, ["x1"], "both")


class TestPeFdr:
    def test_hand_example(self):
        assert pe_fdr(np.array([0.9, 0.8, 0.6]), 0.8) == pytest.approx(0.15)

    def test_all_ones(self):
        assert pe_fdr(np.ones(5), 0.5) == 0.0

    def test_zero_threshold_takes_all(self):
        p = np.array([0.2, 0.5, 0.9])
        assert pe_fdr(p, 0.0) == pytest.approx(np.mean(1.0 - p))

    def test_empty_selection_raises(self):
        with pytest.raises(ValueError):
            pe_fdr(np.array([0.1, 0.2]), 0.9)

    def test_literal_low_rule(self):
        p = np.array([0.9, 0.8, 0.6])
        assert pe_fdr(p, 0.7, rule="literal-low") == pytest.approx(0.4)

    def test_out_of_range_scores_raise(self):
        with pytest.raises(ValueError):
            pe_fdr(np.array([0.5, 1.2]), 0.5)


class TestRankGenes:
    def test_tie_break_by_gene_id(self):
        table = rank_genes(["b", "a", "c"], np.array([0.9, 0.9, 0.1]))
        ids = [e.gene_id for e in table.entries]
        assert ids == ["a", "b", "c"]
        assert [e.rank for e in table.entries] == [1, 2, 3]

    def test_cumulative_pe_fdr(self):
        table = rank_genes(["a", "b", "c"], np.array([0.9, 0.8, 0.6]))
        pe = [e.pe_fdr_at_gene for e in table.entries]
        np.testing.assert_allclose(pe, [0.1, 0.15, 0.7 / 3], atol=1e-12)

    def test_target_cut(self):
        table = rank_genes(["a", "b", "c"], np.array([0.99, 0.97, 0.5]),
                           target_pe_fdr=0.05)
        assert table.target_cut == 2
        pe = [e.pe_fdr_at_gene for e in table.entries]
        np.testing.assert_allclose(pe, [0.01, 0.02, 0.18], atol=1e-12)

    def test_pe_fdr_non_decreasing(self, rng):
        scores = rng.random(200)
        table = rank_genes([f"g{j}" for j in range(200)], scores)
        pe = np.array([e.pe_fdr_at_gene for e in table.entries])
        assert np.all(np.diff(pe) >= -1e-15)

    def test_cumulative_matches_definition(self, rng):
        s = np.sort(rng.random(50))[::-1]
        pe = cumulative_pe_fdr(s)
        for k in (1, 10, 50):
            assert pe[k - 1] == pytest.approx(np.mean(1.0 - s[:k]))
