"""Planted graph generation, smooth signal synthesis, masking."""

import numpy as np
import pytest

from prodgraph import (
    CommunityGraphSpec,
    MaskedData,
    MultiDomainData,
    apply_mask,
    connected_components,
    generate_smooth_signals,
    kron_sum,
    random_community_graph,
    smoothness,
)
from prodgraph.synth import block_sizes, planted_labels

from helpers import random_valid_laplacian


class TestSpecValidation:
    def test_probability_ordering(self):
        with pytest.raises(ValueError):
            CommunityGraphSpec(n=10, k=2, p_in=0.3, p_out=0.5)

    def test_weight_range(self):
        with pytest.raises(ValueError):
            CommunityGraphSpec(n=10, weight_lo=0.0)
        with pytest.raises(ValueError):
            CommunityGraphSpec(n=10, weight_lo=1.0, weight_hi=0.5)

    def test_component_count_range(self):
        with pytest.raises(ValueError):
            CommunityGraphSpec(n=3, k=4)

    def test_block_sizes_balanced(self):
        assert block_sizes(10, 3) == [4, 3, 3]
        assert block_sizes(9, 3) == [3, 3, 3]
        assert planted_labels(5, 2).tolist() == [0, 0, 0, 1, 1]


class TestCommunityGraph:
    def test_single_complete_community(self):
        L = random_community_graph(CommunityGraphSpec(n=5, k=1, p_in=1.0, seed=0))
        w = L.adjacency()
        assert (w[np.triu_indices(5, 1)] > 0).all()
        assert connected_components(L)[0] == 1

    def test_planted_components_exact(self):
        L = random_community_graph(
            CommunityGraphSpec(n=10, k=3, p_in=0.9, p_out=0.0, seed=1))
        count, labels = connected_components(L)
        assert count == 3
        np.testing.assert_array_equal(labels.labels, planted_labels(10, 3))

    def test_weights_in_declared_range(self):
        spec = CommunityGraphSpec(n=12, k=1, p_in=0.5, weight_lo=0.3, weight_hi=0.8, seed=2)
        w = random_community_graph(spec).adjacency()
        vals = w[w > 0]
        assert vals.min() >= 0.3 and vals.max() <= 0.8

    def test_deterministic_given_seed(self):
        spec = CommunityGraphSpec(n=9, k=2, p_in=0.8, p_out=0.1, seed=3)
        a = random_community_graph(spec)
        b = random_community_graph(spec)
        np.testing.assert_array_equal(a.dense, b.dense)

    def test_valid_laplacian_invariants(self):
        for seed in range(5):
            L = random_community_graph(CommunityGraphSpec(n=8, k=2, p_in=0.8, seed=seed))
            L.validate()

    def test_unconnectable_block_reports(self):
        with pytest.raises(RuntimeError, match="not connected"):
            random_community_graph(
                CommunityGraphSpec(n=4, k=1, p_in=0.0, p_out=0.0, seed=4))


class TestSmoothSignals:
    def factors(self):
        rng = np.random.default_rng(10)
        return random_valid_laplacian(3, rng), random_valid_laplacian(4, rng)

    def test_deterministic_given_seed(self):
        L_P, L_Q = self.factors()
        a = generate_smooth_signals(L_P, L_Q, T=7, sigma2=0.3, seed=5)
        b = generate_smooth_signals(L_P, L_Q, T=7, sigma2=0.3, seed=5)
        np.testing.assert_array_equal(a.snapshots, b.snapshots)

    def test_null_modes_carry_nothing(self):
        """Latent coordinates on zero eigenvalue sums are exactly zero."""
        L_P, L_Q = self.factors()
        data = generate_smooth_signals(L_P, L_Q, T=200, seed=6)
        lam_p, U_P = np.linalg.eigh(L_P.dense)
        lam_q, U_Q = np.linalg.eigh(L_Q.dense)
        latents = np.einsum("ip,tij,jq->tpq", U_P, data.snapshots, U_Q)
        # connected factors: the only zero sum is the (0, 0) pair
        assert np.abs(latents[:, 0, 0]).max() < 1e-10

    def test_latent_variances_match_prior(self):
        """Sample variance of latent (j, k) approaches 1/(lambda_j+lambda_k)."""
        L_P, L_Q = self.factors()
        data = generate_smooth_signals(L_P, L_Q, T=100_000, seed=7)
        lam_p, U_P = np.linalg.eigh(L_P.dense)
        lam_q, U_Q = np.linalg.eigh(L_Q.dense)
        latents = np.einsum("ip,tij,jq->tpq", U_P, data.snapshots, U_Q)
        sample_var = latents.var(axis=0)
        lam = lam_p[:, None] + lam_q[None, :]
        for j in range(3):
            for k in range(4):
                if lam[j, k] > 1e-8:
                    assert sample_var[j, k] == pytest.approx(1.0 / lam[j, k], rel=0.05)

    def test_smoother_than_white_noise_of_equal_power(self):
        """Monte-Carlo comparison of the quadratic variation."""
        L_P, L_Q = self.factors()
        data = generate_smooth_signals(L_P, L_Q, T=1000, seed=8)
        rng = np.random.default_rng(9)
        white = rng.normal(size=data.snapshots.shape)
        white *= np.sqrt(np.mean(data.snapshots ** 2) / np.mean(white ** 2))
        assert smoothness(data, L_P, L_Q) < smoothness(
            MultiDomainData(snapshots=white), L_P, L_Q)

    def test_noise_variance_adds(self):
        L_P, L_Q = self.factors()
        clean = generate_smooth_signals(L_P, L_Q, T=4000, sigma2=0.0, seed=10)
        noisy = generate_smooth_signals(L_P, L_Q, T=4000, sigma2=2.0, seed=10)
        extra = np.var(noisy.snapshots) - np.var(clean.snapshots)
        assert extra == pytest.approx(2.0, rel=0.1)

    def test_argument_validation(self):
        L_P, L_Q = self.factors()
        with pytest.raises(ValueError):
            generate_smooth_signals(L_P, L_Q, T=0)
        with pytest.raises(ValueError):
            generate_smooth_signals(L_P, L_Q, T=1, sigma2=-1.0)


class TestApplyMask:
    def data(self):
        rng = np.random.default_rng(11)
        return MultiDomainData(snapshots=rng.normal(size=(10, 4, 5)))

    def test_split_sizes(self):
        data = self.data()
        masked = apply_mask(data, 0.85, seed=0)
        count = data.snapshots.size
        assert masked.train_mask.sum() == int(np.floor(0.85 * count))
        assert masked.test_mask.sum() == count - masked.train_mask.sum()
        assert not masked.degenerate

    def test_explicit_test_fraction(self):
        data = self.data()
        masked = apply_mask(data, 0.7, seed=1, test_fraction=0.1)
        count = data.snapshots.size
        assert masked.test_mask.sum() == int(np.floor(0.1 * count))

    def test_masks_disjoint_for_many_seeds(self):
        data = self.data()
        for seed in range(10):
            masked = apply_mask(data, 0.6, seed=seed)
            assert not np.any(masked.train_mask & masked.test_mask)

    def test_observed_zero_off_train(self):
        data = self.data()
        masked = apply_mask(data, 0.5, seed=2)
        assert (masked.observed.snapshots[~masked.train_mask] == 0).all()
        np.testing.assert_array_equal(
            masked.observed.snapshots[masked.train_mask],
            data.snapshots[masked.train_mask])

    def test_empty_test_flagged_degenerate(self):
        masked = apply_mask(self.data(), 0.9, seed=3, test_fraction=0.0)
        assert masked.degenerate

    def test_fraction_bounds(self):
        with pytest.raises(ValueError):
            apply_mask(self.data(), 1.0, seed=0)
        with pytest.raises(ValueError):
            apply_mask(self.data(), 0.5, seed=0, test_fraction=0.6)

    def test_masked_data_invariants(self):
        data = self.data()
        train = np.zeros(data.snapshots.shape, dtype=bool)
        train[0, 0, 0] = True
        test = np.zeros_like(train)
        test[0, 0, 0] = True
        with pytest.raises(ValueError, match="overlap"):
            MaskedData(observed=MultiDomainData(
                snapshots=np.where(train, data.snapshots, 0.0)),
                train_mask=train, test_mask=test)
        with pytest.raises(ValueError, match="nonzero outside"):
            MaskedData(observed=data, train_mask=train, test_mask=~train)
