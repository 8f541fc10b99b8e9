"""Product graph learning: QP assembly, separability, rank constraints."""

import numpy as np
import pytest
import scipy.sparse as sp

from prodgraph import (
    CovariancePair,
    DiagQpProblem,
    LearnConfig,
    MultiDomainData,
    RankLearnConfig,
    SolverConfig,
    assemble_pgl_factor,
    connected_components,
    generate_smooth_signals,
    learn_product_graph,
    learn_rank_constrained,
    learn_single_graph,
    random_community_graph,
    sample_covariances,
    solve_diag_qp,
)
from prodgraph.synth import CommunityGraphSpec

from helpers import random_valid_laplacian

SOLVER = SolverConfig(tol=1e-8, max_iter=2_000_000)


class TestSampleCovariances:
    def test_identity_snapshot(self):
        data = MultiDomainData(snapshots=np.eye(3)[None, :, :])
        cov = sample_covariances(data)
        np.testing.assert_array_equal(cov.S_P, np.eye(3))
        np.testing.assert_array_equal(cov.S_Q, np.eye(3))

    def test_quadratic_scaling(self):
        rng = np.random.default_rng(0)
        snaps = rng.normal(size=(4, 3, 5))
        c1 = sample_covariances(MultiDomainData(snapshots=snaps))
        c2 = sample_covariances(MultiDomainData(snapshots=3.0 * snaps))
        np.testing.assert_allclose(c2.S_P, 9.0 * c1.S_P, rtol=1e-12)
        np.testing.assert_allclose(c2.S_Q, 9.0 * c1.S_Q, rtol=1e-12)

    def test_corner_snapshot(self):
        data = MultiDomainData(snapshots=np.array([[[1.0, 0.0], [0.0, 0.0]]]))
        cov = sample_covariances(data)
        np.testing.assert_array_equal(cov.S_P, np.diag([1.0, 0.0]))
        np.testing.assert_array_equal(cov.S_Q, np.diag([1.0, 0.0]))

    def test_sums_not_means(self):
        rng = np.random.default_rng(1)
        snaps = rng.normal(size=(6, 3, 4))
        cov = sample_covariances(MultiDomainData(snapshots=snaps))
        expected = sum(x @ x.T for x in snaps)
        np.testing.assert_allclose(cov.S_P, expected, rtol=1e-12)

    def test_asymmetric_rejected(self):
        with pytest.raises(ValueError, match="symmetric"):
            CovariancePair(S_P=np.array([[1.0, 2.0], [0.0, 1.0]]), S_Q=np.eye(2))


class TestAssembly:
    def test_two_node_example(self):
        """Hand expansion of D^T vec(S) under the sign convention."""
        prob = assemble_pgl_factor(np.array([[2.0, 1.0], [1.0, 2.0]]), beta=0.2)
        np.testing.assert_allclose(prob.p, [0.4, 0.8, 0.4], rtol=1e-12)
        np.testing.assert_allclose(prob.q, [2.0, -2.0, 2.0], rtol=1e-12)
        np.testing.assert_array_equal(prob.d, [2.0, 0.0, 0.0])

    def test_trace_row_hits_diagonal_coordinates(self):
        prob = assemble_pgl_factor(np.eye(2), beta=1.0)
        trace_row = prob.C.toarray()[0]
        np.testing.assert_array_equal(trace_row, [1.0, 0.0, 1.0])

    def test_objective_matches_matrix_form(self):
        rng = np.random.default_rng(2)
        n, beta = 5, 0.7
        x = rng.normal(size=(n, 8))
        S = x @ x.T
        prob = assemble_pgl_factor(S, beta)
        L = random_valid_laplacian(n, rng)
        via_qp = prob.objective(L.vech)
        direct = np.sum(L.dense * S) + beta * np.sum(L.dense ** 2)
        assert via_qp == pytest.approx(direct, rel=1e-10)


class TestLearnProductGraph:
    def test_separability(self):
        """Stacked block QP and per-factor QPs give the same minimizer."""
        rng = np.random.default_rng(3)
        data = MultiDomainData(snapshots=rng.normal(size=(20, 4, 5)))
        cov = sample_covariances(data)
        prob_p = assemble_pgl_factor(cov.S_P / 20, 0.4)
        prob_q = assemble_pgl_factor(cov.S_Q / 20, 0.6)
        stacked = DiagQpProblem(
            p=np.concatenate([prob_p.p, prob_q.p]),
            q=np.concatenate([prob_p.q, prob_q.q]),
            C=sp.block_diag([prob_p.C, prob_q.C], format="csr"),
            d=np.concatenate([prob_p.d, prob_q.d]),
        )
        tight = SolverConfig(tol=1e-11, max_iter=3_000_000)
        joint = solve_diag_qp(stacked, tight)
        sep_p = solve_diag_qp(prob_p, tight)
        sep_q = solve_diag_qp(prob_q, tight)
        assert joint.converged
        np.testing.assert_allclose(joint.l[: prob_p.m], sep_p.l, atol=1e-8)
        np.testing.assert_allclose(joint.l[prob_p.m:], sep_q.l, atol=1e-8)

    def test_constant_data_gives_uniform_graphs(self):
        """Zero smoothness term leaves the Frobenius penalty, whose
        constrained minimum is the uniform complete graph."""
        data = MultiDomainData(snapshots=np.full((3, 4, 5), 2.5))
        res = learn_product_graph(data, LearnConfig(solver=SOLVER))
        assert res.converged
        for L, n in ((res.L_P, 4), (res.L_Q, 5)):
            off = L.adjacency()[np.triu_indices(n, 1)]
            np.testing.assert_allclose(off, 1.0 / (n - 1), atol=1e-6)
            assert L.trace() == pytest.approx(n, abs=1e-4)

    def test_trace_constraint_met(self):
        rng = np.random.default_rng(4)
        data = MultiDomainData(snapshots=rng.normal(size=(50, 4, 6)))
        res = learn_product_graph(data, LearnConfig(solver=SOLVER))
        assert res.L_P.trace() == pytest.approx(4.0, abs=1e-4)
        assert res.L_Q.trace() == pytest.approx(6.0, abs=1e-4)

    def test_trace_equals_twice_weight_mass(self):
        """tr(diag(W 1) - W) = 2 ||vec(W)||_1 for the reconstruction."""
        rng = np.random.default_rng(5)
        data = MultiDomainData(snapshots=rng.normal(size=(50, 4, 6)))
        res = learn_product_graph(data, LearnConfig(solver=SOLVER))
        for L in (res.L_P, res.L_Q):
            w = L.adjacency()
            rebuilt_trace = w.sum(axis=1).sum()
            ell1 = np.abs(w).sum()
            assert rebuilt_trace == pytest.approx(2.0 * (ell1 / 2.0), rel=1e-12)
            assert rebuilt_trace == pytest.approx(ell1, rel=1e-12)

    def test_recovers_planted_structure(self):
        Lp = random_community_graph(CommunityGraphSpec(n=6, k=1, p_in=0.6, seed=10))
        Lq = random_community_graph(CommunityGraphSpec(n=7, k=1, p_in=0.6, seed=11))
        data = generate_smooth_signals(Lp, Lq, T=3000, seed=12)
        res = learn_product_graph(data, LearnConfig(beta1=0.2, beta2=0.3, solver=SOLVER))
        from prodgraph import edges_of, f_score

        assert f_score(edges_of(Lp), edges_of(res.L_P)) >= 0.7
        assert f_score(edges_of(Lq), edges_of(res.L_Q)) >= 0.7

    def test_too_few_nodes(self):
        with pytest.raises(ValueError):
            learn_product_graph(MultiDomainData(snapshots=np.zeros((2, 1, 3))))


class TestSingleGraph:
    def test_identity_covariance_gives_uniform_graph(self):
        L, sol = learn_single_graph(np.eye(4), beta=1.5, solver=SOLVER)
        assert sol.converged
        off = L.adjacency()[np.triu_indices(4, 1)]
        np.testing.assert_allclose(off, 1.0 / 3.0, atol=1e-6)

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(6)
        x = rng.normal(size=(5, 40))
        S = x @ x.T / 40
        perm = np.array([3, 0, 4, 1, 2])
        L1, _ = learn_single_graph(S, beta=1.5, solver=SOLVER)
        L2, _ = learn_single_graph(S[np.ix_(perm, perm)], beta=1.5, solver=SOLVER)
        np.testing.assert_allclose(L2.dense, L1.dense[np.ix_(perm, perm)], atol=1e-6)


class TestRankConstrained:
    def planted(self, seed=0):
        Lp = random_community_graph(
            CommunityGraphSpec(n=8, k=2, p_in=1.0, p_out=0.0, weight_lo=0.5, seed=20 + seed))
        Lq = random_community_graph(
            CommunityGraphSpec(n=9, k=3, p_in=1.0, p_out=0.0, weight_lo=0.5, seed=30 + seed))
        data = generate_smooth_signals(Lp, Lq, T=800, seed=40 + seed)
        return Lp, Lq, data

    def test_zero_gamma_first_pass_matches_plain_learner(self):
        _, _, data = self.planted()
        cfg = RankLearnConfig(k_p=2, k_q=3, beta1=0.3, beta2=0.3,
                              gamma1=0.0, gamma2=0.0, solver=SOLVER, max_outer=1)
        res = learn_rank_constrained(data, cfg)
        plain = learn_product_graph(data, LearnConfig(beta1=0.3, beta2=0.3, solver=SOLVER))
        np.testing.assert_allclose(res.L_P.dense, plain.L_P.dense, atol=1e-8)
        np.testing.assert_allclose(res.L_Q.dense, plain.L_Q.dense, atol=1e-8)

    def test_recovers_component_counts(self):
        _, _, data = self.planted()
        cfg = RankLearnConfig(k_p=2, k_q=3, beta1=0.25, beta2=0.25,
                              gamma1=1.0, gamma2=1.0, solver=SOLVER,
                              max_outer=50, outer_tol=1e-6)
        res = learn_rank_constrained(data, cfg)
        assert connected_components(res.L_P)[0] == 2
        assert connected_components(res.L_Q)[0] == 3

    def test_rank_certificate(self):
        """k-th smallest eigenvalue vanishes, (k+1)-th does not."""
        _, _, data = self.planted(seed=1)
        cfg = RankLearnConfig(k_p=2, k_q=3, beta1=0.25, beta2=0.25,
                              gamma1=1.0, gamma2=1.0, solver=SOLVER,
                              max_outer=50, outer_tol=1e-6)
        res = learn_rank_constrained(data, cfg)
        for L, k in ((res.L_P, 2), (res.L_Q, 3)):
            vals = np.linalg.eigvalsh(L.dense)
            thresh = 1e-6 * vals[-1]
            assert vals[k - 1] <= thresh
            assert vals[k] > thresh

    def test_objective_never_increases(self):
        _, _, data = self.planted(seed=2)
        cfg = RankLearnConfig(k_p=2, k_q=3, beta1=0.25, beta2=0.25,
                              gamma1=0.5, gamma2=0.7, solver=SOLVER,
                              max_outer=30, outer_tol=1e-10)
        res = learn_rank_constrained(data, cfg)
        diffs = np.diff(res.objective_trace)
        assert (diffs <= 1e-8).all()

    def test_embeddings_are_orthonormal(self):
        _, _, data = self.planted(seed=3)
        cfg = RankLearnConfig(k_p=2, k_q=3, solver=SOLVER, max_outer=5)
        res = learn_rank_constrained(data, cfg)
        v = res.embeddings.V_P
        np.testing.assert_allclose(v.T @ v, np.eye(2), atol=1e-10)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            RankLearnConfig(k_p=1, k_q=1, beta1=0.0)
        with pytest.raises(ValueError):
            RankLearnConfig(k_p=1, k_q=1, gamma1=-0.1)
