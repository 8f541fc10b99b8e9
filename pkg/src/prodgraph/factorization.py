"""Nearest Kronecker sum factorization of a symmetric matrix.

Approximates a given N x N symmetric matrix (typically a Laplacian, or a
noisy estimate of one) by the Kronecker sum of two valid factor Laplacians
of sizes P and Q with PQ = N, minimizing the Frobenius distance under
fixed factor traces.  Rearranging the matrix with the tilde transform
turns the cross term of the squared distance into a vector linear in each
factor's parameters, so the problem is again one diagonal QP per factor.
A rank-constrained variant alternates with embedding updates to force a
prescribed component count, and a projection operator returns the nearest
valid Laplacian to an arbitrary symmetric matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .laplacian import (
    GraphLaplacian,
    ValidationTol,
    constraint_matrix,
    duplication_matrix,
    from_vech,
)
from .learning import (
    AlternationResult,
    LearnResult,
    _solution_tol,
    _solve_factor,
    alternate_rank_constrained,
)
from .qp import DiagQpProblem, QpSolution, SolverConfig, solve_diag_qp


@dataclass(frozen=True, eq=False)
class TildeMatrix:
    """Block rearrangement of an N x N matrix into a Q^2 x P^2 matrix.

    Row (n*Q + m) holds vec of the P x P block at block position (m, n),
    so blocks are visited column-major.  Reassembling the rows reproduces
    the source exactly.
    """

    P: int
    Q: int
    mat: np.ndarray

    def reconstruct(self) -> np.ndarray:
        """Invert the rearrangement back to the N x N matrix."""
        blocks = self.mat.reshape(self.Q, self.Q, self.P, self.P)  # [n, m, j, i]
        return blocks.transpose(1, 3, 0, 2).reshape(self.P * self.Q, self.P * self.Q)


def tilde_transform(L_N: np.ndarray, P: int, Q: int) -> TildeMatrix:
    """Stack vec of each P x P block of L_N as the rows of a Q^2 x P^2 matrix."""
    L_N = np.asarray(L_N, dtype=float)
    N = P * Q
    if L_N.shape != (N, N):
        raise ValueError(f"matrix shape {L_N.shape} does not match P*Q = {N}")
    blocks = L_N.reshape(Q, P, Q, P)  # [m, i, n, j]
    mat = blocks.transpose(2, 0, 3, 1).reshape(Q * Q, P * P)
    return TildeMatrix(P=P, Q=Q, mat=mat)


def assemble_kronfact(L_N: np.ndarray, P: int, Q: int) -> tuple[DiagQpProblem, DiagQpProblem]:
    """Per-factor QPs whose joint optimum is the nearest Kronecker sum.

    The quadratic diagonals are 2Q and 2P times the duplication weights
    (the counterpart of the sparsity penalties, with the roles played by
    the factor sizes), and the linear terms route the cross term
    -2 tr(L_N (L_P + L_Q)) through the tilde transform.  L_N need not be a
    valid Laplacian; noisy symmetric estimates are accepted.
    """
    tilde = tilde_transform(L_N, P, Q).mat
    dup_p = duplication_matrix(P)
    dup_q = duplication_matrix(Q)
    p_p = 2.0 * Q * dup_p.dtd_diagonal()
    p_q = 2.0 * P * dup_q.dtd_diagonal()
    q_p = -2.0 * dup_p.rmatvec(tilde.T @ np.eye(Q).reshape(-1, order="F"))
    q_q = -2.0 * dup_q.rmatvec(tilde @ np.eye(P).reshape(-1, order="F"))
    C_p, d_p = constraint_matrix(P, trace_target=float(P))
    C_q, d_q = constraint_matrix(Q, trace_target=float(Q))
    return (
        DiagQpProblem(p=p_p, q=q_p, C=C_p, d=d_p),
        DiagQpProblem(p=p_q, q=q_q, C=C_q, d=d_q),
    )


def factorize(L_N: np.ndarray, P: int, Q: int,
              solver: SolverConfig = SolverConfig()) -> LearnResult:
    """Nearest Kronecker sum factors of a symmetric matrix.

    Returned factors satisfy tr(L_P) = P, tr(L_Q) = Q up to the solver
    tolerance; an exact Kronecker sum of trace-normalized valid factors is
    recovered exactly.
    """
    prob_p, prob_q = assemble_kronfact(L_N, P, Q)
    L_P, sol_p = _solve_factor(prob_p, P, solver)
    L_Q, sol_q = _solve_factor(prob_q, Q, solver)
    return LearnResult(L_P=L_P, L_Q=L_Q, sol_P=sol_p, sol_Q=sol_q)


def factorize_rank_constrained(
    L_N: np.ndarray,
    P: int,
    Q: int,
    k_p: int,
    k_q: int,
    gamma1: float,
    gamma2: float,
    solver: SolverConfig = SolverConfig(),
    max_outer: int = 100,
    outer_tol: float = 1e-6,
) -> AlternationResult:
    """Nearest Kronecker sum with prescribed factor component counts.

    Alternates the factorization QPs, augmented with the spectral penalty
    of the current embeddings, with eigenvector updates; each outer
    iteration costs about (k_p + 1) P^2 + (k_q + 1) Q^2 work beyond the QP
    solves.
    """
    base_p, base_q = assemble_kronfact(L_N, P, Q)
    L_N = np.asarray(L_N, dtype=float)

    def objective(L_P: GraphLaplacian, L_Q: GraphLaplacian,
                  V_P: np.ndarray, V_Q: np.ndarray) -> float:
        ks = np.kron(np.eye(Q), L_P.dense) + np.kron(L_Q.dense, np.eye(P))
        g = float(np.sum((L_N - ks) ** 2))
        g += gamma1 * float(np.sum(V_P * (L_P.dense @ V_P)))
        g += gamma2 * float(np.sum(V_Q * (L_Q.dense @ V_Q)))
        return g

    return alternate_rank_constrained(
        base_p, base_q, P, Q, k_p, k_q, gamma1, gamma2,
        solver, max_outer, outer_tol, objective,
    )


def project_to_laplacian(Pmat: np.ndarray,
                         solver: SolverConfig = SolverConfig()) -> tuple[GraphLaplacian, QpSolution]:
    """Nearest valid Laplacian to a symmetric matrix in Frobenius norm.

    No trace constraint is imposed, so the output scale follows the input;
    the equality constraints reduce to the zero row sums.  A matrix that
    is already a valid Laplacian is returned unchanged.
    """
    Pmat = np.asarray(Pmat, dtype=float)
    n = Pmat.shape[0]
    if Pmat.shape != (n, n):
        raise ValueError(f"input must be square, got {Pmat.shape}")
    if np.abs(Pmat - Pmat.T).max(initial=0.0) > 1e-10:
        raise ValueError("input matrix is not symmetric")
    dup = duplication_matrix(n)
    p = 2.0 * dup.dtd_diagonal()
    q = -2.0 * dup.rmatvec(Pmat.reshape(-1, order="F"))
    C, d = constraint_matrix(n, trace_target=None)
    sol = solve_diag_qp(DiagQpProblem(p=p, q=q, C=C, d=d), solver)
    L = from_vech(sol.l, n, validate=sol.converged, tol=_solution_tol(solver))
    return L, sol
