"""Joint missing-data imputation and product graph learning.

Minimizes, over the imputed snapshots and the two factor Laplacians,

    sum_i ||A_i(X_i - Y_i)||_F^2 + a3 ||X_i||_F^2
          + a1 tr(X_i^T L_P X_i) + a2 tr(X_i L_Q X_i^T)
    + b1 ||L_P||_F^2 + b2 ||L_Q||_F^2

with the factors constrained to valid Laplacians of fixed trace.  The
signal block has a closed form (one SPD solve per snapshot) and the graph
block is the product graph learner on covariances scaled by a1, a2, so
each alternation step is the exact minimizer of its block and the
objective never increases.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .clustering import connected_components, product_labels
from .laplacian import GraphLaplacian, MultiDomainData
from .learning import (
    LearnConfig,
    LearnResult,
    _solve_factor,
    assemble_pgl_factor,
    learn_product_graph,
    sample_covariances,
)
from .metrics import imputation_error, iterate_error
from .qp import SolverConfig
from .synth import MaskedData


@dataclass(frozen=True)
class ImputeConfig:
    """Weights of the joint imputation objective.

    alpha1/alpha2 weight the smoothness over the two factors, alpha3 is
    the Tikhonov term that keeps the per-snapshot system invertible even
    when the mask misses whole components.  Graph updates reuse the
    product graph learner; its beta penalties are dataset dependent.
    """

    alpha1: float = 5.1e-4
    alpha2: float = 1e-4
    alpha3: float = 1e-6
    pgl: LearnConfig = field(default_factory=LearnConfig)
    outer_tol: float = 1e-3
    max_outer: int = 50

    def __post_init__(self):
        if self.alpha1 < 0 or self.alpha2 < 0 or self.alpha3 < 0:
            raise ValueError("smoothness and Tikhonov weights must be nonnegative")


def _regularizer(L_P: GraphLaplacian, L_Q: GraphLaplacian, cfg: ImputeConfig) -> np.ndarray:
    P, Q = L_P.n, L_Q.n
    return (
        np.kron(np.eye(Q), cfg.alpha1 * L_P.dense)
        + np.kron(cfg.alpha2 * L_Q.dense, np.eye(P))
        + cfg.alpha3 * np.eye(P * Q)
    )


def _diagnose_singular(mask: np.ndarray, L_P: GraphLaplacian, L_Q: GraphLaplacian,
                       cfg: ImputeConfig) -> str | None:
    """Name a product-graph component with no observed entry, if any."""
    P, Q = L_P.n, L_Q.n
    comp_p = (
        connected_components(L_P)[1]
        if cfg.alpha1 > 0
        else _singleton_labels(P)
    )
    comp_q = (
        connected_components(L_Q)[1]
        if cfg.alpha2 > 0
        else _singleton_labels(Q)
    )
    prod = product_labels(comp_p, comp_q, P, Q)
    observed = mask.reshape(-1, order="F")
    for c in range(prod.k):
        members = prod.labels == c
        if members.any() and not observed[members].any():
            return f"component {c} ({int(members.sum())} nodes) has no observed entry"
    return None


def _singleton_labels(n: int):
    from .clustering import ClusterLabels

    return ClusterLabels(labels=np.arange(n), k=n)


def impute_step(y: np.ndarray, train_mask: np.ndarray, L_P: GraphLaplacian,
                L_Q: GraphLaplacian, cfg: ImputeConfig) -> np.ndarray:
    """Closed-form signal update for one masked P x Q snapshot.

    Solves [A + (a1 L_P (+) a2 L_Q) + a3 I] x = A y as a single SPD system
    of size N; A is the diagonal 0/1 selection of the train mask.
    """
    P, Q = L_P.n, L_Q.n
    if y.shape != (P, Q) or train_mask.shape != (P, Q):
        raise ValueError(f"snapshot shape {y.shape} does not match factors ({P}, {Q})")
    if cfg.alpha3 == 0.0:
        # Without the Tikhonov term the system is singular exactly when a
        # component of the regularizer graph carries no observation.
        reason = _diagnose_singular(train_mask, L_P, L_Q, cfg)
        if reason is not None:
            raise np.linalg.LinAlgError(f"imputation system is singular: {reason}")
    system = _regularizer(L_P, L_Q, cfg)
    a = train_mask.reshape(-1, order="F").astype(float)
    system[np.diag_indices_from(system)] += a
    rhs = a * y.reshape(-1, order="F")
    try:
        cho = scipy.linalg.cho_factor(system, lower=True)
    except np.linalg.LinAlgError as exc:
        reason = _diagnose_singular(train_mask, L_P, L_Q, cfg)
        raise np.linalg.LinAlgError(
            f"imputation system is not positive definite: {reason or 'numerical breakdown'}"
        ) from exc
    x = scipy.linalg.cho_solve(cho, rhs)
    return x.reshape(P, Q, order="F")


def _impute_all(masked: MaskedData, L_P: GraphLaplacian, L_Q: GraphLaplacian,
                cfg: ImputeConfig) -> MultiDomainData:
    snaps = [
        impute_step(masked.observed.snapshots[i], masked.train_mask[i], L_P, L_Q, cfg)
        for i in range(masked.observed.T)
    ]
    return MultiDomainData(snapshots=np.stack(snaps))


def _graph_update(data: MultiDomainData, cfg: ImputeConfig) -> LearnResult:
    # Scaling the covariance sums by alpha1/alpha2 makes this QP the exact
    # graph-block minimizer of the joint objective.  With both alphas zero
    # the block is degenerate (only the penalty remains), so fall back to
    # the plain time-averaged learner, which is the useful limit.
    if cfg.alpha1 == 0.0 and cfg.alpha2 == 0.0:
        return learn_product_graph(data, cfg.pgl)
    cov = sample_covariances(data)
    prob_p = assemble_pgl_factor(cfg.alpha1 * cov.S_P, cfg.pgl.beta1)
    prob_q = assemble_pgl_factor(cfg.alpha2 * cov.S_Q, cfg.pgl.beta2)
    L_P, sol_p = _solve_factor(prob_p, data.P, cfg.pgl.solver)
    L_Q, sol_q = _solve_factor(prob_q, data.Q, cfg.pgl.solver)
    return LearnResult(L_P=L_P, L_Q=L_Q, sol_P=sol_p, sol_Q=sol_q)


def joint_objective(masked: MaskedData, imputed: MultiDomainData,
                    L_P: GraphLaplacian, L_Q: GraphLaplacian,
                    cfg: ImputeConfig) -> float:
    x = imputed.snapshots
    resid = np.where(masked.train_mask, x - masked.observed.snapshots, 0.0)
    value = float(np.sum(resid * resid)) + cfg.alpha3 * float(np.sum(x * x))
    value += cfg.alpha1 * float(np.einsum("tpq,pr,trq->", x, L_P.dense, x))
    value += cfg.alpha2 * float(np.einsum("tpq,qr,tpr->", x, L_Q.dense, x))
    value += cfg.pgl.beta1 * float(np.sum(L_P.dense ** 2))
    value += cfg.pgl.beta2 * float(np.sum(L_Q.dense ** 2))
    return value


@dataclass(frozen=True, eq=False)
class ImputeResult:
    """Imputed data, learned factors and per-iteration traces."""

    imputed: MultiDomainData
    L_P: GraphLaplacian
    L_Q: GraphLaplacian
    error_trace: np.ndarray
    objective_trace: np.ndarray
    outer_iterations: int
    converged: bool

    def train_error(self, masked: MaskedData) -> float:
        return imputation_error(masked.observed, self.imputed, masked.train_mask)


def joint_impute_learn(masked: MaskedData, cfg: ImputeConfig = ImputeConfig()) -> ImputeResult:
    """Alternate closed-form imputation with product graph learning.

    Graphs are initialized from the zero-filled observations, then each
    outer iteration imputes all snapshots given the graphs and re-learns
    the graphs from the imputed data, until the relative squared change
    of the factor pair drops below ``outer_tol``.
    """
    if not masked.train_mask.reshape(masked.observed.T, -1).any(axis=1).all():
        raise ValueError("every snapshot needs at least one observed entry")
    graphs = _graph_update(masked.observed, cfg)
    L_P, L_Q = graphs.L_P, graphs.L_Q
    errors: list[float] = []
    objectives: list[float] = []
    imputed = masked.observed
    converged = False
    for _ in range(cfg.max_outer):
        imputed = _impute_all(masked, L_P, L_Q, cfg)
        graphs = _graph_update(imputed, cfg)
        err = iterate_error(L_P, L_Q, graphs.L_P, graphs.L_Q)
        L_P, L_Q = graphs.L_P, graphs.L_Q
        errors.append(err)
        objectives.append(joint_objective(masked, imputed, L_P, L_Q, cfg))
        if err < cfg.outer_tol:
            converged = True
            break
    return ImputeResult(
        imputed=imputed,
        L_P=L_P,
        L_Q=L_Q,
        error_trace=np.asarray(errors),
        objective_trace=np.asarray(objectives),
        outer_iterations=len(errors),
        converged=converged,
    )


def knn_graph(features: np.ndarray, k: int = 10,
              validate: bool = True) -> GraphLaplacian:
    """Gaussian-kernel k-nearest-neighbor graph over feature rows.

    The kernel bandwidth is the median nonzero k-NN distance; the weight
    matrix is symmetrized by the elementwise maximum and the Laplacian is
    normalized to trace n.  Used as the fixed-regularizer baseline for
    imputation.
    """
    from .laplacian import laplacian_from_adjacency

    features = np.asarray(features, dtype=float)
    n = features.shape[0]
    if not 1 <= k < n:
        raise ValueError(f"need 1 <= k < n, got k={k}, n={n}")
    sq = np.sum(features ** 2, axis=1)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * features @ features.T, 0.0)
    np.fill_diagonal(d2, np.inf)
    nn = np.argsort(d2, axis=1)[:, :k]
    nn_d2 = np.take_along_axis(d2, nn, axis=1)
    positive = nn_d2[nn_d2 > 0]
    sigma2 = float(np.median(positive)) if positive.size else 1.0
    w = np.zeros((n, n))
    rows = np.repeat(np.arange(n), k)
    w[rows, nn.ravel()] = np.exp(-nn_d2.ravel() / (2.0 * sigma2))
    w = np.maximum(w, w.T)
    L = laplacian_from_adjacency(w, validate=validate)
    tr = L.trace()
    return L.scaled(n / tr, validate=validate) if tr > 0 else L


def impute_fixed_graphs(masked: MaskedData, L_P: GraphLaplacian,
                        L_Q: GraphLaplacian, cfg: ImputeConfig) -> MultiDomainData:
    """One-shot imputation under fixed regularizer graphs."""
    return _impute_all(masked, L_P, L_Q, cfg)
