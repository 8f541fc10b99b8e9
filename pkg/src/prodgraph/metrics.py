"""Evaluation metrics: edge-recovery F-score, NMI, iterate and test errors."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .clustering import ClusterLabels
from .laplacian import GraphLaplacian, MultiDomainData

DEFAULT_EDGE_TOL = 1e-4


@dataclass(frozen=True, eq=False)
class EdgeSet:
    """Unordered node pairs (i, j), i < j, deemed present in a graph."""

    n: int
    pairs: frozenset

    def __post_init__(self):
        for i, j in self.pairs:
            if not 0 <= i < j < self.n:
                raise ValueError(f"invalid edge ({i}, {j}) for n={self.n}")


def edges_of(L: GraphLaplacian, edge_tol: float = DEFAULT_EDGE_TOL) -> EdgeSet:
    """Edges whose weight -L_ij strictly exceeds edge_tol."""
    i, j = np.nonzero(np.triu(-L.dense, k=1) > edge_tol)
    return EdgeSet(n=L.n, pairs=frozenset(zip(i.tolist(), j.tolist())))


def f_score(truth: EdgeSet, est: EdgeSet) -> float:
    """2 tp / (2 tp + fn + fp); two empty sets score 1 by convention."""
    if truth.n != est.n:
        raise ValueError(f"node counts differ: {truth.n} vs {est.n}")
    tp = len(truth.pairs & est.pairs)
    fn = len(truth.pairs - est.pairs)
    fp = len(est.pairs - truth.pairs)
    if tp + fn + fp == 0:
        return 1.0
    return 2.0 * tp / (2.0 * tp + fn + fp)


def _entropy(counts: np.ndarray) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log(p)).sum())


def nmi(a: ClusterLabels, b: ClusterLabels) -> float:
    """Mutual information normalized by the mean entropy of the labelings.

    Natural-log entropies from the empirical joint counts; 0 log 0 is 0,
    and two single-cluster labelings score 1 by convention.
    """
    if a.n != b.n:
        raise ValueError(f"label lengths differ: {a.n} vs {b.n}")
    joint = np.zeros((a.k, b.k))
    np.add.at(joint, (a.labels, b.labels), 1.0)
    h_a = _entropy(joint.sum(axis=1))
    h_b = _entropy(joint.sum(axis=0))
    if h_a == 0.0 and h_b == 0.0:
        return 1.0
    total = joint.sum()
    p = joint / total
    pa = p.sum(axis=1, keepdims=True)
    pb = p.sum(axis=0, keepdims=True)
    mask = p > 0
    mi = float((p[mask] * np.log(p[mask] / (pa @ pb)[mask])).sum())
    return mi / (0.5 * (h_a + h_b))


def iterate_error(prev_P: GraphLaplacian, prev_Q: GraphLaplacian,
                  cur_P: GraphLaplacian, cur_Q: GraphLaplacian) -> float:
    """Relative squared change of a pair of Laplacian iterates.

    ||cur_P - prev_P||_F^2 / ||prev_P||_F^2 + the same for the Q factor.
    A zero-norm previous iterate yields the +inf sentinel.
    """
    out = 0.0
    for prev, cur in ((prev_P, cur_P), (prev_Q, cur_Q)):
        if prev.n != cur.n:
            raise ValueError(f"iterate shapes differ: {prev.n} vs {cur.n}")
        denom = float(np.sum(prev.dense * prev.dense))
        if denom == 0.0:
            return math.inf
        out += float(np.sum((cur.dense - prev.dense) ** 2)) / denom
    return out


def imputation_error(truth: MultiDomainData, est: MultiDomainData,
                     test_mask: np.ndarray) -> float:
    """Mean squared reconstruction error over the test-mask entries.

    (1/T) sum_i ||mask_i * (X_i - Xhat_i)||_F^2.
    """
    if truth.snapshots.shape != est.snapshots.shape:
        raise ValueError(
            f"shapes differ: {truth.snapshots.shape} vs {est.snapshots.shape}"
        )
    mask = np.asarray(test_mask, dtype=bool)
    if mask.shape != truth.snapshots.shape:
        raise ValueError(f"mask shape {mask.shape} does not match data")
    diff = np.where(mask, truth.snapshots - est.snapshots, 0.0)
    return float(np.sum(diff * diff)) / truth.T
