"""Spectral embeddings, component counting and k-means on graph factors.

A K-component graph has a Laplacian whose zero eigenvalue has algebraic
multiplicity K; the eigenvectors of the K smallest eigenvalues give a
K-dimensional node embedding used for clustering.  On a Cartesian product
graph both the embedding and the cluster labels factor across the two
graph factors, so the product labeling is composed from the factor
labelings instead of clustering the product graph directly.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.csgraph as csgraph

from .laplacian import GraphLaplacian


@dataclass(frozen=True, eq=False)
class EmbeddingPair:
    """Orthonormal spectral embeddings of the two factor node sets."""

    V_P: np.ndarray  # P x K_P
    V_Q: np.ndarray  # Q x K_Q

    def __post_init__(self):
        for name, v in (("V_P", self.V_P), ("V_Q", self.V_Q)):
            gram_err = np.abs(v.T @ v - np.eye(v.shape[1])).max(initial=0.0)
            if gram_err > 1e-10:
                raise ValueError(f"{name} columns are not orthonormal: |V^T V - I| = {gram_err:.3e}")


@dataclass(frozen=True, eq=False)
class ClusterLabels:
    """Integer labels in [0, k) for the nodes of one graph."""

    labels: np.ndarray
    k: int
    degenerate: bool = False

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=int)
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        if labels.size and (labels.min() < 0 or labels.max() >= self.k):
            raise ValueError(f"labels outside [0, {self.k})")
        if not self.degenerate:
            present = np.unique(labels)
            if present.size != self.k:
                raise ValueError(
                    f"{self.k - present.size} empty cluster(s); pass degenerate=True to allow"
                )

    @property
    def n(self) -> int:
        return self.labels.shape[0]


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    """Flip eigenvector signs so the largest-magnitude entry is positive."""
    vecs = np.array(vecs)
    idx = np.abs(vecs).argmax(axis=0)
    flip = vecs[idx, np.arange(vecs.shape[1])] < 0
    vecs[:, flip] *= -1.0
    return vecs


def smallest_eigpairs(L: GraphLaplacian, K: int) -> tuple[np.ndarray, np.ndarray]:
    """K smallest eigenvalues (ascending) and orthonormal eigenvectors.

    Eigenvectors come from a full dense symmetric eigendecomposition with
    a deterministic sign convention, so repeated calls on the same matrix
    reproduce the same embedding.
    """
    if not 1 <= K <= L.n:
        raise ValueError(f"K must be in [1, {L.n}], got {K}")
    vals, vecs = np.linalg.eigh(L.dense)
    return vals[:K], _fix_signs(vecs[:, :K])


def connected_components(L: GraphLaplacian, zero_tol: float = 1e-6) -> tuple[int, ClusterLabels]:
    """Count connected components and label nodes by component.

    Labels and the authoritative count come from graph traversal of the
    adjacency support (weights above zero_tol * lambda_max).  The spectral
    count, the number of eigenvalues below the same relative threshold, is
    cross-checked; a mismatch raises a RuntimeWarning and traversal wins.
    """
    vals = np.linalg.eigvalsh(L.dense)
    lam_max = float(vals[-1])
    thresh = zero_tol * lam_max
    spectral_count = int(np.sum(vals <= thresh)) if lam_max > 0 else L.n
    w = L.adjacency()
    support = sp.csr_matrix(w > max(thresh, 0.0))
    count, labels = csgraph.connected_components(support, directed=False)
    if count != spectral_count:
        warnings.warn(
            f"component count mismatch: traversal {count}, spectral {spectral_count}; "
            "using traversal",
            RuntimeWarning,
            stacklevel=2,
        )
    return count, ClusterLabels(labels=labels, k=count)


def _kmeans_once(rows: np.ndarray, k: int, rng: np.random.Generator,
                 max_iter: int) -> tuple[np.ndarray, float]:
    """One k-means++ seeded Lloyd run; returns labels and the WCSS."""
    m = rows.shape[0]
    centers = np.empty((k, rows.shape[1]))
    centers[0] = rows[rng.integers(m)]
    d2 = ((rows - centers[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total <= 0:
            centers[c] = rows[rng.integers(m)]
        else:
            centers[c] = rows[rng.choice(m, p=d2 / total)]
        d2 = np.minimum(d2, ((rows - centers[c]) ** 2).sum(axis=1))

    labels = np.zeros(m, dtype=int)
    for _ in range(max_iter):
        dist = ((rows[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_labels = dist.argmin(axis=1)
        for c in range(k):
            members = new_labels == c
            if members.any():
                centers[c] = rows[members].mean(axis=0)
            else:
                # reseed an empty cluster at the point farthest from its center
                far = dist[np.arange(m), new_labels].argmax()
                centers[c] = rows[far]
                new_labels[far] = c
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    dist = ((rows[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    labels = dist.argmin(axis=1)
    wcss = float(dist[np.arange(m), labels].sum())
    return labels, wcss


def kmeans(rows: np.ndarray, k: int, seed: int, restarts: int = 10,
           max_iter: int = 300) -> ClusterLabels:
    """k-means++ with restarts; best run by within-cluster sum of squares.

    Deterministic given ``seed``: restarts draw from one seeded stream and
    ties in the objective keep the earliest restart.
    """
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2:
        raise ValueError(f"rows must be 2-d, got shape {rows.shape}")
    m = rows.shape[0]
    if not 1 <= k <= m:
        raise ValueError(f"need m >= k >= 1, got m={m}, k={k}")
    rng = np.random.default_rng(seed)
    best_labels, best_wcss = None, np.inf
    for _ in range(max(1, restarts)):
        labels, wcss = _kmeans_once(rows, k, rng, max_iter)
        if wcss < best_wcss:
            best_labels, best_wcss = labels, wcss
    present, relabeled = np.unique(best_labels, return_inverse=True)
    if present.size == k:
        return ClusterLabels(labels=relabeled, k=k)
    return ClusterLabels(labels=best_labels, k=k, degenerate=True)


def product_labels(labels_P: ClusterLabels, labels_Q: ClusterLabels,
                   P: int, Q: int) -> ClusterLabels:
    """Compose factor labelings on the product graph's q*P + p node order.

    Product node (p, q) receives label labels_Q[q] * K_P + labels_P[p], so
    the product has K_P * K_Q clusters.
    """
    if labels_P.n != P or labels_Q.n != Q:
        raise ValueError(
            f"label lengths ({labels_P.n}, {labels_Q.n}) do not match (P, Q) = ({P}, {Q})"
        )
    grid = labels_Q.labels[:, None] * labels_P.k + labels_P.labels[None, :]
    return ClusterLabels(labels=grid.ravel(), k=labels_P.k * labels_Q.k)
