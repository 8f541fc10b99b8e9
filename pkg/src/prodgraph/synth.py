"""Planted community graphs, smooth signal synthesis, and masking.

Graphs come from a balanced stochastic block model with uniform edge
weights and connectivity enforced per block.  Signals are drawn from the
factor analysis model whose loading matrices are the factor eigenvector
matrices: the latent coordinate for eigenvalue pair (lambda_j, lambda_k)
has variance 1 / (lambda_j + lambda_k), with coordinates on the null
space (zero eigenvalue sums) set exactly to zero, so the signals are
smooth on the product of the two factors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.csgraph as csgraph

from .laplacian import GraphLaplacian, MultiDomainData, laplacian_from_adjacency

MAX_BLOCK_RESAMPLES = 200


@dataclass(frozen=True)
class CommunityGraphSpec:
    """Balanced weighted stochastic block model parameters.

    With p_out = 0 the generated graph has exactly k connected components
    (one per block); planted multi-component ground truth should use that
    setting.  Edge weights are uniform on [weight_lo, weight_hi] and the
    Laplacian keeps that natural scale (rescale with ``scaled`` when a
    fixed trace is needed).
    """

    n: int
    k: int = 1
    p_in: float = 0.7
    p_out: float = 0.05
    weight_lo: float = 0.1
    weight_hi: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or not 1 <= self.k <= self.n:
            raise ValueError(f"need 1 <= k <= n, got k={self.k}, n={self.n}")
        if not 0.0 <= self.p_out <= self.p_in <= 1.0:
            raise ValueError(f"need 0 <= p_out <= p_in <= 1, got ({self.p_in}, {self.p_out})")
        if self.weight_lo <= 0 or self.weight_hi < self.weight_lo:
            raise ValueError(f"bad weight range [{self.weight_lo}, {self.weight_hi}]")


def block_sizes(n: int, k: int) -> list[int]:
    """Balanced block sizes differing by at most one."""
    base, extra = divmod(n, k)
    return [base + (1 if b < extra else 0) for b in range(k)]


def _block_is_connected(mask: np.ndarray) -> bool:
    if mask.shape[0] <= 1:
        return True
    count, _ = csgraph.connected_components(sp.csr_matrix(mask), directed=False)
    return count == 1


def planted_labels(n: int, k: int) -> np.ndarray:
    """Ground-truth block labels matching the generator's block layout."""
    return np.repeat(np.arange(k), block_sizes(n, k))


def random_community_graph(spec: CommunityGraphSpec) -> GraphLaplacian:
    """Sample a weighted community graph and return its Laplacian.

    Each block's internal edge pattern is resampled until connected (up
    to a bounded number of tries); cross-block edges appear independently
    with probability p_out.  Deterministic given spec.seed.
    """
    rng = np.random.default_rng(spec.seed)
    sizes = block_sizes(spec.n, spec.k)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    selected = np.zeros((spec.n, spec.n), dtype=bool)

    for b, size in enumerate(sizes):
        lo = offsets[b]
        for attempt in range(MAX_BLOCK_RESAMPLES):
            tri = np.triu(rng.random((size, size)) < spec.p_in, k=1)
            mask = tri | tri.T
            if _block_is_connected(mask):
                break
        else:
            raise RuntimeError(
                f"block {b} (size {size}) not connected after "
                f"{MAX_BLOCK_RESAMPLES} resamples; increase p_in"
            )
        selected[lo:lo + size, lo:lo + size] = mask

    if spec.p_out > 0 and spec.k > 1:
        labels = planted_labels(spec.n, spec.k)
        cross = labels[:, None] != labels[None, :]
        tri = np.triu(rng.random((spec.n, spec.n)) < spec.p_out, k=1) & cross
        selected |= tri | tri.T

    weights = np.triu(
        rng.uniform(spec.weight_lo, spec.weight_hi, size=(spec.n, spec.n)), k=1
    )
    w = np.where(np.triu(selected, k=1), weights, 0.0)
    w = w + w.T
    return laplacian_from_adjacency(w)


def generate_smooth_signals(L_P: GraphLaplacian, L_Q: GraphLaplacian, T: int,
                            sigma2: float = 0.0, seed: int = 0,
                            null_tol: float = 1e-8) -> MultiDomainData:
    """Draw T smooth snapshots on the product of two factors.

    Latent entries are independent zero-mean Gaussians with variance
    1 / (lambda_j + lambda_k) for nonzero eigenvalue sums and exactly zero
    otherwise; each snapshot is U_P Xtilde U_Q^T plus optional white noise
    of variance sigma2.  Bit-identical output for a fixed seed.
    """
    if T < 1:
        raise ValueError(f"need at least one snapshot, got T={T}")
    if sigma2 < 0:
        raise ValueError(f"noise variance must be nonnegative, got {sigma2}")
    rng = np.random.default_rng(seed)
    lam_p, U_P = np.linalg.eigh(L_P.dense)
    lam_q, U_Q = np.linalg.eigh(L_Q.dense)
    lam_sum = lam_p[:, None] + lam_q[None, :]
    cutoff = null_tol * max(float(lam_sum.max(initial=0.0)), 1.0)
    std = np.where(lam_sum > cutoff, 1.0 / np.sqrt(np.where(lam_sum > cutoff, lam_sum, 1.0)), 0.0)
    latent = rng.standard_normal((T, L_P.n, L_Q.n)) * std
    snaps = np.einsum("pi,tij,qj->tpq", U_P, latent, U_Q)
    if sigma2 > 0:
        snaps = snaps + rng.normal(0.0, np.sqrt(sigma2), size=snaps.shape)
    return MultiDomainData(snapshots=snaps)


@dataclass(frozen=True, eq=False)
class MaskedData:
    """Observed data (zero at unobserved entries) with disjoint masks."""

    observed: MultiDomainData
    train_mask: np.ndarray
    test_mask: np.ndarray

    def __post_init__(self):
        train = np.asarray(self.train_mask, dtype=bool)
        test = np.asarray(self.test_mask, dtype=bool)
        shape = self.observed.snapshots.shape
        if train.shape != shape or test.shape != shape:
            raise ValueError("mask shapes do not match the data")
        if np.any(train & test):
            raise ValueError("train and test masks overlap")
        if np.any(self.observed.snapshots[~train] != 0.0):
            raise ValueError("observed data is nonzero outside the train mask")
        train.setflags(write=False)
        test.setflags(write=False)
        object.__setattr__(self, "train_mask", train)
        object.__setattr__(self, "test_mask", test)

    @property
    def degenerate(self) -> bool:
        """True when the test mask selects nothing."""
        return not bool(self.test_mask.any())


def apply_mask(data: MultiDomainData, train_fraction: float, seed: int = 0,
               test_fraction: float | None = None) -> MaskedData:
    """Split entries uniformly at random into train and test selections.

    The train mask gets floor(train_fraction * count) entries; the test
    mask takes up to test_fraction of the entries from the remainder (all
    of it by default).  Masks are disjoint by construction.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train fraction must be in (0, 1), got {train_fraction}")
    if test_fraction is not None and not 0.0 <= test_fraction <= 1.0 - train_fraction:
        raise ValueError(
            f"test fraction must be in [0, {1.0 - train_fraction:.3f}], got {test_fraction}"
        )
    rng = np.random.default_rng(seed)
    shape = data.snapshots.shape
    count = data.snapshots.size
    order = rng.permutation(count)
    n_train = int(np.floor(train_fraction * count))
    n_test = count - n_train if test_fraction is None else int(np.floor(test_fraction * count))
    train = np.zeros(count, dtype=bool)
    test = np.zeros(count, dtype=bool)
    train[order[:n_train]] = True
    test[order[n_train:n_train + n_test]] = True
    train = train.reshape(shape)
    test = test.reshape(shape)
    observed = MultiDomainData(snapshots=np.where(train, data.snapshots, 0.0))
    return MaskedData(observed=observed, train_mask=train, test_mask=test)
