"""Combinatorial graph Laplacians and their half-vector parameterization.

A valid combinatorial Laplacian L of an undirected weighted graph is
symmetric positive semidefinite, has nonpositive off-diagonal entries and
zero row sums.  Every such matrix is determined by the n(n+1)/2 entries of
its lower triangle, collected in a nonnegative parameter vector l: the
diagonal coordinate (i, i) carries L_ii and the off-diagonal coordinate
(i, j), i > j, carries the edge weight -L_ij.  A sparse duplication matrix
D maps l to vec(L), so that linear functionals of L become linear in l.

Also provides the Kronecker sum of two factor Laplacians (the Laplacian of
the Cartesian product graph) and the quadratic smoothness of multi-domain
data with respect to a pair of factors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


class LaplacianError(ValueError):
    """Raised when a matrix fails the combinatorial Laplacian invariants."""


@dataclass(frozen=True)
class ValidationTol:
    """Tolerances used when validating a candidate Laplacian.

    Defaults are tuned for double precision at desk scale; solvers that
    only reach feasibility up to an iteration tolerance pass wider values.
    """

    symmetry: float = 1e-12
    row_sum: float = 1e-9
    psd_floor: float = -1e-8
    sign: float = 0.0


DEFAULT_TOL = ValidationTol()


def vech_index(i: int, j: int, n: int) -> int:
    """Column index of matrix coordinate (i, j), i >= j, in vech order.

    vech order is lower-triangular column-major:
    (0,0), (1,0), ..., (n-1,0), (1,1), (2,1), ...
    """
    if not (0 <= j <= i < n):
        raise ValueError(f"need 0 <= j <= i < n, got (i, j, n) = ({i}, {j}, {n})")
    return j * n + i - j * (j + 1) // 2


def vech_pairs(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Row/column index arrays (i, j) with i >= j in vech order."""
    j, i = np.triu_indices(n)  # triu of the transpose = tril, column-major
    return i, j


@dataclass(frozen=True, eq=False)
class DuplicationMatrix:
    """Sparse map from the parameter vector l to vec(L).

    The column for diagonal coordinate (i, i) has a single +1 at vec
    position of (i, i).  The column for off-diagonal coordinate (i, j),
    i > j, has -1 at the vec positions of both (i, j) and (j, i), so a
    nonnegative l always produces the Laplacian sign pattern.  D^T D is
    diagonal with entries 1 (diagonal coordinates) and 2 (off-diagonal).
    """

    n: int
    mat: sp.csr_matrix

    @property
    def m(self) -> int:
        """Number of parameter coordinates, n(n+1)/2."""
        return self.n * (self.n + 1) // 2

    def dtd_diagonal(self) -> np.ndarray:
        """Diagonal of D^T D: 1 per diagonal coordinate, 2 per off-diagonal."""
        i, j = vech_pairs(self.n)
        return np.where(i == j, 1.0, 2.0)

    def apply(self, l: np.ndarray) -> np.ndarray:
        """Return unvec(D l) as a dense n x n matrix."""
        vec = self.mat @ np.asarray(l, dtype=float)
        return vec.reshape(self.n, self.n, order="F")

    def rmatvec(self, vec: np.ndarray) -> np.ndarray:
        """Return D^T vec for a flattened (column-major) n x n matrix."""
        return self.mat.T @ np.asarray(vec, dtype=float)


def duplication_matrix(n: int) -> DuplicationMatrix:
    """Build the n^2 x n(n+1)/2 duplication matrix in vech column order.

    Parameters
    ----------
    n : int
        Node count, n >= 1.

    Returns
    -------
    DuplicationMatrix
    """
    if n < 1:
        raise ValueError(f"node count must be >= 1, got {n}")
    i, j = vech_pairs(n)
    m = len(i)
    cols = np.arange(m)
    diag = i == j
    # vec index of matrix entry (r, c) is c*n + r (column-major).
    rows_lower = j * n + i
    rows_upper = i * n + j
    row_idx = np.concatenate([rows_lower, rows_upper[~diag]])
    col_idx = np.concatenate([cols, cols[~diag]])
    vals = np.concatenate([np.where(diag, 1.0, -1.0), -np.ones((~diag).sum())])
    mat = sp.csr_matrix((vals, (row_idx, col_idx)), shape=(n * n, m))
    return DuplicationMatrix(n=n, mat=mat)


def _frozen(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


def validate_dense(dense: np.ndarray, tol: ValidationTol = DEFAULT_TOL) -> None:
    """Check the combinatorial Laplacian invariants, raising LaplacianError."""
    n = dense.shape[0]
    if dense.shape != (n, n):
        raise LaplacianError(f"matrix is not square: shape {dense.shape}")
    asym = np.abs(dense - dense.T).max() if n else 0.0
    if asym > tol.symmetry:
        raise LaplacianError(f"matrix is not symmetric: max |L - L^T| = {asym:.3e}")
    off = dense - np.diag(np.diag(dense))
    if off.max(initial=0.0) > tol.sign:
        raise LaplacianError(
            f"positive off-diagonal entry: max = {off.max(initial=0.0):.3e}"
        )
    if np.diag(dense).min(initial=0.0) < -tol.sign:
        raise LaplacianError(
            f"negative diagonal entry: min = {np.diag(dense).min(initial=0.0):.3e}"
        )
    row = np.abs(dense.sum(axis=1)).max(initial=0.0)
    if row > tol.row_sum:
        raise LaplacianError(f"row sum nonzero: max |L 1| = {row:.3e}")
    lam_min = float(np.linalg.eigvalsh(dense)[0]) if n else 0.0
    if lam_min < tol.psd_floor:
        raise LaplacianError(f"not positive semidefinite: lambda_min = {lam_min:.3e}")


@dataclass(frozen=True, eq=False)
class GraphLaplacian:
    """A graph Laplacian together with its parameter vector.

    ``dense`` and ``vech`` always satisfy vec(dense) = D_n vech entrywise;
    the Laplacian invariants (sign pattern, zero row sums, PSD) hold only
    for instances built with validation enabled.
    """

    n: int
    dense: np.ndarray
    vech: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dense", _frozen(self.dense))
        object.__setattr__(self, "vech", _frozen(self.vech))

    def validate(self, tol: ValidationTol = DEFAULT_TOL) -> "GraphLaplacian":
        validate_dense(self.dense, tol)
        return self

    def adjacency(self) -> np.ndarray:
        """Nonnegative weight matrix W with W_ij = -L_ij off the diagonal."""
        w = -np.array(self.dense)
        np.fill_diagonal(w, 0.0)
        return np.maximum(w, 0.0)

    def trace(self) -> float:
        return float(np.trace(self.dense))

    def scaled(self, factor: float, validate: bool = False,
               tol: ValidationTol = DEFAULT_TOL) -> "GraphLaplacian":
        out = GraphLaplacian(n=self.n, dense=self.dense * factor,
                             vech=self.vech * factor)
        return out.validate(tol) if validate else out


def to_vech(dense: np.ndarray) -> np.ndarray:
    """Parameter vector of a (near-)symmetric matrix from its lower triangle."""
    n = dense.shape[0]
    i, j = vech_pairs(n)
    vals = dense[i, j].astype(float)
    off = i != j
    vals[off] = -vals[off]
    return vals


def from_vech(l: np.ndarray, n: int, validate: bool = False,
              tol: ValidationTol = DEFAULT_TOL) -> GraphLaplacian:
    """Build the symmetric matrix unvec(D_n l) from a nonnegative l.

    Parameters
    ----------
    l : array of length n(n+1)/2
        Nonnegative parameters in vech order.
    n : int
        Node count.
    validate : bool
        When True, additionally enforce the Laplacian invariants (row sums
        need not vanish for arbitrary l >= 0, so this is off by default).

    Returns
    -------
    GraphLaplacian
    """
    l = np.asarray(l, dtype=float)
    m = n * (n + 1) // 2
    if l.shape != (m,):
        raise ValueError(f"parameter vector must have length {m}, got {l.shape}")
    if l.min(initial=0.0) < 0:
        raise ValueError(f"negative entry in parameter vector: min = {l.min():.3e}")
    i, j = vech_pairs(n)
    dense = np.zeros((n, n))
    diag = i == j
    dense[i[diag], j[diag]] = l[diag]
    dense[i[~diag], j[~diag]] = -l[~diag]
    dense[j[~diag], i[~diag]] = -l[~diag]
    out = GraphLaplacian(n=n, dense=dense, vech=l)
    return out.validate(tol) if validate else out


def from_dense(dense: np.ndarray, validate: bool = True,
               tol: ValidationTol = DEFAULT_TOL) -> GraphLaplacian:
    """Wrap a dense symmetric matrix, storing the exact lower-triangle read.

    The stored matrix is reconstructed from the lower triangle so that
    dense and vech agree entrywise even if the input was symmetric only to
    within tolerance.
    """
    dense = np.asarray(dense, dtype=float)
    if validate:
        validate_dense(dense, tol)
    vech = to_vech(dense)
    i, j = vech_pairs(dense.shape[0])
    sym = np.zeros_like(dense)
    sym[i, j] = dense[i, j]
    sym[j, i] = dense[i, j]
    return GraphLaplacian(n=dense.shape[0], dense=sym, vech=vech)


def laplacian_from_adjacency(w: np.ndarray, validate: bool = True,
                             tol: ValidationTol = DEFAULT_TOL) -> GraphLaplacian:
    """L = diag(W 1) - W for a symmetric nonnegative W with zero diagonal."""
    w = np.asarray(w, dtype=float)
    n = w.shape[0]
    if w.shape != (n, n):
        raise ValueError(f"adjacency must be square, got shape {w.shape}")
    if np.abs(w - w.T).max(initial=0.0) > tol.symmetry:
        raise ValueError("adjacency matrix is not symmetric")
    if w.min(initial=0.0) < 0:
        raise ValueError(f"negative adjacency entry: min = {w.min():.3e}")
    if np.abs(np.diag(w)).max(initial=0.0) > 0:
        raise ValueError("adjacency matrix has nonzero diagonal (self-loop)")
    dense = np.diag(w.sum(axis=1)) - w
    return from_dense(dense, validate=validate, tol=tol)


def kron_sum(L_P: GraphLaplacian, L_Q: GraphLaplacian, validate: bool = True,
             tol: ValidationTol = DEFAULT_TOL) -> GraphLaplacian:
    """Laplacian of the Cartesian product graph, I_Q (x) L_P + L_Q (x) I_P.

    Node (p, q) of the product maps to index q*P + p, the column-major vec
    convention for P x Q data matrices.
    """
    P, Q = L_P.n, L_Q.n
    dense = np.kron(np.eye(Q), L_P.dense) + np.kron(L_Q.dense, np.eye(P))
    return from_dense(dense, validate=validate, tol=tol)


@dataclass(frozen=True, eq=False)
class MultiDomainData:
    """T snapshots of P x Q data matrices on a product graph.

    The product-graph signal for snapshot i is vec(X_i) in column-major
    order, i.e. factor pair (p, q) sits at index q*P + p.
    """

    snapshots: np.ndarray  # shape (T, P, Q)

    def __post_init__(self):
        snaps = np.array(self.snapshots, dtype=float)
        if snaps.ndim != 3:
            raise ValueError(f"snapshots must have shape (T, P, Q), got {snaps.shape}")
        snaps.setflags(write=False)
        object.__setattr__(self, "snapshots", snaps)

    @property
    def T(self) -> int:
        return self.snapshots.shape[0]

    @property
    def P(self) -> int:
        return self.snapshots.shape[1]

    @property
    def Q(self) -> int:
        return self.snapshots.shape[2]

    @property
    def N(self) -> int:
        return self.P * self.Q

    def vecs(self) -> np.ndarray:
        """N x T matrix whose columns are vec(X_i)."""
        # (T, P, Q) -> (Q, P, T) so that a C-order reshape runs p fastest.
        return self.snapshots.transpose(2, 1, 0).reshape(self.N, self.T)

    @staticmethod
    def from_matrix(x: np.ndarray, P: int, Q: int) -> "MultiDomainData":
        """Reshape an N x T signal matrix (columns vec(X_i)) into snapshots."""
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.shape[0] != P * Q:
            raise ValueError(f"expected {P * Q} rows for P={P}, Q={Q}, got {x.shape[0]}")
        snaps = x.T.reshape(x.shape[1], Q, P).transpose(0, 2, 1)
        return MultiDomainData(snapshots=snaps)


def smoothness(data: MultiDomainData, L_P: GraphLaplacian,
               L_Q: GraphLaplacian) -> float:
    """Total quadratic variation of the data over the two graph factors.

    Returns sum_i tr(X_i^T L_P X_i) + tr(X_i L_Q X_i^T), which equals the
    quadratic form of each vec(X_i) under the Kronecker sum of the factors.
    """
    if data.P != L_P.n or data.Q != L_Q.n:
        raise ValueError(
            f"data is {data.P} x {data.Q} but factors have "
            f"{L_P.n} and {L_Q.n} nodes"
        )
    x = data.snapshots
    row_part = np.einsum("tpq,pr,trq->", x, L_P.dense, x)
    col_part = np.einsum("tpq,qr,tpr->", x, L_Q.dense, x)
    return float(row_part + col_part)


def constraint_matrix(n: int, trace_target: float | None) -> tuple[sp.csr_matrix, np.ndarray]:
    """Equality constraints C l = d for the Laplacian parameter vector.

    The first row (present when ``trace_target`` is not None) fixes
    tr(L) = trace_target; the remaining n rows enforce the zero row sums
    L 1 = 0.  Rows are vec^T(I_n) D_n and (1^T (x) I_n) D_n.
    """
    d_mat = duplication_matrix(n).mat
    null_rows = sp.kron(np.ones((1, n)), sp.eye(n)) @ d_mat
    if trace_target is None:
        c = sp.csr_matrix(null_rows)
        d = np.zeros(n)
    else:
        trace_row = sp.csr_matrix(np.eye(n).reshape(1, -1, order="F")) @ d_mat
        c = sp.vstack([trace_row, null_rows], format="csr")
        d = np.concatenate([[float(trace_target)], np.zeros(n)])
    return sp.csr_matrix(c), d
