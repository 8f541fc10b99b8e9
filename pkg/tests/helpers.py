"""Shared test utilities: brute-force QP oracle and planted-graph builders."""

from __future__ import annotations

import numpy as np

from prodgraph import DiagQpProblem, laplacian_from_adjacency


def brute_force_diag_qp(problem: DiagQpProblem, feas_tol: float = 1e-7):
    """Globally solve a small diagonal QP by active-set enumeration.

    For every pattern of binding nonnegativity constraints, solve the
    equality-constrained KKT system on the free coordinates and keep the
    feasible candidate with the smallest objective.  Exponential in M;
    intended for M <= ~12.
    """
    p = problem.p
    q = problem.q
    C = problem.C.toarray()
    d = problem.d
    m = p.shape[0]
    n_con = d.shape[0]
    best_l = None
    best_obj = np.inf
    for pattern in range(2 ** m):
        free = [i for i in range(m) if not (pattern >> i) & 1]
        l = np.zeros(m)
        if free:
            f = np.array(free)
            kkt = np.zeros((len(f) + n_con, len(f) + n_con))
            kkt[: len(f), : len(f)] = np.diag(p[f])
            kkt[: len(f), len(f):] = C[:, f].T
            kkt[len(f):, : len(f)] = C[:, f]
            rhs = np.concatenate([-q[f], d])
            sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
            if np.linalg.norm(kkt @ sol - rhs) > feas_tol * max(1.0, np.linalg.norm(rhs)):
                continue  # stationarity/feasibility unattainable on this face
            if sol[: len(f)].min(initial=0.0) < -1e-9:
                continue
            l[f] = np.maximum(sol[: len(f)], 0.0)
        if np.linalg.norm(C @ l - d) > feas_tol * max(1.0, np.linalg.norm(d)):
            continue
        obj = problem.objective(l)
        if obj < best_obj:
            best_obj = obj
            best_l = l
    return best_l, best_obj


def random_feasible_qp(rng: np.random.Generator, m_max: int = 10, l_max: int = 4) -> DiagQpProblem:
    """Random strictly convex diagonal QP with a guaranteed feasible point."""
    m = int(rng.integers(2, m_max + 1))
    n_con = int(rng.integers(1, min(l_max, m) + 1))
    p = rng.uniform(0.5, 3.0, m)
    q = rng.normal(0.0, 2.0, m)
    C = rng.normal(0.0, 1.0, (n_con, m))
    l0 = rng.uniform(0.0, 2.0, m)
    d = C @ l0
    return DiagQpProblem(p=p, q=q, C=C, d=d)


def path_laplacian(n: int, seed: int, weight_lo: float = 0.5,
                   weight_hi: float = 1.0, log_uniform: bool = False):
    """Chain graph with random edge weights."""
    rng = np.random.default_rng(seed)
    w = np.zeros((n, n))
    for i in range(n - 1):
        if log_uniform:
            weight = float(np.exp(rng.uniform(np.log(weight_lo), np.log(weight_hi))))
        else:
            weight = float(rng.uniform(weight_lo, weight_hi))
        w[i, i + 1] = w[i + 1, i] = weight
    return laplacian_from_adjacency(w)


def random_valid_laplacian(n: int, rng: np.random.Generator, density: float = 0.6):
    """Random connected-ish weighted Laplacian for property tests."""
    w = np.zeros((n, n))
    for i in range(n - 1):  # spanning chain keeps it connected
        w[i, i + 1] = w[i + 1, i] = rng.uniform(0.2, 1.0)
    extra = rng.random((n, n)) < density
    weights = rng.uniform(0.1, 1.0, (n, n))
    for i in range(n):
        for j in range(i + 1, n):
            if extra[i, j]:
                w[i, j] = w[j, i] = weights[i, j]
    return laplacian_from_adjacency(w)
