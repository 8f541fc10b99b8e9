"""Dual projected-gradient solver for diagonal quadratic programs.

Solves
    minimize    (1/2) l^T diag(p) l + q^T l
    subject to  C l = d,  l >= 0
with p > 0, by gradient ascent on the dual of the equality constraints.
Eliminating the nonnegativity multipliers from the KKT conditions gives the
primal iterate in closed form, so each iteration is

    l   = { diag(p)^-1 (C^T mu - q) }_+
    mu <- mu - rho (C l - d)

starting from mu = 0, until the feasibility residual ||C l - d|| drops
below the tolerance.  The returned l is nonnegative by construction.

The iteration loop is compiled with numba when available (it routinely
runs for 1e5..1e6 iterations on matrices with a handful of rows); a pure
numpy loop with identical semantics is used otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap


STATUS_MAX_ITER = 0
STATUS_CONVERGED = 1
STATUS_STALLED = 2

_CERT_TOL = 1e-6  # approximate Farkas certificate threshold


@dataclass(frozen=True, eq=False)
class DiagQpProblem:
    """Data (p, q, C, d) of one diagonal QP instance."""

    p: np.ndarray          # length M, strictly positive
    q: np.ndarray          # length M
    C: sp.csr_matrix       # L x M
    d: np.ndarray          # length L

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        q = np.asarray(self.q, dtype=float)
        d = np.asarray(self.d, dtype=float)
        C = sp.csr_matrix(self.C, dtype=float)
        if p.ndim != 1 or q.shape != p.shape:
            raise ValueError(f"p and q must be 1-d of equal length, got {p.shape}, {q.shape}")
        if p.min(initial=np.inf) <= 0:
            raise ValueError(f"quadratic diagonal must be strictly positive, min = {p.min():.3e}")
        if C.shape != (d.shape[0], p.shape[0]):
            raise ValueError(
                f"constraint shape {C.shape} inconsistent with M={p.shape[0]}, L={d.shape[0]}"
            )
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "d", d)

    @property
    def m(self) -> int:
        return self.p.shape[0]

    @property
    def n_constraints(self) -> int:
        return self.d.shape[0]

    def objective(self, l: np.ndarray) -> float:
        return float(0.5 * (l * self.p) @ l + self.q @ l)


@dataclass(frozen=True)
class SolverConfig:
    """Step size, tolerance and iteration controls for the dual iteration.

    rho=None selects 1 / sigma_max^2(C diag(p)^{-1/2}), the Lipschitz scale
    of the dual gradient map, estimated by power iteration.  Stagnation of
    the best residual over ``stall_window`` iterations triggers an
    approximate Farkas infeasibility test on the dual iterate; the solve
    stops with the ``stalled`` flag only when that certificate holds, so
    feasible problems that merely plateau keep iterating.
    """

    rho: float | None = None
    tol: float = 1e-6
    max_iter: int = 100_000
    record_trace: bool = False
    stall_window: int = 1000
    stall_rtol: float = 0.01

    def __post_init__(self):
        if self.rho is not None and self.rho <= 0:
            raise ValueError(f"step size must be positive, got {self.rho}")
        if self.tol <= 0:
            raise ValueError(f"tolerance must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")


@dataclass(frozen=True, eq=False)
class QpSolution:
    """Best primal/dual iterates and convergence flags of one solve."""

    l: np.ndarray
    mu: np.ndarray
    feas_residual: float
    iterations: int
    converged: bool
    stalled: bool = False
    trace: np.ndarray | None = None

    def __post_init__(self):
        if np.asarray(self.l).min(initial=0.0) < 0:
            raise ValueError("primal iterate has a negative entry")


def default_step_size(problem: DiagQpProblem, iters: int = 200, rtol: float = 1e-6) -> float:
    """1 / lambda_max(C diag(p)^-1 C^T) by deterministic power iteration."""
    L = problem.n_constraints
    pinv = 1.0 / problem.p
    Ct = problem.C.T.tocsr()
    b = np.ones(L) / np.sqrt(L)
    lam = 0.0
    for _ in range(iters):
        w = problem.C @ (pinv * (Ct @ b))
        lam_new = float(np.linalg.norm(w))
        if lam_new == 0.0:
            return 1.0
        b = w / lam_new
        if abs(lam_new - lam) <= rtol * lam_new:
            lam = lam_new
            break
        lam = lam_new
    return 1.0 / lam


@njit(cache=True)
def _dual_pg_kernel(pinv, q, c_data, c_idx, c_ptr, ct_data, ct_idx, ct_ptr, d,
                    rho, tol, max_iter, stall_window, stall_rtol, trace):
    M = pinv.shape[0]
    L = d.shape[0]
    mu = np.zeros(L)
    l = np.zeros(M)
    r = np.zeros(L)
    best_l = np.zeros(M)
    best_mu = np.zeros(L)
    best_res = np.inf
    anchor = np.inf
    since = 0
    status = STATUS_MAX_ITER
    iterations = 0
    norm_d = 0.0
    for i in range(L):
        norm_d += d[i] * d[i]
    norm_d = np.sqrt(norm_d)

    for k in range(max_iter):
        for i in range(M):
            s = 0.0
            for t in range(ct_ptr[i], ct_ptr[i + 1]):
                s += ct_data[t] * mu[ct_idx[t]]
            v = pinv[i] * (s - q[i])
            l[i] = v if v > 0.0 else 0.0
        res2 = 0.0
        for i in range(L):
            s = 0.0
            for t in range(c_ptr[i], c_ptr[i + 1]):
                s += c_data[t] * l[c_idx[t]]
            ri = s - d[i]
            r[i] = ri
            res2 += ri * ri
        res = np.sqrt(res2)
        iterations = k + 1
        if trace.shape[0] > k:
            trace[k] = res
        if res < best_res:
            best_res = res
            best_l[:] = l
            best_mu[:] = mu
        if res < tol:
            status = STATUS_CONVERGED
            break
        if best_res < anchor * (1.0 - stall_rtol):
            anchor = best_res
            since = 0
        else:
            since += 1
        if since >= stall_window:
            # Farkas test: mu/||mu|| with C^T y <= 0 and d^T y > 0 certifies
            # that {C l = d, l >= 0} is empty; a mere plateau fails it.
            norm_mu = 0.0
            for i in range(L):
                norm_mu += mu[i] * mu[i]
            norm_mu = np.sqrt(norm_mu)
            if norm_mu > 0.0:
                max_ct = -np.inf
                for i in range(M):
                    s = 0.0
                    for t in range(ct_ptr[i], ct_ptr[i + 1]):
                        s += ct_data[t] * mu[ct_idx[t]]
                    if s > max_ct:
                        max_ct = s
                dty = 0.0
                for i in range(L):
                    dty += d[i] * mu[i]
                scale = norm_d if norm_d > 1.0 else 1.0
                if max_ct <= _CERT_TOL * norm_mu and dty >= _CERT_TOL * norm_mu * scale:
                    status = STATUS_STALLED
                    break
            anchor = best_res
            since = 0
        for i in range(L):
            mu[i] -= rho * r[i]

    return best_l, best_mu, best_res, iterations, status


def _dual_pg_python(pinv, q, C, Ct, d, rho, tol, max_iter, stall_window,
                    stall_rtol, trace):
    mu = np.zeros(d.shape[0])
    pq = pinv * q
    best_res = np.inf
    best_l = np.zeros(pinv.shape[0])
    best_mu = mu
    anchor = np.inf
    since = 0
    status = STATUS_MAX_ITER
    iterations = 0
    norm_d = float(np.linalg.norm(d))

    for k in range(max_iter):
        l = pinv * (Ct @ mu) - pq
        np.maximum(l, 0.0, out=l)
        r = C @ l - d
        res = float(np.sqrt(r @ r))
        iterations = k + 1
        if trace is not None:
            trace[k] = res
        if res < best_res:
            best_res = res
            best_l = l
            best_mu = mu
        if res < tol:
            status = STATUS_CONVERGED
            break
        if best_res < anchor * (1.0 - stall_rtol):
            anchor = best_res
            since = 0
        else:
            since += 1
        if since >= stall_window:
            norm_mu = float(np.linalg.norm(mu))
            if norm_mu > 0.0:
                max_ct = float((Ct @ mu).max(initial=-np.inf))
                dty = float(d @ mu)
                scale = max(norm_d, 1.0)
                if max_ct <= _CERT_TOL * norm_mu and dty >= _CERT_TOL * norm_mu * scale:
                    status = STATUS_STALLED
                    break
            anchor = best_res
            since = 0
        mu = mu - rho * r

    return best_l, best_mu, best_res, iterations, status


def solve_diag_qp(problem: DiagQpProblem, config: SolverConfig = SolverConfig()) -> QpSolution:
    """Run the dual projected-gradient iteration on one diagonal QP.

    Parameters
    ----------
    problem : DiagQpProblem
    config : SolverConfig

    Returns
    -------
    QpSolution
        ``converged`` is False when the iteration cap was hit; ``stalled``
        is True when the residual stagnated above tolerance and the dual
        iterate certified infeasibility.  The best iterate seen is
        returned in all cases.
    """
    rho = config.rho if config.rho is not None else default_step_size(problem)
    pinv = 1.0 / problem.p
    C = problem.C
    Ct = C.T.tocsr()

    if _HAVE_NUMBA:
        trace = np.empty(config.max_iter if config.record_trace else 0)
        best_l, best_mu, best_res, iterations, status = _dual_pg_kernel(
            pinv, problem.q,
            C.data, C.indices.astype(np.int64), C.indptr.astype(np.int64),
            Ct.data, Ct.indices.astype(np.int64), Ct.indptr.astype(np.int64),
            problem.d, float(rho), float(config.tol), int(config.max_iter),
            int(config.stall_window), float(config.stall_rtol), trace,
        )
    else:
        trace = np.empty(config.max_iter) if config.record_trace else None
        best_l, best_mu, best_res, iterations, status = _dual_pg_python(
            pinv, problem.q, C, Ct, problem.d, float(rho), float(config.tol),
            int(config.max_iter), int(config.stall_window),
            float(config.stall_rtol), trace,
        )

    return QpSolution(
        l=best_l,
        mu=best_mu,
        feas_residual=float(best_res),
        iterations=int(iterations),
        converged=status == STATUS_CONVERGED,
        stalled=status == STATUS_STALLED,
        trace=trace[:iterations].copy() if config.record_trace else None,
    )


@dataclass(frozen=True)
class KktResiduals:
    """First-order optimality diagnostics at a candidate solution."""

    stationarity: float
    primal_feasibility: float
    min_l: float
    complementarity: float


def kkt_residuals(problem: DiagQpProblem, sol: QpSolution) -> KktResiduals:
    """Measure the KKT system at (l, mu).

    The inequality multiplier is recovered as the nonnegative part of
    diag(p) l + q - C^T mu; stationarity reports the sup-norm of what the
    clamping discarded, complementarity the largest |lambda_i l_i|.
    """
    grad = problem.p * sol.l + problem.q - problem.C.T @ sol.mu
    lam = np.maximum(grad, 0.0)
    return KktResiduals(
        stationarity=float(np.abs(grad - lam).max(initial=0.0)),
        primal_feasibility=float(np.linalg.norm(problem.C @ sol.l - problem.d)),
        min_l=float(sol.l.min(initial=0.0)),
        complementarity=float(np.abs(lam * sol.l).max(initial=0.0)),
    )
