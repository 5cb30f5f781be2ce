"""Personalized PageRank.

Convention: ``P`` is row-stochastic (``P[i, j]`` is the probability of
moving ``i -> j``) and distributions are column vectors updated by

    pi <- alpha * P.T @ pi + (1 - alpha) * restart

so the fixed point is ``pi = (1 - alpha) * inv(I - alpha * P.T) @ restart``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy import sparse
from scipy.sparse import linalg as splinalg

from pprsr.errors import InvariantError
from pprsr.graph import TransitionMatrix

DIST_TOL = 1e-12
MAX_DENSE_N = 10_000


class NonConvergenceWarning(RuntimeWarning):
    pass


def as_distribution(values, n: int | None = None, tol: float = DIST_TOL) -> np.ndarray:
    """Validate ``values`` as a probability vector and return a read-only copy.

    Raises :class:`InvariantError` on negative entries, wrong length or a
    total mass off 1 by more than ``tol``.
    """
    v = np.array(values, dtype=float).ravel()
    if n is not None and v.size != n:
        raise InvariantError(f"distribution has length {v.size}, expected {n}")
    if v.size == 0 or not np.all(np.isfinite(v)):
        raise InvariantError("distribution must be a non-empty finite vector")
    if v.min() < 0:
        raise InvariantError(f"distribution has negative entry {v.min()!r}")
    if abs(v.sum() - 1.0) > tol:
        raise InvariantError(f"distribution sums to {v.sum()!r}, not 1")
    v.setflags(write=False)
    return v


def one_hot(n: int, i: int) -> np.ndarray:
    if not 0 <= i < n:
        raise InvariantError(f"node {i} out of range [0, {n})")
    v = np.zeros(n)
    v[i] = 1.0
    return v


@dataclass(frozen=True)
class PPRConfig:
    """``alpha`` is the continuation probability; ``1 - alpha`` restarts."""

    alpha: float = 0.85
    tolerance: float = 1e-10
    max_iters: int = 10_000

    def __post_init__(self):
        if not 0.0 <= self.alpha < 1.0:
            raise InvariantError(f"alpha must lie in [0, 1), got {self.alpha}")
        if not self.tolerance > 0:
            raise InvariantError("tolerance must be positive")
        if int(self.max_iters) < 1:
            raise InvariantError("max_iters must be a positive integer")


@dataclass(frozen=True, eq=False)
class PPRSolution:
    pi: np.ndarray
    iterations: int
    final_residual: float
    converged: bool = True
    residuals: tuple[float, ...] = field(default=(), repr=False)


def _check_dims(P: TransitionMatrix, restart) -> np.ndarray:
    return as_distribution(restart, P.n)


def teleport_matrix(
    P: TransitionMatrix, cfg: PPRConfig, restart
) -> TransitionMatrix:
    """Teleporting chain ``alpha * P + (1 - alpha) * 1 restart^T`` (dense)."""
    p = _check_dims(P, restart)
    a = cfg.alpha
    return TransitionMatrix(a * P.dense() + (1.0 - a) * p[None, :])


def _fixed_point_map(PT, a, p, pi):
    return a * (PT @ pi) + (1.0 - a) * p


def ppr_power_iteration(
    P: TransitionMatrix, cfg: PPRConfig, restart
) -> PPRSolution:
    """Fixed-point iteration from ``pi_0 = restart``.

    Stops once the L1 change between successive iterates is at most
    ``cfg.tolerance``. ``residuals[t]`` is ``||pi_{t+1} - pi_t||_1``. If
    ``max_iters`` is exhausted the last iterate is returned with
    ``converged=False`` and a :class:`NonConvergenceWarning` is emitted.
    """
    p = _check_dims(P, restart)
    a = cfg.alpha
    PT = P.entries.T.tocsr() if P.is_sparse else P.entries.T
    pi = p.copy()
    residuals = []
    for t in range(1, int(cfg.max_iters) + 1):
        nxt = _fixed_point_map(PT, a, p, pi)
        # mass is preserved exactly in exact arithmetic; only guard float drift
        nxt /= nxt.sum()
        res = float(np.abs(nxt - pi).sum())
        residuals.append(res)
        pi = nxt
        if res <= cfg.tolerance:
            return PPRSolution(pi, t, res, True, tuple(residuals))
    warnings.warn(
        f"PPR power iteration did not reach tolerance {cfg.tolerance:g} "
        f"in {cfg.max_iters} iterations (residual {residuals[-1]:.3e})",
        NonConvergenceWarning,
        stacklevel=2,
    )
    return PPRSolution(pi, int(cfg.max_iters), residuals[-1], False, tuple(residuals))


def ppr_exact(P: TransitionMatrix, cfg: PPRConfig, restart) -> PPRSolution:
    """Direct solve of ``(I - alpha P^T) pi = (1 - alpha) restart`` by LU."""
    p = _check_dims(P, restart)
    n, a = P.n, cfg.alpha
    if n > MAX_DENSE_N:
        raise ValueError(f"n={n} exceeds the direct-solve limit of {MAX_DENSE_N}")
    rhs = (1.0 - a) * p
    if P.is_sparse:
        A = (sparse.identity(n, format="csc") - a * P.entries.T).tocsc()
        pi = splinalg.splu(A).solve(rhs)
    else:
        A = np.eye(n) - a * P.entries.T
        pi = scipy.linalg.lu_solve(scipy.linalg.lu_factor(A, check_finite=False), rhs)
    if not np.all(np.isfinite(pi)):
        raise InvariantError("singular PPR system; transition matrix is not stochastic")
    # entries can dip below zero by O(eps) in the solve
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    PT = P.entries.T
    res = float(np.abs(pi - _fixed_point_map(PT, a, p, pi)).sum())
    return PPRSolution(pi, 0, res, True)
