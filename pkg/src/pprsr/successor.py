"""Successor representation ``M = sum_t gamma^t T^t = inv(I - gamma T)``.

``M[x, y]`` is the expected discounted number of visits to ``y`` starting
from ``x`` (the ``t = 0`` visit included), so each row of the exact ``M``
sums to ``1 / (1 - gamma)`` and ``V = M @ r`` is the value function for the
state reward ``r``.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from pprsr.errors import InvariantError
from pprsr.graph import TransitionMatrix

MAX_DENSE_N = 10_000
ROW_SUM_TOL = 1e-8
METHODS = ("invert", "series", "td")


@dataclass(frozen=True)
class SRConfig:
    """How to build a successor matrix.

    ``horizon`` is used by ``series``; ``eta``, ``steps`` and ``seed`` by
    ``td``.
    """

    gamma: float
    method: str = "invert"
    horizon: int = 100
    eta: float = 0.05
    steps: int = 100_000
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise InvariantError(f"gamma must lie in [0, 1), got {self.gamma}")
        if self.method not in METHODS:
            raise InvariantError(f"unknown SR method {self.method!r}")
        if self.horizon < 0:
            raise InvariantError("horizon must be >= 0")
        if not 0.0 < self.eta <= 1.0:
            raise InvariantError(f"eta must lie in (0, 1], got {self.eta}")


@dataclass(frozen=True, eq=False)
class SuccessorMatrix:
    entries: np.ndarray
    gamma: float
    method: str = "invert"
    horizon: int | None = None
    steps: int | None = None

    def __post_init__(self):
        M = np.array(self.entries, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise InvariantError(f"successor matrix must be square, got {M.shape}")
        if not np.all(np.isfinite(M)):
            raise InvariantError("successor matrix has non-finite entries")
        if M.min() < -1e-12:
            raise InvariantError(f"successor matrix has negative entry {M.min()!r}")
        if np.diag(M).min() < 1.0 - 1e-12:
            raise InvariantError("successor matrix diagonal must be >= 1")
        M.setflags(write=False)
        object.__setattr__(self, "entries", M)
        err = self.row_sum_error()
        if self.method != "td" and err > ROW_SUM_TOL:
            raise InvariantError(f"successor row sums off by {err:.3e}")

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def expected_row_sum(self) -> float:
        g = self.gamma
        if self.method == "series":
            return (1.0 - g ** (self.horizon + 1)) / (1.0 - g)
        return 1.0 / (1.0 - g)

    def row_sum_error(self) -> float:
        return float(np.abs(self.entries.sum(axis=1) - self.expected_row_sum()).max())


def _guard(T: TransitionMatrix, gamma: float):
    if not 0.0 <= gamma < 1.0:
        raise InvariantError(f"gamma must lie in [0, 1), got {gamma}")
    if T.n > MAX_DENSE_N:
        raise ValueError(f"n={T.n} exceeds the dense limit of {MAX_DENSE_N}")


def sr_invert(T: TransitionMatrix, gamma: float) -> SuccessorMatrix:
    """Solve ``(I - gamma T) M = I`` with one LU factorization."""
    _guard(T, gamma)
    n = T.n
    lu = scipy.linalg.lu_factor(np.eye(n) - gamma * T.dense(), check_finite=False)
    M = scipy.linalg.lu_solve(lu, np.eye(n))
    if not np.all(np.isfinite(M)):
        raise InvariantError("singular SR system; transition matrix is not stochastic")
    return SuccessorMatrix(np.clip(M, 0.0, None), gamma, "invert")


def sr_series(T: TransitionMatrix, gamma: float, horizon: int) -> SuccessorMatrix:
    """Truncated series ``sum_{t=0}^{horizon} gamma^t T^t``.

    Every entry of the omitted tail is bounded by
    ``gamma**(horizon + 1) / (1 - gamma)``.
    """
    _guard(T, gamma)
    if horizon < 0:
        raise InvariantError("horizon must be >= 0")
    P = T.dense()
    term = np.eye(T.n)
    M = term.copy()
    for _ in range(int(horizon)):
        term = gamma * (term @ P)
        M += term
    return SuccessorMatrix(M, gamma, "series", horizon=int(horizon))


def sr_td(T: TransitionMatrix, cfg: SRConfig) -> SuccessorMatrix:
    """Online tabular TD learning of ``M`` along one sampled trajectory.

    Starts at ``M = I`` and a uniformly drawn state, then for each sampled
    transition ``x -> x'`` applies

        M[x] += eta * (onehot(x) + gamma * M[x'] - M[x])

    using the current (already updated) ``M[x']``.
    """
    _guard(T, cfg.gamma)
    if cfg.steps < 1:
        raise InvariantError("TD needs at least one step")
    n, g, eta = T.n, cfg.gamma, cfg.eta
    P = T.dense()
    cdf = [list(np.cumsum(row)) for row in P]
    last = [int(np.flatnonzero(row)[-1]) for row in P]
    rng = np.random.default_rng(cfg.seed)
    u = rng.random(cfg.steps)
    x = int(rng.integers(n))
    M = np.eye(n)
    keep = 1.0 - eta
    for t in range(cfg.steps):
        # clamp guards cumsum rounding just below 1
        nxt = min(bisect.bisect_right(cdf[x], u[t]), last[x])
        target = g * M[nxt]
        target[x] += 1.0
        M[x] *= keep
        M[x] += eta * target
        x = nxt
    return SuccessorMatrix(M, g, "td", steps=int(cfg.steps))


def successor_matrix(T: TransitionMatrix, cfg: SRConfig) -> SuccessorMatrix:
    if cfg.method == "invert":
        return sr_invert(T, cfg.gamma)
    if cfg.method == "series":
        return sr_series(T, cfg.gamma, cfg.horizon)
    return sr_td(T, cfg)


def value_function(M: SuccessorMatrix, reward, transpose: bool = False) -> np.ndarray:
    """``V = M @ r``, or ``M.T @ r`` with ``transpose=True``."""
    r = np.asarray(reward, dtype=float).ravel()
    if r.size != M.n:
        raise InvariantError(f"reward has length {r.size}, expected {M.n}")
    if not np.all(np.isfinite(r)):
        raise InvariantError("reward has non-finite entries")
    return (M.entries.T if transpose else M.entries) @ r
