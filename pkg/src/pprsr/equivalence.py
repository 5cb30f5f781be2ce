"""PPR as a successor-representation value.

With the discount equal to the continuation probability and the same
transition matrix,

    pi* = (1 - alpha) * M.T @ restart,

i.e. ``pi*[j] = (1 - alpha) * sum_i restart[i] * M[i, j]``. The transpose
comes from ``P`` being row-stochastic while distributions are columns. The
``1 - alpha`` factor normalizes the discounted visit counts of ``M`` (rows
sum to ``1 / (1 - alpha)``) into a probability distribution.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from pprsr.errors import InvariantError
from pprsr.graph import TransitionMatrix
from pprsr.ppr import PPRConfig, as_distribution, ppr_exact, ppr_power_iteration
from pprsr.successor import SuccessorMatrix, sr_invert, value_function

# looser than DIST_TOL: M carries O(cond * eps) error for alpha near 1
_SR_MASS_TOL = 1e-9


def ppr_from_sr(M: SuccessorMatrix, alpha: float, restart) -> np.ndarray:
    """Recover the PPR distribution from a successor matrix.

    Raises :class:`InvariantError` when ``M`` was built with a different
    discount or the result is not a probability vector, both of which mean
    ``M`` does not belong to this ``alpha``.
    """
    if not np.isclose(M.gamma, alpha, rtol=0.0, atol=1e-15):
        raise InvariantError(f"M has gamma={M.gamma}, expected alpha={alpha}")
    p = as_distribution(restart, M.n)
    pi = (1.0 - alpha) * (M.entries.T @ p)
    return as_distribution(np.clip(pi, 0.0, None), tol=_SR_MASS_TOL)


def reward_from_restart(restart, alpha: float) -> np.ndarray:
    """Reward ``(1 - alpha) * restart`` whose SR value reproduces PPR."""
    return (1.0 - alpha) * np.asarray(restart, dtype=float)


@dataclass(frozen=True)
class EquivalenceReport:
    n: int
    alpha: float
    residual_l1: float
    residual_linf: float
    iterative_residual_l1: float
    tolerance: float
    passed: bool
    value_residual_l1: float = 0.0
    iterations: int = 0

    def to_dict(self) -> dict:
        d = asdict(self)
        return {
            k: d[k]
            for k in (
                "n",
                "alpha",
                "residual_l1",
                "residual_linf",
                "iterative_residual_l1",
                "tolerance",
                "passed",
            )
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "EquivalenceReport":
        return cls(**json.loads(text))


def check_equivalence(
    P: TransitionMatrix,
    alpha: float,
    restart,
    tolerance: float = 1e-10,
    *,
    power_tolerance: float = 1e-10,
    max_iters: int = 10_000,
) -> EquivalenceReport:
    """Cross-check PPR against the successor representation on one chain.

    The PPR side solves ``(I - alpha P^T) pi = (1 - alpha) p`` and the SR side
    factors ``I - alpha P`` and applies ``M^T``, so the two do not share a
    linear system. Power iteration is run as a third, independent route.
    Failures are reported through ``passed``; nothing is raised for them.
    """
    cfg = PPRConfig(alpha, power_tolerance, max_iters)
    p = as_distribution(restart, P.n)
    exact = ppr_exact(P, cfg, p).pi
    power = ppr_power_iteration(P, cfg, p)
    M = sr_invert(P, alpha)
    try:
        via_sr = ppr_from_sr(M, alpha, p)
    except InvariantError:
        via_sr = (1.0 - alpha) * (M.entries.T @ p)
    diff = exact - via_sr
    residual_l1 = float(np.abs(diff).sum())

    # the same identity read as a value function of the transposed chain
    v = value_function(M, reward_from_restart(p, alpha), transpose=True)

    return EquivalenceReport(
        n=P.n,
        alpha=float(alpha),
        residual_l1=residual_l1,
        residual_linf=float(np.abs(diff).max()),
        iterative_residual_l1=float(np.abs(power.pi - exact).sum()),
        tolerance=float(tolerance),
        passed=bool(residual_l1 <= tolerance),
        value_residual_l1=float(np.abs(v - exact).sum()),
        iterations=power.iterations,
    )
