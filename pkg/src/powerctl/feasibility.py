"""
Fixed-direction max-min solver.

For a contribution-weight vector ``x`` on the unit simplex, find the largest
``t`` such that the SINR targets ``U_l^{-1}(t * x_l)`` can be met jointly
within the power caps.  Links with ``x_l = 0`` carry no constraint.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import NetworkInstance

__all__ = [
    "Feasibility",
    "MaxMinSolution",
    "feasible_for_targets",
    "interference_mapping",
    "maxmin_solve",
    "check_direction",
]

REL_TOL = 1e-10
MAX_ITER = 100_000


@dataclass(frozen=True)
class Feasibility:
    feasible: bool
    p_min: np.ndarray | None
    iterations: int


@dataclass(frozen=True)
class MaxMinSolution:
    t_star: float
    p_star: np.ndarray
    iterations: int


def check_direction(x, L=None, atol=1e-9) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or (L is not None and x.shape[0] != L):
        raise ValueError(f"direction must be a vector of length {L}")
    if np.any(x < 0) or np.any(x > 1):
        raise ValueError("direction entries must lie in [0, 1]")
    if abs(x.sum() - 1.0) > atol:
        raise ValueError(f"direction must sum to 1, got {x.sum()!r}")
    return x


def interference_mapping(inst: NetworkInstance, gamma_targets, p) -> np.ndarray:
    """Power each link needs to reach its target against interference ``p``."""
    return gamma_targets * inst.interference(p) / inst.direct_gains


def feasible_for_targets(inst: NetworkInstance, gamma_targets, rel_tol=REL_TOL,
                         max_iter=MAX_ITER) -> Feasibility:
    """Decide whether SINR targets are supportable under the power caps.

    Iterates the target interference mapping from zero power; the iterates
    increase monotonically to the componentwise-minimal solution when one
    exists.  Exceeding ``p_max`` or hitting ``max_iter`` means infeasible.
    """
    g = np.asarray(gamma_targets, dtype=float)
    if g.shape != (inst.L,):
        raise ValueError(f"need {inst.L} targets")
    if not np.all(np.isfinite(g)) or np.any(g < 0):
        raise ValueError("SINR targets must be finite and nonnegative")
    p = np.zeros(inst.L)
    if not np.any(g > 0):
        return Feasibility(True, p, 0)
    # the mapping is affine in p: p <- b + A p
    scale = g / inst.direct_gains
    A = scale[:, None] * inst.cross_gains.T
    b = scale * inst.noise
    cap = inst.p_max
    for it in range(1, max_iter + 1):
        p_new = b + A @ p
        if (p_new > cap).any():
            return Feasibility(False, None, it)
        if (np.abs(p_new - p) <= rel_tol * p_new).all():
            return Feasibility(True, p_new, it)
        p = p_new
    return Feasibility(False, None, max_iter)


def _upper_bracket(inst, spec, x):
    sole = spec.evaluate(inst.sole_transmitter_sinr())
    active = x > 0
    return float(np.min(sole[active] / x[active]))


def maxmin_solve(inst: NetworkInstance, spec, x, tol=1e-6) -> MaxMinSolution:
    """Largest ``t`` such that ``U_l(gamma_l) >= t x_l`` is supportable.

    Bisection over ``[0, t_hi]``; ``t_hi = min_l U_l(sole)/x_l`` over active
    links, since no link can beat its interference-free full-power utility.
    Stops once the bracket is narrower than ``tol``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    x = np.asarray(x, dtype=float)
    if x.shape != (inst.L,) or np.any(x < 0):
        raise ValueError("invalid direction")
    if not np.any(x > 0):
        raise ValueError("direction must have at least one positive entry")
    lo, hi = 0.0, _upper_bracket(inst, spec, x)
    p_lo = np.zeros(inst.L)
    steps = 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        res = feasible_for_targets(inst, spec.inverse(mid * x))
        steps += 1
        if res.feasible:
            lo, p_lo = mid, res.p_min
        else:
            hi = mid
    return MaxMinSolution(lo, p_lo, steps)
