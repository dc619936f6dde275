"""
Simulated-annealing kernel shared by the unicast and multicast solvers:
cooling schedules, the Metropolis acceptance rule, the penalized
(extended-dual) Lagrangian and penalty-multiplier management.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .model import utility_vector

__all__ = [
    "CoolingSchedule",
    "PenaltyState",
    "SaDecision",
    "PenaltyConditionError",
    "temperature",
    "epochs_until",
    "sa_accept",
    "lagrangian_unicast",
    "unicast_violations",
    "penalty_update",
    "penalty_scale_down",
    "record_violation",
]


@dataclass(frozen=True)
class CoolingSchedule:
    """Temperature law: ``logarithmic`` (T0 / ln(i+1)) or ``geometric`` (T0 xi^i)."""

    kind: str = "geometric"
    T0: float = 1.0
    xi: float = 0.9

    def __post_init__(self):
        if self.kind not in ("logarithmic", "geometric"):
            raise ValueError(f"unknown cooling schedule {self.kind!r}")
        if self.T0 <= 0:
            raise ValueError("T0 must be positive")
        if self.kind == "geometric" and not 0 < self.xi < 1:
            raise ValueError("xi must lie in (0, 1)")

    @classmethod
    def logarithmic(cls, T0=1.0):
        return cls("logarithmic", T0)

    @classmethod
    def geometric(cls, T0=1.0, xi=0.9):
        return cls("geometric", T0, xi)


def temperature(s: CoolingSchedule, i: int) -> float:
    if i < 0 or (s.kind == "logarithmic" and i < 1):
        raise ValueError(f"epoch index {i} out of range for {s.kind} schedule")
    if s.kind == "geometric":
        return s.T0 * s.xi ** i
    return s.T0 / math.log(i + 1)


def epochs_until(s: CoolingSchedule, eps: float) -> int:
    """Index of the first epoch whose temperature is below ``eps``."""
    if s.kind == "geometric":
        if s.T0 < eps:
            return 0
        n = math.ceil(math.log(eps / s.T0) / math.log(s.xi))
        # guard the float boundary in both directions
        while temperature(s, n) >= eps:
            n += 1
        while n > 0 and temperature(s, n - 1) < eps:
            n -= 1
        return n
    n = max(1, math.floor(math.exp(s.T0 / eps)) - 1)
    while temperature(s, n) >= eps:
        n += 1
    while n > 1 and temperature(s, n - 1) < eps:
        n -= 1
    return n


@dataclass(frozen=True)
class SaDecision:
    delta: float
    temperature: float
    accepted: bool
    uniform_draw: float


def sa_accept(delta: float, T: float, draw: float) -> SaDecision:
    """Metropolis rule: improvements (``delta >= 0``) always pass."""
    if T <= 0:
        raise ValueError("temperature must be positive")
    accepted = delta >= 0 or draw < math.exp(delta / T)
    return SaDecision(delta, T, bool(accepted), draw)


@dataclass(frozen=True)
class PenaltyState:
    """Penalty multipliers and the bookkeeping for their scale-down rule."""

    alpha: float
    beta: np.ndarray
    sigma: float = 1.0
    varrho: np.ndarray | float = 1.0
    stall_counter: int = 0
    stall_limit: int = 5
    scale_low: float = 0.7
    scale_high: float = 0.95
    last_violation: float = math.inf

    def __post_init__(self):
        beta = np.array(self.beta, dtype=float)
        varrho = np.broadcast_to(np.asarray(self.varrho, dtype=float), beta.shape).copy()
        if self.alpha < 0 or not math.isfinite(self.alpha):
            raise ValueError("alpha must be finite and nonnegative")
        if np.any(beta < 0) or not np.all(np.isfinite(beta)):
            raise ValueError("beta must be finite and nonnegative")
        if not 0 < self.scale_low <= self.scale_high < 1:
            raise ValueError("need 0 < scale_low <= scale_high < 1")
        beta.setflags(write=False)
        varrho.setflags(write=False)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "varrho", varrho)

    @classmethod
    def zeros(cls, L, **kw):
        return cls(0.0, np.zeros(L), **kw)

    @property
    def scale_down_due(self) -> bool:
        return self.stall_counter >= self.stall_limit


class PenaltyConditionError(RuntimeError):
    """Scale-down requested while the penalty decrease condition does not hold."""


def _hinge(v):
    return np.maximum(v, 0.0)


def unicast_violations(x, t, utilities):
    """Simplex violation ``|sum x - 1|`` and per-link ``(t_l x_l - U_l)^+``."""
    x = np.asarray(x, dtype=float)
    return abs(x.sum() - 1.0), _hinge(np.asarray(t) * x - np.asarray(utilities))


def lagrangian_unicast(inst, spec, p, x, t, ps: PenaltyState) -> float:
    """Penalized Lagrangian of the max-min problem.

    ``-min_l t_l + alpha |sum x - 1| + sum_l beta_l (t_l x_l - U_l)^+``
    """
    util = utility_vector(inst, spec, p)
    simplex_v, link_v = unicast_violations(x, t, util)
    return float(-np.min(t) + ps.alpha * simplex_v + ps.beta @ link_v)


def penalty_update(ps: PenaltyState, x, t, utilities) -> PenaltyState:
    """Raise each multiplier in proportion to its constraint violation."""
    simplex_v, link_v = unicast_violations(x, t, utilities)
    if simplex_v == 0 and not np.any(link_v > 0):
        return ps
    return replace(ps, alpha=ps.alpha + ps.sigma * simplex_v, beta=ps.beta + ps.varrho * link_v)


def record_violation(ps: PenaltyState, max_violation: float) -> PenaltyState:
    """Track the penalty decrease condition after a completed annealing phase.

    The stall counter grows whenever the maximum violation fails to strictly
    decrease, and resets otherwise.
    """
    stalled = not max_violation < ps.last_violation
    counter = ps.stall_counter + 1 if stalled else 0
    return replace(ps, stall_counter=counter, last_violation=max_violation)


def penalty_scale_down(ps: PenaltyState, rng: np.random.Generator) -> PenaltyState:
    """Shrink every multiplier by an independent factor in ``[scale_low, scale_high]``."""
    if not ps.scale_down_due:
        raise PenaltyConditionError(
            f"stall counter {ps.stall_counter} below limit {ps.stall_limit}")
    draws = rng.uniform(ps.scale_low, ps.scale_high, size=1 + ps.beta.size)
    return replace(ps, alpha=ps.alpha * draws[0], beta=ps.beta * draws[1:], stall_counter=0)
