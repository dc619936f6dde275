"""
Distributed stochastic power control (DSPC) and its enhanced variant (EDSPC).

Each link runs an agent that only observes its own SINR feedback, its own
transmit power and the messages on an idealized broadcast bus.  Agents
anneal their target-utility ratio ``t_l`` and contribution weight ``x_l``;
between proposals the powers settle on a fast timescale through the
SINR-driven update ``p_l <- min(gamma_target_l / gamma_l * p_l, p_max_l)``.

The penalized Lagrangian being minimized is::

    -min_l t_l + alpha |sum_l x_l - 1| + sum_l beta_l (t_l x_l - U_l)^+

Every link's ``t_l`` enters the min; a link with ``x_l = 0`` has a vacuous
utility constraint, so its ``t_l`` is free to sit above the others.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from ._kernels import RESTART_FRACTION, settle_unicast
from ._rng import streams
from .annealing import (
    CoolingSchedule,
    PenaltyState,
    epochs_until,
    penalty_scale_down,
    penalty_update,
    record_violation,
    sa_accept,
    temperature,
    unicast_violations,
)
from .model import sinr_vector

log = logging.getLogger(__name__)

__all__ = [
    "AgentState",
    "BroadcastBus",
    "DspcConfig",
    "DspcResult",
    "InnerLoopResult",
    "TRACE_COLUMNS",
    "sinr_power_update",
    "inner_power_loop",
    "propose",
    "penalty_term",
    "delta",
    "run_dspc",
    "run_edspc",
    "default_t_max",
    "reaching_epoch",
    "settling_epoch",
    "settling_step",
]

_TINY = 1e-300

TRACE_COLUMNS = ("epoch", "agent", "accepted", "T", "total_utility", "lagrangian",
                 "alpha", "max_beta", "max_violation")


# ---------------------------------------------------------------------------
# agent-side rules: nothing here sees channel gains
# ---------------------------------------------------------------------------

def sinr_power_update(target_sinr, gamma, p, p_max):
    """One SINR-feedback power step for each agent.

    Each component uses only that link's target, measured SINR, current
    power and cap.  A link at zero power with a positive target restarts
    from ``1e-6 * p_max`` since the multiplicative rule cannot leave zero.
    """
    # zero targets give zero power; gamma > 0 wherever p > 0
    p_new = np.minimum(target_sinr * (p / np.maximum(gamma, _TINY)), p_max)
    stuck = (p <= 0) & (target_sinr > 0)
    if stuck.any():
        p_new[stuck] = RESTART_FRACTION * p_max[stuck]
    return p_new


def penalty_term(beta_l, t_l, x_l, utility_l):
    """The message ``beta_l (t_l x_l - U_l)^+`` an agent broadcasts."""
    return beta_l * max(t_l * x_l - utility_l, 0.0)


@dataclass
class AgentState:
    link: int
    t: float
    x: float
    p: float
    beta: float
    alpha: float
    last_violation: float = math.inf


class BroadcastBus:
    """Latest announcement of every agent, delivered to all immediately."""

    def __init__(self, t, x, penalty):
        self.t = np.array(t, dtype=float)
        self.x = np.array(x, dtype=float)
        self.penalty = np.array(penalty, dtype=float)

    def announce(self, link, t=None, x=None, penalty=None):
        if t is not None:
            self.t[link] = t
        if x is not None:
            self.x[link] = x
        if penalty is not None:
            self.penalty[link] = penalty

    def lagrangian(self, alpha):
        """Lagrangian as any agent reconstructs it from the bus."""
        return float(-self.t.min() + alpha * abs(self.x.sum() - 1.0) + self.penalty.sum())

    def copy(self):
        return BroadcastBus(self.t, self.x, self.penalty)


def propose(agent: AgentState, rng, cfg: "DspcConfig", t_max: float, mode: str | None = None,
            radius: float | None = None):
    """Draw a candidate ``(t', x')`` for one agent.

    ``global`` samples the whole box ``[0, t_max] x [0, 1]``; ``neighborhood``
    samples a sup-norm ball of relative radius ``radius`` (default
    ``cfg.radius``) around the current values and clips to the box.  A
    neighborhood move perturbs ``t`` alone, ``x`` alone or both, each with
    probability 1/3.
    """
    mode = mode or cfg.proposal
    u = rng.random(3)
    if mode == "global":
        return u[0] * t_max, u[1]
    if mode != "neighborhood":
        raise ValueError(f"unknown proposal mode {mode!r}")
    r = cfg.radius if radius is None else radius
    which = int(3 * u[2])
    t_new = agent.t + (2 * u[0] - 1) * r * t_max if which != 1 else agent.t
    x_new = agent.x + (2 * u[1] - 1) * r if which != 0 else agent.x
    return min(max(t_new, 0.0), t_max), min(max(x_new, 0.0), 1.0)


# ---------------------------------------------------------------------------
# fast timescale
# ---------------------------------------------------------------------------

@dataclass
class InnerLoopResult:
    p: np.ndarray
    iterations: int
    converged: bool
    residuals: np.ndarray | None = None


def inner_power_loop(inst, spec, targets, p_start, tol=1e-8, max_iter=10_000,
                     history=False) -> InnerLoopResult:
    """Run the SINR-feedback power update until the powers settle.

    ``targets`` are per-link utility targets ``t_l x_l``.  All links update
    synchronously from the SINRs measured at the previous step.  Stops when
    the largest relative power change drops below ``tol``.
    """
    targets = np.asarray(targets, dtype=float)
    if np.any(targets < 0):
        raise ValueError("utility targets must be nonnegative")
    target_sinr = np.asarray(spec.inverse(targets), dtype=float)
    p0 = np.array(p_start, dtype=float)
    residuals = np.zeros(max_iter if history else 0)
    p, iters, converged = settle_unicast(target_sinr, p0, inst.p_max, inst.direct_gains,
                                         inst.cross_gains, inst.noise, tol, max_iter, residuals)
    return InnerLoopResult(p, iters, converged, residuals[:iters] if history else None)


def delta(inst, spec, bus: BroadcastBus, agents, link, proposal, p_new) -> float:
    """Lagrangian decrease from accepting ``proposal`` for agent ``link``.

    The old value comes from the current bus.  For the new value every agent
    re-broadcasts its penalty term from the SINR it measures at ``p_new``;
    the proposer uses its candidate ``(t', x')``.  Positive means improvement.
    """
    alpha = agents[link].alpha
    old = bus.lagrangian(alpha)
    trial = _trial_bus(inst, spec, bus, agents, link, proposal, p_new)[0]
    return old - trial.lagrangian(alpha)


def _trial_bus(inst, spec, bus, agents, link, proposal, p_new):
    util = spec.evaluate(sinr_vector(inst, p_new))
    trial = bus.copy()
    trial.t[link], trial.x[link] = proposal
    beta = np.fromiter((a.beta for a in agents), float, len(agents))
    trial.penalty = beta * np.maximum(trial.t * trial.x - util, 0.0)
    return trial, util


# ---------------------------------------------------------------------------
# configuration and results
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DspcConfig:
    """Parameters of a DSPC or EDSPC run.

    ``moves_per_epoch`` proposals are made at each temperature level.  With
    ``proposal="adaptive"`` the first outer round samples globally and later
    rounds use the neighborhood of radius ``radius`` (relative to each
    variable's range), shrinking with the temperature when
    ``radius_follows_temperature`` is set; a fraction ``radius_mix`` of the
    moves keeps the full radius.  ``t_max=None`` uses the sum of
    sole-transmitter utilities.

    With ``relative_temperature`` the schedule and ``epsilon`` are measured in
    units of ``t_max``, so one configuration serves instances whose
    utilities differ in scale.  Unset ``alpha0``/``beta0`` start at
    ``penalty_scale * t_max``.  ``report="best"`` returns the highest-utility
    state seen whose violations are within ``violation_tol``; ``keep_best``
    ends every annealing phase in its lowest-Lagrangian state.
    """

    schedule: CoolingSchedule = field(default_factory=lambda: CoolingSchedule.logarithmic(0.1))
    epsilon: float = 1 / 60
    relative_temperature: bool = True
    t_max: float | None = None
    proposal: str = "adaptive"
    radius: float = 0.7
    radius_follows_temperature: bool = True
    radius_power: float = 1.0
    radius_mix: float = 0.0
    moves_per_epoch: int = 10
    inner_tol: float = 1e-8
    inner_max_iter: int = 10_000
    sigma: float = 1.0
    varrho: float = 1.0
    stall_limit: int = 5
    scale_low: float = 0.7
    scale_high: float = 0.95
    alpha0: float | None = None
    beta0: float | None = None
    penalty_scale: float = 0.75
    max_rounds: int = 50
    violation_tol: float = 1e-2
    report: str = "best"
    keep_best: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.t_max is not None and self.t_max <= 0:
            raise ValueError("t_max must be positive")
        if self.proposal not in ("adaptive", "global", "neighborhood"):
            raise ValueError(f"unknown proposal mode {self.proposal!r}")
        if not 0 <= self.radius <= 1:
            raise ValueError("radius must lie in [0, 1]")
        if not 0 < self.scale_low <= self.scale_high < 1:
            raise ValueError("need 0 < scale_low <= scale_high < 1")
        if not 0 <= self.radius_mix <= 1:
            raise ValueError("radius_mix must lie in [0, 1]")
        if self.moves_per_epoch < 1 or self.max_rounds < 1:
            raise ValueError("moves_per_epoch and max_rounds must be >= 1")
        if self.report not in ("best", "final"):
            raise ValueError(f"unknown report mode {self.report!r}")
        if (self.alpha0 or 0) < 0 or (self.beta0 or 0) < 0 or self.penalty_scale < 0:
            raise ValueError("initial penalties must be nonnegative")

    def initial_penalties(self, t_max):
        """``(alpha0, beta0)``; unset values default to ``penalty_scale * t_max``."""
        fallback = self.penalty_scale * t_max
        return (fallback if self.alpha0 is None else self.alpha0,
                fallback if self.beta0 is None else self.beta0)

    @classmethod
    def multicast(cls, **kw):
        """Multicast preset: hotter start and neighborhood moves from the first round.

        Switching which group transmits crosses a wide barrier, so the
        relative starting temperature is five times the unicast default and
        half of the moves keep the full radius to the end.
        """
        base = dict(schedule=CoolingSchedule.logarithmic(0.5), epsilon=0.5 / 6,
                    proposal="neighborhood", radius_mix=0.5, moves_per_epoch=20)
        base.update(kw)
        return cls(**base)

    @classmethod
    def edspc(cls, **kw):
        """Enhanced preset: geometric cooling and fixed penalties of 10."""
        base = dict(schedule=CoolingSchedule.geometric(2.0, 0.9), epsilon=1e-3,
                    relative_temperature=False, alpha0=10.0, beta0=10.0, proposal="neighborhood",
                    moves_per_epoch=80)
        base.update(kw)
        return cls(**base)

    @classmethod
    def edspc_multicast(cls, **kw):
        """Enhanced preset for multicast: hotter start, half the moves at full radius."""
        base = dict(schedule=CoolingSchedule.geometric(4.0, 0.9), radius_mix=0.5)
        base.update(kw)
        return cls.edspc(**base)


@dataclass
class DspcResult:
    p: np.ndarray
    x: np.ndarray
    t: np.ndarray
    utility: float
    alpha: float
    beta: np.ndarray
    rounds: int
    epochs: int
    converged: bool
    warning: str | None
    inner_failures: int
    trace: np.ndarray
    agents: list = field(default_factory=list)

    def trace_rows(self):
        return [tuple(r) for r in self.trace.tolist()]


def default_t_max(inst, spec) -> float:
    return float(np.sum(spec.evaluate(inst.sole_transmitter_sinr())))


def _trace_array(rows):
    dtype = [(c, "i8" if c in ("epoch", "agent", "accepted") else "f8") for c in TRACE_COLUMNS]
    return np.array(rows, dtype=dtype)


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------

class _Network:
    """Seeded single-threaded event loop holding agents, bus and powers."""

    def __init__(self, inst, spec, cfg: DspcConfig, alpha, beta):
        self.inst, self.spec, self.cfg = inst, spec, cfg
        self.rng = streams(cfg.seed, "init", "proposals", "acceptance", "scheduler", "scale_down")
        self.t_max = cfg.t_max or default_t_max(inst, spec)
        L = inst.L
        init = self.rng["init"]
        t0 = init.uniform(0, self.t_max, L)
        x0 = init.uniform(0, 1, L)
        p0 = init.uniform(0, 1, L) * inst.p_max
        self.agents = [AgentState(l, t0[l], x0[l], p0[l], float(beta[l]), float(alpha))
                       for l in range(L)]
        loop = self._settle(t0 * x0, p0)
        self.p = loop.p
        self._sync_agents()
        util = self.utilities()
        pen = beta * np.maximum(t0 * x0 - util, 0.0)
        self.bus = BroadcastBus(t0, x0, pen)
        self.rows = []
        self.epoch = 0
        self.steps = 0
        self.inner_failures = 0
        self.best = None

    def _settle(self, targets, p_start):
        cfg = self.cfg
        return inner_power_loop(self.inst, self.spec, targets, p_start,
                                cfg.inner_tol, cfg.inner_max_iter)

    def _sync_agents(self):
        for a, p in zip(self.agents, self.p):
            a.p = float(p)

    def utilities(self, p=None):
        return self.spec.evaluate(sinr_vector(self.inst, self.p if p is None else p))

    @property
    def alpha(self):
        return self.agents[0].alpha

    @property
    def beta(self):
        return np.array([a.beta for a in self.agents])

    def set_penalties(self, ps: PenaltyState):
        for a, b in zip(self.agents, ps.beta):
            a.alpha, a.beta = ps.alpha, float(b)
        util = self.utilities()
        self.bus.penalty = ps.beta * np.maximum(self.bus.t * self.bus.x - util, 0.0)

    def violations(self):
        return unicast_violations(self.bus.x, self.bus.t, self.utilities())

    def max_violation(self):
        sv, lv = self.violations()
        return float(max(sv, lv.max()))

    def anneal(self, schedule, mode):
        """One annealing phase: cool from T0 until the temperature drops below epsilon."""
        cfg = self.cfg
        first = 1 if schedule.kind == "logarithmic" else 0
        last = epochs_until(schedule, cfg.epsilon)
        T_first = temperature(schedule, first)
        unit = self.t_max if cfg.relative_temperature else 1.0
        self.round_best = None
        for i in range(first, last):
            T = temperature(schedule, i)
            radius = cfg.radius * ((T / T_first) ** cfg.radius_power if cfg.radius_follows_temperature else 1.0)
            T = T * unit
            self.epoch += 1
            for _ in range(cfg.moves_per_epoch):
                self._step(T, mode, radius)
        if cfg.keep_best and self.round_best is not None:
            self._restore(self.round_best[1])

    def _snapshot(self):
        return (self.p.copy(), self.bus.copy(), [(a.t, a.x) for a in self.agents])

    def _restore(self, snap):
        p, bus, tx = snap
        self.p, self.bus = p.copy(), bus.copy()
        for a, (t, x) in zip(self.agents, tx):
            a.t, a.x = t, x
        self._sync_agents()

    def _step(self, T, mode, radius):
        rng = self.rng
        link = int(rng["scheduler"].integers(self.inst.L))
        agent = self.agents[link]
        if self.cfg.radius_mix and rng["proposals"].random() < self.cfg.radius_mix:
            radius = self.cfg.radius
        proposal = propose(agent, rng["proposals"], self.cfg, self.t_max, mode, radius)
        targets = self.bus.t * self.bus.x
        targets[link] = proposal[0] * proposal[1]
        loop = self._settle(targets, self.p)
        if not loop.converged:
            self.inner_failures += 1
        trial, util = _trial_bus(self.inst, self.spec, self.bus, self.agents, link, proposal, loop.p)
        d = self.bus.lagrangian(agent.alpha) - trial.lagrangian(agent.alpha)
        decision = sa_accept(d, T, float(rng["acceptance"].random()))
        if decision.accepted:
            self.bus = trial
            self.p = loop.p
            agent.t, agent.x = proposal
            self._sync_agents()
        else:
            util = self.utilities()
        self.steps += 1
        lag = self.bus.lagrangian(agent.alpha)
        if self.cfg.keep_best and (self.round_best is None or lag < self.round_best[0]):
            self.round_best = (lag, self._snapshot())
        sv, lv = unicast_violations(self.bus.x, self.bus.t, util)
        maxv = float(max(sv, lv.max()))
        total = float(util.sum())
        if maxv <= self.cfg.violation_tol and (self.best is None or total > self.best[3]):
            self.best = (self.p.copy(), self.bus.x.copy(), self.bus.t.copy(), total)
        self.rows.append((self.epoch, link, int(decision.accepted), T, total,
                          self.bus.lagrangian(agent.alpha), agent.alpha,
                          float(max(a.beta for a in self.agents)), maxv))

    def state(self):
        return self.p.copy(), self.bus.x.copy(), self.bus.t.copy(), float(self.utilities().sum())

    def result(self, rounds, converged, warning, snapshot=None):
        p, x, t, u = snapshot or self.state()
        for a in self.agents:
            a.last_violation = self.max_violation()
        return DspcResult(p, x, t, u, self.alpha, self.beta, rounds, self.epoch, converged,
                          warning, self.inner_failures, _trace_array(self.rows),
                          [replace(a) for a in self.agents])


def run_dspc(inst, spec, cfg: DspcConfig | None = None) -> DspcResult:
    """Two-step DSPC: anneal the primal variables, then update penalties.

    Step 1 restarts the temperature at ``T0`` every round.  Step 2 raises the
    multipliers in proportion to the remaining violations and scales them
    down after ``stall_limit`` rounds without a strict decrease of the
    maximum violation.  Terminates once the maximum violation at Step 2
    entry is at most ``cfg.violation_tol``; after ``cfg.max_rounds`` rounds
    the best feasible state seen is returned with a warning.
    """
    cfg = cfg or DspcConfig()
    L = inst.L
    alpha0, beta0 = cfg.initial_penalties(cfg.t_max or default_t_max(inst, spec))
    ps = PenaltyState(alpha0, np.full(L, beta0), sigma=cfg.sigma, varrho=cfg.varrho,
                      stall_limit=cfg.stall_limit, scale_low=cfg.scale_low,
                      scale_high=cfg.scale_high)
    net = _Network(inst, spec, cfg, ps.alpha, ps.beta)
    for rnd in range(1, cfg.max_rounds + 1):
        mode = cfg.proposal
        if mode == "adaptive":
            mode = "global" if rnd == 1 else "neighborhood"
        net.anneal(cfg.schedule, mode)
        # Step 2
        maxv = net.max_violation()
        if maxv <= cfg.violation_tol:
            return net.result(rnd, True, None, net.best if cfg.report == "best" else None)
        ps = penalty_update(ps, net.bus.x, net.bus.t, net.utilities())
        ps = record_violation(ps, maxv)
        if ps.scale_down_due:
            ps = penalty_scale_down(ps, net.rng["scale_down"])
        net.set_penalties(ps)
    warning = f"no feasible point after {cfg.max_rounds} rounds"
    log.warning(warning)
    return net.result(cfg.max_rounds, False, warning, net.best)


def run_edspc(inst, spec, cfg: DspcConfig | None = None) -> DspcResult:
    """Single geometric-cooling annealing phase with fixed initial penalties."""
    cfg = cfg or DspcConfig.edspc()
    if cfg.alpha0 <= 0 or cfg.beta0 <= 0:
        raise ValueError("EDSPC needs positive initial penalties")
    L = inst.L
    net = _Network(inst, spec, cfg, cfg.alpha0, np.full(L, cfg.beta0))
    mode = "global" if cfg.proposal == "adaptive" else cfg.proposal
    net.anneal(cfg.schedule, mode)
    maxv = net.max_violation()
    best = net.best if cfg.report == "best" else None
    return net.result(1, maxv <= cfg.violation_tol or best is not None, None, best)


def settling_step(values, level) -> int | None:
    """First index from which ``values`` stays at or above ``level``."""
    values = np.asarray(values)
    below = np.flatnonzero(values < level)
    if below.size == 0:
        return 0
    if below[-1] == values.size - 1:
        return None
    return int(below[-1] + 1)


def reaching_epoch(result: DspcResult, level) -> int | None:
    """First epoch at which total utility reaches ``level``; None if it never does."""
    hit = np.flatnonzero(np.asarray(result.trace["total_utility"]) >= level)
    return int(result.trace["epoch"][hit[0]]) if hit.size else None


def settling_epoch(result: DspcResult, level) -> int | None:
    """Epoch from which total utility stays at or above ``level`` to the end."""
    k = settling_step(result.trace["total_utility"], level)
    return None if k is None else int(result.trace["epoch"][k])
