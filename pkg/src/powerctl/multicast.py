"""
Multicast power control: each group has one transmitter and several
receivers, and delivers at its bottleneck (minimum receiver) rate.

The annealed Lagrangian over group rates ``r`` is::

    -sum_l U_l(r_l) + sum_{l, m} alpha_lm (r_l - ln(1 + gamma_lm))^+
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ._kernels import RESTART_FRACTION, TINY, settle_multicast
from ._rng import streams
from .annealing import (
    PenaltyState,
    epochs_until,
    penalty_scale_down,
    record_violation,
    sa_accept,
    temperature,
)
from .dspc import DspcConfig, InnerLoopResult
from .model import MIN_DISTANCE, NetworkInstance

log = logging.getLogger(__name__)

__all__ = [
    "MulticastInstance",
    "MulticastState",
    "MulticastResult",
    "RateUtility",
    "receiver_sinr",
    "receiver_rates",
    "bottleneck_rate",
    "bottleneck_rates",
    "lagrangian_multicast",
    "multicast_power_update",
    "multicast_inner_loop",
    "run_dspc_multicast",
    "run_edspc_multicast",
    "MULTICAST_TRACE_COLUMNS",
]

MULTICAST_TRACE_COLUMNS = ("epoch", "agent", "accepted", "T", "total_utility", "lagrangian",
                           "max_alpha", "max_violation")


class RateUtility:
    """``U_l(r) = w_l r``; the identity utility by default."""

    def __init__(self, weights=None, L=None):
        if weights is None:
            weights = np.ones(L)
        self.weights = np.asarray(weights, dtype=float)

    def evaluate(self, r, link=None):
        w = self.weights if link is None else self.weights[link]
        return w * np.asarray(r)

    def inverse(self, u, link=None):
        w = self.weights if link is None else self.weights[link]
        return np.asarray(u) / w


@dataclass(frozen=True)
class MulticastInstance:
    """Multicast groups over a flat list of receivers.

    Parameters
    ----------
    G : (L, R) array
        ``G[k, m]`` is the gain from transmitter ``k`` to receiver ``m``.
    receivers : list of lists
        ``receivers[l]`` holds the receiver indices of group ``l``; every
        receiver belongs to exactly one group.
    noise : (R,) array
        Per-receiver noise.
    p_max : (L,) array
    weights : (L,) array, optional
    """

    G: np.ndarray
    receivers: tuple
    noise: np.ndarray
    p_max: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        G = np.array(self.G, dtype=float)
        if G.ndim != 2:
            raise ValueError("G must be an (L, R) matrix")
        L, R = G.shape
        groups = tuple(tuple(int(m) for m in grp) for grp in self.receivers)
        if len(groups) != L:
            raise ValueError(f"need receiver sets for {L} groups")
        if any(len(g) == 0 for g in groups):
            raise ValueError("every group needs at least one receiver")
        flat = sorted(m for g in groups for m in g)
        if flat != list(range(R)):
            raise ValueError("each receiver must belong to exactly one group")
        noise = np.broadcast_to(np.asarray(self.noise, dtype=float), (R,)).copy()
        p_max = np.broadcast_to(np.asarray(self.p_max, dtype=float), (L,)).copy()
        weights = np.ones(L) if self.weights is None else np.asarray(self.weights, dtype=float)
        if weights.shape != (L,):
            raise ValueError(f"weights must have length {L}")
        if not np.all(np.isfinite(G)) or np.any(G < 0):
            raise ValueError("gains must be finite and nonnegative")
        if np.any(noise <= 0) or np.any(p_max <= 0) or np.any(weights <= 0):
            raise ValueError("noise, p_max and weights must be positive")
        group_of = np.empty(R, dtype=np.int64)
        for l, g in enumerate(groups):
            group_of[list(g)] = l
        if np.any(G[group_of, np.arange(R)] <= 0):
            raise ValueError("own-group gains must be positive")
        # receivers reordered group by group for the compiled loop
        order = np.array([m for g in groups for m in g], dtype=np.int64)
        ptr = np.zeros(L + 1, dtype=np.int64)
        ptr[1:] = np.cumsum([len(g) for g in groups])
        cross = G.copy()
        cross[group_of, np.arange(R)] = 0.0
        for arr in (G, noise, p_max, weights):
            arr.setflags(write=False)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "receivers", groups)
        object.__setattr__(self, "noise", noise)
        object.__setattr__(self, "p_max", p_max)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "_group_of", group_of)
        object.__setattr__(self, "_own", G[group_of, np.arange(R)].copy())
        object.__setattr__(self, "_cross", cross)
        object.__setattr__(self, "_order", order)
        object.__setattr__(self, "_ptr", ptr)

    def __eq__(self, other):
        if not isinstance(other, MulticastInstance):
            return NotImplemented
        return self.receivers == other.receivers and all(
            np.array_equal(getattr(self, k), getattr(other, k))
            for k in ("G", "noise", "p_max", "weights"))

    __hash__ = None

    @property
    def L(self) -> int:
        return self.G.shape[0]

    @property
    def R(self) -> int:
        return self.G.shape[1]

    @property
    def group_of(self):
        return self._group_of

    @classmethod
    def from_unicast(cls, inst: NetworkInstance) -> "MulticastInstance":
        """One receiver per group, receiver ``l`` being link ``l``'s receiver."""
        return cls(inst.H, [[l] for l in range(inst.L)], inst.noise, inst.p_max)

    @classmethod
    def from_positions(cls, tx, rx_groups, noise, p_max, weights=None, exponent=4.0):
        tx = np.asarray(tx, dtype=float)
        rx = np.concatenate([np.asarray(g, dtype=float).reshape(-1, 2) for g in rx_groups])
        sizes = [len(g) for g in rx_groups]
        d = np.linalg.norm(tx[:, None, :] - rx[None, :, :], axis=-1)
        G = np.maximum(d, MIN_DISTANCE) ** (-exponent)
        starts = np.cumsum([0] + sizes)
        receivers = [list(range(starts[i], starts[i + 1])) for i in range(len(sizes))]
        return cls(G, receivers, noise, p_max, weights)

    @classmethod
    def random(cls, L, per_group, rng, area=10.0, noise=1e-4, p_max=1.0, weights=None):
        tx = rng.uniform(0, area, size=(L, 2))
        groups = [rng.uniform(0, area, size=(per_group, 2)) for _ in range(L)]
        return cls.from_positions(tx, groups, noise, p_max, weights)

    def sole_bottleneck_rates(self) -> np.ndarray:
        """Bottleneck rate of each group transmitting alone at full power."""
        snr = self._own * self.p_max[self._group_of] / self.noise
        rates = np.log1p(snr)
        return np.array([rates[list(g)].min() for g in self.receivers])

    # -- JSON -------------------------------------------------------------
    def to_dict(self) -> dict:
        groups = []
        for g in self.receivers:
            groups.append({
                "receivers": list(g),
                "gains_per_tx": self.G[:, list(g)].tolist(),
                "noise": self.noise[list(g)].tolist(),
            })
        return {"L": self.L, "p_max": self.p_max.tolist(), "weights": self.weights.tolist(),
                "groups": groups}

    @classmethod
    def from_dict(cls, data: dict) -> "MulticastInstance":
        unknown = set(data) - {"L", "p_max", "weights", "groups"}
        if unknown:
            raise ValueError(f"unknown multicast keys: {sorted(unknown)}")
        groups = data["groups"]
        L = len(groups)
        R = sum(len(g["receivers"]) for g in groups)
        G = np.zeros((L, R))
        noise = np.zeros(R)
        receivers = []
        for g in groups:
            ids = [int(m) for m in g["receivers"]]
            gains = np.asarray(g["gains_per_tx"], dtype=float)
            if gains.shape != (L, len(ids)):
                raise ValueError("gains_per_tx must be (transmitters x group receivers)")
            G[:, ids] = gains
            noise[ids] = g["noise"]
            receivers.append(ids)
        if "L" in data and data["L"] != L:
            raise ValueError("declared L does not match groups")
        return cls(G, receivers, noise, data["p_max"], data.get("weights"))

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class MulticastState:
    p: np.ndarray
    r: np.ndarray
    alpha: np.ndarray

    def __post_init__(self):
        if np.any(np.asarray(self.r) < 0) or np.any(np.asarray(self.alpha) < 0):
            raise ValueError("rates and multipliers must be nonnegative")


def receiver_sinr(minst: MulticastInstance, p) -> np.ndarray:
    """SINR at every receiver; other groups' transmitters interfere."""
    p = np.asarray(p, dtype=float)
    return minst._own * p[minst._group_of] / (minst.noise + minst._cross.T @ p)


def receiver_rates(minst, p) -> np.ndarray:
    return np.log1p(receiver_sinr(minst, p))


def bottleneck_rates(minst, p) -> np.ndarray:
    rates = receiver_rates(minst, p)
    return np.array([rates[list(g)].min() for g in minst.receivers])


def bottleneck_rate(minst, p, l) -> float:
    if not minst.receivers[l]:
        raise ValueError("empty receiver set")
    return float(bottleneck_rates(minst, p)[l])


def _receiver_violations(minst, r, p):
    return np.maximum(np.asarray(r)[minst._group_of] - receiver_rates(minst, p), 0.0)


def lagrangian_multicast(minst, p, r, alphas, utility=None) -> float:
    utility = utility or RateUtility(L=minst.L)
    v = _receiver_violations(minst, r, p)
    return float(-np.sum(utility.evaluate(r)) + np.asarray(alphas) @ v)


def multicast_power_update(p_max_l, r_target, gammas, p_l) -> float:
    """One transmitter's step from its receivers' SINR feedback.

    ``p' = min((e^r - 1) / min_m gamma_m * p, p_max)``; zero target gives zero
    power and a silent transmitter with a positive target restarts from
    ``1e-6 * p_max``.
    """
    if r_target < 0:
        raise ValueError("rate target must be nonnegative")
    if r_target == 0:
        return 0.0
    if p_l <= 0:
        return RESTART_FRACTION * p_max_l
    q = np.expm1(r_target) * p_l / max(float(np.min(gammas)), TINY)
    return float(min(q, p_max_l))


def multicast_inner_loop(minst, r_targets, p_start, tol=1e-8, max_iter=10_000,
                         history=False) -> InnerLoopResult:
    r_targets = np.asarray(r_targets, dtype=float)
    if np.any(r_targets < 0):
        raise ValueError("rate targets must be nonnegative")
    order = minst._order
    residuals = np.zeros(max_iter if history else 0)
    p, iters, ok = settle_multicast(np.expm1(r_targets), np.array(p_start, dtype=float),
                                    minst.p_max, minst._own[order],
                                    np.ascontiguousarray(minst._cross[:, order]),
                                    minst.noise[order], minst._ptr, tol, max_iter, residuals)
    return InnerLoopResult(p, iters, ok, residuals[:iters] if history else None)


@dataclass
class MulticastResult:
    p: np.ndarray
    r: np.ndarray
    utility: float
    alpha: np.ndarray
    rounds: int
    epochs: int
    converged: bool
    warning: str | None
    inner_failures: int
    trace: np.ndarray = field(repr=False)


def _trace_array(rows):
    dtype = [(c, "i8" if c in ("epoch", "agent", "accepted") else "f8")
             for c in MULTICAST_TRACE_COLUMNS]
    return np.array(rows, dtype=dtype)


class _MulticastNetwork:
    def __init__(self, minst, utility, cfg: DspcConfig, alpha):
        self.minst, self.utility, self.cfg = minst, utility, cfg
        self.rng = streams(cfg.seed, "init", "proposals", "acceptance", "scheduler", "scale_down")
        self.r_max = minst.sole_bottleneck_rates()
        # scale of the objective, playing the role of t_max in the unicast solver
        self.unit = float(np.sum(utility.evaluate(self.r_max)))
        L = minst.L
        init = self.rng["init"]
        r0 = init.uniform(0, 1, L) * self.r_max
        p0 = init.uniform(0, 1, L) * minst.p_max
        self.alpha = np.array(alpha, dtype=float)
        self.p = self._settle(r0, p0).p
        self.r = r0
        # bus: each group's utility and penalty sum
        self.bus_utility = np.asarray(utility.evaluate(r0), dtype=float)
        self.bus_penalty = self._penalties(r0, self.p)
        self.rows = []
        self.epoch = 0
        self.inner_failures = 0
        self.best = None

    def _settle(self, r, p):
        cfg = self.cfg
        return multicast_inner_loop(self.minst, r, p, cfg.inner_tol, cfg.inner_max_iter)

    def _penalties(self, r, p):
        v = self.alpha * _receiver_violations(self.minst, r, p)
        return np.bincount(self.minst._group_of, weights=v, minlength=self.minst.L)

    def lagrangian(self, util=None, pen=None):
        util = self.bus_utility if util is None else util
        pen = self.bus_penalty if pen is None else pen
        return float(-util.sum() + pen.sum())

    def max_violation(self):
        return float(_receiver_violations(self.minst, self.r, self.p).max())

    def total_utility(self, p=None):
        return float(np.sum(self.utility.evaluate(bottleneck_rates(self.minst, self.p if p is None else p))))

    def anneal(self, schedule, mode):
        cfg = self.cfg
        first = 1 if schedule.kind == "logarithmic" else 0
        last = epochs_until(schedule, cfg.epsilon)
        T_first = temperature(schedule, first)
        unit = self.unit if cfg.relative_temperature else 1.0
        self.round_best = None
        for i in range(first, last):
            T = temperature(schedule, i)
            radius = cfg.radius * ((T / T_first) ** cfg.radius_power
                                   if cfg.radius_follows_temperature else 1.0)
            T = T * unit
            self.epoch += 1
            for _ in range(cfg.moves_per_epoch):
                self._step(T, mode, radius)
        if cfg.keep_best and self.round_best is not None:
            p, r, util, pen = self.round_best[1]
            self.p, self.r = p.copy(), r.copy()
            self.bus_utility, self.bus_penalty = util.copy(), pen.copy()

    def _propose(self, l, mode, radius):
        if self.cfg.radius_mix and self.rng["proposals"].random() < self.cfg.radius_mix:
            radius = self.cfg.radius
        u = self.rng["proposals"].random()
        if mode == "global":
            return u * self.r_max[l]
        r = self.r[l] + (2 * u - 1) * radius * self.r_max[l]
        return min(max(r, 0.0), self.r_max[l])

    def _step(self, T, mode, radius):
        l = int(self.rng["scheduler"].integers(self.minst.L))
        r_new = self.r.copy()
        r_new[l] = self._propose(l, mode, radius)
        loop = self._settle(r_new, self.p)
        if not loop.converged:
            self.inner_failures += 1
        util = self.bus_utility.copy()
        util[l] = float(self.utility.evaluate(r_new[l], l))
        pen = self._penalties(r_new, loop.p)
        d = self.lagrangian() - self.lagrangian(util, pen)
        decision = sa_accept(d, T, float(self.rng["acceptance"].random()))
        if decision.accepted:
            self.r, self.p = r_new, loop.p
            self.bus_utility, self.bus_penalty = util, pen
        lag = self.lagrangian()
        if self.cfg.keep_best and (self.round_best is None or lag < self.round_best[0]):
            self.round_best = (lag, (self.p.copy(), self.r.copy(), self.bus_utility.copy(),
                                     self.bus_penalty.copy()))
        total = self.total_utility()
        maxv = self.max_violation()
        if maxv <= self.cfg.violation_tol and (self.best is None or total > self.best[2]):
            self.best = (self.p.copy(), self.r.copy(), total)
        self.rows.append((self.epoch, l, int(decision.accepted), T, total, self.lagrangian(),
                          float(self.alpha.max()), maxv))

    def set_alpha(self, alpha):
        self.alpha = np.array(alpha, dtype=float)
        self.bus_penalty = self._penalties(self.r, self.p)

    def result(self, rounds, converged, warning, snapshot=None):
        p, r, u = snapshot or (self.p.copy(), self.r.copy(), self.total_utility())
        return MulticastResult(p, r, u, self.alpha.copy(), rounds, self.epoch, converged, warning,
                               self.inner_failures, _trace_array(self.rows))


def run_dspc_multicast(minst: MulticastInstance, cfg: DspcConfig | None = None,
                       utility=None) -> MulticastResult:
    """Two-step multicast DSPC; same round structure as the unicast solver."""
    cfg = cfg or DspcConfig.multicast()
    utility = utility or RateUtility(minst.weights)
    unit = float(np.sum(utility.evaluate(minst.sole_bottleneck_rates())))
    ps = PenaltyState(0.0, np.full(minst.R, cfg.initial_penalties(unit)[1]), varrho=cfg.varrho,
                      stall_limit=cfg.stall_limit, scale_low=cfg.scale_low,
                      scale_high=cfg.scale_high)
    net = _MulticastNetwork(minst, utility, cfg, ps.beta)
    for rnd in range(1, cfg.max_rounds + 1):
        mode = cfg.proposal
        if mode == "adaptive":
            mode = "global" if rnd == 1 else "neighborhood"
        net.anneal(cfg.schedule, mode)
        maxv = net.max_violation()
        if maxv <= cfg.violation_tol:
            return net.result(rnd, True, None, net.best if cfg.report == "best" else None)
        v = _receiver_violations(minst, net.r, net.p)
        ps = replace(ps, beta=ps.beta + ps.varrho * v)
        ps = record_violation(ps, maxv)
        if ps.scale_down_due:
            ps = penalty_scale_down(ps, net.rng["scale_down"])
        net.set_alpha(ps.beta)
    warning = f"no feasible point after {cfg.max_rounds} rounds"
    log.warning(warning)
    return net.result(cfg.max_rounds, False, warning, net.best)


def run_edspc_multicast(minst: MulticastInstance, cfg: DspcConfig | None = None,
                        utility=None) -> MulticastResult:
    """Single geometric-cooling phase with fixed multipliers ``cfg.beta0``."""
    cfg = cfg or DspcConfig.edspc_multicast()
    if cfg.beta0 <= 0:
        raise ValueError("EDSPC needs positive initial penalties")
    utility = utility or RateUtility(minst.weights)
    net = _MulticastNetwork(minst, utility, cfg, np.full(minst.R, cfg.beta0))
    mode = "global" if cfg.proposal == "adaptive" else cfg.proposal
    net.anneal(cfg.schedule, mode)
    best = net.best if cfg.report == "best" else None
    return net.result(1, net.max_violation() <= cfg.violation_tol or best is not None, None, best)
