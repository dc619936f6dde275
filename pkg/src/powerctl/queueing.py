"""
Slotted back-pressure scheduling with power control.

Every slot: (1) each link picks the class with the largest queue
differential and uses it as its weight, (2) powers maximize the weighted
sum rate ``sum_l w_l ln(1 + gamma_l)``, (3) each link serves its chosen
class at the resulting rate.  Traffic is fluid work: a Poisson number of
files per slot, each with an exponential size.
"""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._rng import streams
from .model import LogRateUtility, NetworkInstance, sinr_vector
from .oracle import GridSpec, power_grid

log = logging.getLogger(__name__)

__all__ = [
    "TrafficClass",
    "QueueState",
    "QueueSimResult",
    "RateTable",
    "backpressure_weights",
    "weighted_rate_solve",
    "queue_step",
    "sample_arrivals",
    "run_queue_sim",
    "empirical_region_scan",
    "one_hop_classes",
]


@dataclass(frozen=True)
class TrafficClass:
    """A traffic class entering at ``route[0]`` and leaving after ``route[-1]``.

    ``lam`` is the file arrival rate per slot and ``nu`` the mean file size,
    so the offered load is ``psi = lam * nu`` work units per slot.
    """

    lam: float
    nu: float
    route: tuple

    def __post_init__(self):
        route = tuple(int(l) for l in self.route)
        if self.lam < 0 or not np.isfinite(self.lam):
            raise ValueError("arrival rate must be finite and nonnegative")
        if self.nu <= 0 or not np.isfinite(self.nu):
            raise ValueError("mean file size must be positive")
        if len(route) == 0:
            raise ValueError("route needs at least one link")
        if len(set(route)) != len(route):
            raise ValueError("route visits a link twice")
        object.__setattr__(self, "route", route)

    @property
    def psi(self) -> float:
        return self.lam * self.nu

    def indicator(self, L) -> np.ndarray:
        e = np.zeros(L, dtype=bool)
        e[list(self.route)] = True
        return e

    def next_hop(self, l):
        """Downstream link after ``l``, or ``None`` at the destination link."""
        i = self.route.index(l)
        return self.route[i + 1] if i + 1 < len(self.route) else None


def one_hop_classes(psi, nu=1.0):
    """Class ``s`` travels on link ``s`` alone, with load ``psi[s]``."""
    return [TrafficClass(float(p) / nu, nu, (s,)) for s, p in enumerate(psi)]


@dataclass
class QueueState:
    """Transmitter- and receiver-side backlogs, shape ``(L, S)``.

    Receiver-side work is handed straight to the next hop's transmitter
    queue, so ``Q_R[l, s]`` mirrors ``Q_T`` of the downstream link and is
    zero where ``l`` is the destination link of class ``s``.
    """

    Q_T: np.ndarray
    Q_R: np.ndarray
    t: int = 0

    def __post_init__(self):
        self.Q_T = np.asarray(self.Q_T, dtype=float)
        self.Q_R = np.asarray(self.Q_R, dtype=float)
        for q in (self.Q_T, self.Q_R):
            if not np.all(np.isfinite(q)) or np.any(q < 0):
                raise ValueError("backlogs must be finite and nonnegative")

    @classmethod
    def empty(cls, L, S):
        return cls(np.zeros((L, S)), np.zeros((L, S)), 0)

    @property
    def total(self) -> float:
        return float(self.Q_T.sum())


def _downstream(classes, L):
    """``down[l, s]``: next link of class ``s`` after ``l``; -1 at its destination or off-route."""
    down = np.full((L, len(classes)), -1, dtype=np.int64)
    for s, c in enumerate(classes):
        for a, b in zip(c.route[:-1], c.route[1:]):
            down[a, s] = b
    return down


def _receiver_side(Q_T, down):
    L, S = Q_T.shape
    Q_R = np.zeros_like(Q_T)
    hop = down >= 0
    cols = np.broadcast_to(np.arange(S), (L, S))
    Q_R[hop] = Q_T[down[hop], cols[hop]]
    return Q_R


def backpressure_weights(qs: QueueState, classes):
    """Link weights and the classes attaining them.

    ``D[l, s] = max(Q_T - Q_R, 0)`` on intermediate links and ``Q_T`` on the
    destination link of class ``s``; classes off the route have ``D = 0``.

    Returns
    -------
    w : (L,) array
        ``max_s D[l, s]``.
    argmax : list of int arrays
        Classes tying for the maximum on each link (empty where ``w_l = 0``).
    """
    L, S = qs.Q_T.shape
    down = _downstream(classes, L)
    on_route = np.stack([c.indicator(L) for c in classes], axis=1)
    D = np.where(down >= 0, np.maximum(qs.Q_T - qs.Q_R, 0.0), qs.Q_T)
    D = np.where(on_route, D, 0.0)
    w = D.max(axis=1) if S else np.zeros(L)
    argmax = [np.flatnonzero(D[l] == w[l]) if w[l] > 0 else np.empty(0, dtype=np.int64)
              for l in range(L)]
    return w, argmax


class RateTable:
    """Per-link rates at every point of a power grid, for repeated weighted solves."""

    def __init__(self, inst: NetworkInstance, grid: GridSpec = GridSpec()):
        self.inst = inst
        self.P = power_grid(inst, grid)
        H = inst.H
        signal = self.P * np.diag(H)
        self.rates = np.log1p(signal / (inst.noise + self.P @ H - signal))

    def best(self, w):
        vals = self.rates @ np.asarray(w, dtype=float)
        i = int(np.argmax(vals))
        return self.P[i].copy(), self.rates[i].copy()


def weighted_rate_solve(inst: NetworkInstance, w, solver="oracle", table: RateTable | None = None,
                        grid: GridSpec = GridSpec(), cfg=None, eps=1e-2):
    """Powers maximizing ``sum_l w_l ln(1 + gamma_l)``.

    Parameters
    ----------
    solver : {"oracle", "centralized", "dspc"}
        Grid search, simplex search on the max-min reformulation, or the
        distributed annealer.  Links with zero weight stay silent under the
        latter two, which only ever lowers interference.
    table : RateTable, optional
        Reused grid for the oracle; built on demand otherwise.

    Returns
    -------
    p, r : arrays
        Powers and the resulting per-link rates.
    """
    w = np.asarray(w, dtype=float)
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    L = inst.L
    if not np.any(w > 0):
        return np.zeros(L), np.zeros(L)
    if solver == "oracle":
        table = table or RateTable(inst, grid)
        return table.best(w)
    active = np.flatnonzero(w > 0)
    sub = NetworkInstance(inst.H[np.ix_(active, active)], inst.noise[active],
                          inst.p_max[active], w[active])
    spec = LogRateUtility(w[active])
    if solver == "centralized":
        from .centralized import solve_centralized
        p_sub = solve_centralized(sub, spec, eps=eps).best_p
    elif solver == "dspc":
        from .dspc import DspcConfig, run_dspc
        p_sub = run_dspc(sub, spec, cfg or DspcConfig()).p
    else:
        raise ValueError(f"unknown solver {solver!r}")
    p = np.zeros(L)
    p[active] = p_sub
    return p, np.log1p(sinr_vector(inst, p))


def sample_arrivals(classes, L, rng) -> np.ndarray:
    """Compound Poisson work per class, placed at each class's first link."""
    A = np.zeros((L, len(classes)))
    for s, c in enumerate(classes):
        n = rng.poisson(c.lam)
        if n:
            A[c.route[0], s] = rng.exponential(c.nu, size=n).sum()
    return A


def queue_step(qs: QueueState, classes, arrivals, scheduled, rates) -> QueueState:
    """Advance one slot.

    ``scheduled[l]`` is the class link ``l`` serves (-1 for none) and
    ``rates[l]`` its service rate.  Served work is capped by the backlog and
    moves to the next hop's transmitter queue; work finishing its last hop
    leaves the network.
    """
    arrivals = np.asarray(arrivals, dtype=float)
    rates = np.asarray(rates, dtype=float)
    if np.any(arrivals < 0) or np.any(rates < 0):
        raise ValueError("arrivals and rates must be nonnegative")
    L, S = qs.Q_T.shape
    down = _downstream(classes, L)
    Q = qs.Q_T.copy()
    served = np.zeros((L, S))
    for l in range(L):
        s = int(scheduled[l])
        if s >= 0:
            served[l, s] = min(Q[l, s], rates[l])
    Q -= served
    Q += arrivals
    for l, s in zip(*np.nonzero(served)):
        if down[l, s] >= 0:
            Q[down[l, s], s] += served[l, s]
    return QueueState(Q, _receiver_side(Q, down), qs.t + 1)


@dataclass
class QueueSimResult:
    backlog: np.ndarray          # (horizon, L, S) transmitter backlog after each slot
    weights: np.ndarray          # (horizon, L)
    powers: np.ndarray           # (horizon, L)
    rates: np.ndarray            # (horizon, L)
    total_backlog: np.ndarray    # (horizon,)
    mean_delay: float
    verdict: str
    tail_mean: float
    slope: float
    load: float
    extra: dict = field(default_factory=dict)

    def rows(self):
        """Per-slot rows ``(t, Q_ls..., w_l..., p_l..., r_l...)`` for CSV export."""
        H, L, S = self.backlog.shape
        out = []
        for t in range(H):
            out.append([t, *self.backlog[t].ravel(), *self.weights[t], *self.powers[t],
                        *self.rates[t]])
        return out

    def header(self):
        _, L, S = self.backlog.shape
        return (["t"] + [f"Q_{l}_{s}" for l in range(L) for s in range(S)]
                + [f"w_{l}" for l in range(L)] + [f"p_{l}" for l in range(L)]
                + [f"r_{l}" for l in range(L)])


def run_queue_sim(inst: NetworkInstance, classes, horizon, solver="oracle", seed=0,
                  resolve_period=1, backlog_bound=1e3, slope_tol=1e-3, grid: GridSpec = GridSpec(),
                  cfg=None) -> QueueSimResult:
    """Simulate back-pressure scheduling for ``horizon`` slots.

    Powers are recomputed every ``resolve_period`` slots from the current
    weights.  The verdict is ``"stable"`` when the mean total backlog over
    the last 20% of slots is below ``backlog_bound`` and the least-squares
    slope of the total backlog over the second half is at most
    ``slope_tol`` times the offered load.  Mean delay follows Little's law:
    average backlog over offered load.
    """
    if horizon < 1 or resolve_period < 1:
        raise ValueError("horizon and resolve_period must be >= 1")
    L, S = inst.L, len(classes)
    for c in classes:
        if max(c.route) >= L:
            raise ValueError("route refers to a link outside the instance")
    rng = streams(seed, "arrivals", "ties")
    table = RateTable(inst, grid) if solver == "oracle" else None
    qs = QueueState.empty(L, S)
    backlog = np.zeros((horizon, L, S))
    W = np.zeros((horizon, L))
    Pt = np.zeros((horizon, L))
    Rt = np.zeros((horizon, L))
    p, r = np.zeros(L), np.zeros(L)
    for t in range(horizon):
        w, argmax = backpressure_weights(qs, classes)
        if t % resolve_period == 0:
            p, r = weighted_rate_solve(inst, w, solver, table=table, grid=grid, cfg=cfg)
        scheduled = np.full(L, -1)
        for l, cands in enumerate(argmax):
            if cands.size == 1:
                scheduled[l] = cands[0]
            elif cands.size > 1:
                scheduled[l] = cands[rng["ties"].integers(cands.size)]
        A = sample_arrivals(classes, L, rng["arrivals"])
        qs = queue_step(qs, classes, A, scheduled, r)
        backlog[t], W[t], Pt[t], Rt[t] = qs.Q_T, w, p, r
    total = backlog.sum(axis=(1, 2))
    load = float(sum(c.psi for c in classes))
    tail_mean = float(total[int(0.8 * horizon):].mean())
    half = total[horizon // 2:]
    slope = float(np.polyfit(np.arange(half.size), half, 1)[0]) if half.size > 1 else 0.0
    stable = tail_mean < backlog_bound and slope <= slope_tol * max(load, 1.0)
    mean_delay = float(total.mean() / load) if load > 0 else 0.0
    return QueueSimResult(backlog, W, Pt, Rt, total, mean_delay,
                          "stable" if stable else "unstable", tail_mean, slope, load)


def _point_seed(seed, index):
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1)[0])


def _scan_point(args):
    inst, psi, nu, horizon, seed, solver, kw = args
    res = run_queue_sim(inst, one_hop_classes(psi, nu), horizon, solver, seed, **kw)
    return res.verdict, res.mean_delay, res.tail_mean, res.slope


def empirical_region_scan(inst: NetworkInstance, psi_points, horizon, seed=0, nu=1.0,
                          solver="oracle", path=None, jobs=1, **kw):
    """Label each load vector ``psi`` (one class per link) stable or unstable.

    Each point gets its own seed derived from ``(seed, index)``, so results
    do not depend on ``jobs``.  With ``path`` the labels are written as CSV.

    Returns
    -------
    list of dict
        Keys ``psi_<l>``, ``verdict``, ``mean_delay``, ``tail_mean``, ``slope``.
    """
    psi_points = [tuple(float(v) for v in pt) for pt in psi_points]
    tasks = [(inst, pt, nu, horizon, _point_seed(seed, i), solver, kw)
             for i, pt in enumerate(psi_points)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            outcomes = list(ex.map(_scan_point, tasks))
    else:
        outcomes = [_scan_point(t) for t in tasks]
    rows = []
    for pt, (verdict, delay, tail, slope) in zip(psi_points, outcomes):
        row = {f"psi_{l}": v for l, v in enumerate(pt)}
        row.update(verdict=verdict, mean_delay=delay, tail_mean=tail, slope=slope)
        rows.append(row)
    if path is not None:
        with open(Path(path), "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(rows)
    return rows
