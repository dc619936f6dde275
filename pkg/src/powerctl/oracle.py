"""
Brute-force ground truth for small instances.

Everything here evaluates objectives directly on power grids (or random
samples) and never calls the solvers it is used to check.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

__all__ = [
    "GridSpec",
    "OracleResult",
    "power_grid",
    "grid_best_sum_utility",
    "grid_best_weighted_rate",
    "randomized_best_sum_utility",
    "pareto_boundary_check",
    "maxmin_oracle",
    "multicast_grid_best",
    "BudgetExceeded",
]


class BudgetExceeded(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    """Points per axis (endpoints 0 and p_max always included)."""

    resolution: int = 201
    samples: int = 1_000_000
    budget: int = 50_000_000
    refine_top: int = 100

    def __post_init__(self):
        if self.resolution < 2:
            raise ValueError("resolution must be at least 2")


@dataclass
class OracleResult:
    p: np.ndarray
    value: float
    evaluations: int


def power_grid(inst, grid: GridSpec):
    L = inst.L
    n = grid.resolution ** L
    if n > grid.budget:
        raise BudgetExceeded(f"{n} grid points exceed budget {grid.budget}")
    axes = [np.linspace(0.0, pm, grid.resolution) for pm in inst.p_max]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _utilities(inst, P, weights):
    """Per-link weighted log rates for a batch of power vectors (rows of P)."""
    H = inst.H
    signal = P * np.diag(H)
    received = P @ H  # received[i, l] = sum_k P[i, k] H[k, l]
    interference = inst.noise + received - signal
    return weights * np.log1p(signal / interference)


def _argmax_lexicographic(values, P):
    best = values.max()
    idx = np.flatnonzero(values == best)
    if idx.size > 1:
        order = np.lexsort(P[idx].T[::-1])
        idx = idx[order]
    return int(idx[0])


def grid_best_weighted_rate(inst, weights, grid: GridSpec = GridSpec()) -> OracleResult:
    """Exhaustive maximum of ``sum_l w_l ln(1 + gamma_l)`` over the power grid."""
    P = power_grid(inst, grid)
    vals = _utilities(inst, P, np.asarray(weights, dtype=float)).sum(axis=1)
    i = _argmax_lexicographic(vals, P)
    return OracleResult(P[i].copy(), float(vals[i]), len(P))


def grid_best_sum_utility(inst, spec, grid: GridSpec = GridSpec()) -> OracleResult:
    """Exhaustive grid maximum of total utility (L <= 3).

    Ties go to the lexicographically smallest power vector.
    """
    if inst.L > 3:
        raise ValueError("exhaustive grid limited to L <= 3; use randomized_best_sum_utility")
    P = power_grid(inst, grid)
    vals = _batch_total(inst, spec, P)
    i = _argmax_lexicographic(vals, P)
    return OracleResult(P[i].copy(), float(vals[i]), len(P))


def _batch_total(inst, spec, P):
    H = inst.H
    signal = P * np.diag(H)
    interference = inst.noise + P @ H - signal
    return spec.evaluate(signal / interference).sum(axis=1)


def randomized_best_sum_utility(inst, spec, grid: GridSpec = GridSpec(), rng=None,
                                sweeps=30, chunk=100_000) -> OracleResult:
    """Random search plus coordinate ascent, for 4 to 6 links.

    Samples ``grid.samples`` uniform power vectors, then refines the best
    ``grid.refine_top`` by cyclic coordinate line searches on a
    ``grid.resolution``-point axis grid.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    L = inst.L
    top_vals = np.empty(0)
    top_P = np.empty((0, L))
    evals = 0
    remaining = grid.samples
    while remaining > 0:
        m = min(chunk, remaining)
        P = rng.uniform(0, 1, size=(m, L)) * inst.p_max
        vals = _batch_total(inst, spec, P)
        evals += m
        remaining -= m
        top_vals = np.concatenate([top_vals, vals])
        top_P = np.concatenate([top_P, P])
        keep = np.argsort(-top_vals, kind="stable")[:grid.refine_top]
        top_vals, top_P = top_vals[keep], top_P[keep]
    # corners are cheap and frequently optimal
    corners = np.array(list(itertools.product([0.0, 1.0], repeat=L))) * inst.p_max if L <= 10 else np.empty((0, L))
    starts = np.concatenate([top_P, corners])
    axis = np.linspace(0.0, 1.0, grid.resolution)
    best_p, best_v = None, -np.inf
    for p in starts:
        p = p.copy()
        v = float(_batch_total(inst, spec, p[None])[0])
        for _ in range(sweeps):
            improved = False
            for l in range(L):
                cand = np.repeat(p[None], axis.size, axis=0)
                cand[:, l] = axis * inst.p_max[l]
                vals = _batch_total(inst, spec, cand)
                evals += axis.size
                j = int(np.argmax(vals))
                if vals[j] > v + 1e-15:
                    p, v, improved = cand[j], float(vals[j]), True
            if not improved:
                break
        if v > best_v:
            best_p, best_v = p, v
    return OracleResult(best_p, best_v, evals)


def pareto_boundary_check(inst, spec, p_candidate, grid: GridSpec = GridSpec(), tol=1e-6) -> bool:
    """True unless some grid point weakly dominates the candidate's utilities.

    Domination: at least as good for every link and better than ``tol`` for
    some link.
    """
    u_c = spec.evaluate(_sinr_rows(inst, np.asarray(p_candidate, dtype=float)[None]))[0]
    P = power_grid(inst, grid)
    U = spec.evaluate(_sinr_rows(inst, P))
    dominated = np.all(U >= u_c, axis=1) & np.any(U > u_c + tol, axis=1)
    return not bool(dominated.any())


def _sinr_rows(inst, P):
    H = inst.H
    signal = P * np.diag(H)
    return signal / (inst.noise + P @ H - signal)


def maxmin_oracle(inst, spec, grid: GridSpec = GridSpec(), x_points=1001, chunk=2_000):
    """Grid maximum of ``min_l U_l / x_l`` over powers and 2-link directions.

    Links with ``x_l = 0`` are excluded from the min.  Returns
    ``(value, p, x)``.
    """
    if inst.L != 2:
        raise ValueError("maxmin_oracle is defined for two links")
    P = power_grid(inst, grid)
    U = spec.evaluate(_sinr_rows(inst, P))
    xs = np.linspace(0.0, 1.0, x_points)
    X = np.stack([xs, 1.0 - xs], axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(X > 0, 1.0 / X, np.nan)
    best = (-np.inf, None, None)
    for start in range(0, len(P), chunk):
        u = U[start:start + chunk]
        # ratio[i, j, l] = U[i, l] / X[j, l], excluded links -> +inf
        ratio = u[:, None, :] * inv[None, :, :]
        ratio = np.where(np.isnan(ratio), np.inf, ratio)
        val = ratio.min(axis=2)
        i, j = np.unravel_index(np.argmax(val), val.shape)
        if val[i, j] > best[0]:
            best = (float(val[i, j]), P[start + i].copy(), X[j].copy())
    return best


def multicast_grid_best(minst, utility=None, grid: GridSpec = GridSpec()) -> OracleResult:
    """Grid maximum of the summed bottleneck utilities of a multicast instance.

    Written against the raw gain table rather than the multicast module's
    helpers, so it stays an independent check.
    """
    utility = (lambda r: r) if utility is None else utility
    L = minst.L
    n = grid.resolution ** L
    if n > grid.budget:
        raise BudgetExceeded(f"{n} grid points exceed budget {grid.budget}")
    axes = [np.linspace(0.0, pm, grid.resolution) for pm in minst.p_max]
    P = np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")], axis=1)
    total = np.zeros(len(P))
    for l, receivers in enumerate(minst.receivers):
        rates = []
        for m in receivers:
            g = minst.G[:, m]
            own = P[:, l] * g[l]
            others = sum(P[:, k] * g[k] for k in range(L) if k != l)
            rates.append(np.log1p(own / (minst.noise[m] + others)))
        total += utility(np.min(rates, axis=0))
    i = _argmax_lexicographic(total, P)
    return OracleResult(P[i].copy(), float(total[i]), len(P))
