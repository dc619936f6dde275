"""
Centralized benchmark: search contribution-weight directions by repeated
barycentric subdivision of the unit simplex, solving the fixed-direction
max-min problem at every simplex center and keeping the best.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .feasibility import maxmin_solve

__all__ = ["Simplex", "center", "subdivide", "solve_centralized", "CentralizedResult"]

DUPLICATE_TOL = 1e-12


class DegenerateSimplexError(ValueError):
    pass


@dataclass(frozen=True)
class Simplex:
    """Simplex given by its ``L`` vertices (rows)."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError("a simplex in the (L-1)-simplex needs L vertices of length L")
        d = np.abs(v[:, None, :] - v[None, :, :]).max(axis=-1)
        np.fill_diagonal(d, np.inf)
        if np.any(d < DUPLICATE_TOL):
            raise DegenerateSimplexError("simplex has duplicate vertices")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @classmethod
    def unit(cls, L: int) -> "Simplex":
        return cls(np.eye(L))

    @property
    def L(self) -> int:
        return self.vertices.shape[0]

    def contains(self, x, tol=1e-9) -> bool:
        """Barycentric membership test for a point of the unit simplex."""
        # vertices and x lie on sum(x) = 1, so solve V^T lam = x directly
        lam = np.linalg.lstsq(self.vertices.T, np.asarray(x, dtype=float), rcond=None)[0]
        return bool(np.all(lam >= -tol))


def center(S: Simplex) -> np.ndarray:
    return S.vertices.mean(axis=0)


def subdivide(S: Simplex) -> list[Simplex]:
    """Split ``S`` into ``L`` children; child ``l`` swaps vertex ``l`` for the center."""
    c = center(S)
    children = []
    for l in range(S.L):
        v = S.vertices.copy()
        v[l] = c
        children.append(Simplex(v))
    return children


@dataclass
class CentralizedResult:
    best_t: float
    best_x: np.ndarray
    best_p: np.ndarray
    simplices_visited: int
    trace: list = field(default_factory=list)  # (visit index, best_t so far)


def solve_centralized(inst, spec, eps=1e-3, tol=1e-6, vertices=True) -> CentralizedResult:
    """Breadth-first simplex search over contribution weights.

    Centers are visited in FIFO order starting from the center of the unit
    simplex; the search stops once more than ``1/eps`` points have been
    evaluated.  Ties keep the earliest visit.

    With ``vertices`` the unit vectors are evaluated right after the first
    center.  Centers only approach a vertex geometrically with depth, and an
    optimum that silences all but one link sits exactly there.
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    L = inst.L
    root = Simplex.unit(L)
    budget = 1.0 / eps

    best = None
    trace = []
    visited = 0

    def visit(S):
        visit_point(center(S))

    def visit_point(x):
        nonlocal best, visited
        sol = maxmin_solve(inst, spec, x, tol)
        visited += 1
        if best is None or sol.t_star > best[0]:
            best = (sol.t_star, x, sol.p_star)
        trace.append((visited, best[0]))

    visit(root)
    if vertices and L > 1:
        for v in root.vertices:
            visit_point(v.copy())
    if L == 1:
        return CentralizedResult(best[0], best[1], best[2], visited, trace)
    queue = deque([root])
    while visited <= budget:
        S = queue.popleft()
        for child in subdivide(S):
            visit(child)
            queue.append(child)
            if visited > budget:
                break
    return CentralizedResult(best[0], best[1], best[2], visited, trace)
