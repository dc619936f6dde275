# ---
# jupytext:
#   formats: py:percent
# ---

# %% [markdown]
# # Two-link optima
#
# Two small networks with logarithmic rate utilities.  The grid oracle and
# the simplex branch-and-bound solver should agree on the optimum, and the
# max-min value along the optimal direction should equal the sum utility.

# %%
import numpy as np

from powerctl.centralized import solve_centralized
from powerctl.feasibility import maxmin_solve
from powerctl.model import LogRateUtility, case_one, case_two, sinr_vector
from powerctl.oracle import grid_best_sum_utility

cases = {"case one": case_one(), "case two": case_two()}

# %% [markdown]
# Grid oracle: 201 power levels per link.

# %%
for name, inst in cases.items():
    spec = LogRateUtility(inst.weights)
    o = grid_best_sum_utility(inst, spec)
    print(f"{name}: {o.value:.4f} at p = {o.p}")

# %% [markdown]
# Branch and bound over contribution weights x on the unit simplex.  Each
# visited point costs one bisection on the max-min value t.

# %%
for name, inst in cases.items():
    spec = LogRateUtility(inst.weights)
    res = solve_centralized(inst, spec, eps=1e-3)
    print(f"{name}: t = {res.best_t:.5f}, x = {np.round(res.best_x, 4)}, "
          f"p = {np.round(res.best_p, 3)}, {res.simplices_visited} simplices")

# %% [markdown]
# Along the utility share of the optimum, the max-min value recovers the sum.

# %%
inst = cases["case one"]
spec = LogRateUtility(inst.weights)
u = spec.evaluate(sinr_vector(inst, [20.0, 6.7644]))
sol = maxmin_solve(inst, spec, u / u.sum())
print(f"sum of utilities {u.sum():.5f}, max-min value {sol.t_star:.5f}")
