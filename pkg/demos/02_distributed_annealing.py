# ---
# jupytext:
#   formats: py:percent
# ---

# %% [markdown]
# # Distributed annealing
#
# Each link is an agent that proposes new (t, x) pairs, lets the power loop
# settle, and accepts by the Metropolis rule on the penalized Lagrangian.
# DSPC cools logarithmically and updates penalties between rounds.  EDSPC
# fixes the penalties and cools geometrically.

# %%
import numpy as np

from powerctl.dspc import DspcConfig, reaching_epoch, run_dspc, run_edspc
from powerctl.model import LogRateUtility, case_two

inst = case_two()
spec = LogRateUtility(inst.weights)
optimum = 0.43 * np.log(17)

# %%
dspc = [run_dspc(inst, spec, DspcConfig(seed=s)) for s in range(5)]
edspc = [run_edspc(inst, spec, DspcConfig.edspc(seed=s)) for s in range(5)]
for name, runs in (("DSPC", dspc), ("EDSPC", edspc)):
    u = np.array([r.utility for r in runs])
    reach = [reaching_epoch(r, 0.95 * optimum) for r in runs]
    print(f"{name}: utility / optimum {np.round(u / optimum, 4)}, "
          f"epochs run {runs[0].epochs}, first epoch at 95% {reach}")

# %% [markdown]
# The trace holds one row per proposal.  Temperature and the network
# utility of the current state for the first EDSPC run, sampled per epoch:

# %%
tr = edspc[0].trace
last = np.flatnonzero(np.diff(tr["epoch"], append=tr["epoch"][-1] + 1))
for row in tr[last][::8]:
    print(f"epoch {row['epoch']:3d}  T {row['T']:.4f}  utility {row['total_utility']:.4f}")
