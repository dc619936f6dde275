# ---
# jupytext:
#   formats: py:percent
# ---

# %% [markdown]
# # Multicast groups
#
# Each transmitter serves a group of receivers, and a group's rate is set
# by its weakest receiver.  The annealer proposes bottleneck rates and the
# power loop drives every receiver to its target.

# %%
import numpy as np

from powerctl.dspc import DspcConfig
from powerctl.model import case_one, sinr_vector
from powerctl.multicast import MulticastInstance, receiver_sinr, run_dspc_multicast
from powerctl.oracle import multicast_grid_best

G = [[0.76, 0.47, 0.36, 0.02],
     [0.41, 0.55, 0.84, 0.45]]
m = MulticastInstance(G, [[0, 1], [2, 3]], 0.1, 1.0)
o = multicast_grid_best(m)
print(f"grid optimum {o.value:.4f} at p = {o.p}")

# %%
u = np.array([run_dspc_multicast(m, DspcConfig.multicast(seed=s)).utility for s in range(5)])
print("utility / optimum", np.round(u / o.value, 4))

# %% [markdown]
# With one receiver per group the multicast model is the unicast one.

# %%
inst = case_one()
single = MulticastInstance.from_unicast(inst)
p = np.array([20.0, 6.8])
print(receiver_sinr(single, p), sinr_vector(inst, p))
