# ---
# jupytext:
#   formats: py:percent
# ---

# %% [markdown]
# # Back-pressure queueing
#
# Two one-hop classes share the two-link network.  Every slot the
# scheduler weights each link by its largest queue differential and picks
# powers that maximize the weighted rate sum.  Loads inside the rate region
# keep queues bounded; loads outside make them grow.

# %%
import numpy as np

from powerctl.model import case_two
from powerctl.queueing import empirical_region_scan, one_hop_classes, run_queue_sim

inst = case_two(weights=(1.0, 1.0))

# %%
for psi in (0.5, 0.8, 1.0, 1.5):
    r = run_queue_sim(inst, one_hop_classes([psi, psi]), 5_000, seed=0)
    print(f"psi {psi}: {r.verdict}, mean delay {r.mean_delay:.2f} slots, "
          f"tail backlog {r.tail_mean:.1f}")

# %% [markdown]
# A coarse scan of the load plane.  Rows list the load pair and the verdict.

# %%
axis = [0.5, 1.0, 1.5]
pts = [(a, b) for a in axis for b in axis]
for row in empirical_region_scan(inst, pts, 3_000, seed=1):
    print(row["psi_0"], row["psi_1"], row["verdict"])
