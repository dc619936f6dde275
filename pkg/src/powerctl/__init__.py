"""
Stochastic power control for interference-limited wireless networks.

Centralized and distributed (annealing-based) solvers for nonconvex
sum-utility maximization, back-pressure queueing on top of the power
allocation, multicast groups, and brute-force oracles to check them.
"""

from .model import (
    LogRateUtility,
    NetworkInstance,
    case_one,
    case_two,
    load_instance,
    random_instance,
    save_instance,
    sinr_vector,
    six_link,
    total_utility,
)
from .feasibility import feasible_for_targets, maxmin_solve
from .centralized import solve_centralized
from .annealing import CoolingSchedule, PenaltyState
from .dspc import DspcConfig, inner_power_loop, run_dspc, run_edspc
from .multicast import MulticastInstance, run_dspc_multicast, run_edspc_multicast
from .queueing import TrafficClass, one_hop_classes, run_queue_sim

__version__ = "0.1.0"

__all__ = [
    "LogRateUtility", "NetworkInstance", "case_one", "case_two", "six_link",
    "load_instance", "save_instance", "random_instance", "sinr_vector", "total_utility",
    "feasible_for_targets", "maxmin_solve", "solve_centralized",
    "CoolingSchedule", "PenaltyState",
    "DspcConfig", "inner_power_loop", "run_dspc", "run_edspc",
    "MulticastInstance", "run_dspc_multicast", "run_edspc_multicast",
    "TrafficClass", "one_hop_classes", "run_queue_sim",
]
