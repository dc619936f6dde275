"""
Network instances, SINR evaluation and utility functions.

Gain matrices are stored transmitter-by-receiver: ``H[k, l]`` is the gain
from the transmitter of link ``k`` to the receiver of link ``l``.  The
received SINR of link ``l`` under power vector ``p`` is::

    gamma_l = H[l, l] p_l / (n_l + sum_{k != l} H[k, l] p_k)
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "NetworkInstance",
    "LogRateUtility",
    "sinr",
    "sinr_vector",
    "total_utility",
    "utility_vector",
    "check_power",
    "instance_from_positions",
    "random_instance",
    "load_instance",
    "save_instance",
    "instance_to_dict",
    "instance_from_dict",
    "case_one",
    "case_two",
    "six_link",
    "MIN_DISTANCE",
]

#: Minimum transmitter-receiver distance used by the d^-4 gain model (m).
MIN_DISTANCE = 0.1


@dataclass(frozen=True)
class NetworkInstance:
    """Immutable description of an interference-limited network.

    Parameters
    ----------
    H : (L, L) array
        Link gains, ``H[tx, rx]``.
    noise : (L,) array
        Receiver noise powers, strictly positive.
    p_max : (L,) array
        Per-link power caps, strictly positive.
    weights : (L,) array, optional
        Utility weights, defaults to ones.
    positions : dict, optional
        Node coordinates the instance was generated from (kept for
        round-tripping only).
    """

    H: np.ndarray
    noise: np.ndarray
    p_max: np.ndarray
    weights: np.ndarray | None = None
    positions: dict | None = field(default=None, compare=False)

    def __post_init__(self):
        H = np.array(self.H, dtype=float)
        if H.ndim != 2 or H.shape[0] != H.shape[1] or H.shape[0] < 1:
            raise ValueError(f"H must be a non-empty square matrix, got shape {H.shape}")
        L = H.shape[0]
        noise = _link_vector(self.noise, L, "noise")
        p_max = _link_vector(self.p_max, L, "p_max")
        weights = np.ones(L) if self.weights is None else _link_vector(self.weights, L, "weights")
        if not np.all(np.isfinite(H)) or np.any(H < 0):
            raise ValueError("H entries must be finite and nonnegative")
        if np.any(np.diag(H) <= 0):
            raise ValueError("own-link gains H[l, l] must be positive")
        for name, vec in (("noise", noise), ("p_max", p_max), ("weights", weights)):
            if not np.all(np.isfinite(vec)) or np.any(vec <= 0):
                raise ValueError(f"{name} entries must be finite and positive")
        cross = H.copy()
        np.fill_diagonal(cross, 0.0)
        for arr in (H, noise, p_max, weights, cross):
            arr.setflags(write=False)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "noise", noise)
        object.__setattr__(self, "p_max", p_max)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "_cross", cross)
        object.__setattr__(self, "_direct", np.diag(H).copy())

    def __eq__(self, other):
        if not isinstance(other, NetworkInstance):
            return NotImplemented
        return all(np.array_equal(getattr(self, k), getattr(other, k))
                   for k in ("H", "noise", "p_max", "weights"))

    __hash__ = None

    @property
    def L(self) -> int:
        return self.H.shape[0]

    @property
    def direct_gains(self) -> np.ndarray:
        return self._direct

    @property
    def cross_gains(self) -> np.ndarray:
        """H with the diagonal zeroed."""
        return self._cross

    def interference(self, p) -> np.ndarray:
        """Interference-plus-noise seen at every receiver."""
        return self.noise + self._cross.T @ p

    def sole_transmitter_sinr(self) -> np.ndarray:
        """SINR of each link transmitting alone at full power."""
        return self._direct * self.p_max / self.noise

    def with_weights(self, weights) -> "NetworkInstance":
        return NetworkInstance(self.H, self.noise, self.p_max, weights, self.positions)


def _link_vector(value, L, name):
    arr = np.array(value, dtype=float)
    if arr.ndim == 0:
        arr = np.full(L, float(arr))
    if arr.shape != (L,):
        raise ValueError(f"{name} must have length {L}, got shape {arr.shape}")
    return arr


class LogRateUtility:
    """Weighted Shannon-rate utility ``U_l(gamma) = w_l * ln(1 + gamma)``.

    ``evaluate`` and ``inverse`` act element-wise on whole link vectors, or
    on a single link when ``link`` is given.
    """

    def __init__(self, weights):
        self.weights = np.asarray(weights, dtype=float)
        if np.any(self.weights <= 0):
            raise ValueError("utility weights must be positive")

    @classmethod
    def for_instance(cls, inst: NetworkInstance) -> "LogRateUtility":
        return cls(inst.weights)

    def _w(self, link):
        return self.weights if link is None else self.weights[link]

    def evaluate(self, gamma, link=None):
        return self._w(link) * np.log1p(gamma)

    def inverse(self, u, link=None):
        return np.expm1(np.asarray(u, dtype=float) / self._w(link))

    def __repr__(self):
        return f"LogRateUtility(weights={self.weights.tolist()})"


def check_power(inst: NetworkInstance, p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape != (inst.L,):
        raise ValueError(f"power vector must have length {inst.L}")
    if np.any(p < 0) or np.any(p > inst.p_max * (1 + 1e-12)):
        raise ValueError("power vector violates 0 <= p <= p_max")
    return p


def sinr_vector(inst: NetworkInstance, p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    return inst.direct_gains * p / inst.interference(p)


def sinr(inst: NetworkInstance, p, l: int) -> float:
    """SINR of link ``l`` under power vector ``p``."""
    if not 0 <= l < inst.L:
        raise IndexError(f"link index {l} out of range for L={inst.L}")
    p = check_power(inst, p)
    interf = inst.noise[l] + inst.cross_gains[:, l] @ p
    return float(inst.H[l, l] * p[l] / interf)


def utility_vector(inst, spec, p) -> np.ndarray:
    return spec.evaluate(sinr_vector(inst, p))


def total_utility(inst: NetworkInstance, spec, p) -> float:
    p = check_power(inst, p)
    return float(np.sum(utility_vector(inst, spec, p)))


# ---------------------------------------------------------------------------
# instance construction
# ---------------------------------------------------------------------------

def instance_from_positions(tx, rx, noise, p_max, weights=None, exponent=4.0):
    """Build an instance with gains ``d^-exponent`` from 2-D node positions.

    ``tx[k]`` and ``rx[l]`` are the transmitter of link ``k`` and receiver of
    link ``l``; distances are clamped below at :data:`MIN_DISTANCE`.
    """
    tx = np.asarray(tx, dtype=float)
    rx = np.asarray(rx, dtype=float)
    d = np.linalg.norm(tx[:, None, :] - rx[None, :, :], axis=-1)
    H = np.maximum(d, MIN_DISTANCE) ** (-exponent)
    positions = {"tx": tx.tolist(), "rx": rx.tolist(), "exponent": exponent}
    return NetworkInstance(H, noise, p_max, weights, positions)


def random_instance(L, rng, area=10.0, noise=1e-4, p_max=1.0, weights=None,
                    link_length=None):
    """Random d^-4 instance on an ``area`` x ``area`` square.

    With ``link_length`` set, each receiver is placed at that distance from
    its transmitter in a random direction; otherwise receivers are uniform.
    """
    tx = rng.uniform(0, area, size=(L, 2))
    if link_length is None:
        rx = rng.uniform(0, area, size=(L, 2))
    else:
        ang = rng.uniform(0, 2 * np.pi, size=L)
        rx = tx + link_length * np.column_stack([np.cos(ang), np.sin(ang)])
    return instance_from_positions(tx, rx, noise, p_max, weights)


def instance_to_dict(inst: NetworkInstance) -> dict:
    out = {
        "L": inst.L,
        "H": inst.H.tolist(),
        "noise": inst.noise.tolist(),
        "p_max": inst.p_max.tolist(),
        "weights": inst.weights.tolist(),
    }
    if inst.positions is not None:
        out["positions"] = inst.positions
    return out


def instance_from_dict(data: dict) -> NetworkInstance:
    """Inverse of :func:`instance_to_dict`.

    When ``H`` is absent but ``positions`` holds ``tx``/``rx`` coordinates,
    the gains are generated with the d^-4 model.
    """
    known = {"L", "H", "noise", "p_max", "weights", "positions"}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown instance keys: {sorted(unknown)}")
    if "H" in data:
        inst = NetworkInstance(data["H"], data["noise"], data["p_max"],
                               data.get("weights"), data.get("positions"))
    elif "positions" in data:
        pos = data["positions"]
        inst = instance_from_positions(pos["tx"], pos["rx"], data["noise"], data["p_max"],
                                       data.get("weights"), pos.get("exponent", 4.0))
    else:
        raise ValueError("instance needs either 'H' or 'positions'")
    if "L" in data and data["L"] != inst.L:
        raise ValueError(f"declared L={data['L']} does not match H ({inst.L})")
    return inst


def save_instance(inst: NetworkInstance, path) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(inst), indent=2) + "\n")


def load_instance(path) -> NetworkInstance:
    return instance_from_dict(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# reference instances
# ---------------------------------------------------------------------------

def _two_link(h11, h12, h21, h22, p_max, weights=(0.57, 0.43)):
    # h12: link 1 transmitter -> link 2 receiver
    H = [[h11, h12], [h21, h22]]
    return NetworkInstance(H, [0.1, 0.1], p_max, weights)


def case_one(weights=(0.57, 0.43)) -> NetworkInstance:
    """Two-link example whose optimum is at p = (20, ~6.8), sum rate 3.10."""
    return _two_link(0.73, 0.04, 0.03, 0.89, [20.0, 100.0], weights)


def case_two(weights=(0.57, 0.43)) -> NetworkInstance:
    """Two-link example whose optimum silences link 1, p = (0, 2), sum rate 1.22.

    With unit weights this is also the two-class queueing example.
    """
    return _two_link(0.30, 0.50, 0.03, 0.80, [1.0, 2.0], weights)


_SIX_LINK_H = [
    [0.3318, 0.0049, 0.0141, 0.0021, 0.0016, 0.0007],
    [0.0031, 0.9554, 0.0063, 0.0140, 0.0012, 0.0025],
    [0.0155, 0.0042, 0.6166, 0.0046, 0.0108, 0.0018],
    [0.0017, 0.2188, 0.0340, 0.6754, 0.0062, 0.0215],
    [0.0020, 0.0017, 0.2216, 0.0042, 0.2955, 0.0028],
    [0.0007, 0.0079, 0.0254, 0.2553, 0.0404, 0.3025],
]


def six_link() -> NetworkInstance:
    """Six-link d^-4 realization with unit weights, p_max = 1, n = 1e-4."""
    return NetworkInstance(_SIX_LINK_H, 1e-4, 1.0)
