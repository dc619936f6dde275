"""Hypothesis property tests across modules."""

import json
import math

import numpy as np
from hypothesis import assume, given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from powerctl.annealing import (
    CoolingSchedule,
    PenaltyState,
    penalty_scale_down,
    penalty_update,
    sa_accept,
    temperature,
)
from powerctl.config import canonical_json, parse_config_dict
from powerctl.dspc import AgentState, DspcConfig, inner_power_loop, propose
from powerctl.feasibility import feasible_for_targets, maxmin_solve
from powerctl.model import (
    LogRateUtility,
    NetworkInstance,
    instance_from_dict,
    instance_to_dict,
    sinr,
    sinr_vector,
)
from powerctl.multicast import MulticastInstance, multicast_inner_loop, receiver_sinr
from powerctl.queueing import QueueState, TrafficClass, queue_step

# subnormal power fractions are flushed to zero; they have no physical meaning
unit = st.floats(0.0, 1.0).map(lambda v: v if v >= 1e-300 else 0.0)
gain = st.floats(0.01, 1.0)


@st.composite
def instances(draw, max_links=4):
    L = draw(st.integers(1, max_links))
    H = draw(arrays(float, (L, L), elements=gain))
    noise = draw(arrays(float, L, elements=st.floats(0.01, 1.0)))
    p_max = draw(arrays(float, L, elements=st.floats(0.5, 10.0)))
    w = draw(arrays(float, L, elements=st.floats(0.1, 2.0)))
    return NetworkInstance(H, noise, p_max, w)


@st.composite
def instance_and_power(draw, max_links=4):
    inst = draw(instances(max_links))
    frac = draw(arrays(float, inst.L, elements=unit))
    return inst, frac * inst.p_max


@given(instance_and_power())
def test_sinr_vector_matches_scalar_and_is_nonnegative(ip):
    inst, p = ip
    g = sinr_vector(inst, p)
    assert np.all(g >= 0)
    for l in range(inst.L):
        assert math.isclose(g[l], sinr(inst, p, l), rel_tol=1e-12, abs_tol=1e-300)
        if p[l] == 0:
            assert g[l] == 0


@given(instance_and_power(), st.floats(1.01, 10.0))
def test_scaling_all_powers_raises_every_active_sinr(ip, c):
    inst, p = ip
    assume(np.all(p > 1e-6 * inst.p_max))
    assert np.all(sinr_vector(inst, c * p) > sinr_vector(inst, p))


@given(instance_and_power(), arrays(float, 4, elements=st.floats(0.0, 1.0)))
def test_feasibility_is_monotone_in_targets(ip, shrink):
    inst, p = ip
    gamma = sinr_vector(inst, p)
    res = feasible_for_targets(inst, gamma)
    # targets produced by a feasible power vector are feasible, needing no more power
    assert res.feasible
    assert np.all(res.p_min <= p * (1 + 1e-8) + 1e-12)
    smaller = feasible_for_targets(inst, gamma * shrink[:inst.L])
    assert smaller.feasible
    assert np.all(smaller.p_min <= res.p_min * (1 + 1e-8) + 1e-12)


@given(instances(3), arrays(float, 3, elements=st.floats(0.05, 1.0)))
def test_maxmin_solution_meets_its_targets(inst, raw):
    x = raw[:inst.L] / raw[:inst.L].sum()
    spec = LogRateUtility(inst.weights)
    sol = maxmin_solve(inst, spec, x, tol=1e-7)
    u = spec.evaluate(sinr_vector(inst, sol.p_star))
    assert np.all(u >= sol.t_star * x * (1 - 1e-8) - 1e-9)
    assert np.all(sol.p_star <= inst.p_max * (1 + 1e-12))


@given(instance_and_power(), arrays(float, 4, elements=unit))
def test_inner_loop_lands_on_target_utilities(ip, start):
    inst, p = ip
    spec = LogRateUtility(inst.weights)
    targets = spec.evaluate(sinr_vector(inst, p))
    res = inner_power_loop(inst, spec, targets, start[:inst.L] * inst.p_max, tol=1e-12,
                           max_iter=100_000)
    assert res.converged
    # with every constraint met the total utility is the sum of the targets
    assert math.isclose(spec.evaluate(sinr_vector(inst, res.p)).sum(), targets.sum(),
                        rel_tol=1e-6, abs_tol=1e-9)


@given(instance_and_power(3), arrays(float, 3, elements=unit))
def test_singleton_multicast_matches_unicast(ip, start):
    inst, p = ip
    m = MulticastInstance.from_unicast(inst)
    assert receiver_sinr(m, p).tobytes() == sinr_vector(inst, p).tobytes()
    r = np.log1p(sinr_vector(inst, p))
    p0 = start[:inst.L] * inst.p_max
    a = inner_power_loop(inst, LogRateUtility(np.ones(inst.L)), r, p0)
    b = multicast_inner_loop(m, r, p0)
    assert a.p.tobytes() == b.p.tobytes()


@given(st.floats(-10, 10), st.floats(1e-3, 10), unit)
def test_acceptance_rule(delta, T, draw):
    d = sa_accept(delta, T, draw)
    assert d.accepted == (delta >= 0 or draw < math.exp(delta / T))


@given(st.floats(-5, -0.01), st.floats(0.05, 5))
def test_acceptance_frequency_matches_probability(delta, T):
    draws = np.random.default_rng(0).random(4000)
    freq = np.mean([sa_accept(delta, T, u).accepted for u in draws])
    assert abs(freq - math.exp(delta / T)) < 0.04


@given(st.floats(0.01, 10), st.floats(0.5, 0.99), st.integers(1, 500))
def test_temperatures_decrease(T0, xi, i):
    for s in (CoolingSchedule.geometric(T0, xi), CoolingSchedule.logarithmic(T0)):
        assert temperature(s, i + 1) < temperature(s, i)


@given(arrays(float, 3, elements=unit), arrays(float, 3, elements=st.floats(0, 5)),
       arrays(float, 3, elements=st.floats(0, 5)))
def test_penalty_update_never_lowers_multipliers(x, t, u):
    ps = PenaltyState(1.0, [0.5, 0.5, 0.5])
    out = penalty_update(ps, x, t, u)
    assert out.alpha >= ps.alpha and np.all(out.beta >= ps.beta)


@given(st.floats(0.01, 100), arrays(float, 3, elements=st.floats(0, 100)), st.integers(0, 2**31))
def test_scale_down_stays_in_band(alpha, beta, seed):
    ps = PenaltyState(alpha, beta, stall_counter=5)
    out = penalty_scale_down(ps, np.random.default_rng(seed))
    assert 0.7 * alpha <= out.alpha <= 0.95 * alpha
    assert np.all(out.beta <= 0.95 * beta + 1e-12) and np.all(out.beta >= 0.7 * beta - 1e-12)


@given(arrays(float, 2, elements=unit), st.floats(0, 1), unit, unit, unit, st.floats(0.5, 5))
def test_proposals_stay_in_box(tx, radius, u0, u1, u2, t_max):
    class Draws:
        def random(self, n):
            return np.array([u0, u1, u2])

    agent = AgentState(0, tx[0] * t_max, tx[1], 1.0, 1.0, 1.0)
    for mode in ("global", "neighborhood"):
        t, x = propose(agent, Draws(), DspcConfig(), t_max, mode, radius)
        assert 0 <= t <= t_max and 0 <= x <= 1


@st.composite
def queue_runs(draw):
    L = draw(st.integers(1, 3))
    routes = [tuple(draw(st.permutations(range(L)))[:draw(st.integers(1, L))])
              for _ in range(draw(st.integers(1, 3)))]
    classes = [TrafficClass(1.0, 1.0, r) for r in routes]
    steps = draw(st.integers(1, 15))
    S = len(classes)
    arrivals = [draw(arrays(float, (L, S), elements=st.floats(0, 5))) for _ in range(steps)]
    rates = [draw(arrays(float, L, elements=st.floats(0, 5))) for _ in range(steps)]
    sched = [draw(arrays(np.int64, L, elements=st.integers(-1, S - 1))) for _ in range(steps)]
    return L, classes, arrivals, rates, sched


@given(queue_runs())
def test_queues_nonnegative_and_work_conserving(run):
    L, classes, arrivals, rates, sched = run
    S = len(classes)
    # only first hops receive exogenous work
    first = np.zeros((L, S), dtype=bool)
    for s, c in enumerate(classes):
        first[c.route[0], s] = True
    qs = QueueState.empty(L, S)
    for A, r, k in zip(arrivals, rates, sched):
        A = np.where(first, A, 0.0)
        before = qs.Q_T.copy()
        qs = queue_step(qs, classes, A, k, r)
        assert np.all(qs.Q_T >= 0) and np.all(qs.Q_R >= 0)
        # work that leaves equals what destination hops served, capped by backlog
        left = before.sum() + A.sum() - qs.Q_T.sum()
        served_out = 0.0
        for l in range(L):
            s = int(k[l])
            if s >= 0:
                served = min(before[l, s], r[l])
                assert served <= before[l, s]
                if classes[s].route[-1] == l or l not in classes[s].route:
                    served_out += served
        assert math.isclose(left, served_out, rel_tol=1e-9, abs_tol=1e-9)


@given(instances(5))
def test_instance_json_roundtrip(inst):
    text = json.dumps(instance_to_dict(inst))
    back = instance_from_dict(json.loads(text))
    assert back == inst
    assert json.dumps(instance_to_dict(back)) == text


@given(st.integers(1, 3), st.integers(1, 3), st.integers(0, 2**31))
def test_multicast_json_roundtrip(L, per_group, seed):
    m = MulticastInstance.random(L, per_group, np.random.default_rng(seed))
    back = MulticastInstance.from_dict(json.loads(json.dumps(m.to_dict())))
    assert back == m


@given(st.integers(0, 10**6), st.integers(1, 50), st.floats(0.01, 1.0))
def test_config_roundtrip(seed, seeds, radius):
    cfg = parse_config_dict({"seed": seed, "seeds": seeds, "dspc": {"radius": radius}})
    again = parse_config_dict(json.loads(canonical_json(cfg.data)))
    assert again.data == cfg.data
