import json

import numpy as np
import pytest

import reference as ref
from powerctl.model import (
    LogRateUtility,
    NetworkInstance,
    case_one,
    case_two,
    instance_from_dict,
    instance_from_positions,
    instance_to_dict,
    load_instance,
    random_instance,
    save_instance,
    sinr,
    sinr_vector,
    six_link,
    total_utility,
)


def test_sinr_case_two_example(case2):
    inst, _ = case2
    # 0.3 / (0.1 + 0.03 * 2)
    assert sinr(inst, [1, 2], 0) == pytest.approx(1.875, abs=1e-12)
    assert sinr_vector(inst, [1, 2]) == pytest.approx([1.875, 1.6 / 0.6])


def test_sinr_zero_power():
    inst = six_link()
    assert np.all(sinr_vector(inst, np.zeros(6)) == 0)


def test_sinr_single_link():
    inst = NetworkInstance([[0.5]], 0.1, 2.0)
    assert sinr(inst, [2.0], 0) == pytest.approx(10.0)


def test_sinr_rejects_bad_input(case2):
    inst, _ = case2
    with pytest.raises(IndexError):
        sinr(inst, [1, 2], 2)
    with pytest.raises(ValueError):
        sinr(inst, [1.5, 2], 0)
    with pytest.raises(ValueError):
        sinr(inst, [-0.1, 2], 0)


def test_total_utility_table_values(case1, case2):
    # published optimum values, two decimals
    inst, spec = case1
    assert total_utility(inst, spec, [20, 6.79]) == pytest.approx(3.10, abs=0.01)
    inst, spec = case2
    assert total_utility(inst, spec, [0, 2]) == pytest.approx(1.22, abs=0.01)
    assert total_utility(inst, spec, [0, 0]) == 0.0


def test_total_utility_matches_reference(case1, case2):
    inst, spec = case1
    assert total_utility(inst, spec, [20, ref.CASE_ONE_OPT_P2]) == pytest.approx(ref.CASE_ONE_OPT, abs=1e-7)
    inst, spec = case2
    assert total_utility(inst, spec, [1, 2]) == pytest.approx(ref.CASE_TWO_AT_1_2, abs=1e-7)


def test_utility_inverse_roundtrip():
    spec = LogRateUtility([0.57, 0.43])
    g = np.array([0.3, 17.0])
    assert spec.inverse(spec.evaluate(g)) == pytest.approx(g)
    assert spec.evaluate(2.0, link=1) == pytest.approx(0.43 * np.log(3))


@pytest.mark.parametrize("kwargs, match", [
    (dict(H=[[1, 0], [0, 0]], noise=0.1, p_max=1), "own-link"),
    (dict(H=[[1, -1], [0, 1]], noise=0.1, p_max=1), "nonnegative"),
    (dict(H=[[1, 0], [0, 1]], noise=0.0, p_max=1), "noise"),
    (dict(H=[[1, 0], [0, 1]], noise=0.1, p_max=[1, 0]), "p_max"),
    (dict(H=[[1, 0], [0, 1]], noise=0.1, p_max=1, weights=[1, 2, 3]), "length"),
    (dict(H=[[1, 0, 0], [0, 1, 0]], noise=0.1, p_max=1), "square"),
])
def test_instance_validation(kwargs, match):
    with pytest.raises(ValueError, match=match):
        NetworkInstance(**kwargs)


def test_instance_is_immutable(case2):
    inst, _ = case2
    with pytest.raises(ValueError):
        inst.H[0, 0] = 1.0


def test_json_roundtrip_bit_exact(tmp_path):
    inst = random_instance(5, np.random.default_rng(3))
    path = tmp_path / "inst.json"
    save_instance(inst, path)
    first = path.read_text()
    back = load_instance(path)
    assert np.array_equal(back.H, inst.H)
    assert np.array_equal(back.noise, inst.noise)
    save_instance(back, path)
    assert path.read_text() == first


def test_positions_generate_gains():
    tx = [[0, 0], [5, 0]]
    rx = [[1, 0], [5, 2]]
    inst = instance_from_positions(tx, rx, 1e-4, 1.0)
    assert inst.H[0, 0] == pytest.approx(1.0)
    assert inst.H[1, 1] == pytest.approx(2.0 ** -4)
    assert inst.H[0, 1] == pytest.approx(np.hypot(5, 2) ** -4)
    # gains can be regenerated from positions alone
    d = instance_to_dict(inst)
    del d["H"]
    assert np.allclose(instance_from_dict(d).H, inst.H)


def test_instance_from_dict_rejects_unknown_keys():
    with pytest.raises(ValueError, match="unknown"):
        instance_from_dict({"H": [[1]], "noise": 1, "p_max": 1, "colour": 3})
    with pytest.raises(ValueError, match="declared"):
        instance_from_dict({"L": 3, "H": [[1]], "noise": 1, "p_max": 1})


def test_reference_instances():
    one, two = case_one(), case_two()
    assert one.p_max.tolist() == [20, 100]
    assert two.H.tolist() == [[0.3, 0.5], [0.03, 0.8]]
    six = six_link()
    assert six.L == 6 and np.all(six.weights == 1)
    assert json.loads(json.dumps(instance_to_dict(six)))["L"] == 6
