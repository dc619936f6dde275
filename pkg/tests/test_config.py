import json

import numpy as np
import pytest

from powerctl.config import (
    ConfigError,
    annealer_section,
    config_hash,
    dspc_config,
    instance_is_multicast,
    load_config,
    parse_config,
    parse_config_dict,
    resolve_instance,
)
from powerctl.dspc import DspcConfig
from powerctl.model import NetworkInstance, case_two
from powerctl.multicast import MulticastInstance


def test_minimal_config_fills_defaults():
    cfg = parse_config("{}")
    assert cfg["edspc"]["schedule"] == {"kind": "geometric", "T0": 2.0, "xi": 0.9}
    for section in ("dspc", "edspc", "multicast", "edspc_multicast"):
        assert cfg[section]["sigma"] == 1.0
        assert cfg[section]["varrho"] == 1.0
        assert cfg[section]["stall_limit"] == 5
    assert cfg["seed"] == 0 and cfg["instance"] is None
    assert dspc_config(cfg) == DspcConfig()
    assert dspc_config(cfg, "edspc", seed=7) == DspcConfig.edspc(seed=7)
    assert dspc_config(cfg, "multicast") == DspcConfig.multicast()
    assert dspc_config(cfg, "edspc_multicast") == DspcConfig.edspc_multicast()


def test_negative_noise_names_field():
    with pytest.raises(ConfigError) as err:
        parse_config_dict({"instance": {"inline": {"H": [[1]], "noise": -1, "p_max": 1}}})
    assert any(e.startswith("instance.inline.noise") for e in err.value.errors)


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="bogus"):
        parse_config('{"bogus": 1}')
    with pytest.raises(ConfigError, match="dspc"):
        parse_config('{"dspc": {"temperature": 1}}')


def test_every_violation_listed():
    with pytest.raises(ConfigError) as err:
        parse_config_dict({"seed": -1, "dspc": {"schedule": {"xi": 2}}, "queue": {"horizon": 0}})
    fields = sorted(e.split(":")[0] for e in err.value.errors)
    assert fields == ["dspc.schedule.xi", "queue.horizon", "seed"]


def test_semantic_errors_and_missing_files(tmp_path):
    with pytest.raises(ConfigError, match="scale_low"):
        parse_config_dict({"dspc": {"scale_low": 0.99, "scale_high": 0.9}})
    with pytest.raises(ConfigError, match="no such file"):
        parse_config_dict({"instance": {"file": str(tmp_path / "missing.json")}})
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "missing.json")
    with pytest.raises(ConfigError, match="JSON"):
        parse_config("{not json")


def test_instance_sources(tmp_path):
    assert resolve_instance(parse_config("{}")) == case_two()
    inline = {"H": [[1, 0.1], [0.2, 1]], "noise": 0.1, "p_max": [1, 2]}
    inst = resolve_instance(parse_config_dict({"instance": {"inline": inline}}))
    assert isinstance(inst, NetworkInstance) and inst.p_max.tolist() == [1, 2]
    path = tmp_path / "i.json"
    path.write_text(json.dumps(inline))
    assert resolve_instance(parse_config_dict({"instance": {"file": str(path)}})) == inst
    gen = resolve_instance(parse_config_dict({"instance": {"generate": {"links": 4, "seed": 3}}}))
    assert gen.L == 4 and gen.positions is not None
    again = resolve_instance(parse_config_dict({"instance": {"generate": {"links": 4, "seed": 3}}}))
    assert np.array_equal(gen.H, again.H)
    mc = resolve_instance(parse_config_dict(
        {"instance": {"generate": {"links": 3, "receivers_per_group": 2, "seed": 1}}}))
    assert isinstance(mc, MulticastInstance) and mc.R == 6


def test_instance_source_exclusive():
    with pytest.raises(ConfigError):
        parse_config_dict({"instance": {"preset": "case_one", "file": "x.json"}})


def test_multicast_detection(tmp_path):
    m = MulticastInstance([[1.0, 0.5]], [[0, 1]], 0.1, 1.0)
    path = tmp_path / "m.json"
    m.save(path)
    assert instance_is_multicast({"file": str(path)})
    assert instance_is_multicast({"generate": {"links": 2, "receivers_per_group": 2}})
    assert not instance_is_multicast({"preset": "case_one"})
    assert not instance_is_multicast(None)
    assert annealer_section(True, True) == "edspc_multicast"
    assert annealer_section(False, False) == "dspc"


def test_config_hash_is_canonical():
    a = parse_config('{"seed": 3, "seeds": 2}')
    b = parse_config('{"seeds": 2, "seed": 3}')
    c = parse_config('{"seeds": 2, "seed": 4}')
    assert config_hash(a) == config_hash(b) != config_hash(c)
