"""
Experiment configuration: JSON schema, defaults and instance resolution.

A config is a JSON object with optional sections ``instance``, ``dspc``,
``edspc``, ``multicast``, ``edspc_multicast``, ``centralized``, ``oracle``, ``queue`` and
``scan`` plus top-level ``seed``, ``seeds`` and ``output_dir``.  Parsing
fills every omitted field, so a resolved config fully determines a run.
"""

from __future__ import annotations

import copy
import dataclasses
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import jsonschema
import numpy as np

from .annealing import CoolingSchedule
from .dspc import DspcConfig
from .model import case_one, case_two, instance_from_dict, random_instance, six_link
from .multicast import MulticastInstance

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "parse_config",
    "parse_config_dict",
    "load_config",
    "resolve_instance",
    "dspc_config",
    "config_hash",
    "canonical_json",
    "PRESETS",
    "ANNEALER_SECTIONS",
    "annealer_section",
    "instance_is_multicast",
]

PRESETS = {"case_one": case_one, "case_two": case_two, "six_link": six_link}

ANNEALER_SECTIONS = ("dspc", "edspc", "multicast", "edspc_multicast")


def annealer_section(edspc: bool, multicast: bool) -> str:
    """Config section holding the parameters of the chosen annealer."""
    if multicast:
        return "edspc_multicast" if edspc else "multicast"
    return "edspc" if edspc else "dspc"


def instance_is_multicast(spec) -> bool:
    """Whether a raw ``instance`` config entry describes a multicast instance."""
    if not spec:
        return False
    if "inline" in spec:
        return "groups" in spec["inline"]
    if "generate" in spec:
        return "receivers_per_group" in spec["generate"]
    if "file" in spec:
        try:
            return "groups" in json.loads(Path(spec["file"]).read_text())
        except (OSError, ValueError):
            return False
    return False

_POS = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}
_POS_OR_LIST = {"anyOf": [_POS, {"type": "array", "items": _POS, "minItems": 1}]}


def _dspc_section_schema():
    props = {"schedule": {
        "type": "object",
        "additionalProperties": False,
        "properties": {
            "kind": {"enum": ["logarithmic", "geometric"]},
            "T0": _POS,
            "xi": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        },
    }}
    special = {
        "epsilon": _POS,
        "t_max": {"anyOf": [_POS, {"type": "null"}]},
        "alpha0": {"anyOf": [_NONNEG, {"type": "null"}]},
        "beta0": {"anyOf": [_NONNEG, {"type": "null"}]},
        "proposal": {"enum": ["adaptive", "global", "neighborhood"]},
        "report": {"enum": ["best", "final"]},
        "radius": {"type": "number", "minimum": 0, "maximum": 1},
        "scale_low": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "scale_high": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
    }
    for f in dataclasses.fields(DspcConfig):
        if f.name in ("schedule", "seed"):
            continue
        if f.name in special:
            props[f.name] = special[f.name]
        elif f.type in ("int", int):
            props[f.name] = {"type": "integer", "minimum": 1}
        elif f.type in ("bool", bool):
            props[f.name] = {"type": "boolean"}
        else:
            props[f.name] = _NONNEG
    return {"type": "object", "additionalProperties": False, "properties": props}


SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "instance": {
            "type": ["object", "null"],
            "additionalProperties": False,
            "minProperties": 1,
            "maxProperties": 1,
            "properties": {
                "preset": {"enum": sorted(PRESETS)},
                "file": {"type": "string"},
                "inline": {
                    "type": "object",
                    "properties": {"noise": _POS_OR_LIST, "p_max": _POS_OR_LIST,
                                   "weights": _POS_OR_LIST},
                },
                "generate": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["links"],
                    "properties": {
                        "links": {"type": "integer", "minimum": 1},
                        "receivers_per_group": {"type": "integer", "minimum": 1},
                        "area": _POS,
                        "exponent": _POS,
                        "noise": _POS,
                        "p_max": _POS,
                        "link_length": {"anyOf": [_POS, {"type": "null"}]},
                        "seed": {"type": "integer", "minimum": 0},
                    },
                },
            },
        },
        "dspc": _dspc_section_schema(),
        "edspc": _dspc_section_schema(),
        "multicast": _dspc_section_schema(),
        "edspc_multicast": _dspc_section_schema(),
        "centralized": {
            "type": "object", "additionalProperties": False,
            "properties": {"eps": _POS, "tol": _POS, "vertices": {"type": "boolean"}},
        },
        "oracle": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "resolution": {"type": "integer", "minimum": 2},
                "samples": {"type": "integer", "minimum": 1},
                "budget": {"type": "integer", "minimum": 1},
                "refine_top": {"type": "integer", "minimum": 1},
            },
        },
        "queue": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "psi": {"type": "array", "items": _NONNEG, "minItems": 1},
                "nu": _POS,
                "horizon": {"type": "integer", "minimum": 1},
                "solver": {"enum": ["oracle", "centralized", "dspc"]},
                "resolve_period": {"type": "integer", "minimum": 1},
                "backlog_bound": _POS,
                "slope_tol": _NONNEG,
            },
        },
        "scan": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "axis": {"type": "array", "items": _NONNEG, "minItems": 1},
                "points": {"type": ["array", "null"],
                           "items": {"type": "array", "items": _NONNEG}},
            },
        },
        "seed": {"type": "integer", "minimum": 0},
        "seeds": {"type": "integer", "minimum": 1},
        "output_dir": {"type": ["string", "null"]},
    },
}


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` lists every violation found."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid config:\n  " + "\n  ".join(self.errors))


def _dspc_defaults(cfg: DspcConfig) -> dict:
    out = {}
    for f in dataclasses.fields(cfg):
        if f.name == "seed":
            continue
        v = getattr(cfg, f.name)
        out[f.name] = dataclasses.asdict(v) if f.name == "schedule" else v
    return out


def _defaults() -> dict:
    return {
        "instance": None,
        "dspc": _dspc_defaults(DspcConfig()),
        "edspc": _dspc_defaults(DspcConfig.edspc()),
        "multicast": _dspc_defaults(DspcConfig.multicast()),
        "edspc_multicast": _dspc_defaults(DspcConfig.edspc_multicast()),
        "centralized": {"eps": 1e-3, "tol": 1e-6, "vertices": True},
        "oracle": {"resolution": 201, "samples": 1_000_000, "budget": 50_000_000,
                   "refine_top": 100},
        "queue": {"psi": [1.0, 1.0], "nu": 1.0, "horizon": 10_000, "solver": "oracle",
                  "resolve_period": 1, "backlog_bound": 1e3, "slope_tol": 1e-3},
        "scan": {"axis": [0.25, 0.5, 0.75, 1.0, 1.25, 1.5], "points": None},
        "seed": 0,
        "seeds": 1,
        "output_dir": None,
    }


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated config with every default filled in (see :data:`SCHEMA`)."""

    data: dict

    def __getitem__(self, key):
        return self.data[key]

    @property
    def seed(self) -> int:
        return self.data["seed"]

    def to_dict(self) -> dict:
        return copy.deepcopy(self.data)


def _path(err) -> str:
    return ".".join(str(p) for p in err.absolute_path) or "<root>"


def parse_config_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError(["<root>: config must be a JSON object"])
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = [f"{_path(e)}: {e.message}"
              for e in sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))]
    if errors:
        raise ConfigError(errors)
    data = _merge(_defaults(), raw)
    # semantic checks the schema cannot express
    for name in ANNEALER_SECTIONS:
        try:
            dspc_config(data, name)
        except ValueError as exc:
            errors.append(f"{name}: {exc}")
    inst = data["instance"]
    if inst and "file" in inst and not Path(inst["file"]).is_file():
        errors.append(f"instance.file: no such file {inst['file']!r}")
    if inst and "inline" in inst:
        try:
            _inline_instance(inst["inline"])
        except (KeyError, ValueError) as exc:
            errors.append(f"instance.inline: {exc}")
    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(data)


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate JSON config text, filling defaults."""
    try:
        raw = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError([f"<root>: not valid JSON ({exc})"]) from exc
    return parse_config_dict(raw)


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError([f"config file not found: {p}"])
    return parse_config(p.read_text())


def _inline_instance(d):
    if "groups" in d:
        return MulticastInstance.from_dict(d)
    return instance_from_dict(d)


def resolve_instance(cfg: ExperimentConfig | dict, default="case_two"):
    """Build the configured instance (unicast or multicast)."""
    data = cfg.data if isinstance(cfg, ExperimentConfig) else cfg
    spec = data["instance"] or {"preset": default}
    if "preset" in spec:
        return PRESETS[spec["preset"]]()
    if "file" in spec:
        return _inline_instance(json.loads(Path(spec["file"]).read_text()))
    if "inline" in spec:
        return _inline_instance(spec["inline"])
    g = spec["generate"]
    rng = np.random.default_rng(g.get("seed", 0))
    area, noise, p_max = g.get("area", 10.0), g.get("noise", 1e-4), g.get("p_max", 1.0)
    if "receivers_per_group" in g:
        tx = rng.uniform(0, area, size=(g["links"], 2))
        groups = [rng.uniform(0, area, size=(g["receivers_per_group"], 2))
                  for _ in range(g["links"])]
        return MulticastInstance.from_positions(tx, groups, noise, p_max,
                                                exponent=g.get("exponent", 4.0))
    inst = random_instance(g["links"], rng, area, noise, p_max,
                           link_length=g.get("link_length"))
    if g.get("exponent", 4.0) != 4.0:
        from .model import instance_from_positions
        pos = inst.positions
        inst = instance_from_positions(pos["tx"], pos["rx"], noise, p_max,
                                       exponent=g["exponent"])
    return inst


def dspc_config(cfg: ExperimentConfig | dict, section="dspc", seed=None) -> DspcConfig:
    data = cfg.data if isinstance(cfg, ExperimentConfig) else cfg
    sec = dict(data[section])
    sec["schedule"] = CoolingSchedule(**sec["schedule"])
    return DspcConfig(**sec, seed=data["seed"] if seed is None else seed)


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(canonical_json(cfg.data).encode()).hexdigest()
