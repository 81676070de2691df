"""Experiment configuration: JSON schema validation and object builders.

Configs are strict: unknown keys are rejected and the RNG seed is mandatory
(runs never seed from the clock).
"""

from __future__ import annotations

import hashlib
import json

import jsonschema
import numpy as np

from .domains import domain_from_config, free_space
from .functionals import functional_from_config
from .grids import Control, TimeGrid
from .ldp import event_from_config
from .models import model_from_config
from .operators import IndicatorOperator, operator_from_config


class ConfigError(ValueError):
    pass


_NUM = {"type": "number"}
_VEC = {"type": "array", "items": _NUM, "minItems": 1}
_MAT = {"type": "array", "items": _VEC, "minItems": 1}
_OPTVEC = {"type": "array", "items": {"type": ["number", "null"]}, "minItems": 1}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["seed"],
    "properties": {
        "seed": {"type": "integer", "minimum": 0},
        "model": {
            "type": "object",
            "additionalProperties": False,
            "required": ["name"],
            "properties": {
                "name": {"enum": ["brownian", "ou", "doublewell", "statedep"]},
                "dim": {"type": "integer", "minimum": 1},
                "noise_dim": {"type": "integer", "minimum": 1},
                "params": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {"lam": _NUM, "c": _NUM, "clip": _NUM},
                },
                "constants": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "c_b": _NUM, "c_sigma": _NUM,
                        "c_b_prime": _NUM, "growth_n": {"type": "integer"},
                    },
                },
            },
        },
        "domain": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["half-space", "axis-box", "euclidean-ball", "polytope"]},
                "params": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "normal": _VEC, "offset": _NUM,
                        "lo": _OPTVEC, "hi": _OPTVEC,
                        "center": _VEC, "radius": _NUM,
                        "normals": _MAT, "offsets": _VEC,
                        "interior_point": _VEC,
                    },
                },
            },
        },
        "operator": {
            "type": "object",
            "additionalProperties": False,
            "required": ["variant"],
            "properties": {
                "variant": {"enum": [
                    "indicator-subdifferential", "filled-1d-graph",
                    "sum-with-lipschitz-monotone-map",
                ]},
                "params": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "breakpoints": _VEC,
                        "values": _VEC,
                        "map": {
                            "type": "object",
                            "additionalProperties": False,
                            "required": ["name"],
                            "properties": {
                                "name": {"enum": ["linear", "tanh"]},
                                "slope": _NUM, "scale": _NUM,
                            },
                        },
                    },
                },
            },
        },
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "required": ["T", "N"],
            "properties": {
                "T": {"type": "number", "exclusiveMinimum": 0},
                "N": {"type": "integer", "minimum": 1},
                "M": {"type": "integer", "minimum": 1},
            },
        },
        "x0": _VEC,
        "eps": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "eps_list": {"type": "array", "items": _NUM, "minItems": 1},
        "n_paths": {"type": "integer", "minimum": 1},
        "event": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": [
                    "endpoint-beyond-level", "endpoint-in-ball",
                    "sup-norm-tube-around-path", "running-max-above-level",
                ]},
                "closed": {"type": "boolean"},
                "params": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "direction": _VEC, "level": _NUM,
                        "center": _VEC, "radius": _NUM,
                        "reference_path": _MAT, "delta": _NUM,
                    },
                },
            },
        },
        "functional": {
            "type": "object",
            "additionalProperties": False,
            "required": ["id"],
            "properties": {
                "id": {"enum": ["constant", "endpoint-cap", "runmax-cap"]},
                "params": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "value": _NUM, "target": _VEC, "cap": _NUM,
                        "direction": _VEC, "level": _NUM,
                    },
                },
            },
        },
        "control": {
            "type": "object",
            "additionalProperties": False,
            "required": ["values"],
            "properties": {"values": _MAT},
        },
        "tilt": {
            "oneOf": [
                {"enum": ["none", "auto"]},
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["values"],
                    "properties": {"values": _MAT},
                },
            ],
        },
        "rate": {
            "type": "object",
            "additionalProperties": False,
            "required": ["target"],
            "properties": {
                "target": _VEC,
                "tol": _NUM, "resid": _NUM,
                "restarts": {"type": "integer", "minimum": 0},
                "max_iter": {"type": "integer", "minimum": 1},
                "gradient": {"enum": ["fd", "adjoint"]},
                "penalties": _VEC,
            },
        },
        "properties": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"probe_count": {"type": "integer", "minimum": 1}},
        },
        "ld1": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"threshold_frac": _NUM},
        },
        "checks": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "samples": {"type": "integer", "minimum": 1},
                "radius": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "criteria": {"type": "array", "items": {"type": "integer", "minimum": 1, "maximum": 9}},
    },
}

_REQUIRED_BY_COMMAND = {
    "check-ops": ["model"],
    "simulate": ["model", "grid", "x0", "eps", "n_paths"],
    "skeleton": ["model", "grid", "x0", "control"],
    "rate": ["model", "grid", "x0", "rate"],
    "verify-ldp": ["model", "grid", "x0", "eps_list", "n_paths", "event"],
    "laplace": ["model", "grid", "x0", "eps_list", "n_paths", "functional"],
    "suite": [],
}


def config_hash(raw_bytes: bytes) -> str:
    return hashlib.sha256(raw_bytes).hexdigest()


def load_config(path: str, command: str, seed_override: int | None = None) -> tuple[dict, str]:
    """Parse, validate and (optionally) override the seed; returns the config
    dict and the sha256 of the raw file bytes."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as e:
        raise ConfigError(f"cannot read config {path!r}: {e}")
    try:
        cfg = json.loads(raw)
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: line {e.lineno}, column {e.colno}: {e.msg}")
    validate_config(cfg, command)
    if seed_override is not None:
        cfg["seed"] = int(seed_override)
    return cfg, config_hash(raw)


def validate_config(cfg: dict, command: str) -> None:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        loc = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"config key {loc!r}: {e.message}")
    missing = [k for k in _REQUIRED_BY_COMMAND.get(command, []) if k not in cfg]
    if missing:
        raise ConfigError(f"subcommand {command!r} requires config key(s): {', '.join(missing)}")


def build_model(cfg: dict):
    return model_from_config(cfg["model"])


def build_operator(cfg: dict, model):
    """Operator (with its domain) from the config; defaults to the trivial
    indicator over all of R^m when no domain/operator section is present."""
    domain = domain_from_config(cfg["domain"]) if "domain" in cfg else None
    if "operator" not in cfg:
        return IndicatorOperator(domain if domain is not None else free_space(model.dim))
    op = operator_from_config(
        cfg["operator"],
        domain if domain is not None else free_space(model.dim),
    )
    return op


def build_grids(cfg: dict) -> tuple[TimeGrid, TimeGrid]:
    g = cfg["grid"]
    sim = TimeGrid(float(g["T"]), int(g["N"]))
    ctrl = TimeGrid(float(g["T"]), int(g.get("M", min(32, int(g["N"])))))
    return sim, ctrl


def build_control(cfg_section: dict, ctrl_grid: TimeGrid) -> Control:
    return Control(ctrl_grid, np.asarray(cfg_section["values"], dtype=float))


def build_event(cfg: dict):
    return event_from_config(cfg["event"])


def build_functional(cfg: dict):
    return functional_from_config(cfg["functional"])
