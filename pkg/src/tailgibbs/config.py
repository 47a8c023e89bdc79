"""Experiment configuration: JSON schema, validation and resolution.

A config is validated against :data:`SCHEMA` before anything runs; unknown
keys are rejected at every level.
"""

from __future__ import annotations

import copy
import json
import math
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema

_DIST = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["cauchy", "dexp", "gauss", "exppower"]},
        "scale": {"type": "number", "exclusiveMinimum": 0},
        "beta": {"type": "number", "exclusiveMinimum": 2},
    },
}

_HIER_MODEL = {
    "type": "object",
    "additionalProperties": False,
    "required": ["f1", "f2"],
    "properties": {
        "f1": _DIST,
        "f2": _DIST,
        "y": {"oneOf": [{"type": "number"},
                        {"type": "array", "minItems": 1,
                         "items": {"type": "array", "minItems": 1, "items": {"type": "number"}}}]},
    },
}

_LGP_MODEL = {
    "type": "object",
    "additionalProperties": False,
    "required": ["latent_gp"],
    "properties": {
        "latent_gp": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "p": {"type": "integer", "minimum": 1},
                "phi": {"type": "number", "exclusiveMinimum": -1, "exclusiveMaximum": 1},
                "marginal_var": {"type": "number", "exclusiveMinimum": 0},
                "Sigma": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
                "f1": _DIST,
                "y": {"type": "array", "items": {"type": "number"}},
                "simulate": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {"theta": {"type": "number"}, "seed": {"type": "integer", "minimum": 0}},
                },
            },
        }
    },
}

_KERNEL_OBJ = {
    "type": "object",
    "additionalProperties": False,
    "required": ["variant"],
    "properties": {
        "variant": {"enum": ["centred", "noncentred", "partial", "grouped", "hybrid"]},
        "rho": {"type": "number", "minimum": 0, "maximum": 1},
        "p_mix": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "likelihood_q_rate": {"type": "boolean"},
    },
}
_KERNEL_ONE = {"oneOf": [{"enum": ["centred", "noncentred", "grouped", "hybrid", "P0", "P1"]}, _KERNEL_OBJ]}
_KERNEL = {"oneOf": [_KERNEL_ONE, {"type": "array", "minItems": 1, "items": _KERNEL_ONE}]}

_RUN = {
    "type": "object",
    "additionalProperties": False,
    "required": ["n_iter"],
    "properties": {
        "theta0": {"oneOf": [{"type": "number"}, {"type": "array", "minItems": 1, "items": {"type": "number"}}]},
        "n_iter": {"type": "integer", "minimum": 1},
        "burn_in": {"type": "integer", "minimum": 0},
        "seed": {"type": "integer", "minimum": 0},
        "n_chains": {"type": "integer", "minimum": 1},
        "record_x": {"type": "boolean"},
    },
}

_DIAG = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "alpha": {"type": "number", "exclusiveMinimum": 0},
        "theta_ladder": {"type": "array", "minItems": 2, "items": {"type": "number", "exclusiveMinimum": 0}},
        "n_rep": {"type": "integer", "minimum": 1000},
        "mode_radius": {"type": "number", "exclusiveMinimum": 0},
        "ks_threshold": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "drift_threshold": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "ptip_eps": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "return_envelope": {"type": "number", "exclusiveMinimum": 0},
        "return_max_iter": {"type": "integer", "minimum": 1},
        "return_seeds": {"type": "integer", "minimum": 1},
    },
}

_MALA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "step_size": {"type": "number", "exclusiveMinimum": 0},
        "n_inner": {"type": "integer", "minimum": 1},
        "target_accept": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
    },
}

_SLICE = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "initial_width": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "max_stepout": {"type": "integer", "minimum": 1},
        "max_shrink": {"type": "integer", "minimum": 50},
        "n_sweeps": {"type": "integer", "minimum": 1},
        "n_burn": {"type": "integer", "minimum": 1},
    },
}

SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "description": {"type": "string"},
        "model": {"oneOf": [_HIER_MODEL, _LGP_MODEL]},
        "kernel": _KERNEL,
        "run": _RUN,
        "diag": _DIAG,
        "mala": _MALA,
        "slice": _SLICE,
        "output_dir": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
        "cells": {"type": "array", "items": {"type": "string"}},
    },
}

QUERY_SCHEMA: dict[str, Any] = {
    "type": "object",
    "additionalProperties": False,
    "required": ["query", "inputs"],
    "properties": {"query": {"type": "string"}, "inputs": {"type": "object"}},
}


class ConfigError(ValueError):
    """Schema or semantic error in an experiment config."""


def validate(cfg: dict[str, Any], schema: dict[str, Any] = SCHEMA) -> dict[str, Any]:
    try:
        jsonschema.validate(cfg, schema)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config error at {where}: {exc.message}") from None
    return cfg


def load(path: str | Path) -> dict[str, Any]:
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return validate(obj)


PRESETS = ("fig1", "fig2", "table2")


def preset(name: str) -> dict[str, Any]:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    text = resources.files("tailgibbs.presets").joinpath(f"{name}.json").read_text()
    return validate(json.loads(text))


def with_seed(cfg: dict[str, Any], seed: int | None) -> dict[str, Any]:
    """Copy of ``cfg`` with the seed override applied everywhere a seed lives."""
    out = copy.deepcopy(cfg)
    if seed is not None:
        out["seed"] = int(seed)
        if "run" in out:
            out["run"]["seed"] = int(seed)
    return out


def jsonable(obj: Any) -> Any:
    """Replace non-finite floats by strings so the output is strict JSON."""
    if isinstance(obj, float) and not math.isfinite(obj):
        return "nan" if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, dict):
        return {k: jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    return obj


def dumps(obj: Any) -> str:
    return json.dumps(jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"
