"""
Run configuration documents for the ``flow`` and ``solve`` commands.

A document is validated against a Draft 7 schema before anything else happens;
defaults are then filled in and the resolved document is kept for the summary.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional

import jsonschema

from curvflow import config
from curvflow.models.flow import VARIANTS, FlowConfig
from curvflow.models.problem import EQUATIONS, ProblemSpec
from curvflow.utils.errors import ConfigError

_NUMBER = {"type": "number"}
_POSITIVE_INT = {"type": "integer", "minimum": 1}

PSI_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "c0": _NUMBER,
        "axes": {
            "type": "array",
            "maxItems": 3,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["axis", "a"],
                "properties": {"axis": {"type": "integer", "minimum": 0, "maximum": 2}, "a": _NUMBER},
            },
        },
    },
}

CURVATURE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["sigma_k_root", "quotient", "power_mean"]},
        "beta": {"type": "number", "exclusiveMinimum": 0},
        "argument": {"enum": ["principal_curvatures", "principal_radii"]},
        "k": {"type": "integer", "minimum": 0},
        "l": {"type": "integer", "minimum": 1},
        "m": {"type": "number", "exclusiveMaximum": 0},
    },
}

SHAPE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["sphere", "ellipsoid", "radial_perturbation"]},
        "r": {"type": "number", "exclusiveMinimum": 0},
        "axes": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 2,
                 "maxItems": 3},
        "amplitude": _NUMBER,
        "direction": {"type": "array", "items": _NUMBER, "minItems": 2, "maxItems": 3},
        "mode": {"type": "integer", "minimum": 0},
    },
}

_COMMON = {
    "n": {"enum": [1, 2]},
    "n_theta": _POSITIVE_INT,
    "n_phi": _POSITIVE_INT,
    "dt_safety": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
    "max_steps": {"type": "integer", "minimum": 0},
    "initial_shape": SHAPE_SCHEMA,
    "output_dir": {"type": "string"},
}

FLOW_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "additionalProperties": False,
    "required": ["n", "variant", "alpha", "delta", "curvature", "initial_shape"],
    "properties": {
        **_COMMON,
        "command": {"const": "flow"},
        "variant": {"enum": list(VARIANTS)},
        "alpha": _NUMBER,
        "delta": _NUMBER,
        "curvature": CURVATURE_SCHEMA,
        "psi": PSI_SCHEMA,
        "t_end": {"type": "number", "minimum": 0},
        "stop_osc_tol": {"type": "number", "minimum": 0},
        "stop_residual_tol": {"type": "number", "minimum": 0},
        "prescale": {"type": "boolean"},
        "snapshot_stride": {"type": "integer", "minimum": 0},
        "random_seed": {"type": "integer", "minimum": 0},
    },
}

SOLVE_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "additionalProperties": False,
    "required": ["n", "problem", "initial_shape"],
    "properties": {
        **_COMMON,
        "command": {"const": "solve"},
        "residual_tol": {"type": "number", "exclusiveMinimum": 0},
        "problem": {
            "type": "object",
            "additionalProperties": False,
            "required": ["equation"],
            "properties": {
                "equation": {"enum": list(EQUATIONS)},
                "p": _NUMBER,
                "q": _NUMBER,
                "k": {"type": "integer", "minimum": 1},
                "beta": {"type": "number", "exclusiveMinimum": 0},
                "alpha": _NUMBER,
                "delta": _NUMBER,
                "psi": PSI_SCHEMA,
            },
        },
    },
}

SCHEMAS = {"flow": FLOW_SCHEMA, "solve": SOLVE_SCHEMA}


@dataclass
class RunConfig:
    command: str
    resolved: Dict[str, Any]
    initial_shape: Dict[str, Any]
    output_dir: Path
    flow: Optional[FlowConfig] = None
    problem: Optional[ProblemSpec] = None
    snapshot_stride: int = 0
    options: Dict[str, Any] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return int(self.resolved["n"])

    @property
    def grid_size(self):
        return self.resolved["n_theta"], self.resolved.get("n_phi")


def validate_document(document: Dict[str, Any], command: str):
    try:
        jsonschema.validate(instance=document, schema=SCHEMAS[command], cls=jsonschema.Draft7Validator)
    except jsonschema.ValidationError as e:
        where = "/".join(str(part) for part in e.absolute_path) or "<root>"
        raise ConfigError(f"invalid {command} config at {where}: {e.message}") from e


def _with_defaults(document: Dict[str, Any], command: str) -> Dict[str, Any]:
    resolved = copy.deepcopy(document)
    resolved["command"] = command
    resolved.setdefault("n_theta", 16)
    if resolved["n"] == 2:
        resolved.setdefault("n_phi", 2 * resolved["n_theta"])
    resolved.setdefault("dt_safety", config.DEFAULT_DT_SAFETY)
    resolved.setdefault("max_steps", config.DEFAULT_MAX_STEPS)
    if command == "flow":
        resolved.setdefault("psi", {"c0": 1.0, "axes": []})
        resolved.setdefault("t_end", 1.0)
        resolved.setdefault("stop_osc_tol", 1e-3)
        resolved.setdefault("stop_residual_tol", 0.0)
        resolved.setdefault("prescale", True)
        resolved.setdefault("snapshot_stride", 0)
        resolved.setdefault("random_seed", 0)
        resolved["curvature"].setdefault("beta", 1.0)
        resolved["curvature"].setdefault("argument", "principal_curvatures")
    else:
        resolved.setdefault("residual_tol", config.DEFAULT_SOLVE_RESIDUAL_TOL)
        resolved["problem"].setdefault("beta", 1.0)
    return resolved


def parse_run_config(document: Dict[str, Any], command: str, source: Optional[Path] = None) -> RunConfig:
    if command not in SCHEMAS:
        raise ConfigError(f"unknown command {command!r}")
    validate_document(document, command)
    resolved = _with_defaults(document, command)
    default_dir = config.OUTPUT_DIR / (source.stem if source is not None else command)
    output_dir = Path(resolved.get("output_dir", default_dir))
    run = RunConfig(command, resolved, resolved["initial_shape"], output_dir)
    if command == "flow":
        keys = ("variant", "alpha", "delta", "curvature", "psi", "n_theta", "n_phi", "dt_safety", "t_end",
                "stop_osc_tol", "stop_residual_tol", "max_steps", "prescale", "n")
        run.flow = FlowConfig.from_dict({key: resolved[key] for key in keys if key in resolved})
        run.snapshot_stride = int(resolved["snapshot_stride"])
        run.options = {"random_seed": int(resolved["random_seed"])}
    else:
        run.problem = ProblemSpec.from_dict(resolved["problem"], resolved["n"])
        run.options = {key: resolved[key] for key in ("residual_tol", "max_steps", "dt_safety")}
    return run


def load_run_config(path: Path, command: str) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} not found")
    try:
        with open(path, "r", encoding="utf-8") as f:
            document = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path} is not valid JSON: {e}") from e
    if not isinstance(document, dict):
        raise ConfigError(f"{path} must hold a JSON object")
    return parse_run_config(document, command, source=path)
