"""Experiment configuration: JSON schema, defaults and loading."""
from __future__ import annotations

import copy
import json
from importlib import resources
from pathlib import Path

import jsonschema

from .errors import ConfigError

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_int1 = {"type": "integer", "minimum": 1}
_pair = {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}


def _obj(props, required=()):
    return {"type": "object", "properties": props, "required": list(required),
            "additionalProperties": False}


DAMPING = {"oneOf": [
    _obj({"alpha": _num, "beta": _num}, ["alpha", "beta"]),
    _obj({"ratios": _pair, "modes": {"type": "array", "items": _int1, "minItems": 2, "maxItems": 2}},
         ["ratios", "modes"]),
]}

SCHEMA = _obj({
    "preset": {"enum": ["lattice", "resonator"]},
    "model": _obj({
        "m": _pos, "k1": _pos, "k2": _pos,
        "vary": {"type": "array", "items": {"enum": ["m", "k1", "k2"]}, "minItems": 1, "uniqueItems": True},
        "n_base": {"type": "integer", "minimum": 3}, "base_mass": _pos, "base_stiffness": _pos,
        "attach_node": {"type": "integer", "minimum": 1}, "mass_coeff": _pos, "stiffness_coeff": _pos,
        "L0": _pos, "W0": _pos, "rel_range": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
    }),
    "bounds": {"type": "array", "items": _pair, "minItems": 1},
    "nominal": {"type": "array", "items": _num, "minItems": 1},
    "q": _int1,
    "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
    "thresholds": _obj({
        "rank_tau": _pos, "rcond": _pos, "svm_C": _pos, "svm_gamma": _pos,
        "pca_u": _int1, "pca_threshold": _pos,
    }),
    "rank_scan": _obj({
        "q_max": _int1, "swap": {"type": "array", "items": _int1, "minItems": 2, "maxItems": 2},
        "n_permutations": _int1, "permutation": {"enum": ["cycle", "shuffle"]},
    }),
    "perturbation_scan": _obj({
        "n_points": {"type": "integer", "minimum": 2}, "range": _pair,
        "references": {"type": "array", "items": _pos, "minItems": 1},
    }),
    "sampling": _obj({
        "mode": {"enum": ["single", "multi"]}, "n_samples": _int1, "n_sub": _int1,
        "reference": {"type": "array", "items": _num, "minItems": 1},
        "ordered": {"type": "boolean"}, "skip": {"type": "boolean"},
    }),
    "frf": _obj({
        "grid": _obj({"start": {"type": "number", "minimum": 0}, "stop": _pos, "n": {"type": "integer", "minimum": 2}},
                     ["start", "stop", "n"]),
        "n_cells": _int1,
        "metric": {"enum": ["tip-transmissibility", "average-quadratic-velocity"]},
        "damping": DAMPING,
        "load_positions": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "perturbation": {"type": "number", "minimum": 0},
        "thetas": {"type": "array", "items": {"type": "array", "items": _num}},
        "lagrange_P": _pos,
    }),
    "compare": _obj({
        "levels": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
        "repeats": _int1,
    }),
    "regions_file": {"type": "string"},
    "bundle_file": {"type": "string"},
    "output_dir": {"type": "string"},
}, ["preset"])

DEFAULTS = {
    "q": 4,
    "seed": 0,
    "thresholds": {"rank_tau": 1e-8, "rcond": 1e-10, "svm_C": 10.0, "pca_threshold": 0.1},
    "rank_scan": {"q_max": 100, "swap": [21, 80], "n_permutations": 20, "permutation": "cycle"},
    "perturbation_scan": {"n_points": 48, "range": [0.5, 1.5], "references": [0.9e6, 1.1e6]},
    "sampling": {"mode": "multi", "n_samples": 100, "n_sub": 5, "ordered": False, "skip": True},
    "frf": {"n_cells": 10, "metric": "tip-transmissibility", "perturbation": 0.1, "lagrange_P": 0.125,
            "load_positions": [0, 1]},
    "compare": {"levels": [0.1, 0.3, 0.5], "repeats": 5},
    "regions_file": "regions.json",
    "bundle_file": "surrogate.json",
    "output_dir": "out",
}


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def validate(cfg: dict) -> None:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        msgs = [f"{'/'.join(map(str, e.absolute_path)) or '<root>'}: {e.message}" for e in errors]
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(msgs))


def resolve(cfg: dict) -> dict:
    """Validate ``cfg`` and fill defaults (the raw config is validated, not the merge)."""
    validate(cfg)
    full = _merge(DEFAULTS, cfg)
    validate(full)
    return full


def load(path) -> dict:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    return resolve(raw)


def preset_path(name: str) -> Path:
    return Path(str(resources.files("cbmorph") / "presets" / f"{name}.json"))


def list_presets():
    return sorted(p.stem for p in Path(str(resources.files("cbmorph") / "presets")).glob("*.json"))
