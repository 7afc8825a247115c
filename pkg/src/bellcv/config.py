"""Run configuration: JSON file, schema validation and object construction."""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass

import jsonschema

from .numerics import ErrorBudget
from .propagation import OpticalConfig
from .states import BvParams, DoubleGaussian, PolyGaussianSpec, auto_banded_modal, to_banded_modal


class ConfigError(ValueError):
    """Configuration is malformed or inconsistent."""


_AXIS = {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3}
_POS = {"type": "number", "exclusiveMinimum": 0}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["state"],
    "properties": {
        "state": {
            "type": "object",
            "additionalProperties": False,
            "required": ["type", "sigma_plus_mm", "sigma_minus_mm"],
            "properties": {
                "type": {"enum": ["bell_bv", "double_gaussian", "poly_gaussian"]},
                "sigma_plus_mm": _POS,
                "sigma_minus_mm": _POS,
                "poly": {
                    "type": "array",
                    "minItems": 1,
                    "items": {"type": "array", "minItems": 1, "items": {"type": "number"}},
                },
            },
        },
        "wavelength_nm": _POS,
        "truncation": {"type": "integer", "minimum": 16},
        "tolerances": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"abs_tol": _POS, "quadrature_tol": _POS, "truncation_tol": _POS},
        },
        "workers": {"type": "integer", "minimum": 1},
        "scan": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "mode": {"enum": ["symmetric_pair", "fixed_partner", "full_4tuple"]},
                "z1": _AXIS,
                "z2": _AXIS,
                "za_prime_mm": {"type": "number"},
                "zb_prime_mm": {"type": "number"},
                "dx1_mm": {"type": "number"},
                "dx2_mm": {"type": "number"},
            },
        },
        "optimize": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "bounds": {"type": "array", "items": {"type": "array", "items": {"type": "number"},
                                                      "minItems": 2, "maxItems": 2},
                           "minItems": 4, "maxItems": 4},
                "seeds": {"type": "array", "items": {"type": "array", "items": {"type": "number"},
                                                     "minItems": 4, "maxItems": 4}},
                "seed_axis": _AXIS,
                "seed_count": {"type": "integer", "minimum": 1},
                "max_evals": {"type": "integer", "minimum": 1},
                "restarts": {"type": "integer", "minimum": 0},
            },
        },
        "misalign": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "base": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["za_mm", "za_prime_mm", "zb_mm", "zb_prime_mm"],
                    "properties": {k: {"type": "number"} for k in ("za_mm", "za_prime_mm", "zb_mm", "zb_prime_mm")},
                },
                "dxp": _AXIS,
                "dxm": _AXIS,
            },
        },
        "wigner": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "part": {"enum": ["plus", "minus", "product"]},
                "x": _AXIS,
                "k": _AXIS,
                "printed": {"type": "boolean"},
            },
        },
    },
}

DEFAULTS = {
    "wavelength_nm": 650.0,
    "tolerances": {"abs_tol": 1e-8, "quadrature_tol": 1e-11, "truncation_tol": 2e-9},
    "workers": 1,
}


@dataclass(frozen=True)
class RunConfig:
    raw: dict

    @property
    def state_spec(self):
        st = self.raw["state"]
        sp, sm = st["sigma_plus_mm"], st["sigma_minus_mm"]
        try:
            if st["type"] == "bell_bv":
                return BvParams(sp, sm)
            if st["type"] == "double_gaussian":
                return DoubleGaussian(sp, sm)
            if "poly" not in st:
                raise ConfigError("poly_gaussian state needs a 'poly' coefficient table")
            rows = st["poly"]
            width = max(len(r) for r in rows)
            table = [list(r) + [0.0] * (width - len(r)) for r in rows]
            return PolyGaussianSpec(table, sp, sm)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def optics(self) -> OpticalConfig:
        return OpticalConfig(self.raw["wavelength_nm"])

    @property
    def budget(self) -> ErrorBudget:
        try:
            return ErrorBudget(**self.raw["tolerances"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def truncation(self):
        return self.raw.get("truncation")

    @property
    def workers(self) -> int:
        return self.raw["workers"]

    def section(self, name: str) -> dict:
        return self.raw.get(name, {})

    def build_state(self):
        """Certified modal state; fixed truncation if configured, else auto-sized."""
        if self.truncation is None:
            return auto_banded_modal(self.state_spec, self.budget)
        return to_banded_modal(self.state_spec, self.truncation - 1, self.budget)

    def to_json(self) -> str:
        return json.dumps(self.raw, sort_keys=True, separators=(",", ":"))


def _merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in extra.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def load_config(data) -> RunConfig:
    """Validate a dict (or JSON text) and fill defaults."""
    if isinstance(data, (str, bytes)):
        try:
            data = json.loads(data)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from exc
    try:
        jsonschema.validate(data, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"schema violation at {where}: {exc.message}") from exc
    cfg = RunConfig(_merge(DEFAULTS, data))
    cfg.state_spec
    cfg.budget
    return cfg


def load_config_file(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    return load_config(text)


def default_config() -> RunConfig:
    return load_config({"state": {"type": "bell_bv", "sigma_plus_mm": 1.0, "sigma_minus_mm": 0.01}})
