"""Run configuration: JSON schema, defaults and model construction.

Configs are strict JSON objects with an integer ``schema_version``. Every
section is optional; missing values take the defaults recorded in
:data:`SCHEMA`. Unknown keys are rejected.
"""
from __future__ import annotations

import copy
import difflib
import hashlib
import json
from pathlib import Path

import jsonschema

from . import rates as R
from .ensemble import DEFAULT_WITHIN_CLASS_SPREAD, FIXTURE_SEED, EnsembleConfig
from .errors import ConfigError
from .io import dumps
from .structure import (AXIAL_QUADRATIC_COEFF, CLASS_AXIAL_SHIFT, DEBYE_WALLER,
                        EmitterModel, strained_model)
from .units import ZPL_REFERENCE_HZ

SCHEMA_VERSION = 1


def _num(default, minimum=None, exclusive=None, maximum=None, nullable=False):
    s = {"type": ["number", "null"] if nullable else "number", "default": default}
    if minimum is not None:
        s["minimum"] = minimum
    if exclusive is not None:
        s["exclusiveMinimum"] = exclusive
    if maximum is not None:
        s["maximum"] = maximum
    return s


def _int(default, minimum=None, nullable=False):
    s = {"type": ["integer", "null"] if nullable else "integer", "default": default}
    if minimum is not None:
        s["minimum"] = minimum
    return s


def _obj(props):
    return {"type": "object", "additionalProperties": False, "properties": props, "default": {}}


def _path(default=None):
    return {"type": ["string", "null"], "default": default}


def _axis(start, stop, points):
    return _obj({"start_hz": _num(start), "stop_hz": _num(stop), "points": _int(points, 2)})


_LINES = {"type": "array", "items": {"enum": list(R.LINE_LABELS)}, "minItems": 1,
          "default": list(R.LINE_LABELS)}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "temperature": _num(4.0, exclusive=0),
        "seed": _int(FIXTURE_SEED, 0),
        "model": _obj({
            "orientation_class": {"enum": ["set1", "set2"], "default": "set1"},
            "axial_strain_hz": _num(None, nullable=True),
            "transverse_strain_hz": _num(0.0),
            "excited_strain_scale": _num(1.0),
            "ground_axial_coeff": _num(0.0),
            "excited_axial_coeff": _num(AXIAL_QUADRATIC_COEFF),
            "zpl_reference_hz": _num(ZPL_REFERENCE_HZ, exclusive=0),
            "debye_waller": _num(DEBYE_WALLER, exclusive=0, maximum=1),
            "rates": _obj({
                "gamma_rad": _num(R.GAMMA_RAD, 0),
                "gamma_nr_prefactor": _num(R.GAMMA_NR_PREFACTOR, 0),
                "activation_energy_hz": _num(R.ACTIVATION_ENERGY_HZ, 0),
                "gamma_down_exchange": _num(R.GAMMA_DOWN_EXCHANGE, 0),
                "gamma_down_ground": _num(R.GAMMA_DOWN_GROUND, 0),
                "gamma_dephase": _num(R.GAMMA_DEPHASE, 0),
                "same_branch_fraction": _num(R.SAME_BRANCH_FRACTION, 0, maximum=1),
                "shelf": _obj({
                    "enabled": {"type": "boolean", "default": False},
                    "rate_in": _num(0.05 * R.GAMMA_RAD, 0),
                    "rate_out": _num(1e6, 0),
                }),
            }),
        }),
        "pl": _obj({
            "resolution_hz": _num(10e9, 0),
            "axis": _axis(-250e9, 250e9, 2001),
        }),
        "ple": _obj({
            "lines": _LINES,
            "power_ratio": _num(0.0, 0),
            "span_fwhm": _num(10.0, exclusive=0),
            "points": _int(401, 4),
        }),
        "lifetime": _obj({
            "temperatures": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0},
                             "minItems": 1, "default": [4.0, 295.0]},
            "bin_width_s": _num(25e-12, exclusive=0),
            "window_s": _num(20e-9, exclusive=0),
            "counts_total": _num(1e6, exclusive=0),
            "tail_start_s": _num(0.0, 0),
        }),
        "saturation": _obj({
            "i_sat": _num(730e3, exclusive=0),
            "p_sat": _num(1.0, exclusive=0),
            "max_power": _num(10.0, exclusive=0),
            "points": _int(12, 3),
            "noise": _num(0.0, 0),
        }),
        "stream": _obj({
            "pump": _num(1e8, 0),
            "duration_s": _num(1e-3, exclusive=0),
            "collection_efficiency": _num(1.0, exclusive=0, maximum=1),
            "shards": _int(1, 1),
        }),
        "g2": _obj({
            "bin_width_s": _num(1e-10, exclusive=0),
            "max_lag_s": _num(20e-9, exclusive=0),
            "start_stop": {"type": "boolean", "default": False},
            "stream_file": _path(),
        }),
        "fit": _obj({
            "manifest": _path(),
            "n_lines": _int(None, 1, nullable=True),
            "tail_start_s": _num(0.0, 0),
            "lineshape": {"type": "string", "enum": ["auto", "lorentzian", "voigt"],
                          "default": "auto"},
        }),
        "overlap": _obj({
            "records": _path(),
            "same_class_only": {"type": "boolean", "default": True},
            "threshold_hz": _num(94e6, exclusive=0),
            "primary_bin_hz": _num(94e6, exclusive=0),
            "sub_bins": _int(10, 1),
        }),
        "ensemble": _obj({
            "n_emitters": _int(20, 1),
            "class_gap_hz": _num(CLASS_AXIAL_SHIFT["set2"] - CLASS_AXIAL_SHIFT["set1"]),
            "base_shift_hz": _num(CLASS_AXIAL_SHIFT["set1"]),
            "within_class_spread_hz": _num(DEFAULT_WITHIN_CLASS_SPREAD, 0),
            "transverse_strain_spread_hz": _num(2e9, 0),
            "class_fraction": _num(0.5, 0, maximum=1),
            "seed": _int(None, 0, nullable=True),
        }),
    },
}

_VALIDATOR = jsonschema.Draft202012Validator(SCHEMA)


def _sub_schema(path):
    s = SCHEMA
    for key in path:
        s = s.get("properties", {}).get(key, {})
    return s


def _describe(err):
    pointer = "/" + "/".join(str(p) for p in err.absolute_path)
    if err.validator == "additionalProperties":
        known = list(_sub_schema(err.absolute_path).get("properties", {}))
        msgs = []
        for key in sorted(set(err.instance) - set(known)):
            hint = difflib.get_close_matches(key, known, n=1)
            sep = "" if pointer.endswith("/") else "/"
            msg = f"{pointer}{sep}{key}: unknown key"
            msgs.append(msg + (f" (did you mean '{hint[0]}'?)" if hint else ""))
        return msgs
    return [f"{pointer}: {err.message}"]


def validate_config(obj) -> list:
    """Diagnostics as ``json-pointer: message`` strings; empty when valid."""
    out = []
    for err in sorted(_VALIDATOR.iter_errors(obj), key=lambda e: list(map(str, e.absolute_path))):
        out.extend(_describe(err))
    return out


def _fill(schema, value):
    if schema.get("type") == "object" and "properties" in schema:
        value = {} if value is None else dict(value)
        for key, sub in schema["properties"].items():
            if key in value:
                value[key] = _fill(sub, value[key])
            elif "default" in sub:
                value[key] = _fill(sub, copy.deepcopy(sub["default"]))
        return value
    return value


def resolve(obj) -> dict:
    """Validated config with every default filled in."""
    errors = validate_config(obj)
    if errors:
        raise ConfigError("invalid configuration", errors)
    return _fill(SCHEMA, obj)


def default_config() -> dict:
    return resolve({"schema_version": SCHEMA_VERSION})


def load_config(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", [f"/: {exc}"]) from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("config is not valid JSON", [f"/: {exc}"]) from exc
    return resolve(obj)


def config_digest(cfg) -> str:
    return hashlib.sha256(dumps(cfg).encode()).hexdigest()


def build_model(cfg) -> EmitterModel:
    m = cfg["model"]
    r = m["rates"]
    shelf = r["shelf"]
    params = R.RateParams(
        gamma_rad=r["gamma_rad"], gamma_nr_prefactor=r["gamma_nr_prefactor"],
        activation_energy=r["activation_energy_hz"],
        gamma_down_exchange=r["gamma_down_exchange"], gamma_down_ground=r["gamma_down_ground"],
        gamma_dephase=r["gamma_dephase"], same_branch_fraction=r["same_branch_fraction"],
        shelf=R.ShelfParams(shelf["rate_in"], shelf["rate_out"]) if shelf["enabled"] else None)
    eps_a = m["axial_strain_hz"]
    k_net = m["excited_axial_coeff"] * m["excited_strain_scale"] ** 2 - m["ground_axial_coeff"]
    if eps_a is None:
        shift = CLASS_AXIAL_SHIFT[m["orientation_class"]]
        eps_a = (shift / k_net) ** 0.5 if k_net > 0 else 0.0
    return strained_model(eps_a, m["transverse_strain_hz"],
                          excited_scale=m["excited_strain_scale"],
                          orientation_class=m["orientation_class"],
                          ground_kappa=m["ground_axial_coeff"],
                          excited_kappa=m["excited_axial_coeff"],
                          zpl_reference=m["zpl_reference_hz"], rates=params,
                          debye_waller=m["debye_waller"])


def build_ensemble_config(cfg) -> EnsembleConfig:
    e = cfg["ensemble"]
    model = build_model(cfg)
    return EnsembleConfig(
        n_emitters=e["n_emitters"], class_gap=e["class_gap_hz"],
        within_class_spread=e["within_class_spread_hz"],
        transverse_strain_spread=e["transverse_strain_spread_hz"],
        class_fraction=e["class_fraction"],
        seed=cfg["seed"] if e["seed"] is None else e["seed"],
        base_shift=e["base_shift_hz"], temperature=cfg["temperature"],
        excited_scale=cfg["model"]["excited_strain_scale"],
        ground_kappa=cfg["model"]["ground_axial_coeff"],
        excited_kappa=cfg["model"]["excited_axial_coeff"], rates=model.rates)
