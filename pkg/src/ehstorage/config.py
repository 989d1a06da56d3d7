"""Experiment configuration: JSON schema, reference defaults, unit conversion.

Decibel and micro-watt quantities are converted here; every other module
works in SI units (joules per slot, linear SNR).
"""
from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from pathlib import Path

import jsonschema
import numpy as np

from .exceptions import ConfigError
from .performance import LinkParams
from .simulation import SimConfig
from .storage import BufferSpec, EffectiveParams, EhProfile, Imperfections

__all__ = [
    "CONFIG_SCHEMA",
    "DEFAULT_CONFIG",
    "ExperimentConfig",
    "load_config",
    "dbm_to_watts",
    "db_to_linear",
    "linear_to_db",
    "uw_to_joules",
    "joules_to_uw",
]


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def linear_to_db(x: float) -> float:
    return 10.0 * math.log10(x)


def uw_to_joules(uw: float) -> float:
    """Micro-watts to joules per unit slot."""
    return uw * 1e-6


def joules_to_uw(j: float) -> float:
    return j * 1e6


_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "ehstorage experiment configuration",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "system": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dl_power_W": _POS,
                "dl_power_dBm": _NUM,
                "dl_gain_mean": _POS,
                "dl_gain_dB": _NUM,
                "rf_dc_efficiency": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "harvest_mean_eff_J": _POS,
                "pa_inefficiency": {"type": "number", "minimum": 1},
                "storage_efficiency": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "circuit_power_uW": {"type": "number", "minimum": 0},
                "snr_bar_dB": _NUM,
                "noise_power_dBm": _NUM,
                "rate_bits": {"type": "number", "minimum": 0},
                "mod_a": _POS,
                "mod_b": _POS,
            },
        },
        "policy_sweep": {
            "oneOf": [
                {"type": "array", "items": _POS, "minItems": 1},
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["start", "stop", "step"],
                    "properties": {"start": _POS, "stop": _POS, "step": _POS},
                },
            ]
        },
        "buffers": {
            "type": "array",
            "minItems": 1,
            "items": {"oneOf": [{"type": "integer", "minimum": 2}, {"const": "infinite"}]},
        },
        "snr_sweep_dB": {"type": "array", "items": _NUM, "minItems": 1},
        "n_c": {"type": "integer", "minimum": 2},
        "sim": {
            "oneOf": [
                {"const": "analytic-only"},
                {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "n_slots": {"type": "integer"},
                        "warmup_slots": {"type": "integer", "minimum": 0},
                        "seed": {"type": "integer", "minimum": 0},
                        "n_replications": {"type": "integer"},
                        "histogram_bins": {"type": "integer"},
                        "error_counting_mode": {"enum": ["analytic-conditional", "symbol-level"]},
                        "n_bits": {"type": "integer", "minimum": 1},
                        "workers": {"type": "integer", "minimum": 1},
                    },
                },
            ]
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dir": {"type": "string"},
                "format": {"enum": ["csv", "json", "both"]},
            },
        },
    },
}

# Reference profile: beta * Xbar = 1e-5 J and snr_bar = 24.6 dB are pinned directly.
DEFAULT_CONFIG = {
    "system": {
        "dl_power_W": 1.0,
        "rf_dc_efficiency": 0.7,
        "harvest_mean_eff_J": 1e-5,
        "pa_inefficiency": 1.5,
        "storage_efficiency": 0.9,
        "circuit_power_uW": 0.2,
        "snr_bar_dB": 24.6,
        "noise_power_dBm": -103.0,
        "rate_bits": 2.1,
        "mod_a": 1.0,
        "mod_b": 2.0,
    },
    "policy_sweep": {"start": 0.1, "stop": 1.5, "step": 0.05},
    "buffers": [4, 7, 20],
    "snr_sweep_dB": [24.6],
    "n_c": 2,
    "sim": {"n_slots": 1_000_000, "seed": 20141208, "n_replications": 10, "histogram_bins": 100},
    "output": {"dir": "results", "format": "csv"},
}


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    profile: EhProfile
    imperfections: Imperfections
    link: LinkParams
    harvest_mean_eff: float
    deltas: tuple
    buffers: tuple
    snr_sweep_db: tuple
    n_c: int
    sim: SimConfig | None
    out_dir: Path
    out_format: str

    def effective(self, delta: float) -> EffectiveParams:
        """Effective parameters at a normalized drain ``delta``."""
        return EffectiveParams(m_eff=delta * self.harvest_mean_eff,
                               harvest_mean_eff=self.harvest_mean_eff)

    def buffer_spec(self, l, eff: EffectiveParams) -> BufferSpec:
        return BufferSpec.infinite() if l == "infinite" else BufferSpec.finite(l, eff.m_eff)

    def target_power(self, m_eff: float) -> float:
        imp = self.imperfections
        return (m_eff - imp.circuit_power) / imp.pa_inefficiency


def _deltas(spec) -> tuple:
    if isinstance(spec, list):
        vals = [float(v) for v in spec]
    else:
        start, stop, step = spec["start"], spec["stop"], spec["step"]
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        vals = [round(start + i * step, 12) for i in range(n)]
    if any(b <= a for a, b in zip(vals, vals[1:])):
        raise ConfigError("policy_sweep values must be strictly increasing")
    return tuple(vals)


def from_dict(raw: dict) -> ExperimentConfig:
    """Validate ``raw`` (merged over the defaults) and build typed parameters."""
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"invalid config: {exc.message}") from exc
    cfg = _merge(DEFAULT_CONFIG, raw)
    sysd = cfg["system"]
    if "dl_power_W" in raw.get("system", {}) and "dl_power_dBm" in raw.get("system", {}):
        raise ConfigError("give dl_power_W or dl_power_dBm, not both")
    dl_power = dbm_to_watts(sysd["dl_power_dBm"]) if "dl_power_dBm" in sysd and \
        "dl_power_W" not in raw.get("system", {}) else sysd["dl_power_W"]
    imp = Imperfections(sysd["pa_inefficiency"], sysd["storage_efficiency"],
                        uw_to_joules(sysd["circuit_power_uW"]))
    eta = sysd["rf_dc_efficiency"]
    gain = sysd.get("dl_gain_mean")
    if "dl_gain_dB" in sysd:
        gain = db_to_linear(sysd["dl_gain_dB"])
    if gain is not None and "harvest_mean_eff_J" not in raw.get("system", {}):
        profile = EhProfile(dl_power, gain, eta)
        harvest_eff = imp.storage_efficiency * profile.harvest_mean
    else:
        harvest_eff = sysd["harvest_mean_eff_J"]
        profile = EhProfile.from_harvest_mean(harvest_eff / imp.storage_efficiency, dl_power, eta)
    noise = dbm_to_watts(sysd["noise_power_dBm"])
    snr_bar = db_to_linear(sysd["snr_bar_dB"])
    link = LinkParams(snr_bar=snr_bar, rate=sysd["rate_bits"], mod_a=sysd["mod_a"],
                      mod_b=sysd["mod_b"], noise_power=noise,
                      ul_gain_mean=snr_bar * noise / harvest_eff)
    sim = None
    if cfg["sim"] != "analytic-only":
        try:
            sim = SimConfig(**cfg["sim"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid sim section: {exc}") from exc
    buffers = tuple(cfg["buffers"])
    n_c = cfg["n_c"]
    return ExperimentConfig(profile, imp, link, harvest_eff, _deltas(cfg["policy_sweep"]),
                            buffers, tuple(float(v) for v in cfg["snr_sweep_dB"]), n_c, sim,
                            Path(cfg["output"]["dir"]), cfg["output"]["format"])


def load_config(path: str | Path | None = None) -> ExperimentConfig:
    """Read a UTF-8 JSON config; ``None`` gives the reference defaults."""
    if path is None:
        return from_dict({})
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return from_dict(raw)


def delta_grid(cfg: ExperimentConfig) -> np.ndarray:
    return np.asarray(cfg.deltas, dtype=float)
