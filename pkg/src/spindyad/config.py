"""Flat key=value experiment configuration with unit suffixes.

Format: ``[section]`` headers, one ``key = value`` per line, ``#``
comments. Values may carry a unit suffix separated by optional
whitespace; accepted suffixes are Hz/kHz/MHz/GHz, T/mT/uT/nT,
s/ms/us/ns, K and V_per_m. Unknown keys are errors, never ignored.
Every resolved value (defaults included) is echoed into the output
metadata so artifacts are reproducible on their own.

The full key reference lives in docs/config-schema.txt.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

__all__ = ["ConfigError", "ExperimentConfig", "parse_config", "parse_quantity", "SCHEMA_VERSION"]

SCHEMA_VERSION = 1

PRESETS = (
    "levels",
    "echo",
    "deer",
    "field_sweep",
    "pol_transfer",
    "zq_decay",
    "xi_sweep",
    "electrometry",
    "thermometry",
    "custom",
)


class ConfigError(ValueError):
    """Malformed or inconsistent configuration file."""


_SUFFIXES = {
    "hz": ("frequency", 1.0),
    "khz": ("frequency", 1e3),
    "mhz": ("frequency", 1e6),
    "ghz": ("frequency", 1e9),
    "t": ("field", 1.0),
    "mt": ("field", 1e-3),
    "ut": ("field", 1e-6),
    "nt": ("field", 1e-9),
    "s": ("time", 1.0),
    "ms": ("time", 1e-3),
    "us": ("time", 1e-6),
    "ns": ("time", 1e-9),
    "k": ("temperature", 1.0),
    "v_per_m": ("efield", 1.0),
}


def parse_quantity(text: str, expect: Optional[str] = None, key: str = "") -> float:
    """Parse '50 kHz' / '1uT' / '0.3' into a float in base units.

    ``expect`` names the required dimension (frequency, field, time,
    temperature, efield, none); a bare number is accepted only for
    dimensionless keys.
    """
    s = text.strip()
    idx = len(s)
    while idx > 0 and (s[idx - 1].isalpha() or s[idx - 1] == "_"):
        idx -= 1
    num_part, suffix = s[:idx].strip(), s[idx:].strip().lower()
    try:
        value = float(num_part)
    except ValueError as exc:
        raise ConfigError(f"key {key!r}: cannot parse number from {text!r}") from exc
    if not suffix:
        if expect not in (None, "none"):
            raise ConfigError(f"key {key!r}: missing unit suffix in {text!r} (expected {expect})")
        return value
    if suffix not in _SUFFIXES:
        raise ConfigError(f"key {key!r}: unknown unit suffix {suffix!r} in {text!r}")
    dim, scale = _SUFFIXES[suffix]
    if expect is not None and expect != "none" and dim != expect:
        raise ConfigError(f"key {key!r}: unit {suffix!r} is a {dim}, expected {expect}")
    return value * scale


# key registry: section -> key -> (dimension, default-as-text or None=required-by-presets)
_SCHEMA: dict[str, dict[str, tuple[str, Optional[str]]]] = {
    "": {"schema": ("none", str(SCHEMA_VERSION))},
    "experiment": {
        "preset": ("str", None),
        "label": ("str", ""),
        "program": ("str", ""),  # path to a serialized pulse program (custom preset)
    },
    "params": {
        "delta": ("frequency", "2.87 GHz"),
        "gamma_e": ("frequency", "28.025 GHz"),  # per tesla
        "b_field": ("field", "0 T"),
        "j": ("frequency", ""),
        "theta": ("none", ""),  # radians
        "j_par": ("frequency", ""),
        "j_perp": ("frequency", ""),
        "d_par": ("frequency", "0.0035 Hz"),  # per (V/m)
        "d_perp": ("frequency", "0.17 Hz"),  # per (V/m)
        "ddelta_dt": ("frequency", "-74.2 kHz"),  # per kelvin
        "distance": ("none", ""),  # meters
    },
    "noise": {
        "beta_rms": ("field", "1 uT"),
        "xi": ("none", "0"),
        "switch_rate": ("frequency", "100 kHz"),
        "eps_rms": ("efield", "0 V_per_m"),
        "electric_rate": ("frequency", "100 kHz"),
    },
    "sim": {
        "trajectories": ("none", "500"),
        "dt": ("time", "10 ns"),
        "seed": ("none", "1"),
        "near_bm": ("bool", "false"),
        "delta_b": ("field", "0 T"),
        "shared_field": ("bool", "false"),
        "noise_during": ("str", "all"),  # all | evolution
    },
    "sweep": {
        "variable": ("str", ""),
        "start": ("raw", ""),
        "stop": ("raw", ""),
        "count": ("none", "0"),
        "spacing": ("str", "linear"),  # linear | log
        "values": ("raw", ""),
        "tau_start": ("time", "1 us"),
        "tau_stop": ("time", "240 us"),
        "tau_count": ("none", "22"),
        "tau_spacing": ("str", "log"),
        "theta": ("none", "0"),
        "delta_temp": ("temperature", "0 K"),
        "window": ("time", ""),
    },
    "output": {
        "directory": ("str", "out"),
        "plot": ("bool", "true"),
    },
}

_VARIABLE_DIMENSION = {
    "b_field": "field",
    "delta_b": "field",
    "tau": "time",
    "tau_tilde": "time",
    "xi": "none",
    "eps_rms": "efield",
    "theta": "none",
}


@dataclass
class ExperimentConfig:
    """Fully resolved configuration: raw strings by (section, key) plus
    typed accessors. ``resolved`` echoes every default for metadata."""

    preset: str
    raw: dict[str, str] = field(default_factory=dict)
    resolved: dict[str, str] = field(default_factory=dict)

    def text(self, section: str, key: str) -> str:
        return self.resolved[f"{section}.{key}"]

    def number(self, section: str, key: str) -> float:
        dim = _SCHEMA[section][key][0]
        expect = None if dim in ("raw", "str", "bool") else dim
        return parse_quantity(self.text(section, key), expect, key=f"{section}.{key}")

    def flag(self, section: str, key: str) -> bool:
        val = self.text(section, key).strip().lower()
        if val in ("true", "yes", "1", "on"):
            return True
        if val in ("false", "no", "0", "off"):
            return False
        raise ConfigError(f"key {section}.{key}: expected boolean, got {val!r}")

    def has(self, section: str, key: str) -> bool:
        return self.resolved.get(f"{section}.{key}", "") != ""

    def sweep_values(self) -> list[float]:
        """Materialize the sweep axis from values= or start/stop/count."""
        variable = self.text("sweep", "variable")
        dim = _VARIABLE_DIMENSION.get(variable)
        if dim is None:
            raise ConfigError(f"sweep.variable {variable!r} is not sweepable")
        expect = None if dim == "none" else dim
        values_text = self.text("sweep", "values")
        if values_text:
            return [
                parse_quantity(v.strip(), expect, key="sweep.values")
                for v in values_text.split(",")
                if v.strip()
            ]
        start_text = self.text("sweep", "start")
        stop_text = self.text("sweep", "stop")
        count = int(self.number("sweep", "count"))
        if not start_text or not stop_text or count < 1:
            raise ConfigError("sweep needs either values= or start/stop/count")
        start = parse_quantity(start_text, expect, key="sweep.start")
        stop = parse_quantity(stop_text, expect, key="sweep.stop")
        if not (math.isfinite(start) and math.isfinite(stop)):
            raise ConfigError("sweep bounds must be finite")
        if count == 1:
            return [start]
        if self.text("sweep", "spacing") == "log":
            if start <= 0 or stop <= 0:
                raise ConfigError("log spacing needs positive bounds")
            ratio = (stop / start) ** (1.0 / (count - 1))
            return [start * ratio**i for i in range(count)]
        step = (stop - start) / (count - 1)
        return [start + i * step for i in range(count)]


def parse_config(path: str | Path) -> ExperimentConfig:
    """Read and validate a config file, applying defaults.

    Unknown sections or keys fail loudly; required keys (the preset) must
    be present; every default is echoed into ``resolved``.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    raw: dict[str, str] = {}
    section = ""
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            section = stripped[1:-1].strip().lower()
            if section not in _SCHEMA:
                raise ConfigError(f"line {lineno}: unknown section [{section}]")
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected key = value, got {line!r}")
        key, _, value = stripped.partition("=")
        key = key.strip().lower()
        value = value.strip()
        if section not in _SCHEMA or key not in _SCHEMA[section]:
            raise ConfigError(f"line {lineno}: unknown key {key!r} in section [{section}]")
        raw[f"{section}.{key}"] = value

    schema_text = raw.get(".schema", str(SCHEMA_VERSION))
    if int(float(schema_text)) != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema version {schema_text}")

    resolved: dict[str, str] = {}
    for sec, keys in _SCHEMA.items():
        for key, (_dim, default) in keys.items():
            full = f"{sec}.{key}"
            if full in raw:
                resolved[full] = raw[full]
            elif default is not None:
                resolved[full] = default
    if "experiment.preset" not in resolved:
        raise ConfigError("missing required key experiment.preset")
    preset = resolved["experiment.preset"].strip().lower()
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; expected one of {PRESETS}")
    cfg = ExperimentConfig(preset=preset, raw=raw, resolved=resolved)
    # eager validation of every typed value so bad units fail at parse time
    for sec, keys in _SCHEMA.items():
        for key, (dim, _default) in keys.items():
            full = f"{sec}.{key}"
            if full not in resolved or resolved[full] == "":
                continue
            if dim in ("str", "raw"):
                continue
            if dim == "bool":
                cfg.flag(sec, key)
            else:
                cfg.number(sec, key)
    return cfg
