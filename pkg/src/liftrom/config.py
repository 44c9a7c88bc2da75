"""Run configuration: JSON documents validated against the bundled schema."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

DEFAULTS = {
    "grid": {"length": 1.0, "nu": 0.05},
    "lift": {"aux_points": 16, "aux_radius": "auto", "recovery_point": "auto", "padded_dim": "auto"},
    "frame": {"snapshot_times": [0.0, 0.1, 0.2, 0.3]},
    "pencil": {"floor": 1e-2, "floor_mode": "absolute"},
    "estimator": {"shots": 10_000, "seed": 0, "mode": "per_entry", "noiseless": False},
    "baselines": {"cutoff_mode": 4, "ridge": "auto", "timestep": 0.03},
    "output": {"T": 0.3, "dt": 0.03, "directory": "out", "emit_svg": False},
    "metadata": {},
}


class ConfigError(ValueError):
    pass


def schema() -> dict:
    return json.loads(resources.files("liftrom.data").joinpath("config.schema.json").read_text())


def bundled_config(name: str = "paper") -> dict:
    return json.loads(resources.files("liftrom.data").joinpath(f"{name}.json").read_text())


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


@dataclass(frozen=True)
class RunConfig:
    raw: dict

    @classmethod
    def from_dict(cls, document: dict) -> "RunConfig":
        # a report.json carries its resolved configuration under "config"
        if "config" in document and "grid" not in document:
            document = document["config"]
        validator = jsonschema.Draft202012Validator(schema())
        errors = sorted(validator.iter_errors(document), key=lambda e: list(e.absolute_path))
        if errors:
            lines = [f"{'.'.join(map(str, e.absolute_path)) or '<root>'}: {e.message}" for e in errors]
            raise ConfigError("invalid configuration:\n  " + "\n  ".join(lines))
        merged = _merge(DEFAULTS, document)
        cls._check_semantics(merged)
        return cls(merged)

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            document = json.loads(path.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read configuration {path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from None
        return cls.from_dict(document)

    @staticmethod
    def _check_semantics(c: dict):
        n = c["grid"]["n_interior"]
        if len(c["initial_condition"]["sine_coefficients"]) > n:
            raise ConfigError(f"initial_condition.sine_coefficients: more than n_interior={n} modes")
        k = c["baselines"]["cutoff_mode"]
        if k > n:
            raise ConfigError(f"baselines.cutoff_mode: {k} exceeds n_interior={n}")
        taus = c["frame"]["snapshot_times"]
        if any(b <= a for a, b in zip(taus, taus[1:])):
            raise ConfigError("frame.snapshot_times: must be strictly increasing")
        out = c["output"]
        if "times" in out:
            t = out["times"]
            if t[0] != 0 or any(b <= a for a, b in zip(t, t[1:])):
                raise ConfigError("output.times: must start at 0 and increase strictly")
        else:
            steps = out["T"] / out["dt"]
            if abs(steps - round(steps)) > 1e-9:
                raise ConfigError(f"output: T={out['T']} is not a multiple of dt={out['dt']}")
        dt_cn = c["baselines"]["timestep"]
        for t in output_times(c):
            steps = t / dt_cn
            if abs(steps - round(steps)) > 1e-9:
                raise ConfigError(f"baselines.timestep: output time {t} is not a multiple of {dt_cn}")

    def __getitem__(self, key):
        return self.raw[key]

    @property
    def times(self) -> np.ndarray:
        return output_times(self.raw)

    @property
    def T(self) -> float:
        return horizon(self.raw)

    def with_overrides(self, **dotted) -> "RunConfig":
        """Copy with ``section.field=value`` overrides, e.g. ``**{"estimator.seed": 3}``."""
        doc = copy.deepcopy(self.raw)
        for key, value in dotted.items():
            section, _, name = key.partition(".")
            if not name or section not in doc:
                raise ConfigError(f"unknown configuration field {key!r}")
            doc[section][name] = value
        return RunConfig.from_dict(doc)

    def to_dict(self) -> dict:
        return copy.deepcopy(self.raw)


def horizon(c: dict) -> float:
    out = c["output"]
    return float(out["times"][-1]) if "times" in out else float(out["T"])


def output_times(c: dict) -> np.ndarray:
    out = c["output"]
    if "times" in out:
        return np.asarray(out["times"], dtype=float)
    n = int(round(out["T"] / out["dt"]))
    return np.linspace(0.0, float(out["T"]), n + 1)
