"""Flat ``key = value`` configuration files and built-in presets.

Example::

    # comments start with '#'
    preset = sc-fig1
    n_byzantine = 10
    n_rounds = 2000

Unknown keys, duplicate keys and malformed lines are errors. A ``preset``
line supplies defaults for every key; without one the keys in ``REQUIRED``
must be given. A run manifest (JSON) can be loaded in place of a config file.
"""

from __future__ import annotations

import json
from pathlib import Path

from .agents import AttackKind, ByzantineAttack
from .errors import ConfigurationError
from .objectives import DataMode, DataModel, ObjectiveKind, curvature
from .schedule import ScheduleParams, theorem_params
from .simulator import SimulationConfig


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _choice(*options):
    def parse(text: str) -> str:
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {text!r}")
        return text
    return parse


_SCHEDULE_MODES = ("practical", "theorem")

# key -> (parser, default); default None marks a required key
SCHEMA: dict[str, tuple] = {
    "n_agents": (int, None),
    "n_byzantine": (int, None),
    "dim": (int, None),
    "t_local": (int, None),
    "n_rounds": (int, None),
    "objective": (_choice("sc", "pl"), None),
    "regime": (_choice("auto", "SC", "PL"), "auto"),
    "replications": (int, 1),
    "seed": (int, 0),
    "data_mode": (_choice("finite", "population"), "finite"),
    "samples_per_agent": (int, 100),
    "noise_std": (float, 1.0),
    "attack": (_choice(*(a.value for a in AttackKind)), "shifted_mean"),
    "attack_factor": (float, 2.0),
    "attack_scale": (float, 10.0),
    "schedule": (_choice(*_SCHEDULE_MODES), "practical"),
    "c_alpha": (float, 1.0),
    "c_beta": (float, 0.5),
    "h": (float, 10.0),
    "y_init": (_choice("zero", "first-sample"), "zero"),
    "x0_radius": (float, 10.0),
    "audit": (_bool, False),
}
REQUIRED = tuple(k for k, (_, d) in SCHEMA.items() if d is None)

# Published experiment setup: N, d, T, 100 unit-variance samples per agent and
# attackers centered at 2 x*. Schedule constants, K and the start point have no
# published values; the ones below are package defaults.
_FIG_COMMON = {
    "n_agents": "50", "n_byzantine": "8", "dim": "10", "t_local": "3",
    "n_rounds": "10000", "replications": "1", "seed": "0",
    "data_mode": "finite", "samples_per_agent": "100", "noise_std": "1.0",
    "attack": "shifted_mean", "attack_factor": "2.0",
    "c_alpha": "1.0", "c_beta": "0.5", "h": "10.0",
}
PRESETS: dict[str, dict[str, str]] = {
    "sc-fig1": {**_FIG_COMMON, "objective": "sc"},
    "pl-fig2": {**_FIG_COMMON, "objective": "pl"},
    "audit-tiny": {
        "n_agents": "3", "n_byzantine": "0", "dim": "4", "t_local": "2", "n_rounds": "5",
        "objective": "sc", "data_mode": "population", "noise_std": "0.0", "audit": "true",
    },
    "audit-lemmas": {
        "n_agents": "5", "n_byzantine": "1", "dim": "4", "t_local": "3", "n_rounds": "50",
        "objective": "sc", "data_mode": "population", "noise_std": "0.0", "audit": "true",
        "replications": "10",
    },
}


def parse_text(text: str, source: str = "<config>") -> dict[str, str]:
    """Split a config file into raw string values, with line-numbered errors."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigurationError(f"{source}:{lineno}: expected 'key = value', got {body!r}")
        key, value = (part.strip() for part in body.split("=", 1))
        if key != "preset" and key not in SCHEMA:
            raise ConfigurationError(f"{source}:{lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigurationError(f"{source}:{lineno}: duplicate key {key!r}")
        if not value:
            raise ConfigurationError(f"{source}:{lineno}: empty value for {key!r}")
        raw[key] = value
    return raw


def resolve(raw: dict[str, str]) -> dict:
    """Apply the preset and defaults, parse every value, and check required keys."""
    raw = dict(raw)
    merged: dict[str, str] = {}
    preset = raw.pop("preset", None)
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigurationError(f"unknown preset {preset!r}; known: {', '.join(PRESETS)}")
        merged.update(PRESETS[preset])
    for key in raw:
        if key not in SCHEMA:
            raise ConfigurationError(f"unknown key {key!r}")
    merged.update(raw)
    missing = [k for k in REQUIRED if k not in merged]
    if missing:
        raise ConfigurationError("missing required key(s): " + ", ".join(missing))
    values = {}
    for key, (parser, default) in SCHEMA.items():
        if key in merged:
            try:
                values[key] = parser(str(merged[key]))
            except ValueError as exc:
                raise ConfigurationError(f"bad value for {key!r}: {exc}") from None
        else:
            values[key] = default
    return values


def build_config(values: dict) -> SimulationConfig:
    kind = ObjectiveKind(values["objective"])
    data = DataModel(DataMode(values["data_mode"]), values["samples_per_agent"],
                     values["noise_std"])
    regime = None if values["regime"] == "auto" else values["regime"]
    if values["schedule"] == "theorem":
        reg = regime or ("SC" if kind is ObjectiveKind.SC_QUADRATIC else "PL")
        params = theorem_params(reg, curvature(kind, data.noise_std, values["dim"]),
                                values["t_local"])
    else:
        params = ScheduleParams(values["c_alpha"], values["c_beta"], values["h"])
    return SimulationConfig(
        n_agents=values["n_agents"], n_byzantine=values["n_byzantine"], dim=values["dim"],
        t_local=values["t_local"], n_rounds=values["n_rounds"],
        replications=values["replications"], master_seed=values["seed"],
        objective=kind, data_model=data,
        attack=ByzantineAttack(AttackKind(values["attack"]), values["attack_factor"],
                               values["attack_scale"]),
        schedule=params, regime=regime, audit=values["audit"], y_init=values["y_init"],
        x0_radius=values["x0_radius"],
    )


def load_values(path: str | Path) -> dict:
    """Resolved schema values from a config file or a run manifest."""
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json":
        doc = json.loads(text)
        if "config" not in doc:
            raise ConfigurationError(f"{path}: manifest has no 'config' section")
        return resolve({k: str(v) for k, v in doc["config"].items()})
    return resolve(parse_text(text, str(path)))


def load_config(path: str | Path) -> SimulationConfig:
    return build_config(load_values(path))

