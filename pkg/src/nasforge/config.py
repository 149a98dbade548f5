"""Sectioned run configuration: INI file plus flag overrides.

One file configures every module; unknown sections or keys are hard errors
so typos fail fast.  Values are typed per key.  The config path can come
from ``--config`` or the ``NASFORGE_CONFIG`` environment variable; flag
overrides always win over file values.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field

from .archspace import SpaceLimits
from .oracle import OracleConfig
from .qlearn import AgentConfig
from .reward import RewardConfig

ENV_VAR = "NASFORGE_CONFIG"


class ConfigError(ValueError):
    pass


def _parse_bool(text: str) -> bool:
    lowered = str(text).strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _parse_int_tuple(text: str) -> tuple[int, ...]:
    parts = [p for p in str(text).replace(",", " ").split() if p]
    return tuple(int(p) for p in parts)


_SCHEMA: dict[str, dict[str, type | object]] = {
    "space": {"max_vertices": int, "num_ops": int},
    "reward": {"weight_f1": float, "weight_params": float, "clamp": _parse_bool},
    "surrogate": {
        "kind": str,
        "n_folds": int,
        "test_fraction": float,
        "seed": int,
    },
    "agent": {
        "gamma": float,
        "learning_rate": float,
        "replay_capacity": int,
        "priority_alpha": float,
        "is_beta": float,
        "target_sync_every_samples": int,
        "train_episode_len": int,
        "eval_episode_len": int,
        "max_neighbours": int,
        "num_workers": int,
        "total_train_steps": int,
        "batch_size": int,
        "learner_every": int,
        "min_replay": int,
        "hidden": _parse_int_tuple,
    },
    "search": {
        "budget": int,
        "episode_len": int,
        "n_sets": int,
        "set_size": int,
        "seeds": _parse_int_tuple,
    },
    "oracle": {
        "master_seed": int,
        "noise_sigma": float,
        "n_records": int,
        "seeds_per_arch": int,
    },
    "io": {"out_dir": str},
}

_DEFAULTS = {
    "surrogate": {"kind": "gbt", "n_folds": 5, "test_fraction": 0.1, "seed": 0},
    "search": {
        "budget": 300,
        "episode_len": 16,
        "n_sets": 5,
        "set_size": 1000,
        "seeds": (0, 1, 2, 3, 4),
    },
    "io": {"out_dir": "runs"},
}


@dataclass
class RunConfig:
    space: SpaceLimits = field(default_factory=SpaceLimits)
    reward: RewardConfig = field(default_factory=RewardConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)
    oracle: OracleConfig = field(default_factory=OracleConfig)
    surrogate: dict = field(default_factory=lambda: dict(_DEFAULTS["surrogate"]))
    search: dict = field(default_factory=lambda: dict(_DEFAULTS["search"]))
    io: dict = field(default_factory=lambda: dict(_DEFAULTS["io"]))


def _typed(section: str, key: str, raw):
    try:
        converter = _SCHEMA[section][key]
    except KeyError:
        raise ConfigError(f"unknown config key [{section}] {key}") from None
    try:
        return converter(raw)
    except ConfigError:
        raise
    except (TypeError, ValueError) as err:
        raise ConfigError(f"bad value for [{section}] {key}: {raw!r} ({err})") from None


def load_config(path: str | None = None, overrides: dict | None = None) -> RunConfig:
    """Build a RunConfig from an optional INI file and dotted overrides.

    ``overrides`` maps "section.key" to raw values (strings are converted
    like file values, typed values pass through the same validation).
    """
    values: dict[str, dict] = {section: {} for section in _SCHEMA}
    path = path or os.environ.get(ENV_VAR)
    if path:
        parser = configparser.ConfigParser()
        read = parser.read(path)
        if not read:
            raise ConfigError(f"config file not found: {path}")
        for section in parser.sections():
            if section not in _SCHEMA:
                raise ConfigError(f"unknown config section [{section}]")
            for key, raw in parser.items(section):
                values[section][key] = _typed(section, key, raw)
    for dotted, raw in (overrides or {}).items():
        if "." not in dotted:
            raise ConfigError(f"override must look like section.key: {dotted!r}")
        section, key = dotted.split(".", 1)
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        values[section][key] = _typed(section, key, raw)

    reward_kwargs = dict(values["reward"])
    if "clamp" in reward_kwargs:
        reward_kwargs["clamp_predictions"] = reward_kwargs.pop("clamp")
    try:
        cfg = RunConfig(
            space=SpaceLimits(**values["space"]),
            reward=RewardConfig(**reward_kwargs),
            agent=AgentConfig(**values["agent"]),
            oracle=OracleConfig(**values["oracle"]),
        )
    except ValueError as err:
        raise ConfigError(str(err)) from None
    for section in ("surrogate", "search", "io"):
        cfg_dict = dict(_DEFAULTS[section])
        cfg_dict.update(values[section])
        setattr(cfg, section, cfg_dict)
    return cfg
