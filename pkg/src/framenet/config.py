"""Experiment configuration: a JSON document with data / network /
optimizer / training / analysis sections (plus an optional sweep
section), validated strictly so a misspelled hyperparameter fails fast
instead of being silently ignored.

Every key has a default; ``load_config(None)`` returns the full default
document. A master seed can be threaded through all seed-valued keys
(see apply_master_seed).
"""

from __future__ import annotations

import copy
import json
from pathlib import Path

from .data import SyntheticSpec
from .network import Conv, Dense, Untied
from .numerics import ParameterError
from .optim import (
    ConstantMomentum,
    EveryNIterations,
    OptimizerConfig,
    PerEpochHalving,
    RampMomentum,
)
from .training import TrainConfig


class ConfigError(ValueError):
    """The experiment configuration is malformed."""


_BOOL, _INT, _FLOAT, _STR = "bool", "int", "float", "str"

# section -> key -> (type tag, default)
SCHEMA = {
    "data": {
        "groups": (_INT, 10),
        "subclasses": (_INT, 3),
        "base_dim": (_INT, 20),
        "frames_per_class": (_INT, 200),
        "group_separation": (_FLOAT, 10.0),
        "subclass_separation": (_FLOAT, 3.0),
        "noise_std": (_FLOAT, 1.0),
        "seed": (_INT, 0),
        "permute": (_BOOL, False),
        "permute_seed": (_INT, 1),
        "context": (_INT, 0),
        "dev_fraction": (_FLOAT, 0.1),
        "split_seed": (_INT, 0),
        "corrupt_rate": (_FLOAT, 0.0),
        "corrupt_seed": (_INT, 0),
        "corrupt_scope": (_STR, "within_group"),  # or "any"
    },
    "network": {
        "hidden_layers": ("layers", [{"kind": "dense", "units": 64}]),
        "init_scale": (_FLOAT, 0.01),
        "init_seed": (_INT, 0),
        "checkpoint_float_width": (_INT, 8),
    },
    "optimizer": {
        "kind": (_STR, "nag"),
        "learning_rate": (_FLOAT, 0.01),
        "momentum": ("momentum", {"mode": "sutskever_ramp", "mu_max": 0.99}),
        "anneal": ("anneal", {"policy": "per_epoch_halving"}),
    },
    "training": {
        "batch_size": (_INT, 512),
        "max_epochs": (_INT, 10),
        "tolerance": (_FLOAT, 1e-3),
        "dropout": (_FLOAT, 0.0),
        "realign_epoch": (_INT, 0),
        "shuffle_seed": (_INT, 0),
        "select": (_STR, "final"),  # or "best"
    },
    "analysis": {
        "sample_n": (_INT, 512_000),
        "seed": (_INT, 0),
        "prior_smoothing": (_FLOAT, 0.5),
    },
    "sweep": {
        "target_params": ("int_list", [40_000]),
        "depths": ("int_list", [1, 3]),
        "optimizers": ("str_list", ["nag"]),
    },
}

_LAYER_KEYS = {
    "dense": {"units"},
    "conv": {"maps", "filter_t", "filter_f", "pool_t", "pool_f"},
    "untied": {"maps", "filter_t", "filter_f", "pool_t", "pool_f"},
}

_MOMENTUM_KEYS = {"constant": {"mu"}, "sutskever_ramp": {"mu_max"}}
_ANNEAL_KEYS = {"per_epoch_halving": set(), "every_n_iterations": {"n", "factor"}}


def default_config() -> dict:
    return {
        section: {key: copy.deepcopy(default) for key, (_, default) in keys.items()}
        for section, keys in SCHEMA.items()
    }


def _check_scalar(value, tag, path):
    if tag == _BOOL:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected a boolean, got {value!r}")
        return value
    if tag == _INT:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return value
    if tag == _FLOAT:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if tag == _STR:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    raise AssertionError(tag)


def _check_tagged_dict(value, table, tag_key, path):
    if not isinstance(value, dict):
        raise ConfigError(f"{path}: expected an object, got {value!r}")
    mode = value.get(tag_key)
    if mode not in table:
        raise ConfigError(f"{path}.{tag_key}: expected one of {sorted(table)}, got {mode!r}")
    allowed = table[mode] | {tag_key}
    unknown = set(value) - allowed
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)} for {tag_key}={mode!r}")
    missing = table[mode] - set(value)
    if missing:
        raise ConfigError(f"{path}: missing keys {sorted(missing)} for {tag_key}={mode!r}")
    return value


def _check_value(value, tag, path):
    if tag == "layers":
        if not isinstance(value, list):
            raise ConfigError(f"{path}: expected a list of layer objects")
        for i, layer in enumerate(value):
            _check_tagged_dict(layer, _LAYER_KEYS, "kind", f"{path}[{i}]")
        return value
    if tag == "momentum":
        return _check_tagged_dict(value, _MOMENTUM_KEYS, "mode", path)
    if tag == "anneal":
        return _check_tagged_dict(value, _ANNEAL_KEYS, "policy", path)
    if tag == "int_list":
        if not isinstance(value, list) or not all(
            isinstance(v, int) and not isinstance(v, bool) for v in value
        ):
            raise ConfigError(f"{path}: expected a list of integers")
        return value
    if tag == "str_list":
        if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
            raise ConfigError(f"{path}: expected a list of strings")
        return value
    return _check_scalar(value, tag, path)


def validate_config(doc: dict) -> dict:
    """Merge onto defaults, rejecting unknown sections and keys."""
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    unknown = set(doc) - set(SCHEMA)
    if unknown:
        raise ConfigError(f"unknown config sections {sorted(unknown)}")
    merged = default_config()
    for section, entries in doc.items():
        if not isinstance(entries, dict):
            raise ConfigError(f"{section}: expected an object")
        unknown = set(entries) - set(SCHEMA[section])
        if unknown:
            raise ConfigError(f"{section}: unknown keys {sorted(unknown)}")
        for key, value in entries.items():
            tag, _ = SCHEMA[section][key]
            merged[section][key] = _check_value(value, tag, f"{section}.{key}")
    return merged


def load_config(path=None) -> dict:
    """Load and validate a JSON config file (defaults when path is None)."""
    if path is None:
        return default_config()
    try:
        with open(Path(path)) as f:
            doc = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}") from e
    return validate_config(doc)


# Offsets applied to a master seed so each randomized stage gets its
# own stream while staying reproducible from one number.
MASTER_SEED_OFFSETS = [
    ("data", "seed", 0),
    ("network", "init_seed", 1),
    ("training", "shuffle_seed", 2),
    ("analysis", "seed", 3),
    ("data", "corrupt_seed", 4),
    ("data", "permute_seed", 5),
    ("data", "split_seed", 6),
]


def apply_master_seed(cfg: dict, master_seed: int) -> dict:
    cfg = copy.deepcopy(cfg)
    for section, key, offset in MASTER_SEED_OFFSETS:
        cfg[section][key] = (master_seed + offset) % 2**64
    return cfg


# ---------------------------------------------------------------------------
# Builders: config dicts -> typed objects
# ---------------------------------------------------------------------------


def build_synthetic_spec(data_cfg: dict) -> SyntheticSpec:
    try:
        return SyntheticSpec(
            groups=data_cfg["groups"],
            subclasses=data_cfg["subclasses"],
            base_dim=data_cfg["base_dim"],
            frames_per_class=data_cfg["frames_per_class"],
            group_separation=data_cfg["group_separation"],
            subclass_separation=data_cfg["subclass_separation"],
            noise_std=data_cfg["noise_std"],
            seed=data_cfg["seed"],
        )
    except ParameterError as e:
        raise ConfigError(f"data: {e}") from e


def build_hidden_specs(network_cfg: dict) -> list:
    specs = []
    try:
        for layer in network_cfg["hidden_layers"]:
            kind = layer["kind"]
            if kind == "dense":
                specs.append(Dense(layer["units"]))
            elif kind == "conv":
                specs.append(
                    Conv(
                        layer["maps"],
                        layer["filter_t"],
                        layer["filter_f"],
                        layer["pool_t"],
                        layer["pool_f"],
                    )
                )
            else:
                specs.append(
                    Untied(
                        layer["maps"],
                        layer["filter_t"],
                        layer["filter_f"],
                        layer["pool_t"],
                        layer["pool_f"],
                    )
                )
    except ParameterError as e:
        raise ConfigError(f"network.hidden_layers: {e}") from e
    return specs


def build_optimizer_config(opt_cfg: dict) -> OptimizerConfig:
    m = opt_cfg["momentum"]
    momentum = (
        ConstantMomentum(float(m["mu"]))
        if m["mode"] == "constant"
        else RampMomentum(float(m["mu_max"]))
    )
    a = opt_cfg["anneal"]
    annealing = (
        PerEpochHalving()
        if a["policy"] == "per_epoch_halving"
        else EveryNIterations(int(a["n"]), float(a["factor"]))
    )
    try:
        return OptimizerConfig(
            kind=opt_cfg["kind"],
            learning_rate=opt_cfg["learning_rate"],
            momentum=momentum,
            anneal=annealing,
        )
    except ParameterError as e:
        raise ConfigError(f"optimizer: {e}") from e


def build_train_config(train_cfg: dict) -> TrainConfig:
    if train_cfg["select"] not in ("final", "best"):
        raise ConfigError(
            f"training.select must be 'final' or 'best', got {train_cfg['select']!r}"
        )
    try:
        return TrainConfig(
            batch_size=train_cfg["batch_size"],
            max_epochs=train_cfg["max_epochs"],
            tolerance=float(train_cfg["tolerance"]),
            dropout_p=train_cfg["dropout"],
            realign_epoch=train_cfg["realign_epoch"],
            shuffle_seed=train_cfg["shuffle_seed"],
        )
    except ParameterError as e:
        raise ConfigError(f"training: {e}") from e
