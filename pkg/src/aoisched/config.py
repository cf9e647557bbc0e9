"""Experiment config files: flat key=value pairs grouped in INI sections.

Sections mirror the experiment fields ([sim], [arrival], [scheduler],
[sweep], [train]); unknown sections or keys are errors so typos fail
loudly instead of silently using defaults.
"""

from __future__ import annotations

import configparser
from pathlib import Path
from typing import Optional, Tuple

from .env import ConfigError
from .harness import ExperimentConfig
from .ppo import PpoHyperparams

_SECTION_KEYS = {
    "sim": {
        "num_ues",
        "bandwidth_units",
        "queue_capacity",
        "packets_per_unit",
        "aoi_weight",
        "seed",
    },
    "arrival": {"kind", "slot_duration_s", "rate_variance"},
    "scheduler": {"names", "checkpoint", "pf_mode"},
    "sweep": {
        "rates_hz",
        "rate_profile",
        "rate_jitter",
        "episodes_per_point",
        "eval_horizon",
        "output_path",
    },
    "train": {
        "rate_hz",
        "seed",
        "gamma",
        "gae_lambda",
        "clip_epsilon",
        "epochs",
        "minibatch_size",
        "rollout_length",
        "actor_lr",
        "critic_lr",
        "entropy_coef",
        "max_iterations",
        "hidden_width",
        "window_k",
        "convergence_tol",
        "convergence_patience",
    },
}


def _get(parser, section, key, convert, default=None, required=False):
    if parser.has_option(section, key):
        raw = parser.get(section, key)
        try:
            return convert(raw)
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key}: cannot parse {raw!r}") from exc
    if required:
        raise ConfigError(f"missing required key [{section}] {key}")
    return default


def _float_list(raw: str):
    return [float(part) for part in raw.replace(",", " ").split()]


def _name_list(raw: str):
    return [part.strip() for part in raw.replace(",", " ").split()]


def load_experiment(path) -> Tuple[ExperimentConfig, PpoHyperparams, Optional[float], int]:
    """Parse a config file.

    Returns (experiment, ppo hyperparameters, training mean rate or None,
    training seed). Raises ConfigError for unknown sections/keys, bad
    values, or a missing file.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc

    for section in parser.sections():
        if section not in _SECTION_KEYS:
            raise ConfigError(f"unknown config section [{section}]")
        for key in parser.options(section):
            if key not in _SECTION_KEYS[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")

    exp = ExperimentConfig(
        num_ues=_get(parser, "sim", "num_ues", int, required=True),
        bandwidth_units=_get(parser, "sim", "bandwidth_units", int, required=True),
        queue_capacity=_get(parser, "sim", "queue_capacity", int, 100),
        packets_per_unit=_get(parser, "sim", "packets_per_unit", int, 1),
        aoi_weight=_get(parser, "sim", "aoi_weight", float, 0.01),
        seed=_get(parser, "sim", "seed", int, 0),
        arrival_kind=_get(parser, "arrival", "kind", str, "poisson"),
        slot_duration_s=_get(parser, "arrival", "slot_duration_s", float, 1e-3),
        rate_variance=_get(parser, "arrival", "rate_variance", float, 0.0),
        scheduler_names=_get(parser, "scheduler", "names", _name_list, ["rr"]),
        checkpoint_path=_get(parser, "scheduler", "checkpoint", str, None),
        pf_mode=_get(parser, "scheduler", "pf_mode", str, "adaptive"),
        sweep_rates_hz=_get(parser, "sweep", "rates_hz", _float_list, required=True),
        rate_profile=_get(parser, "sweep", "rate_profile", _float_list, None),
        rate_jitter=_get(parser, "sweep", "rate_jitter", float, 0.0),
        episodes_per_point=_get(parser, "sweep", "episodes_per_point", int, 1),
        eval_horizon=_get(parser, "sweep", "eval_horizon", int, 1000),
        output_path=_get(parser, "sweep", "output_path", str, None),
    )
    try:
        exp.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    hp = PpoHyperparams(
        gamma=_get(parser, "train", "gamma", float, 0.95),
        gae_lambda=_get(parser, "train", "gae_lambda", float, 0.95),
        clip_epsilon=_get(parser, "train", "clip_epsilon", float, 0.2),
        epochs=_get(parser, "train", "epochs", int, 10),
        minibatch_size=_get(parser, "train", "minibatch_size", int, 80),
        rollout_length=_get(parser, "train", "rollout_length", int, 2048),
        actor_lr=_get(parser, "train", "actor_lr", float, 3e-4),
        critic_lr=_get(parser, "train", "critic_lr", float, 1e-3),
        entropy_coef=_get(parser, "train", "entropy_coef", float, 0.01),
        max_iterations=_get(parser, "train", "max_iterations", int, 150),
        hidden_width=_get(parser, "train", "hidden_width", int, 64),
        window_k=_get(parser, "train", "window_k", int, 10),
        convergence_tol=_get(parser, "train", "convergence_tol", float, 1e-3),
        convergence_patience=_get(parser, "train", "convergence_patience", int, 20),
    )
    try:
        hp.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    train_rate = _get(parser, "train", "rate_hz", float, None)
    train_seed = _get(parser, "train", "seed", int, exp.seed)
    return exp, hp, train_rate, train_seed
