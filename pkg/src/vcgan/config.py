"""Training configuration and the JSON run-config file.

A run-config file may be flat (``{"lr_generator": 1e-4, "sigma": 50}``) or
nested under ``weights``/``warp``/``net`` like :class:`TrainConfig` itself.
Unknown keys are rejected; omitted keys keep their defaults.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

from .losses import LossWeights
from .nets import NetConfig
from .warp import WarpConfig


class ConfigError(ValueError):
    def __init__(self, msg, keys=()):
        self.keys = list(keys)
        super().__init__(msg)


@dataclass(frozen=True)
class TrainConfig:
    lr_generator: float = 1e-4
    lr_discriminator: float = 1e-7
    adam_beta1_decay: float = 0.5
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    batch_size: int = 1
    epochs: int = 50
    seed: int = 0
    checkpoint_every: int = 10
    clip_norm: float = 10.0
    # parameters excluded from updates, as "<net>/<name>" (e.g. "gen_ab/out.gain")
    freeze: tuple[str, ...] = ()
    weights: LossWeights = field(default_factory=LossWeights)
    warp: WarpConfig = field(default_factory=WarpConfig)
    net: NetConfig = field(default_factory=NetConfig)

    def __post_init__(self):
        object.__setattr__(self, "freeze", tuple(self.freeze))
        if not (self.lr_generator > 0 and self.lr_discriminator > 0):
            raise ValueError("learning rates must be > 0")
        if self.batch_size < 1 or self.epochs < 1 or self.checkpoint_every < 1:
            raise ValueError("batch_size, epochs and checkpoint_every must be >= 1")
        if not (0 <= self.adam_beta1_decay < 1 and 0 <= self.adam_beta2 < 1):
            raise ValueError("Adam decay rates must lie in [0, 1)")
        if not self.clip_norm > 0:
            raise ValueError("clip_norm must be > 0")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["warp"]["distance_source"] = self.warp.distance_source.value
        d["net"]["conv_channels"] = list(self.net.conv_channels)
        d["freeze"] = list(self.freeze)
        return d

    @classmethod
    def from_dict(cls, doc: dict) -> "TrainConfig":
        return parse_config(doc)


_SUB = {"weights": LossWeights, "warp": WarpConfig, "net": NetConfig}


def _names(klass):
    return {f.name for f in dataclasses.fields(klass)}


def parse_config(doc: dict) -> TrainConfig:
    """Build a :class:`TrainConfig` from a flat or nested mapping."""
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    top = _names(TrainConfig) - set(_SUB)
    owner = {name: sub for sub, klass in _SUB.items() for name in _names(klass)}
    kwargs: dict = {}
    sub_kwargs: dict[str, dict] = {k: {} for k in _SUB}
    unknown = []
    for key, value in doc.items():
        if key in top:
            kwargs[key] = value
        elif key in _SUB:
            if not isinstance(value, dict):
                raise ConfigError(f"{key} must be an object", [key])
            allowed = _names(_SUB[key])
            bad = [f"{key}.{k}" for k in value if k not in allowed]
            unknown += bad
            sub_kwargs[key].update({k: v for k, v in value.items() if k in allowed})
        elif key in owner:
            sub_kwargs[owner[key]][key] = value
        else:
            unknown.append(key)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}", unknown)
    try:
        for sub, klass in _SUB.items():
            kwargs[sub] = klass(**sub_kwargs[sub])
        return TrainConfig(**kwargs)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid config: {e}", list(doc)) from None


def load_run_config(path) -> TrainConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: not valid JSON ({e})") from None
    return parse_config(doc)
