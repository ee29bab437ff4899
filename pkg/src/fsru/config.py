"""Run configuration: JSON file plus ``key=value`` overrides."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

MIXERS = ("spectral", "self_attention", "spatial_mlp")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    d: int = 256
    m: int = 32
    n: int = 16
    vocab_size: int = 64
    patch_size: int = 4
    k: int = 2
    alpha: float = 0.2
    beta: float = 0.2
    tau: float = 0.1
    lr: float = 1e-3
    batch_size: int = 64
    epochs: int = 50
    seed: int = 0
    mixer: str = "spectral"
    use_usc: bool = True
    use_csc: bool = True
    use_dsf: bool = True
    use_cl: bool = True
    dsf_gamma: float = 0.5
    k_folds: int = 1
    test_fraction: float = 1 / 6
    full_conv: bool = False
    literal_contrastive: bool = False
    pool_norm: bool = True

    def validate(self) -> "RunConfig":
        if self.mixer not in MIXERS:
            raise ConfigError(f"mixer must be one of {MIXERS}, got {self.mixer!r}")
        for name in ("d", "m", "n", "vocab_size", "patch_size", "k", "batch_size", "k_folds"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.alpha < 0 or self.beta < 0 or self.tau <= 0 or self.lr <= 0:
            raise ConfigError("alpha, beta must be >= 0; tau, lr must be > 0")
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError("test_fraction must lie in (0, 1)")
        return self

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes).validate()

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data).validate()


def _coerce(field: dataclasses.Field, raw: str):
    kind = field.type if isinstance(field.type, str) else field.type.__name__
    if kind == "bool":
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{field.name}: expected a boolean, got {raw!r}")
    try:
        return {"int": int, "float": float, "str": str}[kind](raw)
    except ValueError as exc:
        raise ConfigError(f"{field.name}: cannot parse {raw!r} as {kind}") from exc


def apply_overrides(config: RunConfig, pairs) -> RunConfig:
    fields = {f.name: f for f in dataclasses.fields(RunConfig)}
    changes = {}
    for pair in pairs or ():
        if "=" not in pair:
            raise ConfigError(f"override {pair!r} is not key=value")
        key, raw = pair.split("=", 1)
        if key not in fields:
            raise ConfigError(f"unknown config key {key!r}")
        changes[key] = _coerce(fields[key], raw)
    return config.replace(**changes)


def load_config(path=None, overrides=None) -> RunConfig:
    config = RunConfig()
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                config = RunConfig.from_dict(json.load(fh))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return apply_overrides(config, overrides)
