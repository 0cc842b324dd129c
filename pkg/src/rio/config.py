"""Experiment configuration: one JSON file, one master seed.

Layout (all sections optional, all keys validated, unknown keys
rejected):

    {
      "experiment": "name",
      "seed": 0,
      "model":        { ModelConfig fields },
      "train":        { TrainConfig fields except seed/equivariance },
      "equivariance": { EquivarianceConfig fields },
      "ensemble":     { members, member_seeds, variance_reduction, predictor },
      "ttt":          { TttConfig fields except equivariance },
      "eval":         { policy, rte_interval_s, rte_style }
    }

The equivariance section is shared by training and test-time training.
Precedence is CLI flag > config file > built-in default; the master seed
feeds every named randomness stream.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

from .equivariance import EquivarianceConfig
from .errors import InvalidConfig
from .model import ModelConfig
from .training import TrainConfig
from .ttt import TttConfig


@dataclass(frozen=True)
class EnsembleConfig:
    members: int = 3
    member_seeds: tuple[int, ...] | None = None  # default: seed+1 .. seed+M
    variance_reduction: str = "sum"
    predictor: str = "mean"

    def __post_init__(self):
        if self.members < 2:
            raise InvalidConfig("ensemble needs at least 2 members")
        if self.member_seeds is not None:
            object.__setattr__(self, "member_seeds", tuple(int(s) for s in self.member_seeds))
            if len(self.member_seeds) != self.members:
                raise InvalidConfig(f"{self.members} members but {len(self.member_seeds)} seeds")

    def seeds(self, master_seed: int) -> tuple[int, ...]:
        if self.member_seeds is not None:
            return self.member_seeds
        return tuple(master_seed + 1 + i for i in range(self.members))


@dataclass(frozen=True)
class EvalConfig:
    policy: str = "aligned"
    rte_interval_s: float = 60.0
    rte_style: str = "relative"

    def __post_init__(self):
        if self.policy not in ("aligned", "umeyama"):
            raise InvalidConfig("eval policy must be 'aligned' or 'umeyama'")
        if self.rte_style not in ("relative", "aligned_window"):
            raise InvalidConfig("rte_style must be 'relative' or 'aligned_window'")


@dataclass(frozen=True)
class RunConfig:
    experiment: str = "default"
    seed: int = 0
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    equivariance: EquivarianceConfig = field(default_factory=EquivarianceConfig)
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    ttt: TttConfig = field(default_factory=TttConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)


def _build(cls, data: dict, path: str, **extra):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise InvalidConfig(f"unknown keys in '{path}': {sorted(unknown)}")
    tupled = {k: tuple(v) if isinstance(v, list) else v for k, v in data.items()}
    return cls(**tupled, **extra)


def run_config_from_dict(d: dict) -> RunConfig:
    sections = {"experiment", "seed", "model", "train", "equivariance", "ensemble", "ttt", "eval"}
    unknown = set(d) - sections
    if unknown:
        raise InvalidConfig(f"unknown top-level config keys: {sorted(unknown)}")
    seed = int(d.get("seed", 0))
    eq = _build(EquivarianceConfig, d.get("equivariance", {}), "equivariance")
    train_d = dict(d.get("train", {}))
    for reserved in ("equivariance", "seed"):
        if reserved in train_d:
            raise InvalidConfig(f"'{reserved}' is not set inside 'train'; it lives at the top level")
    ttt_d = dict(d.get("ttt", {}))
    if "equivariance" in ttt_d:
        raise InvalidConfig("'equivariance' is not set inside 'ttt'; it lives at the top level")
    return RunConfig(
        experiment=str(d.get("experiment", "default")),
        seed=seed,
        model=ModelConfig.from_dict(d.get("model", {})),
        train=_build(TrainConfig, train_d, "train", seed=seed, equivariance=eq),
        equivariance=eq,
        ensemble=_build(EnsembleConfig, d.get("ensemble", {}), "ensemble"),
        ttt=_build(TttConfig, ttt_d, "ttt", equivariance=eq),
        eval=_build(EvalConfig, d.get("eval", {}), "eval"),
    )


def _deep_merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def load_run_config(path: str | None, overrides: dict | None = None) -> RunConfig:
    """Assemble the effective config: defaults <- file <- CLI overrides.

    `overrides` uses dotted keys, e.g. {"train.epochs": 30, "seed": 7};
    None values are ignored.
    """
    data: dict = {}
    if path:
        with open(path) as f:
            data = json.load(f)
        if not isinstance(data, dict):
            raise InvalidConfig("config file must hold a JSON object")
    nested: dict = {}
    for dotted, value in (overrides or {}).items():
        if value is None:
            continue
        node = nested
        parts = dotted.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value
    return run_config_from_dict(_deep_merge(data, nested))
