"""Experiment configuration: defaults, JSON round-trip, validation."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .agent import AgentParams
from .environment import WorldConfig
from .errors import ConfigInvalid


@dataclass(frozen=True)
class DiscoveryParams:
    threshold: float = 0.05
    lag: int = 1
    samples: int = 5000


@dataclass(frozen=True)
class ExperimentConfig:
    world: WorldConfig = field(default_factory=WorldConfig)
    agent: AgentParams = field(default_factory=AgentParams)
    discovery: DiscoveryParams = field(default_factory=DiscoveryParams)
    seed: int = 0
    output_dir: str = "out"
    epochs: int = 5  # evaluation epochs for the run subcommand

    def validate(self) -> None:
        try:
            self.agent.validate()
        except ValueError as exc:
            raise ConfigInvalid(str(exc)) from exc
        if self.discovery.lag < 1:
            raise ConfigInvalid("discovery.lag must be >= 1")
        if self.epochs < 1 or self.agent.epoch_budget < 1:
            raise ConfigInvalid("epoch counts must be >= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigInvalid("seed must be an unsigned 64-bit integer")

    def to_json(self) -> dict:
        def plain(obj):
            d = dataclasses.asdict(obj)
            return {k: list(v) if isinstance(v, tuple) else v
                    for k, v in d.items()}

        return {
            "world": plain(self.world),
            "agent": plain(self.agent),
            "discovery": plain(self.discovery),
            "seed": self.seed,
            "output_dir": self.output_dir,
            "epochs": self.epochs,
        }

    @classmethod
    def from_json(cls, data: dict) -> "ExperimentConfig":
        def build(klass, section):
            names = {f.name: f for f in dataclasses.fields(klass)}
            unknown = set(section) - set(names)
            if unknown:
                raise ConfigInvalid(f"unknown {klass.__name__} keys: {sorted(unknown)}")
            kwargs = {}
            for key, value in section.items():
                if isinstance(value, list):
                    value = tuple(value)
                kwargs[key] = value
            try:
                return klass(**kwargs)
            except (TypeError, ValueError) as exc:
                raise ConfigInvalid(str(exc)) from exc

        known = {"world", "agent", "discovery", "seed", "output_dir", "epochs"}
        unknown = set(data) - known
        if unknown:
            raise ConfigInvalid(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(
            world=build(WorldConfig, data.get("world", {})),
            agent=build(AgentParams, data.get("agent", {})),
            discovery=build(DiscoveryParams, data.get("discovery", {})),
            seed=data.get("seed", 0),
            output_dir=data.get("output_dir", "out"),
            epochs=data.get("epochs", 5),
        )
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigInvalid(f"cannot read config {path}: {exc}") from exc
        return cls.from_json(data)
