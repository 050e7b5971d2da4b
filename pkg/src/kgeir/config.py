"""``key=value`` run configuration with the framework's default settings."""

from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .harness.pipeline import ModelSettings
from .harness.session import SimulationConfig

_SECTION = "kgeir"


@dataclass(frozen=True)
class RunConfig:
    attention_embed_size: int = 200
    top_k: int = 5
    dropout: float = 0.2
    learning_rate: float = 0.002
    epochs: int = 100
    alpha1: float = 0.7
    alpha2: float = 0.15
    alpha3: float = 0.15
    steps: int = 20
    seed: int = 0
    cdm: str = "nacd"
    batch_size: int = 256
    mirt_dim: int = 10
    clip_k: int = 4
    history_window: int = 50
    gcn_layers: int = 2
    delta_a: float = 0.5
    use_embeddings: bool = True
    edge_values: bool = True
    update_steps: int = 1
    update_lr: float = 0.1
    holdout_fraction: float = 0.5
    ecov_variant: str = "saturating"
    need: str = "all"

    def model_settings(self, **overrides) -> ModelSettings:
        names = {f.name for f in fields(ModelSettings)}
        values = {k: v for k, v in asdict(self).items() if k in names}
        values.update(overrides)
        return ModelSettings(**values)

    def simulation(self, **overrides) -> SimulationConfig:
        values = dict(
            steps=self.steps,
            top_k=self.top_k,
            alphas=(self.alpha1, self.alpha2, self.alpha3),
            seed=self.seed,
            cdm=self.cdm,
            update_steps=self.update_steps,
            update_lr=self.update_lr,
            ecov_variant=self.ecov_variant,
        )
        values.update(overrides)
        return SimulationConfig(**values)

    def replace(self, **changes) -> "RunConfig":
        values = asdict(self)
        values.update({k: v for k, v in changes.items() if v is not None})
        return RunConfig(**values)


def _coerce(raw: str, kind: type, key: str):
    text = raw.strip()
    try:
        if kind is bool:
            lowered = text.lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        return kind(text)
    except ValueError:
        raise ValueError(f"config key {key!r}: cannot parse {raw!r} as {kind.__name__}") from None


def parse_config(text: str) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"))
    parser.optionxform = str
    parser.read_string(f"[{_SECTION}]\n{text}")
    types = {f.name: f.type for f in fields(RunConfig)}
    kinds = {"int": int, "float": float, "str": str, "bool": bool}
    values = {}
    for key, raw in parser.items(_SECTION):
        if key not in types:
            raise ValueError(f"unknown config key {key!r}")
        values[key] = _coerce(raw, kinds[types[key]], key)
    return RunConfig(**values)


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    return parse_config(Path(path).read_text(encoding="utf-8"))


def dump_config(cfg: RunConfig) -> str:
    return "".join(f"{k}={str(v).lower() if isinstance(v, bool) else v}\n" for k, v in asdict(cfg).items())
