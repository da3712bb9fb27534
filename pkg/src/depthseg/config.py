"""Application configuration: one TOML file with per-module sections.

Sections: [data] scene generation, [model] architecture variant,
[train] optimization, [loss] term weights, [eval] protocols,
[serve] HTTP service. Any key can be overridden from the environment as
DEPTHSEG_<SECTION>__<KEY>, e.g. DEPTHSEG_TRAIN__LR=3e-4. Validation
collects every violated field before failing.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields, replace

import tomli

from .data.types import SyntheticSceneConfig
from .errors import ConfigError
from .losses import LossWeights
from .models.encoder import EncoderConfig
from .models.segmenter import SegmenterConfig
from .training import TrainConfig

ENV_PREFIX = "DEPTHSEG_"
SECTIONS = ("data", "model", "train", "loss", "eval", "serve")


@dataclass
class ModelSection:
    preset: str = "toy"
    use_depth: bool = True
    alpha_init: float = 0.1
    # Optional architecture overrides on top of the preset.
    widths: tuple | None = None
    depths: tuple | None = None
    embed_dim: int | None = None
    attention_heads: int | None = None

    def encoder_config(self) -> EncoderConfig:
        enc = EncoderConfig.from_preset(self.preset)
        overrides = {}
        for key in ("widths", "depths", "embed_dim", "attention_heads"):
            value = getattr(self, key)
            if value is not None:
                overrides[key] = tuple(value) if isinstance(value, list) else value
        if overrides:
            enc = replace(enc, **overrides)
        enc.validate()
        return enc

    def segmenter_config(self) -> SegmenterConfig:
        return SegmenterConfig(
            encoder=self.encoder_config(),
            use_depth=self.use_depth,
            alpha_init=self.alpha_init,
        )


@dataclass
class EvalSection:
    clicks: tuple[int, ...] = (1, 3, 5)
    seed: int = 0


@dataclass
class ServeSection:
    host: str = "127.0.0.1"
    port: int = 8000


@dataclass
class AppConfig:
    data: SyntheticSceneConfig = field(default_factory=SyntheticSceneConfig)
    model: ModelSection = field(default_factory=ModelSection)
    train: TrainConfig = field(default_factory=TrainConfig)
    loss: LossWeights = field(default_factory=LossWeights)
    eval: EvalSection = field(default_factory=EvalSection)
    serve: ServeSection = field(default_factory=ServeSection)

    def validate(self) -> None:
        problems: list[str] = []
        try:
            self.data.validate()
        except ConfigError as exc:
            problems += [f"data: {v}" for v in exc.violations]
        try:
            self.model.encoder_config()
        except ConfigError as exc:
            problems += [f"model: {v}" for v in exc.violations]
        try:
            self.train.validate()
        except Exception as exc:
            problems.append(f"train: {exc}")
        try:
            self.loss.validate()
        except Exception as exc:
            problems.append(f"loss: {exc}")
        if not self.eval.clicks or any(c < 1 for c in self.eval.clicks) or \
                list(self.eval.clicks) != sorted(set(self.eval.clicks)):
            problems.append(f"eval: clicks must be strictly increasing, got {self.eval.clicks}")
        if not (0 < self.serve.port < 65536):
            problems.append(f"serve: port out of range: {self.serve.port}")
        if problems:
            raise ConfigError(problems)


def _coerce(value, target):
    """Best-effort coercion of a TOML/env value onto the default's type."""
    if isinstance(target, bool):
        if isinstance(value, bool):
            return value
        if isinstance(value, str):
            return value.lower() in ("1", "true", "yes", "on")
        return bool(value)
    if isinstance(target, int) and not isinstance(target, bool):
        return int(value)
    if isinstance(target, float):
        return float(value)
    if isinstance(target, tuple):
        return tuple(value)
    return value


def _apply_section(obj, section: str, data: dict, problems: list[str]):
    """Returns obj updated with the section's keys; frozen dataclasses
    are rebuilt via replace()."""
    valid = {f.name for f in fields(obj)}
    updates = {}
    for key, value in data.items():
        if key not in valid:
            problems.append(f"{section}.{key}: unknown key")
            continue
        current = getattr(obj, key)
        try:
            updates[key] = _coerce(value, current)
        except (TypeError, ValueError) as exc:
            problems.append(f"{section}.{key}: {exc}")
    if not updates:
        return obj
    if obj.__dataclass_params__.frozen:
        return replace(obj, **updates)
    for key, value in updates.items():
        setattr(obj, key, value)
    return obj


def _env_overrides(environ) -> dict[str, dict[str, object]]:
    out: dict[str, dict[str, object]] = {}
    for name, raw in environ.items():
        if not name.startswith(ENV_PREFIX) or "__" not in name:
            continue
        section, key = name[len(ENV_PREFIX):].split("__", 1)
        section, key = section.lower(), key.lower()
        if section not in SECTIONS:
            continue
        try:
            value = tomli.loads(f"v = {raw}")["v"]
        except tomli.TOMLDecodeError:
            value = raw
        out.setdefault(section, {})[key] = value
    return out


def load_config(path=None, environ=None) -> AppConfig:
    """Parse the TOML file (optional), apply env overrides, validate."""
    raw: dict = {}
    if path is not None:
        with open(path, "rb") as f:
            raw = tomli.load(f)

    problems: list[str] = []
    for section in raw:
        if section not in SECTIONS:
            problems.append(f"{section}: unknown section")

    config = AppConfig()
    # nested dataclasses inside sections
    loss_raw = dict(raw.get("loss", {}))
    train_raw = dict(raw.get("train", {}))
    sections = {
        "data": config.data,
        "model": config.model,
        "train": config.train,
        "loss": config.loss,
        "eval": config.eval,
        "serve": config.serve,
    }
    payloads = {
        "data": dict(raw.get("data", {})),
        "model": dict(raw.get("model", {})),
        "train": train_raw,
        "loss": loss_raw,
        "eval": dict(raw.get("eval", {})),
        "serve": dict(raw.get("serve", {})),
    }
    for section, extra in _env_overrides(environ if environ is not None else os.environ).items():
        payloads[section].update(extra)

    # TrainConfig embeds LossWeights; keep [loss] authoritative for weights.
    payloads["train"].pop("weights", None)
    for section, obj in sections.items():
        updated = _apply_section(obj, section, payloads[section], problems)
        setattr(config, section, updated)
    config.train.weights = config.loss

    if problems:
        raise ConfigError(problems)
    config.validate()
    return config
